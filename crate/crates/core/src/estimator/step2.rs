//! Step 2: per-path angle-of-departure search by recursive bisection with
//! one bit of feedback per stage.

use nalgebra::DMatrix;
use rand::Rng;

use crate::adc::{apply_front_end, FrontEnd};
use crate::channel::{received_pilot_block, steering_bs};
use crate::error::{check_len, Result};
use crate::scalar::{lit, real, CMatrix, CVector, Real};

use super::codebook::Codebook;

/// Receive combiner `a_BS(θ) / √N_r` for a path estimated at `theta`.
pub fn path_combiner<T: Real>(theta: T, n_bs: usize, spacing_wavelengths: T) -> CVector<T> {
    steering_bs(theta, n_bs, spacing_wavelengths) * real(T::one() / lit::<T>(n_bs as f64).sqrt())
}

/// `|(1/T₂) cᴴ Y 1|²`: energy of the time-averaged combined block.
pub fn path_energy<T: Real>(y: &CMatrix<T>, combiner: &CVector<T>) -> Result<T> {
    check_len("path energy rows", combiner.len(), y.nrows())?;
    check_len("path energy snapshots (at least 1)", 1, y.ncols().min(1))?;
    let mean = y.column_mean();
    Ok(combiner.dotc(&mean).norm_sqr())
}

/// Anything that can carry one pilot burst with a given user precoder and
/// return the base station's digitized observation.
pub trait UplinkOracle<T: Real> {
    fn transmit(&mut self, precoder: &CVector<T>) -> Result<CMatrix<T>>;
}

impl<T: Real, O: UplinkOracle<T> + ?Sized> UplinkOracle<T> for &mut O {
    fn transmit(&mut self, precoder: &CVector<T>) -> Result<CMatrix<T>> {
        (**self).transmit(precoder)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisectionOutcome {
    /// Selected grid index.
    pub index: usize,
    /// Feedback bit per stage: `true` selects the upper child.
    pub feedback: Vec<bool>,
    pub oracle_calls: usize,
}

/// Walks the codebook from the two half-space sectors down to single grid
/// points, keeping the child with more energy at each stage. Equal energies
/// keep the lower child.
pub fn bisect_aod<T: Real, O: UplinkOracle<T> + ?Sized>(
    oracle: &mut O,
    combiner: &CVector<T>,
    codebook: &Codebook<T>,
) -> Result<BisectionOutcome> {
    let mut sector = 0usize;
    let mut feedback = Vec::with_capacity(codebook.n_stages());
    let mut calls = 0;
    for s in 1..=codebook.n_stages() {
        let lower = 2 * sector;
        let e0 = path_energy(&oracle.transmit(&codebook.precoder(s, lower))?, combiner)?;
        let e1 = path_energy(
            &oracle.transmit(&codebook.precoder(s, lower + 1))?,
            combiner,
        )?;
        calls += 2;
        let up = e1 > e0;
        feedback.push(up);
        sector = lower + usize::from(up);
    }
    Ok(BisectionOutcome {
        index: sector,
        feedback,
        oracle_calls: calls,
    })
}

/// Simulated uplink: `T₂` repetitions of the precoded pilot through `H`,
/// fresh receiver noise on every call, then the configured front-end.
pub struct SimulatedUplink<'a, T: Real, R: Rng + ?Sized> {
    h: &'a CMatrix<T>,
    snr: T,
    t2: usize,
    front_end: FrontEnd<T>,
    noise: bool,
    rng: &'a mut R,
    channel_uses: usize,
}

impl<'a, T: Real, R: Rng + ?Sized> SimulatedUplink<'a, T, R> {
    pub fn new(
        h: &'a CMatrix<T>,
        snr: T,
        t2: usize,
        front_end: FrontEnd<T>,
        rng: &'a mut R,
    ) -> Self {
        Self {
            h,
            snr,
            t2,
            front_end,
            noise: true,
            rng,
            channel_uses: 0,
        }
    }

    /// Disables receiver noise (quantization still applies).
    pub fn noiseless(mut self) -> Self {
        self.noise = false;
        self
    }

    pub fn set_front_end(&mut self, front_end: FrontEnd<T>) {
        self.front_end = front_end;
    }

    /// Pilot symbols sent so far.
    pub fn channel_uses(&self) -> usize {
        self.channel_uses
    }
}

impl<T: Real, R: Rng + ?Sized> UplinkOracle<T> for SimulatedUplink<'_, T, R> {
    fn transmit(&mut self, precoder: &CVector<T>) -> Result<CMatrix<T>> {
        let s = DMatrix::from_fn(precoder.len(), self.t2, |i, _| precoder[i]);
        let x = if self.noise {
            received_pilot_block(self.h, &s, self.snr, Some(&mut *self.rng))?
        } else {
            received_pilot_block::<T, R>(self.h, &s, self.snr, None)?
        };
        self.channel_uses += self.t2;
        apply_front_end(&x, &self.front_end)
    }
}

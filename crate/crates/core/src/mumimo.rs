//! Multi-user uplink with single-antenna users: orthogonal pilots,
//! despreading, and per-user Step-1 estimation.

use nalgebra::DMatrix;
use rand::Rng;

use crate::adc::{apply_front_end, FrontEnd};
use crate::channel::{
    assemble_simo_channel, manifold_bs, mu_channel_matrix, received_pilot_block, ArrayGeometry,
    MuChannelParams,
};
use crate::error::{check_len, Error, Result};
use crate::estimator::{run_step1, AoaGrid, FrontEndKind, Step1Result, VoltagePolicy};
use crate::noisemodel::{front_end_noise_cov, prewhitener};
use crate::scalar::{cis, lit, real, CMatrix, CVector, Real};

/// Normalized `K × K` DFT matrix, `S[k, t] = e^{-j2πkt/K} / √K`.
pub fn orthogonal_pilots<T: Real>(k: usize) -> CMatrix<T> {
    let scale = real(T::one() / lit::<T>(k as f64).sqrt());
    let kk = lit::<T>(k as f64);
    DMatrix::from_fn(k, k, |r, c| {
        let idx = lit::<T>(((r * c) % k) as f64);
        cis(-T::two_pi() * idx / kk) * scale
    })
}

/// `Y Sᴴ`: column `k` collects user `k`'s contribution.
pub fn despread<T: Real>(y: &CMatrix<T>, s: &CMatrix<T>) -> Result<CMatrix<T>> {
    check_len("despread pilot columns", s.ncols(), y.ncols())?;
    Ok(y * s.adjoint())
}

#[derive(Debug, Clone)]
pub struct MuScenario<T: Real> {
    /// Base-station array; the user-side fields are ignored.
    pub geometry: ArrayGeometry<T>,
    pub snr: T,
    /// Pilot blocks `T`, each `K` symbols long.
    pub t: usize,
    pub paths_per_user: Vec<usize>,
    pub front_end: FrontEndKind,
    pub voltage: VoltagePolicy<T>,
    pub aoa_grid: AoaGrid<T>,
    pub noiseless: bool,
}

impl<T: Real> MuScenario<T> {
    pub fn new(
        geometry: ArrayGeometry<T>,
        snr: T,
        paths_per_user: Vec<usize>,
        front_end: FrontEndKind,
    ) -> Self {
        Self {
            geometry,
            snr,
            t: 1,
            paths_per_user,
            front_end,
            voltage: VoltagePolicy::Proposed,
            aoa_grid: AoaGrid::default(),
            noiseless: false,
        }
    }

    pub fn n_users(&self) -> usize {
        self.paths_per_user.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths_per_user.is_empty() {
            return Err(Error::invalid("n_users", "at least one user required"));
        }
        if self.t == 0 {
            return Err(Error::invalid("t", "must be at least 1"));
        }
        if !(self.snr >= T::zero()) {
            return Err(Error::invalid("snr", "must be nonnegative"));
        }
        for &l in &self.paths_per_user {
            if l == 0 || l > self.aoa_grid.len() || l > self.t * self.geometry.n_bs {
                return Err(Error::invalid(
                    "paths_per_user",
                    format!("unsupported path count {l}"),
                ));
            }
        }
        if let VoltagePolicy::Fixed { clip_level } = self.voltage {
            if !(clip_level > T::zero()) {
                return Err(Error::invalid("clip_level", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MuEstimate<T: Real> {
    pub users: Vec<Step1Result<T>>,
    /// Estimated `N_r × K` channel, column `k` from user `k`'s paths.
    pub h: CMatrix<T>,
}

impl<T: Real> MuEstimate<T> {
    pub fn user_channel(&self, k: usize) -> CVector<T> {
        self.h.column(k).into_owned()
    }
}

/// Precomputed per-scenario state: pilots, grid manifold, front-end and
/// whitener. The unitary pilots leave the noise covariance unchanged after
/// despreading, so one whitener serves every user.
#[derive(Debug, Clone)]
pub struct MuEstimator<T: Real> {
    scenario: MuScenario<T>,
    pilots: CMatrix<T>,
    manifold: CMatrix<T>,
    front_end: FrontEnd<T>,
    whitener: CMatrix<T>,
}

impl<T: Real> MuEstimator<T> {
    pub fn new(scenario: MuScenario<T>) -> Result<Self> {
        scenario.validate()?;
        let g = scenario.geometry;
        let pilots = orthogonal_pilots(scenario.n_users());
        let manifold = manifold_bs(scenario.aoa_grid.angles(), g.n_bs, g.d_bs);
        let clip = scenario.voltage.step1(scenario.snr);
        let front_end = scenario.front_end.build(g.n_bs, g.d_bs, clip, T::zero())?;
        let whitener = match scenario.front_end {
            FrontEndKind::Unquantized => DMatrix::identity(g.n_bs, g.n_bs),
            _ => prewhitener(&front_end_noise_cov(&front_end, g.n_bs)?)?,
        };
        Ok(Self {
            scenario,
            pilots,
            manifold,
            front_end,
            whitener,
        })
    }

    pub fn scenario(&self) -> &MuScenario<T> {
        &self.scenario
    }

    pub fn estimate<R: Rng + ?Sized>(
        &self,
        params: &MuChannelParams<T>,
        rng: &mut R,
    ) -> Result<MuEstimate<T>> {
        let sc = &self.scenario;
        let g = sc.geometry;
        let k = sc.n_users();
        check_len("users in channel", k, params.n_users())?;
        let h = mu_channel_matrix(params, &g);
        let mut blocks = vec![DMatrix::zeros(g.n_bs, sc.t); k];
        for t in 0..sc.t {
            let x = if sc.noiseless {
                received_pilot_block::<T, R>(&h, &self.pilots, sc.snr, None)?
            } else {
                received_pilot_block(&h, &self.pilots, sc.snr, Some(&mut *rng))?
            };
            let y = apply_front_end(&x, &self.front_end)?;
            let separated = despread(&y, &self.pilots)?;
            for (user, block) in blocks.iter_mut().enumerate() {
                block.set_column(t, &separated.column(user));
            }
        }
        let mut users = Vec::with_capacity(k);
        let mut h_hat = DMatrix::zeros(g.n_bs, k);
        for (user, block) in blocks.iter().enumerate() {
            let r = run_step1(
                block,
                &sc.aoa_grid,
                &self.manifold,
                &self.whitener,
                sc.snr,
                sc.paths_per_user[user],
            )?;
            h_hat.set_column(
                user,
                &assemble_simo_channel(&r.aoas, r.gains.as_slice(), &g),
            );
            users.push(r);
        }
        Ok(MuEstimate { users, h: h_hat })
    }
}

pub fn estimate_mu_channels<T: Real, R: Rng + ?Sized>(
    scenario: &MuScenario<T>,
    params: &MuChannelParams<T>,
    rng: &mut R,
) -> Result<MuEstimate<T>> {
    MuEstimator::new(scenario.clone())?.estimate(params, rng)
}

//! Two-step channel estimation for a multi-antenna user.
//!
//! Step 1 turns on a single user antenna, scans the Bartlett spectrum for the
//! arrival angles and fits the path gains. Step 2 finds each path's departure
//! angle by recursive bisection over a hierarchical codebook, with the
//! sigma-delta front-end steered towards the path's estimated arrival angle.

pub mod codebook;
pub mod grid;
pub mod step1;
pub mod step2;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adc::{apply_front_end, AdcConfig, FrontEnd};
use crate::channel::{
    assemble_su_channel, manifold_bs, received_pilot_block, su_channel_matrix, ArrayGeometry,
    SuChannelParams,
};
use crate::error::{Error, Result};
use crate::noisemodel::{front_end_noise_cov, prewhitener};
use crate::scalar::{lit, CMatrix, CVector, Real};

pub use codebook::Codebook;
pub use grid::{AoaGrid, AodGrid};
pub use step1::{
    bartlett_spectrum, find_peaks, gain_wls, gain_wls_khatri_rao, run_step1, step1_precoder,
    Step1Result,
};
pub use step2::{
    bisect_aod, path_combiner, path_energy, BisectionOutcome, SimulatedUplink, UplinkOracle,
};

/// Clipping level for omnidirectional pilots: three standard deviations of
/// the per-component input, `3√((P+1)/2)`.
pub fn clip_level_step1<T: Real>(snr: T) -> T {
    lit::<T>(3.0) * ((snr + T::one()) / lit(2.0)).sqrt()
}

/// Clipping level for beamformed pilots, where the array gain can add up to
/// `N_t` coherently: `3√((P N_t + 1)/2)`.
pub fn clip_level_step2<T: Real>(snr: T, n_t: usize) -> T {
    lit::<T>(3.0) * ((snr * lit(n_t as f64) + T::one()) / lit(2.0)).sqrt()
}

/// Memoryless one-bit output level matched to an input whose per-component
/// standard deviation is `clip / 3`: `b = √(π/2)·σ`, which makes the
/// linear (Bussgang) gain of the quantizer equal to one.
pub fn one_bit_level<T: Real>(clip: T) -> T {
    (T::pi() / lit(2.0)).sqrt() * clip / lit(3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontEndKind {
    Unquantized,
    #[serde(alias = "one_bit")]
    Onebit,
    #[serde(alias = "sigma_delta")]
    Sigmadelta,
}

impl FrontEndKind {
    pub fn name(self) -> &'static str {
        match self {
            FrontEndKind::Unquantized => "unquantized",
            FrontEndKind::Onebit => "onebit",
            FrontEndKind::Sigmadelta => "sigmadelta",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "unquantized" => Ok(FrontEndKind::Unquantized),
            "onebit" => Ok(FrontEndKind::Onebit),
            "sigmadelta" => Ok(FrontEndKind::Sigmadelta),
            other => Err(Error::invalid(
                "front_end",
                format!("unknown front-end `{other}` (expected unquantized, onebit or sigmadelta)"),
            )),
        }
    }

    /// Front-end for an `n_bs`-element array with clipping level `clip` and
    /// steering angle `psi` (sigma-delta only).
    pub fn build<T: Real>(
        self,
        n_bs: usize,
        spacing_wavelengths: T,
        clip: T,
        psi: T,
    ) -> Result<FrontEnd<T>> {
        match self {
            FrontEndKind::Unquantized => Ok(FrontEnd::Unquantized),
            FrontEndKind::Onebit => FrontEnd::one_bit(one_bit_level(clip)),
            FrontEndKind::Sigmadelta => Ok(FrontEnd::SigmaDelta(AdcConfig::from_clip_level(
                n_bs,
                spacing_wavelengths,
                clip,
                psi,
            )?)),
        }
    }
}

/// How the converter voltages are chosen for each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VoltagePolicy<T> {
    /// [`clip_level_step1`] in Step 1 and [`clip_level_step2`] in Step 2.
    Proposed,
    /// The same clipping level in both steps.
    Fixed { clip_level: T },
}

impl<T: Real> VoltagePolicy<T> {
    pub fn step1(&self, snr: T) -> T {
        match *self {
            VoltagePolicy::Proposed => clip_level_step1(snr),
            VoltagePolicy::Fixed { clip_level } => clip_level,
        }
    }

    pub fn step2(&self, snr: T, n_t: usize) -> T {
        match *self {
            VoltagePolicy::Proposed => clip_level_step2(snr, n_t),
            VoltagePolicy::Fixed { clip_level } => clip_level,
        }
    }
}

/// Everything fixed about a point-to-point estimation run.
#[derive(Debug, Clone)]
pub struct SuScenario<T: Real> {
    pub geometry: ArrayGeometry<T>,
    /// Uplink SNR `P` (linear).
    pub snr: T,
    pub t1: usize,
    pub t2: usize,
    pub n_paths: usize,
    pub front_end: FrontEndKind,
    pub voltage: VoltagePolicy<T>,
    /// Steering angle used during Step 1.
    pub step1_steering: T,
    /// Steer Step 2 towards each estimated arrival angle; broadside otherwise.
    pub steer_step2: bool,
    pub aoa_grid: AoaGrid<T>,
    pub aod_grid_size: usize,
    /// Drop receiver noise (quantization still applies).
    pub noiseless: bool,
}

impl<T: Real> SuScenario<T> {
    pub fn new(
        geometry: ArrayGeometry<T>,
        snr: T,
        n_paths: usize,
        front_end: FrontEndKind,
    ) -> Self {
        Self {
            geometry,
            snr,
            t1: 10,
            t2: 1,
            n_paths,
            front_end,
            voltage: VoltagePolicy::Proposed,
            step1_steering: T::zero(),
            steer_step2: true,
            aoa_grid: AoaGrid::default(),
            aod_grid_size: 128,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr >= T::zero()) {
            return Err(Error::invalid("snr", "must be nonnegative"));
        }
        if self.t1 == 0 {
            return Err(Error::invalid("t1", "must be at least 1"));
        }
        if self.t2 == 0 {
            return Err(Error::invalid("t2", "must be at least 1"));
        }
        if self.n_paths == 0 || self.n_paths > self.aoa_grid.len() {
            return Err(Error::invalid(
                "n_paths",
                "must be between 1 and the AoA grid size",
            ));
        }
        if self.t1 * self.geometry.n_bs < self.n_paths {
            return Err(Error::invalid(
                "t1",
                "too few observations for the path count",
            ));
        }
        if let VoltagePolicy::Fixed { clip_level } = self.voltage {
            if !(clip_level > T::zero()) {
                return Err(Error::invalid("clip_level", "must be positive"));
            }
        }
        AodGrid::<T>::new(self.aod_grid_size)?;
        Ok(())
    }

    /// Pilot symbols spent by one estimate: `T₁ + 2·L·T₂·log₂D`.
    pub fn channel_uses(&self) -> usize {
        self.t1 + 2 * self.n_paths * self.t2 * self.aod_grid_size.trailing_zeros() as usize
    }
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate<T: Real> {
    pub aoa_indices: Vec<usize>,
    pub aoas: Vec<T>,
    pub aod_indices: Vec<usize>,
    pub aods: Vec<T>,
    pub gains: CVector<T>,
    /// `(1/√L) A_BS(θ̂) diag(α̂) A_UEᴴ(φ̂)`.
    pub h: CMatrix<T>,
    /// Pilot symbols actually transmitted.
    pub channel_uses: usize,
    pub rank_deficient: bool,
}

/// Precomputed state for repeated estimates in one scenario: grids, steering
/// manifold, Step-1 front-end and whitener, and the codebook.
#[derive(Debug, Clone)]
pub struct SuEstimator<T: Real> {
    scenario: SuScenario<T>,
    manifold: CMatrix<T>,
    step1_front_end: FrontEnd<T>,
    whitener: CMatrix<T>,
    aod_grid: AodGrid<T>,
    codebook: Codebook<T>,
}

impl<T: Real> SuEstimator<T> {
    pub fn new(scenario: SuScenario<T>) -> Result<Self> {
        scenario.validate()?;
        let g = scenario.geometry;
        let manifold = manifold_bs(scenario.aoa_grid.angles(), g.n_bs, g.d_bs);
        let c1 = scenario.voltage.step1(scenario.snr);
        let step1_front_end =
            scenario
                .front_end
                .build(g.n_bs, g.d_bs, c1, scenario.step1_steering)?;
        let whitener = match scenario.front_end {
            FrontEndKind::Unquantized => DMatrix::identity(g.n_bs, g.n_bs),
            _ => prewhitener(&front_end_noise_cov(&step1_front_end, g.n_bs)?)?,
        };
        let aod_grid = AodGrid::new(scenario.aod_grid_size)?;
        let codebook = Codebook::design(g.n_ue, &aod_grid)?;
        Ok(Self {
            scenario,
            manifold,
            step1_front_end,
            whitener,
            aod_grid,
            codebook,
        })
    }

    pub fn scenario(&self) -> &SuScenario<T> {
        &self.scenario
    }

    pub fn aod_grid(&self) -> &AodGrid<T> {
        &self.aod_grid
    }

    pub fn codebook(&self) -> &Codebook<T> {
        &self.codebook
    }

    /// Step 1 only: pilots from the first user antenna, front-end, AoA scan
    /// and gain fit. Consumes receiver noise from `rng`.
    pub fn step1<R: Rng + ?Sized>(&self, h: &CMatrix<T>, rng: &mut R) -> Result<Step1Result<T>> {
        let sc = &self.scenario;
        let p1 = step1_precoder::<T>(sc.geometry.n_ue);
        let s1 = DMatrix::from_fn(sc.geometry.n_ue, sc.t1, |i, _| p1[i]);
        let x1 = if sc.noiseless {
            received_pilot_block::<T, R>(h, &s1, sc.snr, None)?
        } else {
            received_pilot_block(h, &s1, sc.snr, Some(rng))?
        };
        let y1 = apply_front_end(&x1, &self.step1_front_end)?;
        run_step1(
            &y1,
            &sc.aoa_grid,
            &self.manifold,
            &self.whitener,
            sc.snr,
            sc.n_paths,
        )
    }

    /// Full two-step estimate of the channel described by `params`.
    pub fn estimate<R: Rng + ?Sized>(
        &self,
        params: &SuChannelParams<T>,
        rng: &mut R,
    ) -> Result<ChannelEstimate<T>> {
        let sc = &self.scenario;
        let g = sc.geometry;
        let h = su_channel_matrix(params, &g);
        let s1 = self.step1(&h, rng)?;

        let c2 = sc.voltage.step2(sc.snr, g.n_ue);
        let mut uplink = SimulatedUplink::new(&h, sc.snr, sc.t2, FrontEnd::Unquantized, rng);
        if sc.noiseless {
            uplink = uplink.noiseless();
        }
        let mut aod_indices = Vec::with_capacity(sc.n_paths);
        for &theta in &s1.aoas {
            let psi = if sc.steer_step2 { theta } else { T::zero() };
            uplink.set_front_end(sc.front_end.build(g.n_bs, g.d_bs, c2, psi)?);
            let comb = path_combiner(theta, g.n_bs, g.d_bs);
            aod_indices.push(bisect_aod(&mut uplink, &comb, &self.codebook)?.index);
        }
        let channel_uses = sc.t1 + uplink.channel_uses();
        let aods: Vec<T> = aod_indices
            .iter()
            .map(|&i| self.aod_grid.angles()[i])
            .collect();
        let h_hat = assemble_su_channel(&s1.aoas, &aods, s1.gains.as_slice(), &g);
        Ok(ChannelEstimate {
            aoa_indices: s1.aoa_indices,
            aoas: s1.aoas,
            aod_indices,
            aods,
            gains: s1.gains,
            h: h_hat,
            channel_uses,
            rank_deficient: s1.rank_deficient,
        })
    }
}

/// One-shot convenience wrapper around [`SuEstimator`].
pub fn estimate_su_channel<T: Real, R: Rng + ?Sized>(
    scenario: &SuScenario<T>,
    params: &SuChannelParams<T>,
    rng: &mut R,
) -> Result<ChannelEstimate<T>> {
    SuEstimator::new(scenario.clone())?.estimate(params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_su_channel, ChannelSamplerSpec, GainModel};
    use crate::scalar::Cplx;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clip_level_examples() {
        assert!((clip_level_step1(1.0f64) - 3.0).abs() < 1e-15);
        assert!((clip_level_step1(0.0f64) - 3.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((clip_level_step2(1.0f64, 32) - 12.186).abs() < 1e-3);
        assert!((clip_level_step2(1.0f64, 32) - 3.0 * 16.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn front_end_kind_parsing() {
        assert_eq!(
            FrontEndKind::parse("sigma-delta").unwrap(),
            FrontEndKind::Sigmadelta
        );
        assert_eq!(FrontEndKind::parse("OneBit").unwrap(), FrontEndKind::Onebit);
        assert_eq!(
            FrontEndKind::parse("unquantized").unwrap(),
            FrontEndKind::Unquantized
        );
        assert!(FrontEndKind::parse("2bit").is_err());
    }

    #[test]
    fn built_levels_follow_overload_condition() {
        let fe = FrontEndKind::Sigmadelta
            .build(64, 0.125f64, 3.0, 0.0)
            .unwrap();
        match fe {
            FrontEnd::SigmaDelta(cfg) => assert!((cfg.quant_level() - 3.0).abs() < 1e-12),
            _ => unreachable!(),
        }
        let fe = FrontEndKind::Sigmadelta
            .build(64, 0.125f64, 3.0, 0.5)
            .unwrap();
        if let FrontEnd::SigmaDelta(cfg) = fe {
            let ph = cfg.phase();
            assert!(
                (cfg.quant_level() * (2.0 - ph.cos().abs() - ph.sin().abs()) - 3.0).abs() < 1e-12
            );
        }
        assert_eq!(
            FrontEndKind::Onebit.build(8, 0.125f64, 3.0, 0.0).unwrap(),
            FrontEnd::OneBit {
                quant_level: (std::f64::consts::PI / 2.0).sqrt()
            }
        );
    }

    fn scenario(l: usize, kind: FrontEndKind) -> SuScenario<f64> {
        SuScenario::new(ArrayGeometry::default(), 1.0, l, kind)
    }

    fn on_grid_spec() -> ChannelSamplerSpec<f64> {
        ChannelSamplerSpec {
            aoa_sector: (-60f64.to_radians(), 60f64.to_radians()),
            on_grid_aoa: true,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_unquantized_recovers_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in 1..=3 {
            let mut sc = scenario(l, FrontEndKind::Unquantized);
            sc.noiseless = true;
            let est = SuEstimator::new(sc).unwrap();
            for _ in 0..5 {
                let p = sample_su_channel(&on_grid_spec(), l, &mut rng).unwrap();
                let e = est.estimate(&p, &mut rng).unwrap();
                let h = su_channel_matrix(&p, &ArrayGeometry::default());
                let nmse = (&e.h - &h).norm_squared() / h.norm_squared();
                assert!(nmse < 1e-6, "L={l} nmse={nmse}");
                assert_eq!(e.channel_uses, 10 + 2 * l * 7);
            }
        }
    }

    #[test]
    fn step1_ignores_departure_angles() {
        let est = SuEstimator::new(scenario(2, FrontEndKind::Sigmadelta)).unwrap();
        let g = ArrayGeometry::default();
        let a = SuChannelParams::new(
            vec![-0.2, 0.3],
            vec![0.1, -0.5],
            vec![Cplx::new(1.0, 0.0), Cplx::new(0.0, 1.0)],
        )
        .unwrap();
        let b = SuChannelParams {
            aods: vec![0.9, 0.4],
            ..a.clone()
        };
        let r1 = est
            .step1(
                &su_channel_matrix(&a, &g),
                &mut ChaCha8Rng::seed_from_u64(5),
            )
            .unwrap();
        let r2 = est
            .step1(
                &su_channel_matrix(&b, &g),
                &mut ChaCha8Rng::seed_from_u64(5),
            )
            .unwrap();
        assert_eq!(r1.aoa_indices, r2.aoa_indices);
        assert_eq!(r1.spectrum, r2.spectrum);
        assert!((r1.gains - r2.gains).camax() < 1e-12);
    }

    #[test]
    fn same_seed_same_estimate() {
        let sc = scenario(2, FrontEndKind::Sigmadelta);
        let spec = ChannelSamplerSpec {
            gain_model: GainModel::ComplexGaussian,
            ..on_grid_spec()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let p = sample_su_channel(&spec, 2, &mut rng).unwrap();
            estimate_su_channel(&sc, &p, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.aod_indices, b.aod_indices);
        assert_eq!(a.h, b.h);
    }

    #[test]
    fn overhead_counter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (l, t1, t2, d) in [(1, 10, 1, 128), (3, 4, 2, 64), (2, 1, 3, 32)] {
            let mut sc = scenario(l, FrontEndKind::Sigmadelta);
            sc.t1 = t1;
            sc.t2 = t2;
            sc.aod_grid_size = d;
            sc.geometry.n_ue = 16;
            let est = SuEstimator::new(sc.clone()).unwrap();
            let p = sample_su_channel(
                &ChannelSamplerSpec {
                    aod_grid_size: d,
                    ..on_grid_spec()
                },
                l,
                &mut rng,
            )
            .unwrap();
            let e = est.estimate(&p, &mut rng).unwrap();
            assert_eq!(
                e.channel_uses,
                t1 + 2 * l * t2 * d.trailing_zeros() as usize
            );
            assert_eq!(e.channel_uses, sc.channel_uses());
        }
    }

    #[test]
    fn scenario_validation() {
        let mut sc = scenario(1, FrontEndKind::Sigmadelta);
        sc.aod_grid_size = 100;
        assert!(SuEstimator::new(sc).is_err());
        let mut sc = scenario(0, FrontEndKind::Sigmadelta);
        assert!(sc.validate().is_err());
        sc.n_paths = 1;
        sc.t2 = 0;
        assert!(sc.validate().is_err());
        let mut sc = scenario(1, FrontEndKind::Sigmadelta);
        sc.voltage = VoltagePolicy::Fixed { clip_level: -1.0 };
        assert!(sc.validate().is_err());
    }
}

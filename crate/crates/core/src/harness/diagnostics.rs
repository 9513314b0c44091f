//! Converter and codebook diagnostics: noise spectra, input-noise
//! correlation, beampatterns seen at the base station, codebook dumps.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc::{apply_front_end, AdcConfig, FrontEnd};
use crate::channel::{
    assemble_su_channel, complex_gaussian, gaussian_noise, steering_bs, steering_ue, ArrayGeometry,
    GainModel,
};
use crate::error::{Error, Result};
use crate::estimator::{
    clip_level_step1, path_combiner, path_energy, AoaGrid, AodGrid, Codebook, FrontEndKind,
    SimulatedUplink, UplinkOracle, VoltagePolicy,
};
use crate::noisemodel::{angular_noise_spectrum, input_noise_correlation};
use crate::scalar::{CMatrix, Cplx};

use super::config::snr_linear;

/// Converter input used by the noise diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputModel {
    /// Independent `CN(0, P + 1)` entries.
    WhiteGaussian,
    /// One unit-modulus path per snapshot from a uniformly drawn angle in
    /// `sector_deg`, plus unit receiver noise.
    SinglePath { sector_deg: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDiagSpec {
    pub n_bs: usize,
    pub d_bs: f64,
    pub snr_db: f64,
    pub steering_deg: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub input: InputModel,
}

impl Default for NoiseDiagSpec {
    fn default() -> Self {
        Self {
            n_bs: 128,
            d_bs: 0.125,
            snr_db: 0.0,
            steering_deg: 0.0,
            snapshots: 10_000,
            seed: 1,
            input: InputModel::SinglePath {
                sector_deg: [-30.0, 30.0],
            },
        }
    }
}

impl NoiseDiagSpec {
    fn validate(&self) -> Result<()> {
        ArrayGeometry::new(self.n_bs, self.d_bs, 1)?;
        if self.snapshots < 2 {
            return Err(Error::invalid("snapshots", "at least 2 required"));
        }
        if !(self.steering_deg.abs() <= 90.0) {
            return Err(Error::invalid("steering_deg", "must lie in [-90, 90]"));
        }
        if let InputModel::SinglePath {
            sector_deg: [lo, hi],
        } = self.input
        {
            if !(lo <= hi && lo > -90.0 && hi < 90.0) {
                return Err(Error::invalid("sector_deg", "need -90 < lo <= hi < 90"));
            }
        }
        Ok(())
    }

    /// Sigma-delta converter with the Step-1 clipping level, steered to
    /// `steering_deg`, and the quantization level from the overload condition.
    pub fn sigma_delta(&self) -> Result<AdcConfig<f64>> {
        AdcConfig::from_clip_level(
            self.n_bs,
            self.d_bs,
            clip_level_step1(snr_linear(self.snr_db)),
            self.steering_deg.to_radians(),
        )
    }

    /// Draws the converter input snapshots.
    pub fn input_block(&self) -> Result<CMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let p = snr_linear(self.snr_db);
        match self.input {
            InputModel::WhiteGaussian => Ok(DMatrix::from_fn(self.n_bs, self.snapshots, |_, _| {
                complex_gaussian(&mut rng, p + 1.0)
            })),
            InputModel::SinglePath {
                sector_deg: [lo, hi],
            } => {
                let mut x = DMatrix::zeros(self.n_bs, self.snapshots);
                for t in 0..self.snapshots {
                    let theta = if hi > lo {
                        rng.random_range(lo..hi)
                    } else {
                        lo
                    }
                    .to_radians();
                    let gain = GainModel::UnitModulus.sample(&mut rng)?;
                    let col = steering_bs(theta, self.n_bs, self.d_bs) * (gain * p.sqrt())
                        + gaussian_noise(&mut rng, self.n_bs, 1).column(0);
                    x.set_column(t, &col);
                }
                Ok(x)
            }
        }
    }

    /// Outputs of the sigma-delta converter and of a memoryless one-bit
    /// converter using the same quantization level.
    pub fn convert(&self) -> Result<(CMatrix<f64>, CMatrix<f64>, CMatrix<f64>)> {
        self.validate()?;
        let cfg = self.sigma_delta()?;
        let x = self.input_block()?;
        let sd = apply_front_end(&x, &FrontEnd::SigmaDelta(cfg))?;
        let ob = apply_front_end(&x, &FrontEnd::one_bit(cfg.quant_level())?)?;
        Ok((x, sd, ob))
    }
}

/// Rows `(angle_deg, sigma_delta, one_bit)` of the angular quantization-noise
/// power.
pub fn noise_spectrum(spec: &NoiseDiagSpec, grid: &AoaGrid<f64>) -> Result<Vec<[f64; 3]>> {
    let (x, sd, ob) = spec.convert()?;
    let a = angular_noise_spectrum(&x, &sd, grid.angles(), spec.d_bs)?;
    let b = angular_noise_spectrum(&x, &ob, grid.angles(), spec.d_bs)?;
    Ok(grid
        .angles()
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(t, (u, v))| [t.to_degrees(), *u, *v])
        .collect())
}

/// Rows `(channel, |E[x q*]| sigma-delta, |E[x q*]| one-bit)`, channels
/// numbered from 1.
pub fn input_correlation(spec: &NoiseDiagSpec) -> Result<Vec<[f64; 3]>> {
    let (x, sd, ob) = spec.convert()?;
    let a = input_noise_correlation(&x, &sd)?;
    let b = input_noise_correlation(&x, &ob)?;
    Ok((0..spec.n_bs)
        .map(|n| [(n + 1) as f64, a[n].norm(), b[n].norm()])
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeampatternSpec {
    pub geometry: ArrayGeometry<f64>,
    pub aod_grid_size: usize,
    /// Codebook stage whose precoders are swept.
    pub stage: usize,
    /// Arrival angle of the single path.
    pub aoa_deg: f64,
    pub snr_db: f64,
    pub t2: usize,
    /// Noisy repetitions averaged per point.
    pub realizations: usize,
    /// Clipping level of the fixed-voltage variant.
    pub fixed_clip: f64,
    pub sweep_step_deg: f64,
    pub seed: u64,
}

impl Default for BeampatternSpec {
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry::default(),
            aod_grid_size: 128,
            stage: 1,
            aoa_deg: 20.0,
            snr_db: 10.0,
            t2: 1,
            realizations: 100,
            fixed_clip: 1.0,
            sweep_step_deg: 1.0,
            seed: 1,
        }
    }
}

pub const BEAMPATTERN_COLUMNS: [&str; 8] = [
    "aod_deg",
    "sector",
    "ideal",
    "unquantized",
    "sigmadelta",
    "sigmadelta_fixed",
    "sigmadelta_unsteered",
    "onebit",
];

/// Energy `|cᴴ y|²` seen by the base station for every precoder of one
/// codebook stage as the departure angle sweeps `[-90°, 90°]`. `ideal` is the
/// noiseless unquantized value `P N_r |a_UEᴴ(φ) p|²`; the other columns
/// average noisy realizations (adding `1/T₂` of noise energy on average).
pub fn beampattern(spec: &BeampatternSpec) -> Result<Vec<[f64; 8]>> {
    let g = spec.geometry;
    let grid = AodGrid::new(spec.aod_grid_size)?;
    let cb = Codebook::design(g.n_ue, &grid)?;
    if spec.stage == 0 || spec.stage > cb.n_stages() {
        return Err(Error::invalid(
            "stage",
            format!("must be between 1 and {}", cb.n_stages()),
        ));
    }
    if spec.realizations == 0 || spec.t2 == 0 {
        return Err(Error::invalid(
            "realizations",
            "realizations and t2 must be positive",
        ));
    }
    if !(spec.aoa_deg.abs() < 90.0) {
        return Err(Error::invalid("aoa_deg", "must lie in (-90, 90)"));
    }
    let sweep = AoaGrid::uniform_degrees(-90.0, 90.0, spec.sweep_step_deg)?;
    let p = snr_linear(spec.snr_db);
    let theta = spec.aoa_deg.to_radians();
    let comb = path_combiner(theta, g.n_bs, g.d_bs);
    let c2 = VoltagePolicy::<f64>::Proposed.step2(p, g.n_ue);
    let variants = [
        FrontEnd::Unquantized,
        FrontEndKind::Sigmadelta.build(g.n_bs, g.d_bs, c2, theta)?,
        FrontEndKind::Sigmadelta.build(g.n_bs, g.d_bs, spec.fixed_clip, theta)?,
        FrontEndKind::Sigmadelta.build(g.n_bs, g.d_bs, c2, 0.0)?,
        FrontEndKind::Onebit.build(g.n_bs, g.d_bs, c2, 0.0)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stage = cb.stage(spec.stage);
    let mut rows = Vec::new();
    for sector in 0..stage.ncols() {
        let precoder = stage.column(sector).into_owned();
        for &phi in sweep.angles() {
            let h = assemble_su_channel(&[theta], &[phi], &[Cplx::new(1.0, 0.0)], &g);
            let rho = (steering_ue(phi, g.n_ue).adjoint() * &precoder)[(0, 0)];
            let mut row = [0.0; 8];
            row[0] = phi.to_degrees();
            row[1] = sector as f64;
            row[2] = p * g.n_bs as f64 * rho.norm_sqr();
            for (k, fe) in variants.iter().enumerate() {
                let mut uplink = SimulatedUplink::new(&h, p, spec.t2, *fe, &mut rng);
                let mut acc = 0.0;
                for _ in 0..spec.realizations {
                    acc += path_energy(&uplink.transmit(&precoder)?, &comb)?;
                }
                row[3 + k] = acc / spec.realizations as f64;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// `(stage, sector, antenna, re, im)`.
pub type CodebookEntry = (usize, usize, usize, f64, f64);

/// One row per codebook coefficient, stages in order.
pub fn codebook_entries(n_ue: usize, aod_grid_size: usize) -> Result<Vec<CodebookEntry>> {
    let grid = AodGrid::new(aod_grid_size)?;
    let cb = Codebook::design(n_ue, &grid)?;
    let mut rows = Vec::new();
    for s in 1..=cb.n_stages() {
        let p = cb.stage(s);
        for (sector, col) in p.column_iter().enumerate() {
            for (antenna, v) in col.iter().enumerate() {
                rows.push((s, sector, antenna, v.re, v.im));
            }
        }
    }
    Ok(rows)
}

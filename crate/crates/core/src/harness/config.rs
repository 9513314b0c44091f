//! Experiment configuration, read from TOML and patched by CLI flags.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelSamplerSpec, GainModel};
use crate::error::{Error, Result};
use crate::estimator::{AoaGrid, AodGrid, FrontEndKind, SuScenario, VoltagePolicy};
use crate::mumimo::MuScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Su,
    Mu,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Su => "su",
            Mode::Mu => "mu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_bs: usize,
    /// Base-station element spacing in wavelengths.
    pub d_bs: f64,
    pub n_ue: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            n_bs: 128,
            d_bs: 0.125,
            n_ue: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuConfig {
    pub t1: usize,
    pub t2: usize,
    pub n_paths: usize,
    pub aod_grid_size: usize,
}

impl Default for SuConfig {
    fn default() -> Self {
        Self {
            t1: 10,
            t2: 1,
            n_paths: 1,
            aod_grid_size: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuConfig {
    pub n_users: usize,
    pub paths_per_user: usize,
    /// Pilot blocks per estimate.
    pub t: usize,
}

impl Default for MuConfig {
    fn default() -> Self {
        Self {
            n_users: 8,
            paths_per_user: 1,
            t: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub aoa_lo_deg: f64,
    pub aoa_hi_deg: f64,
    pub aoa_step_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            aoa_lo_deg: -90.0,
            aoa_hi_deg: 90.0,
            aoa_step_deg: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub aoa_sector_deg: [f64; 2],
    pub aod_sector_deg: [f64; 2],
    pub min_aoa_spacing_deg: f64,
    pub min_aod_spacing_cos: f64,
    /// Defaults to unit-modulus gains for `su` and `CN(0, 1)` for `mu`.
    pub gain: Option<GainModel<f64>>,
    pub on_grid_aod: bool,
    pub on_grid_aoa: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            aoa_sector_deg: [-10.0, 10.0],
            aod_sector_deg: [-75.0, 75.0],
            min_aoa_spacing_deg: 20.0,
            min_aod_spacing_cos: 0.1,
            gain: None,
            on_grid_aod: true,
            on_grid_aoa: false,
        }
    }
}

/// One estimator variant compared in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub front_end: FrontEndKind,
    #[serde(default = "proposed")]
    pub voltage: VoltagePolicy<f64>,
    #[serde(default = "yes")]
    pub steer_step2: bool,
    #[serde(default)]
    pub step1_steering_deg: f64,
}

fn proposed() -> VoltagePolicy<f64> {
    VoltagePolicy::Proposed
}

fn yes() -> bool {
    true
}

impl MethodConfig {
    pub fn plain(front_end: FrontEndKind) -> Self {
        Self {
            name: None,
            front_end,
            voltage: VoltagePolicy::Proposed,
            steer_step2: true,
            step1_steering_deg: 0.0,
        }
    }

    /// Explicit name, or one derived from the front-end and any non-default
    /// settings.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let mut s = self.front_end.name().to_string();
        if let VoltagePolicy::Fixed { clip_level } = self.voltage {
            s.push_str(&format!("_c{clip_level}"));
        }
        if !self.steer_step2 {
            s.push_str("_unsteered");
        }
        if self.step1_steering_deg != 0.0 {
            s.push_str(&format!("_psi{}", self.step1_steering_deg));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free text copied into the CSV header.
    pub description: String,
    pub mode: Mode,
    pub seed: u64,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    pub threads: usize,
    /// Drop receiver noise (quantization still applies).
    pub noiseless: bool,
    pub output: Option<String>,
    pub geometry: GeometryConfig,
    pub su: SuConfig,
    pub mu: MuConfig,
    pub grid: GridConfig,
    pub sampler: SamplerConfig,
    pub methods: Vec<MethodConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            description: String::new(),
            mode: Mode::Su,
            seed: 1,
            trials: 1000,
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            threads: 0,
            noiseless: false,
            output: None,
            geometry: GeometryConfig::default(),
            su: SuConfig::default(),
            mu: MuConfig::default(),
            grid: GridConfig::default(),
            sampler: SamplerConfig::default(),
            methods: vec![
                MethodConfig::plain(FrontEndKind::Unquantized),
                MethodConfig::plain(FrontEndKind::Sigmadelta),
            ],
        }
    }
}

fn deg(x: f64) -> f64 {
    x.to_radians()
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Replaces the method list with default-configured methods for `kinds`.
    pub fn set_front_ends(&mut self, kinds: &[FrontEndKind]) {
        self.methods = kinds.iter().map(|&k| MethodConfig::plain(k)).collect();
    }

    pub fn geometry(&self) -> Result<ArrayGeometry<f64>> {
        let g = &self.geometry;
        ArrayGeometry::new(g.n_bs, g.d_bs, g.n_ue)
    }

    pub fn aoa_grid(&self) -> Result<AoaGrid<f64>> {
        let g = &self.grid;
        AoaGrid::uniform_degrees(g.aoa_lo_deg, g.aoa_hi_deg, g.aoa_step_deg)
    }

    pub fn sampler(&self) -> ChannelSamplerSpec<f64> {
        let s = &self.sampler;
        let gain = s.gain.unwrap_or(match self.mode {
            Mode::Su => GainModel::UnitModulus,
            Mode::Mu => GainModel::ComplexGaussian,
        });
        ChannelSamplerSpec {
            aoa_sector: (deg(s.aoa_sector_deg[0]), deg(s.aoa_sector_deg[1])),
            aod_sector: (deg(s.aod_sector_deg[0]), deg(s.aod_sector_deg[1])),
            min_aoa_spacing: deg(s.min_aoa_spacing_deg),
            min_aod_spacing_cos: s.min_aod_spacing_cos,
            gain_model: gain,
            on_grid_aod: s.on_grid_aod,
            aod_grid_size: self.su.aod_grid_size,
            on_grid_aoa: s.on_grid_aoa,
            aoa_grid_step: deg(self.grid.aoa_step_deg),
        }
    }

    pub fn su_scenario(&self, method: &MethodConfig, snr_db: f64) -> Result<SuScenario<f64>> {
        let mut sc = SuScenario::new(
            self.geometry()?,
            snr_linear(snr_db),
            self.su.n_paths,
            method.front_end,
        );
        sc.t1 = self.su.t1;
        sc.t2 = self.su.t2;
        sc.voltage = method.voltage;
        sc.step1_steering = deg(method.step1_steering_deg);
        sc.steer_step2 = method.steer_step2;
        sc.aoa_grid = self.aoa_grid()?;
        sc.aod_grid_size = self.su.aod_grid_size;
        sc.noiseless = self.noiseless;
        Ok(sc)
    }

    pub fn mu_scenario(&self, method: &MethodConfig, snr_db: f64) -> Result<MuScenario<f64>> {
        let mut sc = MuScenario::new(
            self.geometry()?,
            snr_linear(snr_db),
            vec![self.mu.paths_per_user; self.mu.n_users],
            method.front_end,
        );
        sc.t = self.mu.t;
        sc.voltage = method.voltage;
        sc.aoa_grid = self.aoa_grid()?;
        sc.noiseless = self.noiseless;
        Ok(sc)
    }

    /// Checks every field, naming the first offending one.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::invalid("snr_db", "list is empty"));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_db", "values must be finite"));
        }
        self.geometry()?;
        self.aoa_grid()?;
        AodGrid::<f64>::new(self.su.aod_grid_size)?;
        self.sampler().validate()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "at least one method required"));
        }
        let mut seen = HashSet::new();
        for m in &self.methods {
            if !seen.insert(m.label()) {
                return Err(Error::invalid(
                    "methods",
                    format!("duplicate method name `{}`", m.label()),
                ));
            }
            if m.step1_steering_deg.abs() > 90.0 {
                return Err(Error::invalid(
                    "step1_steering_deg",
                    "must lie in [-90, 90]",
                ));
            }
            match self.mode {
                Mode::Su => self.su_scenario(m, self.snr_db[0])?.validate()?,
                Mode::Mu => self.mu_scenario(m, self.snr_db[0])?.validate()?,
            }
        }
        if self.mode == Mode::Mu && self.mu.n_users == 0 {
            return Err(Error::invalid("mu.n_users", "at least one user required"));
        }
        Ok(())
    }
}

/// `P = 10^{SNR/10}`.
pub fn snr_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.aoa_grid().unwrap().len(), 181);
        assert_eq!(c.su.t1, 10);
        assert_eq!(c.geometry.n_bs, 128);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            description = "demo"
            mode = "mu"
            trials = 5
            snr_db = [0.0, 10.0]
            [mu]
            n_users = 4
            [[methods]]
            front_end = "sigmadelta"
            voltage = { kind = "fixed", clip_level = 1.0 }
            [[methods]]
            front_end = "onebit"
        "#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.mode, Mode::Mu);
        assert_eq!(c.mu.n_users, 4);
        assert_eq!(c.mu.t, 1);
        assert_eq!(c.methods[0].label(), "sigmadelta_c1");
        assert_eq!(c.methods[1].label(), "onebit");
        c.validate().unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn errors_name_fields() {
        let err = |c: ExperimentConfig| c.validate().unwrap_err().to_string();
        let c = ExperimentConfig {
            trials: 0,
            ..Default::default()
        };
        assert!(err(c).contains("trials"));
        let mut c = ExperimentConfig::default();
        c.su.aod_grid_size = 100;
        assert!(err(c).contains("aod_grid_size"));
        let mut c = ExperimentConfig::default();
        c.snr_db.clear();
        assert!(err(c).contains("snr_db"));
        let mut c = ExperimentConfig::default();
        c.methods
            .push(MethodConfig::plain(FrontEndKind::Sigmadelta));
        assert!(err(c).contains("duplicate"));
        assert!(ExperimentConfig::from_toml_str("trails = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("[[methods]]\nfront_end = \"twobit\"").is_err());
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(snr_linear(0.0), 1.0);
        assert!((snr_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((snr_linear(-10.0) - 0.1).abs() < 1e-15);
    }
}

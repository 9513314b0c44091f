//! Seeded, trial-parallel Monte-Carlo runner.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    mu_channel_matrix, sample_mu_channel, sample_su_channel, su_channel_matrix, MuChannelParams,
    SuChannelParams,
};
use crate::error::{Error, Result};
use crate::estimator::{AoaGrid, AodGrid, SuEstimator};
use crate::mumimo::MuEstimator;

use super::config::{ExperimentConfig, Mode};
use super::metrics::{db, index_set_mismatch, nmse_terms, MetricSums, TrialMetrics};

/// Tolerance (radians) for treating a true arrival angle as a grid point.
pub const ON_GRID_TOL: f64 = 1e-9;

/// Random stream of one trial. Streams depend only on the seed, the SNR
/// position and the trial index, never on scheduling.
pub fn trial_rng(seed: u64, snr_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((snr_index as u64) << 32) | trial as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: String,
    pub snr_db: f64,
    pub trial: usize,
    pub metrics: TrialMetrics,
    /// Some true arrival angle was off the grid and snapped for `e_theta`.
    pub snapped_aoa: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub snr_db: f64,
    pub sums: MetricSums,
}

impl AggregateRow {
    pub fn e_theta(&self) -> f64 {
        self.sums.e_theta()
    }

    pub fn e_phi(&self) -> Option<f64> {
        self.sums.e_phi()
    }

    pub fn nmse_alpha_db(&self) -> f64 {
        db(self.sums.nmse_alpha())
    }

    pub fn nmse_h_db(&self) -> f64 {
        db(self.sums.nmse_h())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// One row per `(method, SNR)`, SNR-major in configuration order.
    pub rows: Vec<AggregateRow>,
    /// Every trial, in the same order as `rows` and then by trial index.
    pub trials: Vec<TrialRecord>,
    /// Trials in which at least one true arrival angle had to be snapped.
    pub snapped_aoa_trials: usize,
}

impl ExperimentOutput {
    pub fn row(&self, method: &str, snr_db: f64) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.snr_db == snr_db)
    }
}

enum Estimators {
    Su(Vec<SuEstimator<f64>>),
    Mu(Vec<MuEstimator<f64>>),
}

fn snap(grid: &AoaGrid<f64>, aoas: &[f64]) -> (Vec<usize>, bool) {
    let idx = aoas.iter().map(|&a| grid.nearest_index(a)).collect();
    let snapped = aoas.iter().any(|&a| !grid.contains(a, ON_GRID_TOL));
    (idx, snapped)
}

/// Permutation that sorts `v` ascending.
fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

fn su_trial(
    ests: &[SuEstimator<f64>],
    params: &SuChannelParams<f64>,
    rng: &ChaCha8Rng,
    aoa_grid: &AoaGrid<f64>,
    aod_grid: &AodGrid<f64>,
) -> Result<(Vec<TrialMetrics>, bool)> {
    let g = ests[0].scenario().geometry;
    let h = su_channel_matrix(params, &g);
    let order = argsort(&params.aoas);
    let true_gains: Vec<_> = order.iter().map(|&i| params.gains[i]).collect();
    let (true_aoa_idx, snapped) = snap(aoa_grid, &params.aoas);
    let true_aod_idx: Vec<usize> = params
        .aods
        .iter()
        .map(|&p| aod_grid.nearest_index(p))
        .collect();
    let mut out = Vec::with_capacity(ests.len());
    for est in ests {
        // Every method sees the same noise stream.
        let mut r = rng.clone();
        let e = est.estimate(params, &mut r)?;
        let (alpha_num, alpha_den) = nmse_terms(e.gains.as_slice(), &true_gains)?;
        let (h_num, h_den) = nmse_terms(e.h.as_slice(), h.as_slice())?;
        out.push(TrialMetrics {
            e_theta: index_set_mismatch(&e.aoa_indices, &true_aoa_idx),
            e_phi: Some(index_set_mismatch(&e.aod_indices, &true_aod_idx)),
            alpha_num,
            alpha_den,
            h_num,
            h_den,
        });
    }
    Ok((out, snapped))
}

fn mu_trial(
    ests: &[MuEstimator<f64>],
    params: &MuChannelParams<f64>,
    rng: &ChaCha8Rng,
    aoa_grid: &AoaGrid<f64>,
) -> Result<(Vec<TrialMetrics>, bool)> {
    let g = ests[0].scenario().geometry;
    let h = mu_channel_matrix(params, &g);
    let mut snapped = false;
    let mut truth = Vec::with_capacity(params.n_users());
    for u in &params.users {
        let (idx, s) = snap(aoa_grid, &u.aoas);
        snapped |= s;
        let gains: Vec<_> = argsort(&u.aoas).iter().map(|&i| u.gains[i]).collect();
        truth.push((idx, gains));
    }
    let mut out = Vec::with_capacity(ests.len());
    for est in ests {
        let mut r = rng.clone();
        let e = est.estimate(params, &mut r)?;
        let mut m = TrialMetrics {
            e_theta: false,
            e_phi: None,
            alpha_num: 0.0,
            alpha_den: 0.0,
            h_num: 0.0,
            h_den: 0.0,
        };
        for (user, (idx, gains)) in e.users.iter().zip(&truth) {
            m.e_theta |= index_set_mismatch(&user.aoa_indices, idx);
            let (n, d) = nmse_terms(user.gains.as_slice(), gains)?;
            m.alpha_num += n;
            m.alpha_den += d;
        }
        let (n, d) = nmse_terms(e.h.as_slice(), h.as_slice())?;
        m.h_num = n;
        m.h_den = d;
        out.push(m);
    }
    Ok((out, snapped))
}

fn run_snr(
    cfg: &ExperimentConfig,
    snr_index: usize,
    snr_db: f64,
) -> Result<Vec<(Vec<TrialMetrics>, bool)>> {
    let aoa_grid = cfg.aoa_grid()?;
    let aod_grid = AodGrid::new(cfg.su.aod_grid_size)?;
    let spec = cfg.sampler();
    let estimators = match cfg.mode {
        Mode::Su => Estimators::Su(
            cfg.methods
                .iter()
                .map(|m| SuEstimator::new(cfg.su_scenario(m, snr_db)?))
                .collect::<Result<_>>()?,
        ),
        Mode::Mu => Estimators::Mu(
            cfg.methods
                .iter()
                .map(|m| MuEstimator::new(cfg.mu_scenario(m, snr_db)?))
                .collect::<Result<_>>()?,
        ),
    };
    let paths = vec![cfg.mu.paths_per_user; cfg.mu.n_users];
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, snr_index, t);
            match &estimators {
                Estimators::Su(ests) => {
                    let params = sample_su_channel(&spec, cfg.su.n_paths, &mut rng)?;
                    su_trial(ests, &params, &rng, &aoa_grid, &aod_grid)
                }
                Estimators::Mu(ests) => {
                    let params = sample_mu_channel(&spec, &paths, &mut rng)?;
                    mu_trial(ests, &params, &rng, &aoa_grid)
                }
            }
        })
        .collect()
}

/// Runs every `(SNR, method, trial)` combination. The output is a pure
/// function of the configuration: thread count and scheduling do not matter.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let work = || -> Result<ExperimentOutput> {
        let mut rows = Vec::new();
        let mut trials = Vec::new();
        let mut snapped_aoa_trials = 0;
        for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
            let results = run_snr(cfg, si, snr_db)?;
            snapped_aoa_trials += results.iter().filter(|(_, s)| *s).count();
            for (mi, m) in cfg.methods.iter().enumerate() {
                let method = m.label();
                let mut sums = MetricSums::default();
                for (t, (metrics, snapped)) in results.iter().enumerate() {
                    sums.add(&metrics[mi]);
                    trials.push(TrialRecord {
                        method: method.clone(),
                        snr_db,
                        trial: t,
                        metrics: metrics[mi],
                        snapped_aoa: *snapped,
                    });
                }
                rows.push(AggregateRow {
                    method,
                    snr_db,
                    sums,
                });
            }
        }
        Ok(ExperimentOutput {
            rows,
            trials,
            snapped_aoa_trials,
        })
    };
    if cfg.threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(work)
    }
}

//! Error metrics and their aggregation over Monte-Carlo trials.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{check_len, Result};
use crate::scalar::{to_f64, Cplx, Real};

/// Squared error and squared reference norm, `(‖est − truth‖², ‖truth‖²)`.
/// Matrices are compared entrywise, which gives the Frobenius norm.
pub fn nmse_terms<T: Real>(est: &[Cplx<T>], truth: &[Cplx<T>]) -> Result<(f64, f64)> {
    check_len("nmse operands", truth.len(), est.len())?;
    let num = est
        .iter()
        .zip(truth)
        .map(|(e, t)| to_f64((*e - *t).norm_sqr()))
        .sum();
    let den = truth.iter().map(|t| to_f64(t.norm_sqr())).sum();
    Ok((num, den))
}

/// True when the two index collections differ as sets.
pub fn index_set_mismatch(est: &[usize], truth: &[usize]) -> bool {
    let a: BTreeSet<_> = est.iter().copied().collect();
    let b: BTreeSet<_> = truth.iter().copied().collect();
    a != b
}

/// `10 log₁₀ x`.
pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Running sums for one `(method, SNR)` cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricSums {
    pub trials: usize,
    pub theta_errors: usize,
    pub phi_errors: usize,
    pub phi_trials: usize,
    pub alpha_num: f64,
    pub alpha_den: f64,
    pub h_num: f64,
    pub h_den: f64,
}

impl MetricSums {
    pub fn add(&mut self, r: &TrialMetrics) {
        self.trials += 1;
        self.theta_errors += usize::from(r.e_theta);
        if let Some(e) = r.e_phi {
            self.phi_trials += 1;
            self.phi_errors += usize::from(e);
        }
        self.alpha_num += r.alpha_num;
        self.alpha_den += r.alpha_den;
        self.h_num += r.h_num;
        self.h_den += r.h_den;
    }

    pub fn e_theta(&self) -> f64 {
        self.theta_errors as f64 / self.trials as f64
    }

    pub fn e_phi(&self) -> Option<f64> {
        (self.phi_trials > 0).then(|| self.phi_errors as f64 / self.phi_trials as f64)
    }

    /// Ratio of summed squared errors to summed squared norms.
    pub fn nmse_alpha(&self) -> f64 {
        self.alpha_num / self.alpha_den
    }

    pub fn nmse_h(&self) -> f64 {
        self.h_num / self.h_den
    }
}

/// Metric values of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub e_theta: bool,
    /// Not defined for multi-user runs.
    pub e_phi: Option<bool>,
    pub alpha_num: f64,
    pub alpha_den: f64,
    pub h_num: f64,
    pub h_den: f64,
}

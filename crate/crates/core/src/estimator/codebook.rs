//! Hierarchical transmit codebook for angle-of-departure bisection.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix};

use crate::channel::manifold_ue;
use crate::error::{Error, Result};
use crate::scalar::{lit, real, CMatrix, CVector, Cplx, Real};

use super::grid::AodGrid;

/// Ridge added to the normal equations when they are numerically singular.
pub const CODEBOOK_RIDGE: f64 = 1e-10;

/// Precoders for every bisection stage. Stage `s` (1-based, `1..=N_s`) has
/// `2^s` unit-norm columns; column `i` targets the `i`-th block of `D / 2^s`
/// consecutive grid indices.
#[derive(Debug, Clone)]
pub struct Codebook<T: Real> {
    grid_size: usize,
    stages: Vec<CMatrix<T>>,
    regularized: bool,
}

impl<T: Real> Codebook<T> {
    /// Least-squares fit `P_s = (𝐃ᴴ𝐃)⁻¹ 𝐃ᴴ Ψ_s` of the indicator beampatterns
    /// `Ψ_s`, where row `d` of `𝐃` is `a_UEᴴ(φ_d)`.
    pub fn design(n_t: usize, grid: &AodGrid<T>) -> Result<Self> {
        let d = grid.len();
        if n_t == 0 {
            return Err(Error::invalid("n_ue", "must be at least 1"));
        }
        if d < n_t {
            return Err(Error::invalid(
                "aod_grid_size",
                format!("grid of {d} points is smaller than the {n_t} user antennas"),
            ));
        }
        let dict = manifold_ue(grid.angles(), n_t).adjoint();
        let gram = dict.adjoint() * &dict;
        let (chol, regularized) = match Cholesky::new(gram.clone()) {
            Some(c) if well_conditioned(&c) => (c, false),
            _ => {
                let ridge = DMatrix::<Cplx<T>>::identity(n_t, n_t) * real(lit::<T>(CODEBOOK_RIDGE));
                let c = Cholesky::new(gram + ridge).ok_or(Error::NotPositiveDefinite {
                    min_eigenvalue: 0.0,
                })?;
                (c, true)
            }
        };
        let n_stages = grid.n_stages();
        let mut stages = Vec::with_capacity(n_stages);
        for s in 1..=n_stages {
            let sectors = 1usize << s;
            let width = d / sectors;
            let psi = DMatrix::from_fn(d, sectors, |row, col| {
                if row / width == col {
                    real(T::one())
                } else {
                    real(T::zero())
                }
            });
            let mut p = chol.solve(&(dict.adjoint() * psi));
            for mut col in p.column_iter_mut() {
                let norm = col.norm();
                if norm > T::zero() {
                    col /= real(norm);
                }
            }
            stages.push(p);
        }
        Ok(Self {
            grid_size: d,
            stages,
            regularized,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// True when the ridge fallback was needed.
    pub fn regularized(&self) -> bool {
        self.regularized
    }

    /// Precoder matrix of stage `s` (`1..=N_s`).
    pub fn stage(&self, s: usize) -> &CMatrix<T> {
        &self.stages[s - 1]
    }

    pub fn precoder(&self, s: usize, sector: usize) -> CVector<T> {
        self.stage(s).column(sector).into_owned()
    }

    /// Grid indices covered by `sector` at stage `s`.
    pub fn partition(&self, s: usize, sector: usize) -> Range<usize> {
        let width = self.grid_size >> s;
        sector * width..(sector + 1) * width
    }
}

fn well_conditioned<T: Real>(c: &Cholesky<Cplx<T>, nalgebra::Dyn>) -> bool {
    let diag = c.l_dirty().diagonal();
    let (mut lo, mut hi) = (T::max_value().unwrap_or_else(T::one), T::zero());
    for v in diag.iter() {
        let m = v.re;
        lo = if m < lo { m } else { lo };
        hi = if m > hi { m } else { hi };
    }
    // Cholesky diagonal ratios bound the square root of the condition number.
    lo > hi * lit(1e-7)
}

//! Step 1: angle-of-arrival scan and path-gain least squares from
//! single-antenna user pilots.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{check_len, Error, Result};
use crate::scalar::{lit, real, CMatrix, CVector, Cplx, Real};

use super::grid::AoaGrid;
use crate::channel::manifold_bs;

/// Precoder that keeps only the first user antenna active, `[1, 0, …, 0]ᵀ`.
/// Every user-side steering vector starts with 1, so the received signal no
/// longer depends on the departure angles.
pub fn step1_precoder<T: Real>(n_t: usize) -> CVector<T> {
    DVector::from_fn(n_t, |i, _| {
        if i == 0 {
            real(T::one())
        } else {
            real(T::zero())
        }
    })
}

/// Bartlett spectrum `a(θ)ᴴ R a(θ)` with `R = Y Yᴴ / T`, evaluated on the
/// columns of a precomputed steering `manifold` (`N_r × A`).
pub fn bartlett_spectrum_on<T: Real>(y1: &CMatrix<T>, manifold: &CMatrix<T>) -> Result<Vec<T>> {
    check_len("bartlett rows", manifold.nrows(), y1.nrows())?;
    if y1.ncols() == 0 {
        return Err(Error::Dimension {
            context: "bartlett snapshots",
            expected: 1,
            got: 0,
        });
    }
    // aᴴRa = mean_t |aᴴ y_t|², without forming R.
    let proj = manifold.adjoint() * y1;
    let t = lit::<T>(y1.ncols() as f64);
    Ok(proj
        .row_iter()
        .map(|row| row.iter().fold(T::zero(), |s, v| s + v.norm_sqr()) / t)
        .collect())
}

pub fn bartlett_spectrum<T: Real>(
    y1: &CMatrix<T>,
    grid: &AoaGrid<T>,
    spacing_wavelengths: T,
) -> Result<Vec<T>> {
    let manifold = manifold_bs(grid.angles(), y1.nrows(), spacing_wavelengths);
    bartlett_spectrum_on(y1, &manifold)
}

/// Indices of the `l` strongest local maxima of `spectrum`, in increasing
/// order. When fewer than `l` local maxima exist the remaining slots are
/// filled with the largest unused values. Ties prefer the lower index.
pub fn find_peaks<T: Real>(spectrum: &[T], l: usize) -> Result<Vec<usize>> {
    let a = spectrum.len();
    if l == 0 {
        return Err(Error::invalid(
            "n_paths",
            "at least one peak must be requested",
        ));
    }
    if l > a {
        return Err(Error::invalid(
            "n_paths",
            format!("cannot pick {l} peaks from a grid of {a} points"),
        ));
    }
    let is_peak = |i: usize| {
        let left = i == 0 || spectrum[i] > spectrum[i - 1];
        let right = i + 1 == a || spectrum[i] > spectrum[i + 1];
        left && right
    };
    // Stable sort by descending value keeps lower indices first among ties.
    let by_value = |idx: &mut Vec<usize>| {
        idx.sort_by(|&i, &j| {
            spectrum[j]
                .partial_cmp(&spectrum[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    };
    let mut peaks: Vec<usize> = (0..a).filter(|&i| is_peak(i)).collect();
    by_value(&mut peaks);
    peaks.truncate(l);
    if peaks.len() < l {
        let mut rest: Vec<usize> = (0..a).filter(|i| !peaks.contains(i)).collect();
        by_value(&mut rest);
        peaks.extend(rest.into_iter().take(l - peaks.len()));
    }
    peaks.sort_unstable();
    Ok(peaks)
}

/// Least-squares path gains and whether the system was rank deficient (in
/// which case the minimum-norm solution is returned).
#[derive(Debug, Clone, PartialEq)]
pub struct GainEstimate<T: Real> {
    pub gains: CVector<T>,
    pub rank_deficient: bool,
}

fn least_norm<T: Real>(a: CMatrix<T>, rhs: &CVector<T>) -> Result<GainEstimate<T>> {
    let (m, n) = a.shape();
    let svd = SVD::new(a, true, true);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), |m, v| if v > m { v } else { m });
    let eps = smax * lit(m.max(n) as f64) * T::default_epsilon();
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let gains = if smax > T::zero() {
        svd.solve(rhs, eps)
            .map_err(|e| Error::invalid("gain_wls", e))?
    } else {
        DVector::zeros(n)
    };
    Ok(GainEstimate {
        gains,
        rank_deficient: rank < n,
    })
}

fn check_gain_inputs<T: Real>(
    y1: &CMatrix<T>,
    a_hat: &CMatrix<T>,
    whitener: &CMatrix<T>,
) -> Result<()> {
    check_len("gain steering rows", y1.nrows(), a_hat.nrows())?;
    check_len("whitener rows", y1.nrows(), whitener.nrows())?;
    check_len("whitener columns", y1.nrows(), whitener.ncols())?;
    if a_hat.ncols() == 0 {
        return Err(Error::invalid("n_paths", "at least one path required"));
    }
    if y1.ncols() * y1.nrows() < a_hat.ncols() {
        return Err(Error::invalid(
            "t1",
            "fewer observations than unknown gains",
        ));
    }
    Ok(())
}

/// Prewhitened least-squares gains for `y_t = √(P/L) Â α + n_t`, where
/// `whitener` is any `W` with `WᴴW = R_n⁻¹`. Every pilot snapshot carries the
/// same signal, so the stacked problem reduces to a single `N_r × L` solve
/// against the time-averaged whitened observation.
pub fn gain_wls<T: Real>(
    y1: &CMatrix<T>,
    a_hat: &CMatrix<T>,
    whitener: &CMatrix<T>,
    snr: T,
) -> Result<GainEstimate<T>> {
    check_gain_inputs(y1, a_hat, whitener)?;
    let l = lit::<T>(a_hat.ncols() as f64);
    let b = whitener * a_hat * real((snr / l).sqrt());
    let mean = y1.column_mean();
    least_norm(b, &(whitener * mean))
}

/// Same estimate computed from the explicit stacked model
/// `vec(W Y) = (1ᵀ ⊙ √(P/L) W Â) α`, using the column-wise Khatri-Rao product.
pub fn gain_wls_khatri_rao<T: Real>(
    y1: &CMatrix<T>,
    a_hat: &CMatrix<T>,
    whitener: &CMatrix<T>,
    snr: T,
) -> Result<GainEstimate<T>> {
    check_gain_inputs(y1, a_hat, whitener)?;
    let (n, t) = y1.shape();
    let l = a_hat.ncols();
    let b = whitener * a_hat * real((snr / lit(l as f64)).sqrt());
    let ones = DMatrix::<Cplx<T>>::from_element(l, t, real(T::one()));
    let mut psi = DMatrix::zeros(n * t, l);
    for j in 0..l {
        let kr = ones.row(j).transpose().kronecker(&b.column(j));
        psi.set_column(j, &kr);
    }
    let wy = whitener * y1;
    let rhs = DVector::from_column_slice(wy.as_slice());
    least_norm(psi, &rhs)
}

#[derive(Debug, Clone)]
pub struct Step1Result<T: Real> {
    /// Grid indices of the selected peaks, increasing.
    pub aoa_indices: Vec<usize>,
    pub aoas: Vec<T>,
    pub gains: CVector<T>,
    pub spectrum: Vec<T>,
    pub rank_deficient: bool,
}

/// Bartlett peak picking followed by [`gain_wls`]. `manifold` holds the
/// steering vectors of `grid` as columns.
pub fn run_step1<T: Real>(
    y1: &CMatrix<T>,
    grid: &AoaGrid<T>,
    manifold: &CMatrix<T>,
    whitener: &CMatrix<T>,
    snr: T,
    n_paths: usize,
) -> Result<Step1Result<T>> {
    check_len("grid manifold columns", grid.len(), manifold.ncols())?;
    let spectrum = bartlett_spectrum_on(y1, manifold)?;
    let aoa_indices = find_peaks(&spectrum, n_paths)?;
    let aoas: Vec<T> = aoa_indices.iter().map(|&i| grid.angles()[i]).collect();
    let a_hat = manifold.select_columns(&aoa_indices);
    let est = gain_wls(y1, &a_hat, whitener, snr)?;
    Ok(Step1Result {
        aoa_indices,
        aoas,
        gains: est.gains,
        spectrum,
        rank_deficient: est.rank_deficient,
    })
}

//! Quantization-noise model of the spatial sigma-delta ADC.
//!
//! Linearizing the converter as `y = x + q` gives a noise covariance
//! `R_q = (2b²/3) U⁻¹ U⁻ᴴ` that is high-pass in angle: it is small for
//! directions near the steering angle and grows away from it. Estimators
//! prewhiten with `R_n = I + R_q`.
//!
//! The exact error expressions ([`closed_form_error`], [`floor_identity_residual`])
//! hold for broadside steering with clipping inactive.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::adc::{u_inverse, AdcConfig, FrontEnd};
use crate::channel::steering_bs;
use crate::error::{check_len, Error, Result};
use crate::scalar::{cis, lit, real, to_f64, CMatrix, CVector, Cplx, Real};

/// Fractional part `x - floor(x)`, always in `[0, 1)`.
#[inline]
pub fn frac<T: Real>(x: T) -> T {
    x - x.floor()
}

/// Closed-form quantization error of a broadside (`ψ = 0`) converter:
///
/// `Re e_n = b - 2b ⟨(n-1)/2 + (1/2b) Σ_{k≤n} Re x_k⟩`, and likewise for the
/// imaginary part. Valid when `|Re x_k|, |Im x_k| <= b`.
pub fn closed_form_error<T: Real>(x: &CVector<T>, b: T) -> CVector<T> {
    let half = lit::<T>(0.5);
    let two_b = b + b;
    let (mut acc_re, mut acc_im) = (T::zero(), T::zero());
    DVector::from_iterator(
        x.len(),
        x.iter().enumerate().map(|(n, v)| {
            acc_re += v.re;
            acc_im += v.im;
            let offset = half * lit(n as f64);
            Cplx::new(
                b - two_b * frac(offset + acc_re / two_b),
                b - two_b * frac(offset + acc_im / two_b),
            )
        }),
    )
}

/// `U v` in O(n) via `s_n = v_n + e^{jφ} s_{n-1}`.
fn apply_u<T: Real>(v: &CVector<T>, phase: T) -> CVector<T> {
    let rot = cis(phase);
    let mut prev = Cplx::new(T::zero(), T::zero());
    v.map(|z| {
        prev = z + rot * prev;
        prev
    })
}

/// Max-norm residual of the deterministic relation
///
/// `0.5 b⁻¹ U y + ν - μ1 = floor[0.5 b⁻¹ U x + ν]`,  `μ = 0.5 + 0.5j`, `ν = μ V 1`,
///
/// with the floor applied to real and imaginary parts. Exact (up to rounding)
/// for broadside steering when clipping was inactive; a nonzero residual
/// otherwise indicates clipping or steering, not an error.
pub fn floor_identity_residual<T: Real>(
    x: &CVector<T>,
    y: &CVector<T>,
    cfg: &AdcConfig<T>,
) -> Result<T> {
    let n = cfg.n_channels();
    check_len("floor identity input", n, x.len())?;
    check_len("floor identity output", n, y.len())?;
    let half = lit::<T>(0.5);
    let mu = Cplx::new(half, half);
    let scale = half / cfg.quant_level();
    let phase = cfg.phase();
    // V 1 = U 1 - 1.
    let ones = DVector::from_element(n, real(T::one()));
    let nu = (apply_u(&ones, phase) - &ones) * mu;
    let lhs = apply_u(y, phase) * real(scale) + &nu - ones * mu;
    let arg = apply_u(x, phase) * real(scale) + &nu;
    Ok(lhs
        .iter()
        .zip(arg.iter())
        .map(|(l, a)| {
            let dr = (l.re - a.re.floor()).abs();
            let di = (l.im - a.im.floor()).abs();
            if dr > di {
                dr
            } else {
                di
            }
        })
        .fold(T::zero(), |m, v| if v > m { v } else { m }))
}

/// `R_q = (2b²/3) U⁻¹ U⁻ᴴ`.
pub fn quant_noise_cov<T: Real>(cfg: &AdcConfig<T>) -> CMatrix<T> {
    let inv = u_inverse(cfg.n_channels(), cfg.phase());
    let b = cfg.quant_level();
    let scale = lit::<T>(2.0) * b * b / lit(3.0);
    (&inv * inv.adjoint()) * real(scale)
}

/// `R_n = I + R_q`: receiver noise plus quantization noise.
pub fn effective_noise_cov<T: Real>(cfg: &AdcConfig<T>) -> CMatrix<T> {
    let n = cfg.n_channels();
    quant_noise_cov(cfg) + DMatrix::identity(n, n)
}

/// Effective noise covariance assumed for each front-end: identity when
/// unquantized, `(1 + 2b²/3) I` for memoryless one-bit quantization, and
/// [`effective_noise_cov`] for sigma-delta.
pub fn front_end_noise_cov<T: Real>(fe: &FrontEnd<T>, n: usize) -> Result<CMatrix<T>> {
    match fe {
        FrontEnd::Unquantized => Ok(DMatrix::identity(n, n)),
        FrontEnd::OneBit { quant_level } => {
            let b = *quant_level;
            let s = T::one() + lit::<T>(2.0) * b * b / lit(3.0);
            Ok(DMatrix::identity(n, n) * real(s))
        }
        FrontEnd::SigmaDelta(cfg) => {
            check_len("noise model channels", n, cfg.n_channels())?;
            Ok(effective_noise_cov(cfg))
        }
    }
}

/// Hermitian inverse square root `Q Λ^{-1/2} Qᴴ` of a Hermitian positive
/// definite matrix.
pub fn prewhitener<T: Real>(r_n: &CMatrix<T>) -> Result<CMatrix<T>> {
    if !r_n.is_square() {
        return Err(Error::Dimension {
            context: "prewhitener (square matrix)",
            expected: r_n.nrows(),
            got: r_n.ncols(),
        });
    }
    let eig = SymmetricEigen::new(r_n.clone());
    let min =
        eig.eigenvalues
            .iter()
            .copied()
            .fold(T::max_value().unwrap_or_else(T::one), |m, v| {
                if v < m {
                    v
                } else {
                    m
                }
            });
    // Relative floor so that numerically singular matrices are rejected too.
    let largest = eig.eigenvalues.camax();
    if !(min > largest * lit(1e-13)) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: to_f64(min),
        });
    }
    let inv_sqrt = eig.eigenvalues.map(|l| real(T::one() / l.sqrt()));
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * inv_sqrt[j]);
    Ok(scaled * q.adjoint())
}

/// Linearized noise model of one sigma-delta configuration.
#[derive(Debug, Clone)]
pub struct NoiseModel<T: Real> {
    pub cfg: AdcConfig<T>,
    pub r_q: CMatrix<T>,
    pub r_n: CMatrix<T>,
    pub whitener: CMatrix<T>,
}

impl<T: Real> NoiseModel<T> {
    pub fn new(cfg: AdcConfig<T>) -> Result<Self> {
        let r_q = quant_noise_cov(&cfg);
        let n = cfg.n_channels();
        let r_n = &r_q + DMatrix::<Cplx<T>>::identity(n, n);
        let whitener = prewhitener(&r_n)?;
        Ok(Self {
            cfg,
            r_q,
            r_n,
            whitener,
        })
    }
}

fn check_same_shape<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> Result<()> {
    check_len("noise diagnostics rows", x.nrows(), y.nrows())?;
    check_len("noise diagnostics columns", x.ncols(), y.ncols())
}

/// Per-channel sample correlation `(1/T) Σ_t x_n(t) (y_n(t) - x_n(t))*`
/// between the converter input and its quantization noise.
pub fn input_noise_correlation<T: Real>(x: &CMatrix<T>, y: &CMatrix<T>) -> Result<CVector<T>> {
    check_same_shape(x, y)?;
    if x.ncols() < 2 {
        return Err(Error::Dimension {
            context: "input-noise correlation snapshots (at least 2)",
            expected: 2,
            got: x.ncols(),
        });
    }
    let t = real(lit::<T>(x.ncols() as f64));
    Ok(DVector::from_fn(x.nrows(), |n, _| {
        let s = x
            .row(n)
            .iter()
            .zip(y.row(n).iter())
            .fold(Cplx::new(T::zero(), T::zero()), |acc, (&xv, &yv)| {
                acc + xv * (yv - xv).conj()
            });
        s / t
    }))
}

/// Angular power of the quantization noise, `mean_t |a(θ)ᴴ (y(t) - x(t))|²`,
/// for each angle of `theta_grid`.
pub fn angular_noise_spectrum<T: Real>(
    x: &CMatrix<T>,
    y: &CMatrix<T>,
    theta_grid: &[T],
    spacing_wavelengths: T,
) -> Result<Vec<T>> {
    check_same_shape(x, y)?;
    let q = y - x;
    let t = lit::<T>(q.ncols().max(1) as f64);
    Ok(theta_grid
        .iter()
        .map(|&theta| {
            let a = steering_bs(theta, q.nrows(), spacing_wavelengths);
            let proj = a.adjoint() * &q;
            proj.iter()
                .map(|v| v.norm_sqr())
                .fold(T::zero(), |s, v| s + v)
                / t
        })
        .collect())
}

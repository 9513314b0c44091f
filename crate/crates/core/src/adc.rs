//! Multi-channel first-order one-bit spatial sigma-delta ADC with angle
//! steering, plus the identity and regular one-bit front-ends used as
//! baselines.
//!
//! The quantization error of channel `n` is phase shifted and fed into the
//! input of channel `n + 1`:
//!
//! ```text
//! r_n = L_c[x_n] - e^{jφ} e_{n-1},   y_n = Q_b[r_n],   e_n = y_n - r_n,   e_0 = 0
//! ```
//!
//! The feedback phase is `φ = -2π d sin ψ`. With the array response
//! `a(θ)_n = e^{-j 2π d (n-1) sin θ}` used throughout the crate, that sign
//! puts the low-noise region of the shaped spectrum at `θ = ψ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::{cis, lit, CMatrix, CVector, Cplx, Real};

/// Sign with `sign(0) = +1`.
#[inline]
fn sign<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        -T::one()
    }
}

#[inline]
fn limit<T: Real>(x: T, c: T) -> T {
    if x.abs() > c {
        sign(x) * c
    } else {
        x
    }
}

/// Amplitude limiter `L_c`: clips real and imaginary parts independently to `[-c, c]`.
#[inline]
pub fn clip<T: Real>(x: Cplx<T>, c: T) -> Cplx<T> {
    Cplx::new(limit(x.re, c), limit(x.im, c))
}

/// One-bit quantizer `Q_b`: `b·sign(Re x) + j·b·sign(Im x)` with `sign(0) = +1`.
#[inline]
pub fn quantize_1bit<T: Real>(x: Cplx<T>, b: T) -> Cplx<T> {
    Cplx::new(b * sign(x.re), b * sign(x.im))
}

/// Clipping level that keeps the loop from overloading for quantization
/// level `b` and feedback phase `phase`: `b (2 - |cos φ| - |sin φ|)`.
pub fn overload_clip_level<T: Real>(b: T, phase: T) -> T {
    b * (lit::<T>(2.0) - phase.cos().abs() - phase.sin().abs())
}

/// Inverse of [`overload_clip_level`]: the quantization level whose
/// overload-free clipping level equals `c`.
pub fn level_for_clip<T: Real>(c: T, phase: T) -> T {
    c / (lit::<T>(2.0) - phase.cos().abs() - phase.sin().abs())
}

/// Feedback phase for steering angle `psi` on an array with spacing
/// `spacing_wavelengths`.
pub fn feedback_phase<T: Real>(spacing_wavelengths: T, psi: T) -> T {
    -T::two_pi() * spacing_wavelengths * psi.sin()
}

/// Lower triangular `U` with `[U]_{m,k} = e^{j(m-k)φ}` for `m >= k`.
pub fn build_u_matrix<T: Real>(n: usize, phase: T) -> CMatrix<T> {
    let steps: Vec<Cplx<T>> = (0..n).map(|k| cis(phase * lit(k as f64))).collect();
    DMatrix::from_fn(n, n, |m, k| {
        if m >= k {
            steps[m - k]
        } else {
            Cplx::new(T::zero(), T::zero())
        }
    })
}

/// Closed-form inverse of [`build_u_matrix`]: unit diagonal and `-e^{jφ}` on
/// the first subdiagonal.
pub fn u_inverse<T: Real>(n: usize, phase: T) -> CMatrix<T> {
    let w = -cis(phase);
    DMatrix::from_fn(n, n, |m, k| {
        if m == k {
            Cplx::new(T::one(), T::zero())
        } else if m == k + 1 {
            w
        } else {
            Cplx::new(T::zero(), T::zero())
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig<T> {
    n_channels: usize,
    spacing_wavelengths: T,
    quant_level: T,
    clip_level: T,
    steering_angle: T,
}

impl<T: Real> AdcConfig<T> {
    pub fn new(
        n_channels: usize,
        spacing_wavelengths: T,
        quant_level: T,
        clip_level: T,
        steering_angle: T,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::invalid("n_channels", "must be at least 1"));
        }
        if !(spacing_wavelengths > T::zero()) {
            return Err(Error::invalid("spacing_wavelengths", "must be positive"));
        }
        if !(quant_level > T::zero()) {
            return Err(Error::invalid("quant_level", "must be positive"));
        }
        if !(clip_level > T::zero()) {
            return Err(Error::invalid("clip_level", "must be positive"));
        }
        if !(steering_angle.abs() <= T::frac_pi_2()) {
            return Err(Error::invalid(
                "steering_angle",
                "must lie in [-pi/2, pi/2]",
            ));
        }
        Ok(Self {
            n_channels,
            spacing_wavelengths,
            quant_level,
            clip_level,
            steering_angle,
        })
    }

    /// Configuration with the quantization level chosen from clipping level
    /// `c` through the overload condition at the steering phase.
    pub fn from_clip_level(
        n_channels: usize,
        spacing_wavelengths: T,
        clip_level: T,
        steering_angle: T,
    ) -> Result<Self> {
        let phase = feedback_phase(spacing_wavelengths, steering_angle);
        let b = level_for_clip(clip_level, phase);
        Self::new(
            n_channels,
            spacing_wavelengths,
            b,
            clip_level,
            steering_angle,
        )
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn spacing_wavelengths(&self) -> T {
        self.spacing_wavelengths
    }

    pub fn quant_level(&self) -> T {
        self.quant_level
    }

    pub fn clip_level(&self) -> T {
        self.clip_level
    }

    pub fn steering_angle(&self) -> T {
        self.steering_angle
    }

    /// Feedback phase shift applied to the error before it enters the next channel.
    pub fn phase(&self) -> T {
        feedback_phase(self.spacing_wavelengths, self.steering_angle)
    }

    pub fn u_matrix(&self) -> CMatrix<T> {
        build_u_matrix(self.n_channels, self.phase())
    }
}

/// Receiver front-end applied to every received snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrontEnd<T> {
    Unquantized,
    OneBit { quant_level: T },
    SigmaDelta(AdcConfig<T>),
}

impl<T: Real> FrontEnd<T> {
    pub fn one_bit(quant_level: T) -> Result<Self> {
        if !(quant_level > T::zero()) {
            return Err(Error::invalid("quant_level", "must be positive"));
        }
        Ok(FrontEnd::OneBit { quant_level })
    }
}

fn sd_run<T: Real>(x: &[Cplx<T>], cfg: &AdcConfig<T>, y: &mut [Cplx<T>], e: &mut [Cplx<T>]) {
    let rot = cis(cfg.phase());
    let (b, c) = (cfg.quant_level, cfg.clip_level);
    let mut prev = Cplx::new(T::zero(), T::zero());
    for n in 0..x.len() {
        let r = clip(x[n], c) - rot * prev;
        let out = quantize_1bit(r, b);
        prev = out - r;
        y[n] = out;
        e[n] = prev;
    }
}

/// Converts one snapshot. Returns the output `y` and the per-channel
/// quantization error `e` (`e_n = y_n - r_n`).
pub fn sd_quantize_snapshot<T: Real>(
    x: &CVector<T>,
    cfg: &AdcConfig<T>,
) -> Result<(CVector<T>, CVector<T>)> {
    check_len("sigma-delta snapshot", cfg.n_channels, x.len())?;
    let zero = Cplx::new(T::zero(), T::zero());
    let mut y = DVector::from_element(x.len(), zero);
    let mut e = DVector::from_element(x.len(), zero);
    sd_run(x.as_slice(), cfg, y.as_mut_slice(), e.as_mut_slice());
    Ok((y, e))
}

/// Applies the front-end to every column (snapshot) of `x`. Sigma-delta state
/// starts from `e_0 = 0` in every column.
pub fn apply_front_end<T: Real>(x: &CMatrix<T>, fe: &FrontEnd<T>) -> Result<CMatrix<T>> {
    if x.ncols() == 0 {
        return Err(Error::Dimension {
            context: "front-end snapshot count",
            expected: 1,
            got: 0,
        });
    }
    match fe {
        FrontEnd::Unquantized => Ok(x.clone()),
        FrontEnd::OneBit { quant_level } => Ok(x.map(|v| quantize_1bit(v, *quant_level))),
        FrontEnd::SigmaDelta(cfg) => {
            check_len("sigma-delta input rows", cfg.n_channels, x.nrows())?;
            let n = x.nrows();
            let mut y = x.clone();
            let mut scratch = vec![Cplx::new(T::zero(), T::zero()); n];
            for (xin, yout) in x
                .as_slice()
                .chunks_exact(n)
                .zip(y.as_mut_slice().chunks_exact_mut(n))
            {
                sd_run(xin, cfg, yout, &mut scratch);
            }
            Ok(y)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    type C = Cplx<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> CVector<f64> {
        DVector::from_fn(n, |_, _| {
            c(rng.random_range(-amp..amp), rng.random_range(-amp..amp))
        })
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(c(0.3, -0.7), 1.0), c(0.3, -0.7));
        assert_eq!(clip(c(5.0, 5.0), 1.0), c(1.0, 1.0));
        let scalar = |v: f64, lim: f64| v.signum() * v.abs().min(lim);
        assert_eq!(
            clip(c(-2.4, 0.1), 2.0),
            c(scalar(-2.4, 2.0), scalar(0.1, 2.0))
        );
        assert_eq!(clip(c(-2.4, 0.1), 2.0), c(-2.0, 0.1));
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_1bit(c(0.3, -0.7), 1.0), c(1.0, -1.0));
        assert_eq!(quantize_1bit(c(0.0, 0.0), 2.0), c(2.0, 2.0));
        assert_eq!(quantize_1bit(c(-1e-12, 3.0), 0.5), c(-0.5, 0.5));
    }

    #[test]
    fn overload_levels() {
        assert_abs_diff_eq!(overload_clip_level(1.0, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(overload_clip_level(2.0, FRAC_PI_2), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            overload_clip_level(1.0, FRAC_PI_4),
            2.0 - 2f64.sqrt(),
            epsilon = 1e-15
        );
        for k in 0..100 {
            let phase = -PI + 2.0 * PI * k as f64 / 99.0;
            let cl = overload_clip_level(1.3, phase);
            assert!(cl > 0.0);
            assert_abs_diff_eq!(level_for_clip(cl, phase), 1.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(AdcConfig::new(0, 0.125, 1.0, 1.0, 0.0).is_err());
        assert!(AdcConfig::new(4, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(AdcConfig::new(4, 0.125, -1.0, 1.0, 0.0).is_err());
        assert!(AdcConfig::new(4, 0.125, 1.0, 0.0, 0.0).is_err());
        assert!(AdcConfig::new(4, 0.125, 1.0, 1.0, 2.0).is_err());
        assert!(FrontEnd::one_bit(0.0).is_err());
        let cfg = AdcConfig::new(4, 0.125, 1.0, 1.0, 0.4).unwrap();
        assert_abs_diff_eq!(
            cfg.phase(),
            -2.0 * PI * 0.125 * 0.4f64.sin(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn u_matrix_examples() {
        let u = build_u_matrix::<f64>(3, 0.0);
        for m in 0..3 {
            for k in 0..3 {
                let want = if m >= k { 1.0 } else { 0.0 };
                assert_eq!(u[(m, k)], c(want, 0.0));
            }
        }
        let u = build_u_matrix::<f64>(2, PI);
        assert_abs_diff_eq!(u[(1, 0)].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[(1, 0)].im, 0.0, epsilon = 1e-15);
        assert_eq!(u[(0, 1)], c(0.0, 0.0));

        let n = 128;
        let u = build_u_matrix::<f64>(n, 0.3);
        for m in 0..n {
            for k in 0..=m {
                assert_abs_diff_eq!(u[(m, k)].norm(), 1.0, epsilon = 1e-12);
            }
        }
        // Triangular solve against the identity gives U^{-1}; U U^{-1} = I.
        let inv = u
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("unit diagonal");
        let prod = &u * &inv;
        let err = (prod - DMatrix::<C>::identity(n, n)).camax();
        assert!(err < 1e-10, "max |U U^-1 - I| = {err}");
        let closed = (inv - u_inverse(n, 0.3)).camax();
        assert!(closed < 1e-10);
    }

    #[test]
    fn zero_input_alternates() {
        let cfg = AdcConfig::new(6, 0.125, 1.0, 1.0, 0.0).unwrap();
        let (y, e) = sd_quantize_snapshot(&DVector::from_element(6, c(0.0, 0.0)), &cfg).unwrap();
        // Closed form at x = 0: Re e_n = 1 - 2 frac((n-1)/2) = 1, 0, 1, 0, ...
        for n in 0..6 {
            let want = if n % 2 == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(e[n].re, want, epsilon = 1e-15);
            assert_abs_diff_eq!(e[n].im, want, epsilon = 1e-15);
            let yw = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(y[n], c(yw, yw));
        }
    }

    #[test]
    fn single_channel_is_clip_then_quantize() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = rand_vec(&mut rng, 1, 4.0);
            let cfg = AdcConfig::new(1, 0.125, 0.7, 1.5, 0.3).unwrap();
            let (y, _) = sd_quantize_snapshot(&x, &cfg).unwrap();
            assert_eq!(y[0], quantize_1bit(clip(x[0], 1.5), 0.7));
        }
    }

    #[test]
    fn snapshot_length_checked() {
        let cfg = AdcConfig::new(4, 0.125, 1.0, 1.0, 0.0).unwrap();
        let x = DVector::from_element(3, c(0.0, 0.0));
        assert!(matches!(
            sd_quantize_snapshot(&x, &cfg),
            Err(Error::Dimension { .. })
        ));
        let m = DMatrix::from_element(3, 2, c(0.0, 0.0));
        assert!(apply_front_end(&m, &FrontEnd::SigmaDelta(cfg)).is_err());
        let empty = DMatrix::<C>::zeros(4, 0);
        assert!(apply_front_end(&empty, &FrontEnd::Unquantized).is_err());
    }

    #[test]
    fn matrix_form_equivalence() {
        // With clipping inactive the recursion satisfies y = Q_b[U x - V y].
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &psi in &[0.0, 0.5, -1.1] {
            let n = 32;
            let cfg = AdcConfig::from_clip_level(n, 0.125, 1.0, psi).unwrap();
            let x = rand_vec(&mut rng, n, 0.9);
            let (y, _) = sd_quantize_snapshot(&x, &cfg).unwrap();
            let u = cfg.u_matrix();
            let v = &u - DMatrix::<C>::identity(n, n);
            let r = &u * &x - &v * &y;
            let yq = r.map(|z| quantize_1bit(z, cfg.quant_level()));
            assert_eq!(yq, y);
        }
    }

    #[test]
    fn front_end_variants() {
        let x = DMatrix::from_element(4, 3, c(0.5, 0.5));
        assert_eq!(apply_front_end(&x, &FrontEnd::Unquantized).unwrap(), x);
        let y = apply_front_end(&x, &FrontEnd::one_bit(1.0).unwrap()).unwrap();
        assert!(y.iter().all(|&v| v == c(1.0, 1.0)));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = AdcConfig::from_clip_level(16, 0.125, 2.0, 0.2).unwrap();
        let x = DMatrix::from_fn(16, 3, |_, _| {
            c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))
        });
        let y = apply_front_end(&x, &FrontEnd::SigmaDelta(cfg)).unwrap();
        for j in 0..3 {
            let (col, _) = sd_quantize_snapshot(&x.column(j).into_owned(), &cfg).unwrap();
            assert_eq!(y.column(j).into_owned(), col);
        }
    }

    #[test]
    fn generic_over_f32() {
        let cfg = AdcConfig::<f32>::from_clip_level(8, 0.125, 1.0, 0.0).unwrap();
        let x = DVector::from_element(8, Cplx::new(0.25f32, -0.25));
        let (y, _) = sd_quantize_snapshot(&x, &cfg).unwrap();
        assert!(y.iter().all(|v| v.re.abs() == 1.0 && v.im.abs() == 1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn snapshot(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
            proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n)
        }

        proptest! {
            #[test]
            fn alphabet_and_bounded_error(
                xs in snapshot(24),
                b in 0.1..5.0f64,
                psi in -1.5..1.5f64,
            ) {
                let phase = feedback_phase(0.125, psi);
                let cl = overload_clip_level(b, phase);
                let cfg = AdcConfig::new(24, 0.125, b, cl, psi).unwrap();
                let x = DVector::from_iterator(24, xs.iter().map(|&(r, i)| c(r, i)));
                let (y, e) = sd_quantize_snapshot(&x, &cfg).unwrap();
                for n in 0..24 {
                    prop_assert_eq!(y[n].re.abs(), b);
                    prop_assert_eq!(y[n].im.abs(), b);
                    prop_assert!(e[n].re.abs() <= 2.0 * b);
                    prop_assert!(e[n].im.abs() <= 2.0 * b);
                    // The overload condition gives the tighter bound |e| <= b.
                    prop_assert!(e[n].re.abs() <= b * (1.0 + 1e-12));
                    prop_assert!(e[n].im.abs() <= b * (1.0 + 1e-12));
                }
            }

            #[test]
            fn column_permutation_commutes(
                xs in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 8 * 4),
                perm in Just(vec![2usize, 0, 3, 1]).prop_shuffle(),
            ) {
                let cfg = AdcConfig::from_clip_level(8, 0.125, 2.0, 0.3).unwrap();
                let fe = FrontEnd::SigmaDelta(cfg);
                let x = DMatrix::from_iterator(8, 4, xs.iter().map(|&(r, i)| c(r, i)));
                let xp = x.select_columns(perm.iter());
                let y = apply_front_end(&x, &fe).unwrap();
                let yp = apply_front_end(&xp, &fe).unwrap();
                prop_assert_eq!(y.select_columns(perm.iter()), yp);
            }
        }
    }
}

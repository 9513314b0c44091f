//! Narrowband angular channel models and random scenario sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, lit, real, to_f64, CMatrix, CVector, Cplx, Real};

/// Rejection sampling gives up after this many draws.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1_000_000;

/// Element spacing of the user-side array, in wavelengths.
pub const UE_SPACING: f64 = 0.5;

/// Base-station array response `[1, e^{-j2πd sinθ}, …, e^{-j(n-1)2πd sinθ}]ᵀ`.
pub fn steering_bs<T: Real>(theta: T, n: usize, spacing_wavelengths: T) -> CVector<T> {
    let step = -T::two_pi() * spacing_wavelengths * theta.sin();
    DVector::from_fn(n, |i, _| cis(step * lit(i as f64)))
}

/// Critically spaced user-side array response `[1, e^{-jπ sinφ}, …]ᵀ`.
pub fn steering_ue<T: Real>(phi: T, n: usize) -> CVector<T> {
    steering_bs(phi, n, lit(UE_SPACING))
}

/// Stacks steering vectors for `angles` as columns.
pub fn manifold_bs<T: Real>(angles: &[T], n: usize, spacing_wavelengths: T) -> CMatrix<T> {
    let mut m = DMatrix::zeros(n, angles.len());
    for (j, &a) in angles.iter().enumerate() {
        m.set_column(j, &steering_bs(a, n, spacing_wavelengths));
    }
    m
}

pub fn manifold_ue<T: Real>(angles: &[T], n: usize) -> CMatrix<T> {
    manifold_bs(angles, n, lit(UE_SPACING))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry<T> {
    /// Base-station antenna count `N_r`.
    pub n_bs: usize,
    /// Base-station spacing in wavelengths (oversampled, default 1/8).
    pub d_bs: T,
    /// User antenna count `N_t`; the user array is critically spaced.
    pub n_ue: usize,
}

impl<T: Real> ArrayGeometry<T> {
    pub fn new(n_bs: usize, d_bs: T, n_ue: usize) -> Result<Self> {
        if n_bs == 0 {
            return Err(Error::invalid("n_bs", "must be at least 1"));
        }
        if n_ue == 0 {
            return Err(Error::invalid("n_ue", "must be at least 1"));
        }
        if !(d_bs > T::zero()) {
            return Err(Error::invalid("d_bs", "must be positive"));
        }
        Ok(Self { n_bs, d_bs, n_ue })
    }

    pub fn d_ue(&self) -> T {
        lit(UE_SPACING)
    }
}

impl<T: Real> Default for ArrayGeometry<T> {
    fn default() -> Self {
        Self {
            n_bs: 128,
            d_bs: lit(0.125),
            n_ue: 32,
        }
    }
}

fn check_angles<T: Real>(field: &str, angles: &[T]) -> Result<()> {
    if angles.iter().all(|a| a.abs() < T::frac_pi_2()) {
        Ok(())
    } else {
        Err(Error::invalid(field, "angles must lie in (-pi/2, pi/2)"))
    }
}

/// Parameters of a point-to-point multipath channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuChannelParams<T> {
    pub aoas: Vec<T>,
    pub aods: Vec<T>,
    pub gains: Vec<Cplx<T>>,
}

impl<T: Real> SuChannelParams<T> {
    pub fn new(aoas: Vec<T>, aods: Vec<T>, gains: Vec<Cplx<T>>) -> Result<Self> {
        if aoas.is_empty() {
            return Err(Error::invalid("n_paths", "at least one path required"));
        }
        if aods.len() != aoas.len() || gains.len() != aoas.len() {
            return Err(Error::invalid(
                "n_paths",
                format!(
                    "aoas, aods and gains differ in length ({}, {}, {})",
                    aoas.len(),
                    aods.len(),
                    gains.len()
                ),
            ));
        }
        check_angles("aoas", &aoas)?;
        check_angles("aods", &aods)?;
        Ok(Self { aoas, aods, gains })
    }

    pub fn n_paths(&self) -> usize {
        self.aoas.len()
    }
}

/// Paths from one single-antenna user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPaths<T> {
    pub aoas: Vec<T>,
    pub gains: Vec<Cplx<T>>,
}

impl<T: Real> UserPaths<T> {
    pub fn new(aoas: Vec<T>, gains: Vec<Cplx<T>>) -> Result<Self> {
        if aoas.is_empty() || aoas.len() != gains.len() {
            return Err(Error::invalid(
                "user paths",
                "need at least one path and one gain per path",
            ));
        }
        check_angles("aoas", &aoas)?;
        Ok(Self { aoas, gains })
    }

    pub fn n_paths(&self) -> usize {
        self.aoas.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuChannelParams<T> {
    pub users: Vec<UserPaths<T>>,
}

impl<T: Real> MuChannelParams<T> {
    pub fn new(users: Vec<UserPaths<T>>) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::invalid("n_users", "at least one user required"));
        }
        Ok(Self { users })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}

/// `H = (1/√L) A_BS(θ) diag(α) A_UEᴴ(φ)`.
pub fn su_channel_matrix<T: Real>(p: &SuChannelParams<T>, g: &ArrayGeometry<T>) -> CMatrix<T> {
    assemble_su_channel(&p.aoas, &p.aods, &p.gains, g)
}

/// Same as [`su_channel_matrix`] on raw slices, without range checks, so that
/// estimates sitting on the ±90° grid endpoints can be assembled too. All
/// three slices must have equal length.
pub fn assemble_su_channel<T: Real>(
    aoas: &[T],
    aods: &[T],
    gains: &[Cplx<T>],
    g: &ArrayGeometry<T>,
) -> CMatrix<T> {
    let l = aoas.len();
    let a_bs = manifold_bs(aoas, g.n_bs, g.d_bs);
    let a_ue = manifold_ue(aods, g.n_ue);
    let norm = real(T::one() / lit::<T>(l.max(1) as f64).sqrt());
    let weighted = DMatrix::from_fn(g.n_bs, l, |i, j| a_bs[(i, j)] * gains[j]);
    weighted * a_ue.adjoint() * norm
}

/// `h_k = (1/√L_k) A_BS(θ_k) α_k`.
pub fn simo_channel<T: Real>(user: &UserPaths<T>, g: &ArrayGeometry<T>) -> CVector<T> {
    assemble_simo_channel(&user.aoas, &user.gains, g)
}

/// Unchecked counterpart of [`simo_channel`].
pub fn assemble_simo_channel<T: Real>(
    aoas: &[T],
    gains: &[Cplx<T>],
    g: &ArrayGeometry<T>,
) -> CVector<T> {
    let a = manifold_bs(aoas, g.n_bs, g.d_bs);
    let alpha = DVector::from_column_slice(gains);
    a * alpha * real(T::one() / lit::<T>(aoas.len().max(1) as f64).sqrt())
}

/// Stacks the per-user SIMO channels into the `N_r × K` channel matrix.
pub fn mu_channel_matrix<T: Real>(p: &MuChannelParams<T>, g: &ArrayGeometry<T>) -> CMatrix<T> {
    let mut h = DMatrix::zeros(g.n_bs, p.n_users());
    for (k, u) in p.users.iter().enumerate() {
        h.set_column(k, &simo_channel(u, g));
    }
    h
}

/// Draws one circularly-symmetric complex Gaussian sample with the given
/// total variance.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Cplx<T> {
    let s = (variance / lit(2.0)).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Cplx::new(lit::<T>(re) * s, lit::<T>(im) * s)
}

/// Unit-variance complex Gaussian noise matrix.
pub fn gaussian_noise<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
) -> CMatrix<T> {
    // Column-major fill keeps the draw order independent of matrix layout code.
    let mut z = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            z[(i, j)] = complex_gaussian(rng, T::one());
        }
    }
    z
}

/// Received block before quantization, `X = √P H S + Z`, with `Z` drawn from
/// `rng`. Passing `None` suppresses the receiver noise.
pub fn received_pilot_block<T: Real, R: Rng + ?Sized>(
    h: &CMatrix<T>,
    s: &CMatrix<T>,
    snr: T,
    rng: Option<&mut R>,
) -> Result<CMatrix<T>> {
    if h.ncols() != s.nrows() {
        return Err(Error::Dimension {
            context: "pilot rows vs channel columns",
            expected: h.ncols(),
            got: s.nrows(),
        });
    }
    if !(snr >= T::zero()) {
        return Err(Error::invalid("snr", "must be nonnegative"));
    }
    let tol = lit::<T>(1e3) * <T as Real>::epsilon();
    for (j, col) in s.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - T::one()).abs() > tol {
            return Err(Error::PilotNorm {
                column: j,
                norm: to_f64(norm),
            });
        }
    }
    let signal = h * s * real(snr.sqrt());
    Ok(match rng {
        Some(rng) => signal + gaussian_noise(rng, h.nrows(), s.ncols()),
        None => signal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainModel<T> {
    /// `|α| = 1` with uniform phase.
    UnitModulus,
    /// `CN(0, 1)` redrawn until `|Re α|, |Im α| >= tau`.
    TruncatedGaussian { tau: T },
    /// Plain `CN(0, 1)`.
    ComplexGaussian,
}

impl<T: Real> GainModel<T> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Cplx<T>> {
        match *self {
            GainModel::UnitModulus => {
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Ok(cis(lit(phase)))
            }
            GainModel::ComplexGaussian => Ok(complex_gaussian(rng, T::one())),
            GainModel::TruncatedGaussian { tau } => {
                for _ in 0..MAX_SAMPLING_ATTEMPTS {
                    let g = complex_gaussian(rng, T::one());
                    if g.re.abs() >= tau && g.im.abs() >= tau {
                        return Ok(g);
                    }
                }
                Err(Error::InfeasibleSampling {
                    attempts: MAX_SAMPLING_ATTEMPTS,
                    reason: format!("truncated Gaussian gain with tau = {}", to_f64(tau)),
                })
            }
        }
    }
}

/// Where the random angles and gains of a scenario are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSamplerSpec<T> {
    /// AoA sector `[lo, hi]` in radians.
    pub aoa_sector: (T, T),
    /// AoD sector `[lo, hi]` in radians.
    pub aod_sector: (T, T),
    /// Minimum pairwise AoA separation in radians.
    pub min_aoa_spacing: T,
    /// Minimum pairwise AoD separation in direction-cosine (`sin φ`) units.
    pub min_aod_spacing_cos: T,
    pub gain_model: GainModel<T>,
    /// Snap AoDs onto the `aod_grid_size`-point direction-cosine grid.
    pub on_grid_aod: bool,
    pub aod_grid_size: usize,
    /// Snap AoAs onto multiples of `aoa_grid_step` (radians).
    pub on_grid_aoa: bool,
    pub aoa_grid_step: T,
}

impl<T: Real> Default for ChannelSamplerSpec<T> {
    fn default() -> Self {
        let deg = |d: f64| lit::<T>(d.to_radians());
        Self {
            aoa_sector: (deg(-10.0), deg(10.0)),
            aod_sector: (deg(-75.0), deg(75.0)),
            min_aoa_spacing: deg(20.0),
            min_aod_spacing_cos: lit(0.1),
            gain_model: GainModel::UnitModulus,
            on_grid_aod: true,
            aod_grid_size: 128,
            on_grid_aoa: false,
            aoa_grid_step: deg(1.0),
        }
    }
}

impl<T: Real> ChannelSamplerSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let half_pi = T::frac_pi_2();
        for (name, (lo, hi)) in [
            ("aoa_sector", self.aoa_sector),
            ("aod_sector", self.aod_sector),
        ] {
            if !(lo <= hi && lo > -half_pi && hi < half_pi) {
                return Err(Error::invalid(
                    name,
                    "sector must satisfy -pi/2 < lo <= hi < pi/2",
                ));
            }
        }
        if !(self.min_aoa_spacing >= T::zero()) {
            return Err(Error::invalid("min_aoa_spacing", "must be nonnegative"));
        }
        if !(self.min_aod_spacing_cos >= T::zero()) {
            return Err(Error::invalid("min_aod_spacing_cos", "must be nonnegative"));
        }
        if let GainModel::TruncatedGaussian { tau } = self.gain_model {
            if !(tau >= T::zero()) {
                return Err(Error::invalid("tau", "must be nonnegative"));
            }
        }
        if self.on_grid_aod && self.aod_grid_size < 3 {
            return Err(Error::invalid(
                "aod_grid_size",
                "need an interior grid point (at least 3)",
            ));
        }
        if self.on_grid_aoa && !(self.aoa_grid_step > T::zero()) {
            return Err(Error::invalid("aoa_grid_step", "must be positive"));
        }
        Ok(())
    }

    fn snap_aoa(&self, theta: T) -> T {
        if self.on_grid_aoa {
            let k = (theta / self.aoa_grid_step).round();
            let snapped = k * self.aoa_grid_step;
            if snapped.abs() < T::frac_pi_2() {
                snapped
            } else {
                (k - k.signum()) * self.aoa_grid_step
            }
        } else {
            theta
        }
    }

    fn snap_aod(&self, phi: T) -> T {
        if self.on_grid_aod {
            let steps = lit::<T>((self.aod_grid_size - 1) as f64);
            let two = lit::<T>(2.0);
            // The endpoints are +-90 degrees, outside the open angle range.
            let idx = ((phi.sin() + T::one()) * steps / two)
                .round()
                .max(T::one())
                .min(steps - T::one());
            (-T::one() + two * idx / steps).asin()
        } else {
            phi
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn draw_spaced<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        sector: (T, T),
        snap: impl Fn(T) -> T,
        separation: impl Fn(T, T) -> T,
        min_sep: T,
        what: &str,
    ) -> Result<Vec<T>> {
        let (lo, hi) = (to_f64(sector.0), to_f64(sector.1));
        for _ in 0..MAX_SAMPLING_ATTEMPTS {
            let draws: Vec<T> = (0..count)
                .map(|_| {
                    let u: f64 = if hi > lo {
                        rng.random_range(lo..hi)
                    } else {
                        lo
                    };
                    snap(lit(u))
                })
                .collect();
            let ok = (0..count)
                .all(|i| (i + 1..count).all(|j| separation(draws[i], draws[j]) >= min_sep));
            if ok {
                return Ok(draws);
            }
        }
        Err(Error::InfeasibleSampling {
            attempts: MAX_SAMPLING_ATTEMPTS,
            reason: format!("{count} {what} with the requested minimum spacing"),
        })
    }

    fn draw_aoas<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<T>> {
        self.draw_spaced(
            rng,
            count,
            self.aoa_sector,
            |t| self.snap_aoa(t),
            |a, b| (a - b).abs(),
            // Snapped grid angles carry rounding noise; compare with a small slack.
            self.min_aoa_spacing - lit(1e-9),
            "AoAs",
        )
    }

    fn draw_aods<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<T>> {
        self.draw_spaced(
            rng,
            count,
            self.aod_sector,
            |p| self.snap_aod(p),
            |a, b| (a.sin() - b.sin()).abs(),
            self.min_aod_spacing_cos - lit(1e-9),
            "AoDs",
        )
    }

    fn draw_gains<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<Cplx<T>>> {
        (0..count).map(|_| self.gain_model.sample(rng)).collect()
    }
}

/// Draws a random `n_paths`-path point-to-point channel: AoAs, then AoDs,
/// then gains.
pub fn sample_su_channel<T: Real, R: Rng + ?Sized>(
    spec: &ChannelSamplerSpec<T>,
    n_paths: usize,
    rng: &mut R,
) -> Result<SuChannelParams<T>> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "at least one path required"));
    }
    let aoas = spec.draw_aoas(rng, n_paths)?;
    let aods = spec.draw_aods(rng, n_paths)?;
    let gains = spec.draw_gains(rng, n_paths)?;
    SuChannelParams::new(aoas, aods, gains)
}

/// Draws `paths_per_user.len()` users with the given path counts.
pub fn sample_mu_channel<T: Real, R: Rng + ?Sized>(
    spec: &ChannelSamplerSpec<T>,
    paths_per_user: &[usize],
    rng: &mut R,
) -> Result<MuChannelParams<T>> {
    spec.validate()?;
    let users = paths_per_user
        .iter()
        .map(|&l| {
            if l == 0 {
                return Err(Error::invalid(
                    "paths_per_user",
                    "at least one path per user",
                ));
            }
            let aoas = spec.draw_aoas(rng, l)?;
            let gains = spec.draw_gains(rng, l)?;
            UserPaths::new(aoas, gains)
        })
        .collect::<Result<Vec<_>>>()?;
    MuChannelParams::new(users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    type C = Cplx<f64>;

    fn geom(n_bs: usize, n_ue: usize) -> ArrayGeometry<f64> {
        ArrayGeometry::new(n_bs, 0.125, n_ue).unwrap()
    }

    #[test]
    fn steering_examples() {
        let a = steering_bs(0.0, 5, 0.125);
        assert!(a.iter().all(|&v| v == C::new(1.0, 0.0)));

        let a = steering_bs(30f64.to_radians(), 2, 0.125);
        assert_eq!(a[0], C::new(1.0, 0.0));
        let want = cis(-PI / 8.0);
        assert_abs_diff_eq!(a[1].re, want.re, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].im, want.im, epsilon = 1e-15);

        for &th in &[-1.2f64, -0.3, 0.0, 0.7, 1.5] {
            let a = steering_bs(th, 17, 0.125);
            assert_abs_diff_eq!(a.norm_squared(), 17.0, epsilon = 1e-12);
            assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
            let b = steering_bs(-th, 17, 0.125);
            assert!((b - a.map(|v| v.conj())).camax() < 1e-14);
        }

        let u = steering_ue(0.0, 4);
        assert!(u.iter().all(|&v| v == C::new(1.0, 0.0)));
        let u = steering_ue(PI / 2.0, 2);
        assert_abs_diff_eq!(u[1].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1].im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(steering_ue(0.4, 9).norm_squared(), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn su_matrix_examples() {
        let g = geom(6, 4);
        let p = SuChannelParams::new(vec![0.0], vec![0.0], vec![C::new(1.0, 0.0)]).unwrap();
        let h = su_channel_matrix(&p, &g);
        assert!(h.iter().all(|&v| (v - C::new(1.0, 0.0)).norm() < 1e-15));

        let p2 = SuChannelParams::new(
            vec![0.3, -0.5],
            vec![0.1, 0.6],
            vec![C::new(1.0, 0.0), C::new(0.0, 0.0)],
        )
        .unwrap();
        let h2 = su_channel_matrix(&p2, &g);
        let want = steering_bs(0.3, 6, 0.125)
            * steering_ue(0.1, 4).adjoint()
            * C::new(1.0 / 2f64.sqrt(), 0.0);
        assert!((h2 - want).camax() < 1e-14);

        let p3 = SuChannelParams::new(vec![0.7], vec![-0.2], vec![cis(1.1)]).unwrap();
        let g = geom(128, 32);
        assert_abs_diff_eq!(
            su_channel_matrix(&p3, &g).norm_squared(),
            128.0 * 32.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn su_matrix_matches_sum_form() {
        let g = geom(20, 8);
        let p = SuChannelParams::new(
            vec![-0.4, 0.2, 0.9],
            vec![0.5, -0.1, 0.3],
            vec![C::new(0.3, -1.0), C::new(-0.7, 0.2), C::new(1.2, 0.9)],
        )
        .unwrap();
        let mut sum = DMatrix::<C>::zeros(20, 8);
        for l in 0..3 {
            sum += steering_bs(p.aoas[l], 20, 0.125)
                * steering_ue(p.aods[l], 8).adjoint()
                * p.gains[l];
        }
        sum /= C::new(3f64.sqrt(), 0.0);
        assert!((su_channel_matrix(&p, &g) - sum).camax() < 1e-12);
    }

    #[test]
    fn simo_examples() {
        let g = geom(8, 1);
        let u = UserPaths::new(vec![0.0], vec![C::new(1.0, 0.0)]).unwrap();
        assert!(simo_channel(&u, &g).iter().all(|&v| v == C::new(1.0, 0.0)));
        let z = UserPaths::new(vec![0.2, -0.4], vec![C::new(0.0, 0.0); 2]).unwrap();
        assert_eq!(simo_channel(&z, &g).norm(), 0.0);
        let u = UserPaths::new(vec![0.2, -0.4], vec![C::new(0.5, 1.0), C::new(-1.0, 0.3)]).unwrap();
        let direct = (steering_bs(0.2, 8, 0.125) * u.gains[0]
            + steering_bs(-0.4, 8, 0.125) * u.gains[1])
            / C::new(2f64.sqrt(), 0.0);
        assert!((simo_channel(&u, &g) - direct).camax() < 1e-14);
    }

    #[test]
    fn params_validation() {
        assert!(SuChannelParams::<f64>::new(vec![], vec![], vec![]).is_err());
        assert!(SuChannelParams::new(vec![0.1], vec![0.1, 0.2], vec![C::new(1.0, 0.0)]).is_err());
        assert!(SuChannelParams::new(vec![2.0], vec![0.1], vec![C::new(1.0, 0.0)]).is_err());
        assert!(MuChannelParams::<f64>::new(vec![]).is_err());
        assert!(ArrayGeometry::new(0, 0.125, 4).is_err());
        assert!(ArrayGeometry::new(4, 0.0, 4).is_err());
    }

    #[test]
    fn pilot_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = geom(4, 2);
        let p = SuChannelParams::new(vec![0.2], vec![0.3], vec![C::new(1.0, 0.0)]).unwrap();
        let h = su_channel_matrix(&p, &g);
        let s = DMatrix::from_column_slice(
            2,
            3,
            &[
                C::new(1.0, 0.0),
                C::new(0.0, 0.0),
                C::new(0.0, 0.0),
                C::new(0.0, 1.0),
                C::new(0.6, 0.0),
                C::new(0.0, 0.8),
            ],
        );
        let x = received_pilot_block::<f64, ChaCha8Rng>(&h, &s, 4.0, None).unwrap();
        assert!((x - &h * &s * C::new(2.0, 0.0)).camax() < 1e-14);

        let bad = s.map(|v| v * C::new(1.1, 0.0));
        assert!(matches!(
            received_pilot_block(&h, &bad, 1.0, Some(&mut rng)),
            Err(Error::PilotNorm { column: 0, .. })
        ));
        assert!(received_pilot_block(&h, &s, -1.0, Some(&mut rng)).is_err());
        assert!(received_pilot_block(&h, &s.rows(0, 1).into_owned(), 1.0, Some(&mut rng)).is_err());
    }

    #[test]
    fn noise_only_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = DMatrix::<C>::zeros(10, 1);
        let s = DMatrix::from_element(1, 10_000, C::new(1.0, 0.0));
        let x = received_pilot_block(&h, &s, 0.0, Some(&mut rng)).unwrap();
        let var = x.norm_squared() / 100_000.0;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn expected_energy() {
        // E‖X‖² = P‖HS‖² + N_r T; check the sample mean over repeated blocks.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = geom(16, 4);
        let p = SuChannelParams::new(vec![0.1], vec![-0.3], vec![C::new(0.6, 0.8)]).unwrap();
        let h = su_channel_matrix(&p, &g);
        let s = DMatrix::from_fn(4, 5, |i, _| {
            if i == 0 {
                C::new(1.0, 0.0)
            } else {
                C::new(0.0, 0.0)
            }
        });
        let snr = 2.0;
        let want = snr * (&h * &s).norm_squared() + 16.0 * 5.0;
        let reps = 4000;
        let mean = (0..reps)
            .map(|_| {
                received_pilot_block(&h, &s, snr, Some(&mut rng))
                    .unwrap()
                    .norm_squared()
            })
            .sum::<f64>()
            / reps as f64;
        assert!((mean - want).abs() / want < 0.02, "mean {mean} want {want}");
    }

    #[test]
    fn sampler_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ChannelSamplerSpec::<f64> {
            aoa_sector: (-45f64.to_radians(), 45f64.to_radians()),
            ..Default::default()
        };
        let one = sample_su_channel(&spec, 1, &mut rng).unwrap();
        assert!(one.aoas[0].abs() <= 45f64.to_radians());

        for _ in 0..10_000 {
            let p = sample_su_channel(&spec, 3, &mut rng).unwrap();
            for i in 0..3 {
                assert!(p.aoas[i].abs() <= 45f64.to_radians());
                for j in i + 1..3 {
                    assert!((p.aoas[i] - p.aoas[j]).abs() >= 20f64.to_radians() - 1e-9);
                    assert!((p.aods[i].sin() - p.aods[j].sin()).abs() >= 0.1 - 1e-9);
                }
                // AoDs snapped to the 128-point direction-cosine grid.
                let idx = (p.aods[i].sin() + 1.0) * 127.0 / 2.0;
                assert!((idx - idx.round()).abs() < 1e-6);
                assert!((p.gains[i].norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn truncated_gaussian_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = GainModel::TruncatedGaussian { tau: 0.5 };
        let mut min_re = f64::INFINITY;
        let mut min_im = f64::INFINITY;
        for _ in 0..10_000 {
            let g: C = m.sample(&mut rng).unwrap();
            min_re = min_re.min(g.re.abs());
            min_im = min_im.min(g.im.abs());
        }
        assert!(min_re >= 0.5 && min_im >= 0.5);
    }

    #[test]
    fn infeasible_spacing_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ChannelSamplerSpec::<f64> {
            aoa_sector: (-0.05, 0.05),
            min_aoa_spacing: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            sample_su_channel(&spec, 2, &mut rng),
            Err(Error::InfeasibleSampling { .. })
        ));
    }

    #[test]
    fn on_grid_aoa_snapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = ChannelSamplerSpec::<f64> {
            aoa_sector: (-60f64.to_radians(), 60f64.to_radians()),
            on_grid_aoa: true,
            gain_model: GainModel::TruncatedGaussian { tau: 0.5 },
            ..Default::default()
        };
        let p = sample_mu_channel(&spec, &[1, 3, 2], &mut rng).unwrap();
        assert_eq!(p.n_users(), 3);
        for u in &p.users {
            for &a in &u.aoas {
                let deg = a.to_degrees();
                assert!((deg - deg.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coarse_grid_snapping_stays_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = ChannelSamplerSpec::<f64> {
            aoa_sector: (-89.9f64.to_radians(), 89.9f64.to_radians()),
            aod_sector: (-89.0f64.to_radians(), 89.0f64.to_radians()),
            min_aoa_spacing: 0.0,
            min_aod_spacing_cos: 0.0,
            aod_grid_size: 4,
            on_grid_aoa: true,
            ..Default::default()
        };
        for _ in 0..500 {
            let p = sample_su_channel(&spec, 3, &mut rng).unwrap();
            for &phi in &p.aods {
                assert!((phi.sin().abs() - 1.0 / 3.0).abs() < 1e-12);
            }
            assert!(p.aoas.iter().all(|a| a.to_degrees().abs() <= 89.0 + 1e-9));
        }
        let two = ChannelSamplerSpec::<f64> {
            aod_grid_size: 2,
            ..Default::default()
        };
        assert!(two.validate().is_err());
    }
}

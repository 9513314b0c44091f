//! Search grids for angle-of-arrival and angle-of-departure estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Angles of arrival searched by the Bartlett scan, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoaGrid<T> {
    angles: Vec<T>,
}

impl<T: Real> AoaGrid<T> {
    pub fn new(angles: Vec<T>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::invalid("aoa_grid", "grid is empty"));
        }
        // Slack for degree-to-radian rounding at the endpoints.
        let limit = T::frac_pi_2() + lit(1e-12);
        if angles.iter().any(|a| !(a.abs() <= limit)) {
            return Err(Error::invalid(
                "aoa_grid",
                "angles must lie in [-pi/2, pi/2]",
            ));
        }
        if angles.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "aoa_grid",
                "angles must be strictly increasing",
            ));
        }
        Ok(Self { angles })
    }

    /// Uniform grid `lo, lo + step, …, hi` given in degrees.
    pub fn uniform_degrees(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::invalid("aoa_grid", "need step > 0 and hi >= lo"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Self::new(
            (0..count)
                .map(|i| lit((lo + i as f64 * step).to_radians()))
                .collect(),
        )
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Index of the grid angle closest to `theta`; ties go to the lower index.
    pub fn nearest_index(&self, theta: T) -> usize {
        let pos = self.angles.partition_point(|&a| a < theta);
        if pos == 0 {
            return 0;
        }
        if pos == self.angles.len() {
            return pos - 1;
        }
        if theta - self.angles[pos - 1] <= self.angles[pos] - theta {
            pos - 1
        } else {
            pos
        }
    }

    /// True when `theta` coincides with a grid point up to `tol` radians.
    pub fn contains(&self, theta: T, tol: T) -> bool {
        (self.angles[self.nearest_index(theta)] - theta).abs() <= tol
    }
}

impl<T: Real> Default for AoaGrid<T> {
    fn default() -> Self {
        Self::uniform_degrees(-90.0, 90.0, 1.0).expect("default AoA grid is valid")
    }
}

/// `D` angles of departure uniform in direction cosine:
/// `sin φ_d = -1 + 2d/(D-1)` for `d = 0, …, D-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AodGrid<T> {
    angles: Vec<T>,
}

impl<T: Real> AodGrid<T> {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::invalid(
                "aod_grid_size",
                format!("must be a power of two of at least 2, got {size}"),
            ));
        }
        let step = lit::<T>(2.0) / lit((size - 1) as f64);
        let angles = (0..size)
            .map(|d| {
                let s = -T::one() + step * lit(d as f64);
                // Clamp guards asin against rounding past ±1.
                s.clamp(-T::one(), T::one()).asin()
            })
            .collect();
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Number of bisection stages, `log₂ D`.
    pub fn n_stages(&self) -> usize {
        self.angles.len().trailing_zeros() as usize
    }

    /// Grid index whose direction cosine is closest to `sin φ`.
    pub fn nearest_index(&self, phi: T) -> usize {
        let steps = lit::<T>((self.len() - 1) as f64);
        let idx = ((phi.sin() + T::one()) * steps / lit(2.0)).round();
        to_index(idx).min(self.len() - 1)
    }
}

impl<T: Real> Default for AodGrid<T> {
    fn default() -> Self {
        Self::new(128).expect("default AoD grid is valid")
    }
}

fn to_index<T: Real>(x: T) -> usize {
    let v = crate::scalar::to_f64(x);
    if v <= 0.0 {
        0
    } else {
        v as usize
    }
}

//! Level-dependent truncation tolerances.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerances `ε_f = Ch`, `ε_s = Ch²`, `ε_f^(k) = Ch^{k+1}` and
/// `ε_r^(k) = ε_s^(k+1) = Ch^{k+2}` for `k = 1..K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSchedule {
    pub c: f64,
    pub h: f64,
    pub k: usize,
}

impl ToleranceSchedule {
    pub fn new(c: f64, h: f64, k: usize) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("tolerance constant must be nonnegative, got {c}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("macro step must be positive, got {h}")));
        }
        Ok(Self { c, h, k })
    }

    /// All tolerances zero: exact truncation up to numerical rank.
    pub fn exact(h: f64, k: usize) -> Result<Self> {
        Self::new(0.0, h, k)
    }

    fn power(&self, n: i32) -> f64 {
        self.c * self.h.powi(n)
    }

    pub fn eps_f(&self) -> f64 {
        self.power(1)
    }

    pub fn eps_s(&self) -> f64 {
        self.power(2)
    }

    /// `ε_f^(k)`, used to evaluate the right-hand side at correction level `k`.
    pub fn eps_f_level(&self, k: usize) -> f64 {
        self.power(k as i32 + 1)
    }

    /// `ε_r^(k)`, used to round the level-`k` integral residual.
    pub fn eps_r_level(&self, k: usize) -> f64 {
        self.power(k as i32 + 2)
    }

    /// `ε_s^(k)` for `k ≥ 2`; level 1 uses [`Self::eps_s`].
    pub fn eps_s_level(&self, k: usize) -> f64 {
        if k <= 1 {
            self.eps_s()
        } else {
            self.power(k as i32 + 1)
        }
    }

    /// Smallest tolerance in the schedule.
    pub fn min_tolerance(&self) -> f64 {
        let mut all = vec![self.eps_f(), self.eps_s()];
        for k in 1..=self.k {
            all.extend([self.eps_f_level(k), self.eps_r_level(k), self.eps_s_level(k + 1)]);
        }
        all.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// `C = 2 (4π/N_x + 4π/N_y)⁻¹` for the `[−2π, 2π]²` benchmark grids.
pub fn grid_constant(nx: usize, ny: usize) -> f64 {
    2.0 / (4.0 * PI / nx as f64 + 4.0 * PI / ny as f64)
}

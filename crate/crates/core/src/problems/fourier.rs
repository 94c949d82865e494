//! Periodic grids on `[−2π, 2π)` and Fourier collocation differentiation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Length of the periodic interval.
pub const PERIOD: f64 = 4.0 * PI;

/// `n` equispaced points `x_i = −2π + i·4π/n`, right endpoint excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    pub n: usize,
    pub points: DVector<f64>,
    pub spacing: f64,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "periodic grids need an even number of points ≥ 8, got {n}"
            )));
        }
        let spacing = PERIOD / n as f64;
        Ok(Self {
            n,
            points: DVector::from_fn(n, |i, _| -2.0 * PI + i as f64 * spacing),
            spacing,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        self.points.map(f)
    }
}

/// First and second derivative collocation matrices for the grid's period.
pub fn fourier_diff_matrices(grid: &PeriodicGrid) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = grid.n;
    if n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("Fourier differentiation needs even n, got {n}")));
    }
    // Entries for period 2π, then rescaled to the 4π period.
    let h = 2.0 * PI / n as f64;
    let scale = 2.0 * PI / PERIOD;
    let mut d1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                d2[(i, j)] = (-PI * PI / (3.0 * h * h) - 1.0 / 6.0) * scale * scale;
                continue;
            }
            let k = i as isize - j as isize;
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let half = k as f64 * h / 2.0;
            d1[(i, j)] = 0.5 * sign / half.tan() * scale;
            d2[(i, j)] = -0.5 * sign / half.sin().powi(2) * scale * scale;
        }
    }
    Ok((d1, d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let g = PeriodicGrid::new(8).unwrap();
        assert_eq!(g.points[0], -2.0 * PI);
        assert!((g.points[4]).abs() < 1e-15);
        assert!(PeriodicGrid::new(9).is_err());
        assert!(PeriodicGrid::new(6).is_err());
    }

    #[test]
    fn constants_are_annihilated() {
        let g = PeriodicGrid::new(16).unwrap();
        let (d1, d2) = fourier_diff_matrices(&g).unwrap();
        let c = DVector::from_element(16, 3.0);
        assert!((&d1 * &c).amax() < 1e-12);
        assert!((&d2 * &c).amax() < 1e-11);
    }

    #[test]
    fn trigonometric_derivatives() {
        let g = PeriodicGrid::new(32).unwrap();
        let (d1, d2) = fourier_diff_matrices(&g).unwrap();
        let f = g.map(f64::sin);
        assert!((&d1 * &f - g.map(f64::cos)).amax() < 1e-10);
        assert!((&d2 * &f + &f).amax() < 1e-10);
        let f = g.map(|x| (0.5 * x).cos());
        assert!((&d1 * &f + g.map(|x| 0.5 * (0.5 * x).sin())).amax() < 1e-12);
    }

    #[test]
    fn spectral_convergence() {
        let err = |n: usize| {
            let g = PeriodicGrid::new(n).unwrap();
            let (d1, _) = fourier_diff_matrices(&g).unwrap();
            let f = g.map(|x| (0.5 * x).sin().exp());
            let df = g.map(|x| 0.5 * (0.5 * x).cos() * (0.5 * x).sin().exp());
            (&d1 * f - df).amax()
        };
        let (e32, e64) = (err(32), err(64));
        assert!(e64 < 1e-4 * e32 || e64 < 1e-13, "{e32} {e64}");
    }
}

//! The four benchmark problems on `[−2π, 2π]²`. Row index ↔ `x`, column
//! index ↔ `y`; an `x`-operator is `A_j`, a `y`-operator is `B_j` in `A_j X B_jᵀ`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lowrank::{round_terms, Factorization, LowRankTerm, TruncationMode};
use crate::operators::{CoefficientOperator, LinearMatrixOde, SourceFn};
use crate::scalar::{Scalar, ScalarField};

use super::fourier::{fourier_diff_matrices, PeriodicGrid};

/// Dense evaluator of an exact solution.
pub type ExactFn<T> = Arc<dyn Fn(f64) -> DMatrix<T> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    Manufactured,
    Schrodinger,
    Anisotropic,
    Rotation,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::Manufactured,
        ProblemId::Schrodinger,
        ProblemId::Anisotropic,
        ProblemId::Rotation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Manufactured => "manufactured",
            ProblemId::Schrodinger => "schrodinger",
            ProblemId::Anisotropic => "anisotropic",
            ProblemId::Rotation => "rotation",
        }
    }

    pub fn field(self) -> ScalarField {
        match self {
            ProblemId::Schrodinger => ScalarField::Complex,
            _ => ScalarField::Real,
        }
    }

    pub fn default_final_time(self) -> f64 {
        match self {
            ProblemId::Schrodinger => 2.0,
            _ => std::f64::consts::PI,
        }
    }

    pub fn has_exact_solution(self) -> bool {
        matches!(self, ProblemId::Manufactured | ProblemId::Rotation)
    }

    pub fn description(self) -> &'static str {
        match self {
            ProblemId::Manufactured => "rotation-diffusion with a rank-1 manufactured solution",
            ProblemId::Schrodinger => "Schrödinger equation with a quadratic potential",
            ProblemId::Anisotropic => "solid body rotation with anisotropic diffusion",
            ProblemId::Rotation => "pure solid body rotation",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem `{s}`")))
    }
}

/// A discretized benchmark: equation, initial value and optional exact solution.
#[derive(Clone)]
pub struct Problem<T: Scalar> {
    pub id: ProblemId,
    pub grid_x: PeriodicGrid,
    pub grid_y: PeriodicGrid,
    pub ode: Arc<LinearMatrixOde<T>>,
    pub x0: Factorization<T>,
    pub exact: Option<ExactFn<T>>,
}

impl<T: Scalar> fmt::Debug for Problem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("nx", &self.grid_x.n)
            .field("ny", &self.grid_y.n)
            .field("rank0", &self.x0.rank())
            .finish()
    }
}

impl<T: Scalar> Problem<T> {
    /// Grid-scaled error `√(ΔxΔy) ‖a − b‖_F`.
    pub fn l2_error(&self, a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
        (self.grid_x.spacing * self.grid_y.spacing).sqrt() * (a - b).norm()
    }
}

#[derive(Debug, Clone)]
pub enum BenchmarkProblem {
    Real(Problem<f64>),
    Complex(Problem<Complex64>),
}

impl BenchmarkProblem {
    pub fn build(id: ProblemId, nx: usize, ny: usize) -> Result<Self> {
        let gx = PeriodicGrid::new(nx)?;
        let gy = PeriodicGrid::new(ny)?;
        Ok(match id {
            ProblemId::Manufactured => BenchmarkProblem::Real(example1_manufactured(&gx, &gy)?),
            ProblemId::Schrodinger => BenchmarkProblem::Complex(example2_schrodinger(&gx, &gy)?),
            ProblemId::Anisotropic => BenchmarkProblem::Real(example3_anisotropic(&gx, &gy)?),
            ProblemId::Rotation => BenchmarkProblem::Real(example4_rotation(&gx, &gy)?),
        })
    }

    pub fn id(&self) -> ProblemId {
        match self {
            BenchmarkProblem::Real(p) => p.id,
            BenchmarkProblem::Complex(p) => p.id,
        }
    }

    pub fn field(&self) -> ScalarField {
        match self {
            BenchmarkProblem::Real(_) => ScalarField::Real,
            BenchmarkProblem::Complex(_) => ScalarField::Complex,
        }
    }
}

/// Rotation terms `y u_x − x u_y`.
fn rotation_terms(
    x: &DVector<f64>,
    y: &DVector<f64>,
    dx: &DMatrix<f64>,
    dy: &DMatrix<f64>,
) -> Result<Vec<(CoefficientOperator<f64>, CoefficientOperator<f64>)>> {
    Ok(vec![
        (
            CoefficientOperator::scaled_real(1.0, dx.clone())?,
            CoefficientOperator::diagonal(y.clone())?,
        ),
        (
            CoefficientOperator::diagonal(-x)?,
            CoefficientOperator::scaled_real(1.0, dy.clone())?,
        ),
    ])
}

/// `u_t = y u_x − x u_y + d Δu + φ` with `d = 1/5` and exact solution
/// `exp(−(x² + 3y² + 2dt))`.
pub fn example1_manufactured(gx: &PeriodicGrid, gy: &PeriodicGrid) -> Result<Problem<f64>> {
    let d = 0.2;
    let (x, y) = (&gx.points, &gy.points);
    let (d1x, d2x) = fourier_diff_matrices(gx)?;
    let (d1y, d2y) = fourier_diff_matrices(gy)?;
    let mut terms = rotation_terms(x, y, &d1x, &d1y)?;
    terms.push((
        CoefficientOperator::scaled_real(d, d2x)?,
        CoefficientOperator::identity(gy.n),
    ));
    terms.push((
        CoefficientOperator::identity(gx.n),
        CoefficientOperator::scaled_real(d, d2y)?,
    ));

    let fx = x.map(|x| (-x * x).exp());
    let fy = y.map(|y| (-3.0 * y * y).exp());
    let x0 = Factorization::outer(&fx, &fy);

    // φ = e^{−2dt} [gx ⊗ (6d − 36d y²) gy − 4 x gx ⊗ y gy − 4d x² gx ⊗ gy]
    let parts = [
        (fx.clone(), fy.zip_map(y, |g, y| (6.0 * d - 36.0 * d * y * y) * g)),
        (fx.zip_map(x, |g, x| x * g), fy.zip_map(y, |g, y| -4.0 * y * g)),
        (fx.zip_map(x, |g, x| x * x * g), fy.map(|g| -4.0 * d * g)),
    ];
    let terms_g: Vec<LowRankTerm<f64>> = parts
        .iter()
        .map(|(a, b)| LowRankTerm::from(&Factorization::outer(a, b)))
        .collect();
    let g0 = round_terms(&terms_g, (gx.n, gy.n), 0.0, TruncationMode::Hard)?;
    let source: SourceFn<f64> = Arc::new(move |t| g0.scaled((-2.0 * d * t).exp()));

    let dense0 = x0.to_dense();
    let exact: ExactFn<f64> = Arc::new(move |t| &dense0 * (-2.0 * d * t).exp());
    Ok(Problem {
        id: ProblemId::Manufactured,
        grid_x: gx.clone(),
        grid_y: gy.clone(),
        ode: Arc::new(LinearMatrixOde::new(terms, Some(source))?),
        x0,
        exact: Some(exact),
    })
}

/// `u_t = (i/2) Δu − i V u` with `V = x² − xy + (3/2) y²`, started from
/// `π^{−1/2} exp(−x²/2 − (y−1)²/2)`.
pub fn example2_schrodinger(gx: &PeriodicGrid, gy: &PeriodicGrid) -> Result<Problem<Complex64>> {
    let i = Complex64::i();
    let (x, y) = (&gx.points, &gy.points);
    let (_, d2x) = fourier_diff_matrices(gx)?;
    let (_, d2y) = fourier_diff_matrices(gy)?;
    let cx = |v: DVector<f64>| v.map(|a| Complex64::new(a, 0.0));
    let terms = vec![
        (
            CoefficientOperator::scaled_real(i * 0.5, d2x)?,
            CoefficientOperator::identity(gy.n),
        ),
        (
            CoefficientOperator::identity(gx.n),
            CoefficientOperator::scaled_real(i * 0.5, d2y)?,
        ),
        (
            CoefficientOperator::diagonal(cx(x.map(|x| x * x)) * -i)?,
            CoefficientOperator::identity(gy.n),
        ),
        (
            CoefficientOperator::diagonal(cx(x.clone()) * i)?,
            CoefficientOperator::diagonal(cx(y.clone()))?,
        ),
        (
            CoefficientOperator::identity(gx.n),
            CoefficientOperator::diagonal(cx(y.map(|y| y * y)) * (-1.5 * i))?,
        ),
    ];
    let fx = cx(x.map(|x| (-0.5 * x * x).exp() / std::f64::consts::PI.sqrt()));
    let fy = cx(y.map(|y| (-0.5 * (y - 1.0) * (y - 1.0)).exp()));
    Ok(Problem {
        id: ProblemId::Schrodinger,
        grid_x: gx.clone(),
        grid_y: gy.clone(),
        ode: Arc::new(LinearMatrixOde::new(terms, None)?),
        x0: Factorization::outer(&fx, &fy),
        exact: None,
    })
}

/// `u_t = y u_x − x u_y + d R(u)` with `d = 0.01` and the four-term
/// anisotropic operator `R`, started from `exp(−(x² + 9y²))`.
pub fn example3_anisotropic(gx: &PeriodicGrid, gy: &PeriodicGrid) -> Result<Problem<f64>> {
    let d = 0.01;
    let (x, y) = (&gx.points, &gy.points);
    let (d1x, _) = fourier_diff_matrices(gx)?;
    let (d1y, _) = fourier_diff_matrices(gy)?;
    let mut terms = rotation_terms(x, y, &d1x, &d1y)?;

    let diag = |v: &DVector<f64>| DMatrix::from_diagonal(v);
    let a1 = x.map(|x| 1.0 + 0.1 * (0.5 * x).sin());
    let a2 = x.map(|x| 0.15 + 0.1 * (0.5 * x).sin());
    let a3 = x.map(|x| 0.15 + 0.1 * (0.5 * x).cos());
    let a4 = x.map(|x| 1.0 + 0.1 * (0.5 * x).sin());
    let b1 = y.map(|y| 1.0 + 0.1 * (0.5 * y).cos());
    let b2 = y.map(|y| 0.15 + 0.1 * (0.5 * y).cos());
    let b3 = y.map(|y| 0.15 + 0.1 * (0.5 * y).sin());
    let b4 = y.map(|y| 1.0 + 0.1 * (0.5 * y).cos());

    // b1 ∂x(a1 ∂x u)
    terms.push((
        CoefficientOperator::scaled_real(d, &d1x * diag(&a1) * &d1x)?,
        CoefficientOperator::diagonal(b1)?,
    ));
    // b2 ∂x∂y(a2 u)
    terms.push((
        CoefficientOperator::scaled_real(d, &d1x * diag(&a2))?,
        CoefficientOperator::scaled_real(1.0, diag(&b2) * &d1y)?,
    ));
    // a3 ∂x∂y(b3 u)
    terms.push((
        CoefficientOperator::scaled_real(d, diag(&a3) * &d1x)?,
        CoefficientOperator::scaled_real(1.0, &d1y * diag(&b3))?,
    ));
    // a4 ∂y(b4 u)
    terms.push((
        CoefficientOperator::diagonal(a4 * d)?,
        CoefficientOperator::scaled_real(1.0, &d1y * diag(&b4))?,
    ));

    let fx = x.map(|x| (-x * x).exp());
    let fy = y.map(|y| (-9.0 * y * y).exp());
    Ok(Problem {
        id: ProblemId::Anisotropic,
        grid_x: gx.clone(),
        grid_y: gy.clone(),
        ode: Arc::new(LinearMatrixOde::new(terms, None)?),
        x0: Factorization::outer(&fx, &fy),
        exact: None,
    })
}

/// Initial profile of the pure rotation problem.
pub fn rotation_profile(x: f64, y: f64) -> f64 {
    (-(5.0 * x * x + 5.0 * y * y + 8.0 * x * y)).exp()
}

/// `u_t = y u_x − x u_y` with exact solution `u₀(R(−t)(x, y))`.
pub fn example4_rotation(gx: &PeriodicGrid, gy: &PeriodicGrid) -> Result<Problem<f64>> {
    let (x, y) = (gx.points.clone(), gy.points.clone());
    let (d1x, _) = fourier_diff_matrices(gx)?;
    let (d1y, _) = fourier_diff_matrices(gy)?;
    let terms = rotation_terms(&x, &y, &d1x, &d1y)?;
    let exact: ExactFn<f64> = Arc::new(move |t| {
        let (c, s) = (t.cos(), t.sin());
        DMatrix::from_fn(x.len(), y.len(), |i, j| {
            let (p, q) = (x[i], y[j]);
            rotation_profile(p * c + q * s, -p * s + q * c)
        })
    });
    let x0 = Factorization::from_dense(&exact(0.0))?;
    Ok(Problem {
        id: ProblemId::Rotation,
        grid_x: gx.clone(),
        grid_y: gy.clone(),
        ode: Arc::new(LinearMatrixOde::new(terms, None)?),
        x0,
        exact: Some(exact),
    })
}

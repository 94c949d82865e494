//! Solvers for the implicit systems of the mBUG step: the tall K/L-step
//! Sylvester equations and the small projected S-step equation.

pub mod krylov;

use std::fmt;

use nalgebra::DMatrix;

use crate::dense::{solve_dense, SOLVE_RTOL};
use crate::error::{Error, Result};
use crate::operators::{CoefficientOperator, LinearMatrixOde};
use crate::scalar::Scalar;

use krylov::{gmres, richardson, KrylovOutcome};

/// Floor on the relative residual requested from the K/L solver.
pub const TALL_RTOL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// Diagonal of the vectorized operator.
    Jacobi,
    /// `I − dt Σ_j γ_j A_j` with `γ_j = tr(C_j)/r`, factored once per solve.
    MeanField,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub preconditioner: Preconditioner,
    pub restart: usize,
    pub max_iter: usize,
    /// Largest admissible S-step dimension.
    pub s_cap: usize,
    /// S-step systems with at most this many unknowns are solved directly.
    pub s_direct_max: usize,
    /// K/L systems with at most this many unknowns fall back to a direct
    /// solve when the iterative solvers stall.
    pub tall_direct_max: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            preconditioner: Preconditioner::MeanField,
            restart: 40,
            max_iter: 500,
            s_cap: 256,
            s_direct_max: 400,
            tall_direct_max: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    K,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveKind {
    K,
    L,
    S,
}

impl fmt::Display for SolveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveKind::K => "K",
            SolveKind::L => "L",
            SolveKind::S => "S",
        })
    }
}

/// Residual log entry for one implicit solve. Residuals are relative to the
/// right-hand side norm.
#[derive(Debug, Clone, Copy)]
pub struct SolveRecord {
    pub kind: SolveKind,
    pub residual: f64,
    pub target: f64,
    pub iterations: usize,
}

impl SolveRecord {
    pub fn satisfied(&self) -> bool {
        self.residual <= self.target
    }
}

/// Relative tolerance for a K/L solve: two orders below the smallest active
/// truncation tolerance, floored at [`TALL_RTOL_FLOOR`].
pub fn tall_tolerance(eps_min: f64, rhs_norm: f64) -> f64 {
    if rhs_norm > 0.0 {
        (1e-2 * eps_min / rhs_norm).max(TALL_RTOL_FLOOR)
    } else {
        TALL_RTOL_FLOOR
    }
}

fn relative(residual: f64, rhs_norm: f64) -> f64 {
    if rhs_norm > 0.0 {
        residual / rhs_norm
    } else {
        residual
    }
}

/// `X − dt Σ_j L_j X R_jᵀ = rhs` with small dense coefficients.
#[derive(Debug, Clone)]
pub struct SylvesterSpec<T: Scalar> {
    pub left: Vec<DMatrix<T>>,
    pub right: Vec<DMatrix<T>>,
    pub dt: f64,
    pub rhs: DMatrix<T>,
}

impl<T: Scalar> SylvesterSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.left.len() != self.right.len() {
            return Err(Error::InvalidInput(format!(
                "{} left coefficients but {} right coefficients",
                self.left.len(),
                self.right.len()
            )));
        }
        let (r1, r2) = self.rhs.shape();
        for (a, b) in self.left.iter().zip(&self.right) {
            if a.shape() != (r1, r1) || b.shape() != (r2, r2) {
                return Err(Error::InvalidInput(format!(
                    "coefficients {:?} and {:?} do not match an unknown of shape {:?}",
                    a.shape(),
                    b.shape(),
                    (r1, r2)
                )));
            }
        }
        if !(self.dt >= 0.0) {
            return Err(Error::InvalidParameter(format!("step must be nonnegative, got {}", self.dt)));
        }
        Ok(())
    }

    /// `X − dt Σ_j L_j X R_jᵀ`.
    pub fn apply(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = x.clone();
        let dt = T::from_real(self.dt);
        for (a, b) in self.left.iter().zip(&self.right) {
            out -= (a * x * b.transpose()) * dt;
        }
        out
    }

    /// `I − dt Σ_j R_j ⊗ L_j`, acting on column-major `vec(X)`.
    pub fn kronecker(&self) -> DMatrix<T> {
        let n = self.rhs.len();
        let mut m = DMatrix::identity(n, n);
        let dt = T::from_real(self.dt);
        for (a, b) in self.left.iter().zip(&self.right) {
            m -= b.kronecker(a) * dt;
        }
        m
    }
}

/// Solves the projected S-step equation `S − dt Σ_j Â_j S B̂_jᵀ = rhs`.
pub fn solve_s_step<T: Scalar>(
    ahat: &[DMatrix<T>],
    bhat: &[DMatrix<T>],
    dt: f64,
    rhs: &DMatrix<T>,
    opts: &SolverOptions,
) -> Result<(DMatrix<T>, SolveRecord)> {
    let spec = SylvesterSpec {
        left: ahat.to_vec(),
        right: bhat.to_vec(),
        dt,
        rhs: rhs.clone(),
    };
    spec.validate()?;
    let (r1, r2) = rhs.shape();
    let size = r1.max(r2);
    if size > opts.s_cap {
        return Err(Error::Capacity { size, cap: opts.s_cap });
    }
    let rhs_norm = rhs.norm();
    let mut record = SolveRecord {
        kind: SolveKind::S,
        residual: 0.0,
        target: SOLVE_RTOL,
        iterations: 0,
    };
    if dt == 0.0 || rhs_norm == 0.0 || r1 * r2 == 0 {
        return Ok((rhs.clone(), record));
    }

    let s = if r1 * r2 <= opts.s_direct_max {
        let b = DMatrix::from_column_slice(r1 * r2, 1, rhs.as_slice());
        let x = solve_dense(&spec.kronecker(), &b)?;
        DMatrix::from_column_slice(r1, r2, x.as_slice())
    } else {
        let dtt = T::from_real(dt);
        let mut m = DMatrix::<T>::identity(r1, r1);
        for (a, b) in ahat.iter().zip(bhat) {
            let gamma = b.trace().unscale(r2 as f64);
            m -= a * (gamma * dtt);
        }
        let lu = m.lu();
        let precond = |x: &DMatrix<T>| -> Result<DMatrix<T>> {
            Ok(lu.solve(x).unwrap_or_else(|| x.clone()))
        };
        let target = 0.5 * SOLVE_RTOL * rhs_norm;
        let apply = |x: &DMatrix<T>| Ok(spec.apply(x));
        let x0 = precond(rhs)?;
        let out = gmres(apply, precond, rhs, x0, target, opts.restart, opts.max_iter.max(1000))?;
        record.iterations = out.iterations;
        if !out.converged {
            return Err(Error::SolverFailure {
                iterations: out.iterations,
                residual: relative(out.residual, rhs_norm),
                target: SOLVE_RTOL,
            });
        }
        out.x
    };
    record.residual = relative((rhs - spec.apply(&s)).norm(), rhs_norm);
    Ok((s, record))
}

/// Coefficients `C_j = Wᴴ B_jᵀ W` of the tall equation for basis `W`.
fn right_coefficients<T: Scalar>(ode: &LinearMatrixOde<T>, basis: &DMatrix<T>) -> Result<Vec<DMatrix<T>>> {
    ode.terms()
        .iter()
        .map(|(_, b)| Ok(basis.ad_mul(&b.apply_transpose(basis)?)))
        .collect()
}

/// Applies `K ↦ K − dt Σ_j A_j K C_j`.
fn tall_apply<T: Scalar>(
    ops: &[(CoefficientOperator<T>, CoefficientOperator<T>)],
    coeffs: &[DMatrix<T>],
    dt: f64,
    k: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let mut out = k.clone();
    let dt = T::from_real(dt);
    for ((a, _), c) in ops.iter().zip(coeffs) {
        out -= a.apply(k)? * (c * dt);
    }
    Ok(out)
}

enum TallPrecond<T: Scalar> {
    None,
    Diagonal(DMatrix<T>),
    Lu(nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>),
}

impl<T: Scalar> TallPrecond<T> {
    fn build(
        kind: Preconditioner,
        ops: &[(CoefficientOperator<T>, CoefficientOperator<T>)],
        coeffs: &[DMatrix<T>],
        dt: f64,
        m1: usize,
        r: usize,
    ) -> Self {
        let dt = T::from_real(dt);
        match kind {
            Preconditioner::None => TallPrecond::None,
            Preconditioner::Jacobi => {
                let mut d = DMatrix::from_element(m1, r, T::one());
                for ((a, _), c) in ops.iter().zip(coeffs) {
                    let ad = a.diagonal_entries();
                    for l in 0..r {
                        for i in 0..m1 {
                            d[(i, l)] -= dt * ad[i] * c[(l, l)];
                        }
                    }
                }
                if d.iter().any(|z| z.modulus() < 1e-12) {
                    TallPrecond::None
                } else {
                    TallPrecond::Diagonal(d)
                }
            }
            Preconditioner::MeanField => {
                let mut m = DMatrix::<T>::identity(m1, m1);
                for ((a, _), c) in ops.iter().zip(coeffs) {
                    let gamma = c.trace().unscale(r as f64);
                    if gamma.modulus() > 0.0 {
                        m -= a.to_dense() * (gamma * dt);
                    }
                }
                let lu = m.lu();
                if lu.is_invertible() {
                    TallPrecond::Lu(lu)
                } else {
                    TallPrecond::None
                }
            }
        }
    }

    fn apply(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        Ok(match self {
            TallPrecond::None => x.clone(),
            TallPrecond::Diagonal(d) => x.component_div(d),
            TallPrecond::Lu(lu) => lu.solve(x).unwrap_or_else(|| x.clone()),
        })
    }
}

/// Solves the K-step equation `K − dt Σ_j A_j K C_j = rhs` with
/// `C_j = Vᴴ B_jᵀ V` for `basis = V`. The L-step is the K-step of the
/// adjoint equation with `basis = U`.
pub fn solve_tall_sylvester<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    basis: &DMatrix<T>,
    dt: f64,
    rhs: &DMatrix<T>,
    side: Side,
    tol_rel: f64,
    opts: &SolverOptions,
) -> Result<(DMatrix<T>, SolveRecord)> {
    let sys = match side {
        Side::K => ode,
        Side::L => ode.adjoint(),
    };
    let (m1, m2) = sys.shape();
    let r = basis.ncols();
    if basis.nrows() != m2 || rhs.shape() != (m1, r) {
        return Err(Error::InvalidInput(format!(
            "tall solve with basis {:?} and rhs {:?} for an equation of shape {:?}",
            basis.shape(),
            rhs.shape(),
            (m1, m2)
        )));
    }
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("step must be nonnegative, got {dt}")));
    }
    let kind = match side {
        Side::K => SolveKind::K,
        Side::L => SolveKind::L,
    };
    let rhs_norm = rhs.norm();
    let mut record = SolveRecord {
        kind,
        residual: 0.0,
        target: tol_rel,
        iterations: 0,
    };
    if dt == 0.0 || rhs_norm == 0.0 || r == 0 {
        return Ok((rhs.clone(), record));
    }

    let coeffs = right_coefficients(sys, basis)?;
    let ops = sys.terms();
    let apply = |k: &DMatrix<T>| tall_apply(ops, &coeffs, dt, k);
    let pre = TallPrecond::build(opts.preconditioner, ops, &coeffs, dt, m1, r);
    let precond = |x: &DMatrix<T>| pre.apply(x);
    // Aim slightly below the target so the explicit residual check has slack.
    let tol_abs = 0.5 * tol_rel * rhs_norm;

    let x0 = precond(rhs)?;
    let mut out: KrylovOutcome<T> = gmres(apply, precond, rhs, x0, tol_abs, opts.restart, opts.max_iter)?;
    let mut iterations = out.iterations;
    if !out.converged {
        let remaining = opts.max_iter.saturating_sub(iterations).max(opts.restart);
        out = richardson(apply, precond, rhs, out.x, tol_abs, remaining)?;
        iterations += out.iterations;
    }
    if !out.converged && m1 * r <= opts.tall_direct_max {
        let spec = SylvesterSpec {
            left: ops.iter().map(|(a, _)| a.to_dense()).collect(),
            right: coeffs.iter().map(|c| c.transpose()).collect(),
            dt,
            rhs: rhs.clone(),
        };
        let b = DMatrix::from_column_slice(m1 * r, 1, rhs.as_slice());
        let x = DMatrix::from_column_slice(m1, r, solve_dense(&spec.kronecker(), &b)?.as_slice());
        let residual = (rhs - spec.apply(&x)).norm();
        out = KrylovOutcome {
            converged: residual <= tol_rel * rhs_norm,
            x,
            residual,
            iterations: 0,
        };
    }
    record.iterations = iterations;
    record.residual = relative(out.residual, rhs_norm);
    if !out.converged {
        return Err(Error::SolverFailure {
            iterations,
            residual: record.residual,
            target: tol_rel,
        });
    }
    Ok((out.x, record))
}

//! Full-rank SDC with an implicit Euler base scheme, solved densely through
//! the vectorized operator. Intended as an oracle on small problems.

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{Error, Result};
use crate::operators::LinearMatrixOde;
use crate::scalar::Scalar;
use crate::sdc::grid::SdcGrid;

/// Largest `m1·m2` accepted by the dense solvers.
pub const DENSE_ORACLE_MAX: usize = 10_000;

/// Factored `I − dt Σ_j B_j ⊗ A_j` for one step size.
pub struct ImplicitSolver<T: Scalar> {
    shape: (usize, usize),
    system: DMatrix<T>,
    lu: LU<T, Dyn, Dyn>,
}

impl<T: Scalar> ImplicitSolver<T> {
    pub fn new(ode: &LinearMatrixOde<T>, dt: f64) -> Result<Self> {
        let (m1, m2) = ode.shape();
        let n = m1 * m2;
        if n > DENSE_ORACLE_MAX {
            return Err(Error::Capacity {
                size: n,
                cap: DENSE_ORACLE_MAX,
            });
        }
        let system = DMatrix::identity(n, n) - ode.kronecker_dense() * T::from_real(dt);
        let lu = system.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Singular { condition: f64::INFINITY });
        }
        Ok(Self {
            shape: (m1, m2),
            system,
            lu,
        })
    }

    /// Solves `X − dt Σ_j A_j X B_jᵀ = rhs` with one refinement sweep.
    pub fn solve(&self, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
        let (m1, m2) = self.shape;
        let b = DMatrix::from_column_slice(m1 * m2, 1, rhs.as_slice());
        let singular = || Error::Singular { condition: f64::INFINITY };
        let mut x = self.lu.solve(&b).ok_or_else(singular)?;
        let r = &b - &self.system * &x;
        x += self.lu.solve(&r).ok_or_else(singular)?;
        Ok(DMatrix::from_column_slice(m1, m2, x.as_slice()))
    }
}

/// One implicit Euler step `X₁ = X₀ + dt F(X₁, t + dt)`.
pub fn implicit_euler_dense<T: Scalar>(ode: &LinearMatrixOde<T>, x: &DMatrix<T>, t: f64, dt: f64) -> Result<DMatrix<T>> {
    let solver = ImplicitSolver::new(ode, dt)?;
    let mut rhs = x.clone();
    if ode.has_source() {
        rhs += ode.source_at(t + dt).to_dense() * T::from_real(dt);
    }
    solver.solve(&rhs)
}

/// Full-rank SDC step over `grid` with `k` correction sweeps.
pub fn sdc_dense_step<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x: &DMatrix<T>,
    grid: &SdcGrid,
    k: usize,
) -> Result<DMatrix<T>> {
    let p = grid.p;
    let solvers = grid
        .sub_steps
        .iter()
        .map(|&dt| ImplicitSolver::new(ode, dt))
        .collect::<Result<Vec<_>>>()?;

    let mut level = Vec::with_capacity(p + 1);
    level.push(x.clone());
    for m in 0..p {
        let dt = T::from_real(grid.sub_steps[m]);
        let mut rhs = level[m].clone();
        if ode.has_source() {
            rhs += ode.source_at(grid.nodes[m + 1]).to_dense() * dt;
        }
        level.push(solvers[m].solve(&rhs)?);
    }

    for _ in 0..k {
        let f: Vec<DMatrix<T>> = level
            .iter()
            .zip(&grid.nodes)
            .map(|(xs, &ts)| ode.apply_dense(xs, ts))
            .collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(p + 1);
        next.push(x.clone());
        for m in 0..p {
            let dt = grid.sub_steps[m];
            // The source cancels between F(X^{k+1}_{m+1}) and F(X^k_{m+1}).
            let mut rhs = &next[m] - ode.apply_linear_dense(&level[m + 1])? * T::from_real(dt);
            for (s, fs) in f.iter().enumerate() {
                rhs += fs * T::from_real(dt * grid.weights[(m, s)]);
            }
            next.push(solvers[m].solve(&rhs)?);
        }
        level = next;
    }
    Ok(level.pop().expect("grid has at least two nodes"))
}

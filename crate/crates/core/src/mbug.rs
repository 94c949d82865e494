//! The rank-adaptive merge-BUG step.

use nalgebra::DMatrix;

use crate::dense::{qr_column_pivoted, svd};
use crate::error::Result;
use crate::lowrank::{scale_columns, truncate, Factorization, TruncationMode, NUMERICAL_ZERO};
use crate::operators::{project, LinearMatrixOde};
use crate::scalar::Scalar;
use crate::sylvester::{solve_s_step, solve_tall_sylvester, tall_tolerance, Side, SolveRecord, SolverOptions};

/// Solver settings shared by all implicit solves of a step.
#[derive(Debug, Clone, Copy)]
pub struct StepSettings {
    pub solver: SolverOptions,
    /// Tolerance the K/L relative residual target is derived from. `None`
    /// uses the smallest truncation tolerance of the step.
    pub kl_eps: Option<f64>,
}

impl Default for StepSettings {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            kl_eps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MbugStepReport {
    pub rank_before: usize,
    pub rank_f: usize,
    /// Columns of the merged column basis `Û`.
    pub rank_merged: usize,
    pub rank_after: usize,
    pub kl_residuals: [f64; 2],
    pub s_residual: f64,
    pub solves: Vec<SolveRecord>,
}

/// Orthonormal basis for the column span of the given blocks. Columns are
/// normalized before the pivoted QR so that the rank cutoff is scale-free.
pub fn merge_basis<T: Scalar>(blocks: &[&DMatrix<T>]) -> Result<DMatrix<T>> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let mut cols = Vec::new();
    for b in blocks {
        for c in b.column_iter() {
            let n = c.norm();
            if n > 0.0 && n.is_finite() {
                cols.push(c.unscale(n));
            }
        }
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(rows, 0));
    }
    Ok(qr_column_pivoted(&DMatrix::from_columns(&cols))?.q)
}

/// `Ûᴴ (U diag(s) Vᴴ) V̂` without forming the product.
pub(crate) fn project_factorization<T: Scalar>(f: &Factorization<T>, uh: &DMatrix<T>, vh: &DMatrix<T>) -> DMatrix<T> {
    if f.rank() == 0 {
        return DMatrix::zeros(uh.ncols(), vh.ncols());
    }
    scale_columns(&uh.ad_mul(f.u()), f.s()) * f.v().ad_mul(vh)
}

/// Solves the Galerkin equation on `span(Û) ⊗ span(V̂)`:
/// `S − dt Σ_j (ÛᴴA_jÛ) S (V̂ᴴB_jᵀV̂) = rhs + dt ÛᴴG(t1)V̂`.
pub(crate) fn galerkin_solve<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    uh: &DMatrix<T>,
    vh: &DMatrix<T>,
    rhs: DMatrix<T>,
    t1: f64,
    dt: f64,
    opts: &SolverOptions,
) -> Result<(DMatrix<T>, SolveRecord)> {
    let mut rhs = rhs;
    if ode.has_source() {
        rhs += project_factorization(&ode.source_at(t1), uh, vh) * T::from_real(dt);
    }
    let mut ahat = Vec::with_capacity(ode.terms().len());
    let mut bhat = Vec::with_capacity(ode.terms().len());
    for (a, b) in ode.terms() {
        ahat.push(project(a, uh)?);
        bhat.push(vh.ad_mul(&b.apply_transpose(vh)?).transpose());
    }
    solve_s_step(&ahat, &bhat, dt, &rhs, opts)
}

/// Truncates `Û S V̂ᴴ` through the SVD of the small core and rotates the bases.
pub(crate) fn truncate_core<T: Scalar>(
    uh: &DMatrix<T>,
    core: &DMatrix<T>,
    vh: &DMatrix<T>,
    eps: f64,
    mode: TruncationMode,
) -> Result<Factorization<T>> {
    if core.is_empty() {
        return Ok(Factorization::zero(uh.nrows(), vh.nrows()));
    }
    let dec = svd(core)?;
    let floor = NUMERICAL_ZERO * dec.s.first().copied().unwrap_or(0.0);
    let small = truncate(&Factorization::from_svd(dec, floor), eps, mode)?;
    Ok(Factorization::from_parts_unchecked(
        uh * small.u(),
        small.s().to_vec(),
        vh * small.v(),
    ))
}

/// One rank-adaptive merge-BUG step from `t` to `t + dt` with the default
/// solver settings.
pub fn mbug_step<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x: &Factorization<T>,
    t: f64,
    dt: f64,
    eps_f: f64,
    eps_s: f64,
    mode: TruncationMode,
) -> Result<(Factorization<T>, MbugStepReport)> {
    mbug_step_with(ode, x, t, dt, eps_f, eps_s, mode, &StepSettings::default())
}

#[allow(clippy::too_many_arguments)]
pub fn mbug_step_with<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x: &Factorization<T>,
    t: f64,
    dt: f64,
    eps_f: f64,
    eps_s: f64,
    mode: TruncationMode,
    settings: &StepSettings,
) -> Result<(Factorization<T>, MbugStepReport)> {
    if !(dt > 0.0) {
        return Err(crate::Error::InvalidParameter(format!("step must be positive, got {dt}")));
    }
    if !(eps_f >= 0.0 && eps_s >= 0.0) {
        return Err(crate::Error::InvalidParameter(format!(
            "tolerances must be nonnegative, got ({eps_f}, {eps_s})"
        )));
    }
    let t1 = t + dt;
    let dtt = T::from_real(dt);

    let f = ode.eval_lowrank(x, t, eps_f, mode).map_err(|e| e.at("F-truncation"))?;

    let mut k_rhs = x.us();
    let mut l_rhs = x.vs();
    let g = ode.source_at(t1);
    if g.rank() > 0 {
        k_rhs += scale_columns(g.u(), g.s()) * g.v().ad_mul(x.v()) * dtt;
        l_rhs += scale_columns(g.v(), g.s()) * g.u().ad_mul(x.u()) * dtt;
    }
    let kl_eps = settings.kl_eps.unwrap_or(eps_f.min(eps_s));
    let (k, k_rec) = solve_tall_sylvester(
        ode,
        x.v(),
        dt,
        &k_rhs,
        Side::K,
        tall_tolerance(kl_eps, k_rhs.norm()),
        &settings.solver,
    )
    .map_err(|e| e.at("K-step"))?;
    let (l, l_rec) = solve_tall_sylvester(
        ode,
        x.u(),
        dt,
        &l_rhs,
        Side::L,
        tall_tolerance(kl_eps, l_rhs.norm()),
        &settings.solver,
    )
    .map_err(|e| e.at("L-step"))?;

    let uh = merge_basis(&[x.u(), f.u(), &k])?;
    let vh = merge_basis(&[x.v(), f.v(), &l])?;
    let rhs = project_factorization(x, &uh, &vh);
    let (s, s_rec) = galerkin_solve(ode, &uh, &vh, rhs, t1, dt, &settings.solver).map_err(|e| e.at("S-step"))?;
    let next = truncate_core(&uh, &s, &vh, eps_s, mode)?;

    let report = MbugStepReport {
        rank_before: x.rank(),
        rank_f: f.rank(),
        rank_merged: uh.ncols(),
        rank_after: next.rank(),
        kl_residuals: [k_rec.residual, l_rec.residual],
        s_residual: s_rec.residual,
        solves: vec![k_rec, l_rec, s_rec],
    };
    Ok((next, report))
}

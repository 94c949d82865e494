//! SDC-mBUG: an mBUG prediction sweep followed by low-rank correction
//! sweeps whose implicit parts are Galerkin S-steps only.

use crate::error::{Error, Result};
use crate::lowrank::{round_terms, truncate, Factorization, LowRankTerm, TruncationMode};
use crate::mbug::{galerkin_solve, mbug_step_with, merge_basis, project_factorization, truncate_core, StepSettings};
use crate::operators::LinearMatrixOde;
use crate::scalar::Scalar;
use crate::sdc::grid::{lobatto_grid, SdcGrid};
use crate::sdc::schedule::ToleranceSchedule;
use crate::sylvester::SolveRecord;

/// Ranks recorded during one sweep, indexed by subnode.
#[derive(Debug, Clone, Default)]
pub struct LevelDiagnostics {
    /// Sweep index: 0 for the prediction, `k` for the `k`-th correction.
    pub level: usize,
    pub f_ranks: Vec<usize>,
    pub r_ranks: Vec<usize>,
    pub merged_ranks: Vec<usize>,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct SdcDiagnostics {
    pub levels: Vec<LevelDiagnostics>,
    pub solves: Vec<SolveRecord>,
}

fn with_kl_eps(settings: &StepSettings, sched: &ToleranceSchedule) -> StepSettings {
    StepSettings {
        kl_eps: Some(settings.kl_eps.unwrap_or_else(|| sched.min_tolerance())),
        ..*settings
    }
}

/// One SDC-mBUG macro step over `grid` with `k` correction sweeps.
pub fn sdc_mbug_step<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x: &Factorization<T>,
    grid: &SdcGrid,
    k: usize,
    sched: &ToleranceSchedule,
    mode: TruncationMode,
    settings: &StepSettings,
) -> Result<(Factorization<T>, SdcDiagnostics)> {
    let p = grid.p;
    let settings = with_kl_eps(settings, sched);
    let mut diag = SdcDiagnostics::default();

    let mut states = Vec::with_capacity(p + 1);
    states.push(x.clone());
    let mut stage1 = LevelDiagnostics::default();
    for m in 0..p {
        let (next, report) = mbug_step_with(
            ode,
            &states[m],
            grid.nodes[m],
            grid.sub_steps[m],
            sched.eps_f(),
            sched.eps_s(),
            mode,
            &settings,
        )
        .map_err(|e| e.at(format!("prediction, subinterval {m}")))?;
        stage1.f_ranks.push(report.rank_f);
        stage1.merged_ranks.push(report.rank_merged);
        stage1.ranks.push(report.rank_after);
        diag.solves.extend(report.solves);
        states.push(next);
    }
    diag.levels.push(stage1);

    for level in 1..=k {
        let (next, level_diag) = correction_sweep(ode, x, &states, grid, level, sched, mode, &settings, &mut diag.solves)
            .map_err(|e| e.at(format!("correction {level}")))?;
        diag.levels.push(level_diag);
        states = next;
    }
    Ok((states.pop().expect("grid has at least two nodes"), diag))
}

#[allow(clippy::too_many_arguments)]
fn correction_sweep<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x: &Factorization<T>,
    prev: &[Factorization<T>],
    grid: &SdcGrid,
    level: usize,
    sched: &ToleranceSchedule,
    mode: TruncationMode,
    settings: &StepSettings,
    solves: &mut Vec<SolveRecord>,
) -> Result<(Vec<Factorization<T>>, LevelDiagnostics)> {
    let p = grid.p;
    let shape = ode.shape();
    let f: Vec<Factorization<T>> = prev
        .iter()
        .zip(&grid.nodes)
        .map(|(xs, &ts)| ode.eval_lowrank(xs, ts, sched.eps_f_level(level), mode))
        .collect::<Result<_>>()?;
    let mut diag = LevelDiagnostics {
        level,
        f_ranks: f.iter().map(Factorization::rank).collect(),
        ..LevelDiagnostics::default()
    };

    let mut next = Vec::with_capacity(p + 1);
    next.push(x.clone());
    for m in 0..p {
        let dt = grid.sub_steps[m];
        let mut terms = Vec::with_capacity(p + 2);
        terms.push(LowRankTerm::weighted(&f[m + 1], -dt));
        for (s, fs) in f.iter().enumerate() {
            terms.push(LowRankTerm::weighted(fs, dt * grid.weights[(m, s)]));
        }
        let r = round_terms(&terms, shape, sched.eps_r_level(level), mode).map_err(|e| e.at(format!("residual {m}")))?;

        let current: &Factorization<T> = &next[m];
        let uh = merge_basis(&[current.u(), f[m + 1].u(), r.u()])?;
        let vh = merge_basis(&[current.v(), f[m + 1].v(), r.v()])?;
        let rhs = project_factorization(current, &uh, &vh) + project_factorization(&r, &uh, &vh);
        let (s, rec) = galerkin_solve(ode, &uh, &vh, rhs, grid.nodes[m + 1], dt, &settings.solver)
            .map_err(|e| e.at(format!("S-step {m}")))?;
        solves.push(rec);
        let state = truncate_core(&uh, &s, &vh, sched.eps_s_level(level + 1), mode)?;

        diag.r_ranks.push(r.rank());
        diag.merged_ranks.push(uh.ncols());
        diag.ranks.push(state.rank());
        next.push(state);
    }
    Ok((next, diag))
}

/// Solution history of [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<f64>,
    pub ranks: Vec<usize>,
    /// States at every recorded time when requested, otherwise only the final state.
    pub states: Vec<Factorization<T>>,
    pub solves: Vec<SolveRecord>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_state(&self) -> &Factorization<T> {
        self.states.last().expect("trajectory holds at least one state")
    }
}

/// Options of [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub order: usize,
    pub mode: TruncationMode,
    /// Tolerance constant `C`; zero disables truncation.
    pub c: f64,
    pub keep_states: bool,
    pub settings: StepSettings,
}

impl IntegrateOptions {
    pub fn new(order: usize, mode: TruncationMode, c: f64) -> Self {
        Self {
            order,
            mode,
            c,
            keep_states: false,
            settings: StepSettings::default(),
        }
    }
}

/// Sweep counts `(K, P)` for a nominal order: `K = P = order − 1`, and a
/// single uncorrected subinterval for order 1.
pub fn sweeps_for_order(order: usize) -> Result<(usize, usize)> {
    match order {
        1 => Ok((0, 1)),
        2..=8 => Ok((order - 1, order - 1)),
        _ => Err(Error::InvalidParameter(format!("unsupported order {order}"))),
    }
}

/// Integrates from `t0` to `t_final` with `steps` uniform macro steps. The
/// initial value is first truncated to the finest tolerance of the schedule.
pub fn integrate<T: Scalar>(
    ode: &LinearMatrixOde<T>,
    x0: &Factorization<T>,
    t0: f64,
    t_final: f64,
    steps: usize,
    opts: &IntegrateOptions,
) -> Result<Trajectory<T>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("integrate needs at least one step".into()));
    }
    if !(t_final > t0) {
        return Err(Error::InvalidParameter(format!("final time {t_final} must exceed {t0}")));
    }
    if x0.shape() != ode.shape() {
        return Err(Error::InvalidInput(format!(
            "initial value of shape {:?} for an equation of shape {:?}",
            x0.shape(),
            ode.shape()
        )));
    }
    let (k, p) = sweeps_for_order(opts.order)?;
    let h = (t_final - t0) / steps as f64;
    let sched = ToleranceSchedule::new(opts.c, h, k)?;

    let mut x = truncate(x0, sched.min_tolerance(), opts.mode)?;
    let mut traj = Trajectory {
        times: vec![t0],
        ranks: vec![x.rank()],
        states: vec![],
        solves: vec![],
    };
    if opts.keep_states {
        traj.states.push(x.clone());
    }
    for n in 0..steps {
        let tn = t0 + n as f64 * h;
        let t1 = if n + 1 == steps { t_final } else { t0 + (n + 1) as f64 * h };
        let grid = lobatto_grid(p, tn, t1)?;
        let (next, diag) = sdc_mbug_step(ode, &x, &grid, k, &sched, opts.mode, &opts.settings)
            .map_err(|e| e.at(format!("macro step {n}")))?;
        traj.solves.extend(diag.solves);
        traj.times.push(t1);
        traj.ranks.push(next.rank());
        if opts.keep_states {
            traj.states.push(next.clone());
        }
        x = next;
    }
    if !opts.keep_states {
        traj.states.push(x);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CoefficientOperator, SourceFn};
    use crate::sdc::dense::sdc_dense_step;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn stable_ode(rng: &mut ChaCha8Rng, m: usize) -> LinearMatrixOde<f64> {
        let a = rand_mat(rng, m, m) * 0.3 - DMatrix::identity(m, m);
        let b = rand_mat(rng, m, m) * 0.3;
        let g = Factorization::from_dense(&(rand_mat(rng, m, 1) * rand_mat(rng, 1, m))).unwrap();
        let source: SourceFn<f64> = Arc::new(move |t: f64| g.scaled((2.0 * t).sin()));
        LinearMatrixOde::new(
            vec![
                (CoefficientOperator::dense(a).unwrap(), CoefficientOperator::identity(m)),
                (
                    CoefficientOperator::diagonal(DVector::from_fn(m, |i, _| 0.1 * i as f64)).unwrap(),
                    CoefficientOperator::dense(b).unwrap(),
                ),
            ],
            Some(source),
        )
        .unwrap()
    }

    #[test]
    fn exact_tolerances_match_dense_sdc() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let m = 8;
        let ode = stable_ode(&mut rng, m);
        let x0 = rand_mat(&mut rng, m, m);
        for order in 2..=4 {
            let (k, p) = sweeps_for_order(order).unwrap();
            let grid = lobatto_grid(p, 0.1, 0.3).unwrap();
            let sched = ToleranceSchedule::exact(0.2, k).unwrap();
            let (y, diag) = sdc_mbug_step(
                &ode,
                &Factorization::from_dense(&x0).unwrap(),
                &grid,
                k,
                &sched,
                TruncationMode::Hard,
                &StepSettings::default(),
            )
            .unwrap();
            let expected = sdc_dense_step(&ode, &x0, &grid, k).unwrap();
            assert!((y.to_dense() - expected).norm() < 1e-8, "order {order}");
            assert_eq!(diag.levels.len(), k + 1);
            assert!(diag.solves.iter().all(SolveRecord::satisfied));
        }
    }

    #[test]
    fn no_corrections_equals_chained_mbug() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ode = stable_ode(&mut rng, 10);
        let x = Factorization::from_dense(&(rand_mat(&mut rng, 10, 2) * rand_mat(&mut rng, 2, 10))).unwrap();
        let grid = lobatto_grid(3, 0.0, 0.1).unwrap();
        let sched = ToleranceSchedule::new(1.0, 0.1, 0).unwrap();
        let settings = StepSettings {
            kl_eps: Some(sched.min_tolerance()),
            ..StepSettings::default()
        };
        let (y, _) = sdc_mbug_step(&ode, &x, &grid, 0, &sched, TruncationMode::Soft, &settings).unwrap();
        let mut z = x.clone();
        for m in 0..3 {
            z = crate::mbug::mbug_step_with(
                &ode,
                &z,
                grid.nodes[m],
                grid.sub_steps[m],
                sched.eps_f(),
                sched.eps_s(),
                TruncationMode::Soft,
                &settings,
            )
            .unwrap()
            .0;
        }
        assert_eq!(y.to_dense(), z.to_dense());
    }

    #[test]
    fn integrate_records_every_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ode = stable_ode(&mut rng, 12);
        let x = Factorization::from_dense(&(rand_mat(&mut rng, 12, 1) * rand_mat(&mut rng, 1, 12))).unwrap();
        let mut opts = IntegrateOptions::new(3, TruncationMode::Hard, 1.0);
        opts.keep_states = true;
        let traj = integrate(&ode, &x, 0.0, 0.5, 5, &opts).unwrap();
        assert_eq!(traj.times.len(), 6);
        assert_eq!(traj.ranks.len(), 6);
        assert_eq!(traj.states.len(), 6);
        assert_eq!(*traj.times.last().unwrap(), 0.5);
        assert!(integrate(&ode, &x, 0.0, 0.5, 0, &opts).is_err());
        assert!(sweeps_for_order(0).is_err());
    }
}

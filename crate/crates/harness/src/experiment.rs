//! Runs the (order × mode × N_t) matrix of one benchmark and collects errors,
//! rank series and reference rank curves.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use lrsdc::reference::{read_reference, rk4_dense, write_reference, ReferenceSolution};
use lrsdc::sylvester::SolveRecord;
use lrsdc::{integrate, truncate, BenchmarkProblem, Factorization, IntegrateOptions, Problem, Scalar, TruncationMode};

use crate::config::{ExperimentConfig, ReferenceKind};
use crate::error::{io_err, HarnessError, Result};
use crate::output::{emit_csv, emit_rank_csv, observed_rate, rank_file_name, ConvergenceRow};
use crate::svg::{emit_rank_svg, Series};

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Upper bound on concurrently running cells.
    pub jobs: usize,
    /// Record wall-clock seconds per cell. Off by default so reruns are
    /// byte-identical.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { jobs: 1, timing: false }
    }
}

pub fn scheme_label(order: usize, mode: TruncationMode) -> String {
    format!("SDC-mBUG-{order}-{}", mode.letter())
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub l2_error: f64,
    pub wall_seconds: Option<f64>,
    /// Rank after every macro step, starting with the truncated initial value.
    pub ranks: Vec<(f64, usize)>,
    pub solves: usize,
    pub unsatisfied: Vec<SolveRecord>,
}

#[derive(Debug, Clone)]
pub struct CellRun {
    pub order: usize,
    pub mode: TruncationMode,
    pub nt: usize,
    /// Failures are reported per cell; the other cells still run.
    pub outcome: std::result::Result<CellOutcome, String>,
}

impl CellRun {
    pub fn scheme(&self) -> String {
        scheme_label(self.order, self.mode)
    }
}

/// Ranks of the reference solution truncated at `C h^{order+1}` on the
/// finest run's step grid (the Ref-`order`-H/S curves).
#[derive(Debug, Clone)]
pub struct ReferenceCurve {
    pub order: usize,
    pub mode: TruncationMode,
    pub points: Vec<(f64, usize)>,
}

impl ReferenceCurve {
    pub fn label(&self) -> String {
        format!("Ref-{}-{}", self.order, self.mode.letter())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub runs: Vec<CellRun>,
    pub reference_curves: Vec<ReferenceCurve>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<ConvergenceRow> {
        let mut rows = Vec::new();
        let mut prev: Option<&CellRun> = None;
        for run in &self.runs {
            let same_scheme = prev.is_some_and(|p| p.order == run.order && p.mode == run.mode);
            if let Ok(out) = &run.outcome {
                let rate = match prev.map(|p| &p.outcome) {
                    Some(Ok(p_out)) if same_scheme => Some(observed_rate(
                        prev.map_or(0, |p| p.nt),
                        p_out.l2_error,
                        run.nt,
                        out.l2_error,
                    )),
                    _ => None,
                };
                rows.push(ConvergenceRow {
                    scheme: run.scheme(),
                    nt: run.nt,
                    l2_error: out.l2_error,
                    rate,
                    wall_seconds: out.wall_seconds,
                });
            }
            prev = Some(run);
        }
        rows
    }

    pub fn failures(&self) -> impl Iterator<Item = (&CellRun, &str)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r, e.as_str())))
    }

    pub fn find(&self, order: usize, mode: TruncationMode, nt: usize) -> Option<&CellRun> {
        self.runs.iter().find(|r| r.order == order && r.mode == mode && r.nt == nt)
    }

    pub fn reference_curve(&self, order: usize, mode: TruncationMode) -> Option<&ReferenceCurve> {
        self.reference_curves.iter().find(|c| c.order == order && c.mode == mode)
    }
}

/// Indices `0, s, 2s, …` of `0..=n`, always including `n`.
pub fn strided(n: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..=n).step_by(stride.max(1)).collect();
    if idx.last() != Some(&n) {
        idx.push(n);
    }
    idx
}

fn grid_time(t_final: f64, n: usize, steps: usize) -> f64 {
    if n == steps {
        t_final
    } else {
        t_final * n as f64 / steps as f64
    }
}

enum ReferenceData<T: Scalar> {
    Exact(lrsdc::problems::ExactFn<T>),
    Sampled(ReferenceSolution<T>),
}

impl<T: Scalar> ReferenceData<T> {
    fn at(&self, t: f64) -> Result<DMatrix<T>> {
        match self {
            ReferenceData::Exact(f) => Ok(f(t)),
            ReferenceData::Sampled(r) => r.at(t).cloned().ok_or_else(|| {
                HarnessError::Core(lrsdc::Error::InvalidInput(format!("reference has no sample at t = {t}")))
            }),
        }
    }
}

fn reference_cache_path(cfg: &ExperimentConfig, steps: usize) -> PathBuf {
    cfg.out_dir.join("reference").join(format!(
        "{}-nx{}-ny{}-T{:.6e}-steps{}-stride{}-nt{}.bin",
        cfg.problem,
        cfg.nx,
        cfg.ny,
        cfg.t_final,
        steps,
        cfg.rank_stride,
        cfg.finest_nt()
    ))
}

fn cached_reference<T: Scalar>(path: &Path, steps: usize, times: &[f64]) -> Option<ReferenceSolution<T>> {
    let r = read_reference::<T>(path).ok()?;
    (r.meta.steps == steps && r.times == times).then_some(r)
}

fn build_reference<T: Scalar>(
    cfg: &ExperimentConfig,
    problem: &Problem<T>,
    sample_times: &[f64],
) -> Result<ReferenceData<T>> {
    match cfg.reference {
        ReferenceKind::Exact => problem
            .exact
            .clone()
            .map(ReferenceData::Exact)
            .ok_or_else(|| HarnessError::Config {
                line: None,
                msg: format!("problem `{}` has no exact solution", cfg.problem),
            }),
        ReferenceKind::Rk4 { refine } => {
            let steps = refine * cfg.finest_nt();
            let path = reference_cache_path(cfg, steps);
            if let Some(r) = cached_reference(&path, steps, sample_times) {
                return Ok(ReferenceData::Sampled(r));
            }
            let x0 = problem.x0.to_dense();
            let r = rk4_dense(&problem.ode, &x0, 0.0, cfg.t_final, steps, sample_times)?;
            let dir = path.parent().expect("cache path has a parent");
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            write_reference(&path, &r)?;
            Ok(ReferenceData::Sampled(r))
        }
    }
}

fn run_cell<T: Scalar>(
    cfg: &ExperimentConfig,
    problem: &Problem<T>,
    reference_final: &DMatrix<T>,
    (order, mode, nt): (usize, TruncationMode, usize),
    timing: bool,
) -> CellRun {
    let outcome = (|| -> lrsdc::Result<CellOutcome> {
        let opts = IntegrateOptions::new(order, mode, cfg.c());
        let start = Instant::now();
        let traj = integrate(&problem.ode, &problem.x0, 0.0, cfg.t_final, nt, &opts)?;
        let wall = start.elapsed().as_secs_f64();
        let l2_error = problem.l2_error(&traj.final_state().to_dense(), reference_final);
        Ok(CellOutcome {
            l2_error,
            wall_seconds: timing.then_some(wall),
            ranks: traj.times.iter().copied().zip(traj.ranks.iter().copied()).collect(),
            solves: traj.solves.len(),
            unsatisfied: traj.solves.iter().filter(|s| !s.satisfied()).copied().collect(),
        })
    })()
    .map_err(|e| e.to_string());
    CellRun { order, mode, nt, outcome }
}

fn run_typed<T: Scalar>(cfg: &ExperimentConfig, problem: &Problem<T>, timing: bool) -> Result<ExperimentOutput> {
    let finest = cfg.finest_nt();
    let sample_idx = strided(finest, cfg.rank_stride);
    let sample_times: Vec<f64> = sample_idx.iter().map(|&n| grid_time(cfg.t_final, n, finest)).collect();
    let reference = build_reference(cfg, problem, &sample_times)?;
    let reference_final = reference.at(cfg.t_final)?;

    let cells: Vec<(usize, TruncationMode, usize)> = cfg
        .orders
        .iter()
        .flat_map(|&o| cfg.modes.iter().flat_map(move |&m| cfg.nt_list.iter().map(move |&n| (o, m, n))))
        .collect();
    let runs: Vec<CellRun> = cells
        .par_iter()
        .map(|&cell| run_cell(cfg, problem, &reference_final, cell, timing))
        .collect();

    // One SVD per reference sample, then every (order, mode) threshold.
    let h = cfg.t_final / finest as f64;
    let c = cfg.c();
    let factored: Vec<Factorization<T>> = sample_times
        .par_iter()
        .map(|&t| Ok(Factorization::from_dense(&reference.at(t)?)?))
        .collect::<Result<_>>()?;
    let mut reference_curves = Vec::new();
    for &order in &cfg.orders {
        for &mode in &cfg.modes {
            let eps = c * h.powi(order as i32 + 1);
            let points = sample_times
                .iter()
                .zip(&factored)
                .map(|(&t, f)| Ok((t, truncate(f, eps, mode)?.rank())))
                .collect::<Result<_>>()?;
            reference_curves.push(ReferenceCurve { order, mode, points });
        }
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        runs,
        reference_curves,
    })
}

/// Runs every cell of `cfg` on a pool of `opts.jobs` threads. The output
/// does not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let problem = BenchmarkProblem::build(cfg.problem, cfg.nx, cfg.ny)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    pool.install(|| match &problem {
        BenchmarkProblem::Real(p) => run_typed(cfg, p, opts.timing),
        BenchmarkProblem::Complex(p) => run_typed(cfg, p, opts.timing),
    })
}

/// Writes `convergence.csv`, one rank CSV per successful run and, when
/// `svg` is set, one rank plot per (order, mode).
pub fn write_outputs(output: &ExperimentOutput, svg: bool) -> Result<Vec<PathBuf>> {
    let cfg = &output.config;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join(format!("{}-convergence.csv", cfg.problem));
    emit_csv(&output.rows(), &path)?;
    written.push(path);

    for run in &output.runs {
        if let Ok(out) = &run.outcome {
            let idx = strided(run.nt, cfg.rank_stride);
            let pts: Vec<(f64, usize)> = idx.iter().map(|&i| out.ranks[i]).collect();
            let path = dir.join(rank_file_name(cfg.problem.as_str(), run.order, run.mode.letter(), run.nt));
            emit_rank_csv(&pts, &path)?;
            written.push(path);
        }
    }
    for curve in &output.reference_curves {
        let path = dir.join(format!("{}-{}-{}-ref.csv", cfg.problem, curve.order, curve.mode.letter()));
        emit_rank_csv(&curve.points, &path)?;
        written.push(path);
    }

    if svg {
        for &order in &cfg.orders {
            for &mode in &cfg.modes {
                let series: Vec<Series> = output
                    .runs
                    .iter()
                    .filter(|r| r.order == order && r.mode == mode)
                    .filter_map(|r| {
                        let out = r.outcome.as_ref().ok()?;
                        let idx = strided(r.nt, cfg.rank_stride);
                        Some(Series {
                            label: format!("Nt={}", r.nt),
                            points: idx.iter().map(|&i| out.ranks[i]).collect(),
                        })
                    })
                    .collect();
                if series.is_empty() {
                    continue;
                }
                let reference = output.reference_curve(order, mode).map(|c| Series {
                    label: c.label(),
                    points: c.points.clone(),
                });
                let path = dir.join(format!("{}-{}-{}.svg", cfg.problem, order, mode.letter()));
                emit_rank_svg(&series, reference.as_ref(), &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strided_keeps_endpoints() {
        assert_eq!(strided(10, 3), vec![0, 3, 6, 9, 10]);
        assert_eq!(strided(10, 5), vec![0, 5, 10]);
        assert_eq!(strided(4, 1), vec![0, 1, 2, 3, 4]);
        assert_eq!(strided(0, 7), vec![0]);
    }

    #[test]
    fn scheme_labels() {
        assert_eq!(scheme_label(3, TruncationMode::Hard), "SDC-mBUG-3-H");
        assert_eq!(scheme_label(2, TruncationMode::Soft), "SDC-mBUG-2-S");
    }

    fn run(order: usize, nt: usize, outcome: std::result::Result<f64, &str>) -> CellRun {
        CellRun {
            order,
            mode: TruncationMode::Hard,
            nt,
            outcome: outcome
                .map(|e| CellOutcome {
                    l2_error: e,
                    wall_seconds: None,
                    ranks: vec![],
                    solves: 0,
                    unsatisfied: vec![],
                })
                .map_err(str::to_string),
        }
    }

    #[test]
    fn rates_only_between_adjacent_successful_runs_of_one_scheme() {
        let out = ExperimentOutput {
            config: ExperimentConfig::new(lrsdc::ProblemId::Manufactured, vec![10, 20, 40]),
            runs: vec![
                run(2, 10, Ok(4e-2)),
                run(2, 20, Ok(1e-2)),
                run(2, 40, Err("boom")),
                run(3, 10, Ok(8e-3)),
                run(3, 20, Ok(1e-3)),
                run(3, 40, Ok(1.25e-4)),
            ],
            reference_curves: vec![],
        };
        let rows = out.rows();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].rate, None);
        assert!((rows[1].rate.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rows[2].rate, None);
        assert!((rows[3].rate.unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(out.failures().count(), 1);
    }
}

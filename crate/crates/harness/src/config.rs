//! Flat `key = value` experiment configuration. Lists are comma separated,
//! `#` starts a comment.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lrsdc::sdc::sweeps_for_order;
use lrsdc::{ProblemId, TruncationMode};

use crate::error::{HarnessError, Result};

/// Smallest accepted RK4 refinement factor over the finest `N_t`.
pub const MIN_REF_REFINE: usize = 10;
pub const DEFAULT_REF_REFINE: usize = 16;
pub const DEFAULT_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Closed-form solution of the problem.
    Exact,
    /// Classical RK4 with `refine` times the finest `N_t` steps.
    Rk4 { refine: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub nx: usize,
    pub ny: usize,
    pub t_final: f64,
    pub nt_list: Vec<usize>,
    pub orders: Vec<usize>,
    pub modes: Vec<TruncationMode>,
    pub reference: ReferenceKind,
    pub out_dir: PathBuf,
    /// Record every `rank_stride`-th macro step in the rank series.
    pub rank_stride: usize,
    pub c_override: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults for `problem` with the given step counts.
    pub fn new(problem: ProblemId, nt_list: Vec<usize>) -> Self {
        Self {
            problem,
            nx: DEFAULT_GRID,
            ny: DEFAULT_GRID,
            t_final: problem.default_final_time(),
            nt_list,
            orders: vec![2, 3, 4],
            modes: vec![TruncationMode::Hard, TruncationMode::Soft],
            reference: default_reference(problem, DEFAULT_REF_REFINE),
            out_dir: PathBuf::from("out"),
            rank_stride: 1,
            c_override: None,
        }
    }

    /// Tolerance constant: the override, or `2 (4π/N_x + 4π/N_y)⁻¹`.
    pub fn c(&self) -> f64 {
        self.c_override
            .unwrap_or_else(|| lrsdc::sdc::grid_constant(self.nx, self.ny))
    }

    pub fn finest_nt(&self) -> usize {
        self.nt_list.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config { line: None, msg });
        if self.nx < 4 || self.ny < 4 || self.nx % 2 != 0 || self.ny % 2 != 0 {
            return fail(format!("grid sizes must be even and ≥ 4, got {}×{}", self.nx, self.ny));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return fail(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.nt_list.is_empty() {
            return fail("nt_list is empty".into());
        }
        if self.nt_list[0] == 0 || self.nt_list.windows(2).any(|w| w[1] <= w[0]) {
            return fail(format!("nt_list must be positive and strictly increasing, got {:?}", self.nt_list));
        }
        if self.orders.is_empty() {
            return fail("orders is empty".into());
        }
        for &order in &self.orders {
            if sweeps_for_order(order).is_err() {
                return fail(format!("unsupported order {order}"));
            }
        }
        if has_duplicates(&self.orders) {
            return fail(format!("orders contain duplicates: {:?}", self.orders));
        }
        if self.modes.is_empty() {
            return fail("modes is empty".into());
        }
        if self.modes.len() == 2 && self.modes[0] == self.modes[1] {
            return fail("modes contain duplicates".into());
        }
        if self.rank_stride == 0 {
            return fail("rank_stride must be ≥ 1".into());
        }
        if let Some(c) = self.c_override {
            if !(c >= 0.0) || !c.is_finite() {
                return fail(format!("c_override must be finite and ≥ 0, got {c}"));
            }
        }
        match self.reference {
            ReferenceKind::Exact if !self.problem.has_exact_solution() => {
                fail(format!("problem `{}` has no exact solution; use reference = rk4", self.problem))
            }
            ReferenceKind::Rk4 { refine } if refine < MIN_REF_REFINE => {
                fail(format!("ref_refine must be ≥ {MIN_REF_REFINE}, got {refine}"))
            }
            _ => Ok(()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }
}

fn default_reference(problem: ProblemId, refine: usize) -> ReferenceKind {
    if problem.has_exact_solution() {
        ReferenceKind::Exact
    } else {
        ReferenceKind::Rk4 { refine }
    }
}

fn has_duplicates(v: &[usize]) -> bool {
    v.iter().enumerate().any(|(i, a)| v[..i].contains(a))
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| HarnessError::Config {
        line: Some(line),
        msg: format!("cannot parse `{}` for key `{key}`", raw.trim()),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Config {
                line: Some(line),
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(HarnessError::Config {
                    line: Some(line),
                    msg: format!("duplicate key `{key}`"),
                });
            }
            entries.push((line, key, value.trim().to_string()));
        }
        let find = |key: &str| entries.iter().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));

        let (line, raw) = find("problem").ok_or(HarnessError::Config {
            line: None,
            msg: "missing key `problem`".into(),
        })?;
        let problem: ProblemId = raw.parse().map_err(|e: lrsdc::Error| HarnessError::Config {
            line: Some(line),
            msg: e.to_string(),
        })?;
        let (line, raw) = find("nt_list").ok_or(HarnessError::Config {
            line: None,
            msg: "missing key `nt_list`".into(),
        })?;
        let mut cfg = ExperimentConfig::new(problem, parse_list(line, "nt_list", raw)?);

        let mut reference = None;
        let mut refine = DEFAULT_REF_REFINE;
        for (line, key, value) in &entries {
            let (line, value) = (*line, value.as_str());
            match key.as_str() {
                "problem" | "nt_list" => {}
                "nx" => cfg.nx = parse_value(line, key, value)?,
                "ny" => cfg.ny = parse_value(line, key, value)?,
                "t_final" => cfg.t_final = parse_value(line, key, value)?,
                "orders" => cfg.orders = parse_list(line, key, value)?,
                "modes" => {
                    cfg.modes = parse_list(line, key, value)?;
                    cfg.modes.sort_by_key(|m| m.letter());
                }
                "reference" => {
                    reference = Some(match value.to_ascii_lowercase().as_str() {
                        "exact" => false,
                        "rk4" => true,
                        _ => {
                            return Err(HarnessError::Config {
                                line: Some(line),
                                msg: format!("reference must be exact or rk4, got `{value}`"),
                            })
                        }
                    })
                }
                "ref_refine" => refine = parse_value(line, key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "rank_stride" => cfg.rank_stride = parse_value(line, key, value)?,
                "c_override" => {
                    cfg.c_override = match value.to_ascii_lowercase().as_str() {
                        "" | "none" => None,
                        _ => Some(parse_value(line, key, value)?),
                    }
                }
                other => {
                    return Err(HarnessError::Config {
                        line: Some(line),
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        cfg.reference = match reference {
            Some(false) => ReferenceKind::Exact,
            Some(true) => ReferenceKind::Rk4 { refine },
            None => default_reference(problem, refine),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

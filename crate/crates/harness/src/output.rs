//! Convergence tables and rank series as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{io_err, HarnessError, Result};

pub const CONVERGENCE_HEADER: &str = "scheme,Nt,l2_error,rate,wall_seconds";
pub const RANK_HEADER: &str = "t,rank";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// Scheme label such as `SDC-mBUG-3-H`.
    pub scheme: String,
    pub nt: usize,
    pub l2_error: f64,
    /// `log(e_prev / e) / log(N_t / N_t,prev)` against the next coarser run.
    pub rate: Option<f64>,
    pub wall_seconds: Option<f64>,
}

/// Observed order between two runs; reduces to `log2(e_prev / e)` when the
/// step count doubles.
pub fn observed_rate(nt_prev: usize, err_prev: f64, nt: usize, err: f64) -> f64 {
    (err_prev / err).ln() / (nt as f64 / nt_prev as f64).ln()
}

/// Six significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.5e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.scheme,
            r.nt,
            fmt_float(r.l2_error),
            fmt_opt(r.rate),
            fmt_opt(r.wall_seconds)
        );
    }
    out
}

pub fn emit_csv(rows: &[ConvergenceRow], path: &Path) -> Result<()> {
    fs::write(path, convergence_csv(rows)).map_err(io_err(path))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| HarnessError::Csv {
        line,
        msg: format!("bad {name} `{raw}`"),
    })
}

fn opt_field(line: usize, name: &str, raw: &str) -> Result<Option<f64>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        field(line, name, raw).map(Some)
    }
}

pub fn parse_convergence_csv(text: &str) -> Result<Vec<ConvergenceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CONVERGENCE_HEADER => {}
        _ => {
            return Err(HarnessError::Csv {
                line: 1,
                msg: format!("expected header `{CONVERGENCE_HEADER}`"),
            })
        }
    }
    lines
        .map(|(idx, l)| {
            let line = idx + 1;
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 5 {
                return Err(HarnessError::Csv {
                    line,
                    msg: format!("expected 5 columns, got {}", cols.len()),
                });
            }
            Ok(ConvergenceRow {
                scheme: cols[0].to_string(),
                nt: field(line, "Nt", cols[1])?,
                l2_error: field(line, "l2_error", cols[2])?,
                rate: opt_field(line, "rate", cols[3])?,
                wall_seconds: opt_field(line, "wall_seconds", cols[4])?,
            })
        })
        .collect()
}

pub fn read_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    parse_convergence_csv(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn rank_csv(points: &[(f64, usize)]) -> String {
    let mut out = String::from(RANK_HEADER);
    out.push('\n');
    for (t, r) in points {
        let _ = writeln!(out, "{},{r}", fmt_float(*t));
    }
    out
}

pub fn emit_rank_csv(points: &[(f64, usize)], path: &Path) -> Result<()> {
    fs::write(path, rank_csv(points)).map_err(io_err(path))
}

pub fn parse_rank_csv(text: &str) -> Result<Vec<(f64, usize)>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h) != Some(RANK_HEADER) {
        return Err(HarnessError::Csv {
            line: 1,
            msg: format!("expected header `{RANK_HEADER}`"),
        });
    }
    lines
        .map(|(idx, l)| {
            let (t, r) = l.split_once(',').ok_or(HarnessError::Csv {
                line: idx + 1,
                msg: "expected t,rank".into(),
            })?;
            Ok((field(idx + 1, "t", t)?, field(idx + 1, "rank", r)?))
        })
        .collect()
}

/// File name of a per-run rank series.
pub fn rank_file_name(problem: &str, order: usize, mode_letter: char, nt: usize) -> String {
    format!("{problem}-{order}-{mode_letter}-Nt{nt}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, nt: usize, err: f64, rate: Option<f64>) -> ConvergenceRow {
        ConvergenceRow {
            scheme: scheme.into(),
            nt,
            l2_error: err,
            rate,
            wall_seconds: None,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(convergence_csv(&[]), "scheme,Nt,l2_error,rate,wall_seconds\n");
    }

    #[test]
    fn one_scheme_three_runs_gives_four_lines() {
        let rows = [
            row("SDC-mBUG-2-H", 40, 6.12e-5, None),
            row("SDC-mBUG-2-H", 80, 1.68e-5, Some(1.86)),
            row("SDC-mBUG-2-H", 160, 4.39e-6, Some(1.94)),
        ];
        let text = convergence_csv(&rows);
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().nth(1), Some("SDC-mBUG-2-H,40,6.12000e-5,,"));
        assert_eq!(text.lines().nth(2), Some("SDC-mBUG-2-H,80,1.68000e-5,1.86000e0,"));
    }

    #[test]
    fn parse_back_reproduces_rows() {
        let rows = vec![
            row("SDC-mBUG-3-S", 50, 0.0123456789, None),
            ConvergenceRow {
                wall_seconds: Some(12.5),
                ..row("SDC-mBUG-3-S", 100, 1.81e-3, Some(2.7632))
            },
        ];
        let parsed = parse_convergence_csv(&convergence_csv(&rows)).unwrap();
        assert_eq!(parsed.len(), 2);
        for (a, b) in rows.iter().zip(&parsed) {
            assert_eq!(a.scheme, b.scheme);
            assert_eq!(a.nt, b.nt);
            assert!((a.l2_error - b.l2_error).abs() <= 5e-6 * a.l2_error);
            assert_eq!(a.rate.is_some(), b.rate.is_some());
        }
        assert_eq!(convergence_csv(&parsed), convergence_csv(&rows));
    }

    #[test]
    fn rate_matches_table_layout() {
        assert!((observed_rate(40, 6.12e-5, 80, 1.68e-5) - 1.86).abs() < 1e-2);
        // non-doubling pair from a 400 → 600 column
        assert!((observed_rate(400, 5.55e-4, 600, 2.45e-4) - 2.01).abs() < 1e-2);
    }

    #[test]
    fn rank_csv_round_trip() {
        let pts = vec![(0.0, 1), (0.5, 2), (std::f64::consts::PI, 3)];
        let text = rank_csv(&pts);
        assert!(text.starts_with("t,rank\n"));
        let back = parse_rank_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2].1, 3);
        assert!((back[2].0 - std::f64::consts::PI).abs() < 1e-5);
        assert_eq!(rank_file_name("rotation", 3, 'S', 200), "rotation-3-S-Nt200.csv");
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_convergence_csv("bogus\n").is_err());
        assert!(parse_convergence_csv("scheme,Nt,l2_error,rate,wall_seconds\na,b,c,,\n").is_err());
        assert!(parse_convergence_csv("scheme,Nt,l2_error,rate,wall_seconds\na,1,2\n").is_err());
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use lrsdc::{lobatto_grid, ProblemId, TruncationMode};
use lrsdc_harness::error::{HarnessError, Result};
use lrsdc_harness::{run_experiment, write_outputs, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "lrsdc", about = "Low-rank SDC-mBUG benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix described by a config file.
    Run {
        config: PathBuf,
        /// Maximum number of cells integrated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory; overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the SVG rank plots.
        #[arg(long)]
        no_svg: bool,
        /// Fill the wall_seconds column (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// List the benchmark problem ids.
    ListProblems,
    /// Print Gauss-Lobatto nodes and subinterval weights on [0, 1].
    Weights { p: usize },
    /// Truncate a dense matrix read from a text file and print the kept singular values.
    TruncateDemo {
        mode: TruncationMode,
        eps: f64,
        file: PathBuf,
    },
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|_| HarnessError::Csv {
                    line: idx + 1,
                    msg: format!("bad number `{s}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(HarnessError::Csv {
            line: 0,
            msg: "matrix file must hold a nonempty rectangular table".into(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            out,
            no_svg,
            timing,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let output = run_experiment(&cfg, &RunOptions { jobs, timing })?;
            for row in output.rows() {
                let rate = row.rate.map(|r| format!("({r:.2})")).unwrap_or_default();
                println!("{:<14} Nt={:<6} {:.3e} {rate}", row.scheme, row.nt, row.l2_error);
            }
            for (run, msg) in output.failures() {
                eprintln!("{} Nt={} failed: {msg}", run.scheme(), run.nt);
            }
            let unsatisfied: usize = output
                .runs
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok())
                .map(|o| o.unsatisfied.len())
                .sum();
            if unsatisfied > 0 {
                eprintln!("{unsatisfied} implicit solves missed their residual target");
            }
            for path in write_outputs(&output, !no_svg)? {
                println!("wrote {}", path.display());
            }
            let clean = output.failures().next().is_none();
            Ok(clean)
        }
        Command::ListProblems => {
            for id in ProblemId::ALL {
                println!("{:<13} T = {:.4}  {}", id.as_str(), id.default_final_time(), id.description());
            }
            Ok(true)
        }
        Command::Weights { p } => {
            let grid = lobatto_grid(p, 0.0, 1.0)?;
            println!("nodes: {}", grid.nodes.iter().map(|t| format!("{t:.15}")).collect::<Vec<_>>().join(" "));
            for m in 0..p {
                let w: Vec<String> = grid.weights.row(m).iter().map(|w| format!("{w:+.15}")).collect();
                println!("w[{m}]: {}", w.join(" "));
            }
            Ok(true)
        }
        Command::TruncateDemo { mode, eps, file } => {
            let x = read_matrix(&file)?;
            let t = lrsdc::lowrank::truncate_dense(&x, eps, mode)?;
            println!("rank {} of {}x{}", t.rank(), x.nrows(), x.ncols());
            for s in t.s() {
                println!("{s:.15e}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

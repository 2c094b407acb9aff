//! Command-line front end: single runs and tolerance/safety-factor sweeps.
//!
//! Every flag can also be set through a `JUMPMESH_*` environment variable.
//! Exit codes: 0 when every run converged, 2 when a run stopped without
//! converging, 1 on errors.

mod record;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use record::{ConfigEcho, FinalGrid, IterationEntry, RunRecord, Timing};

use crate::driver::{run, RunConfig};
use crate::error::Result;
use crate::jumpfun::JumpConfig;
use crate::problems::by_name;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "jumpmesh", version, about = "Adaptive LGR collocation with discontinuity detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem with one configuration.
    Solve(SolveArgs),
    /// Run every (tolerance, method) cell and print a summary table.
    Sweep(SweepArgs),
}

/// Options shared by `solve` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// robot-arm, min-time-di or min-energy-di.
    #[arg(long, env = "JUMPMESH_PROBLEM")]
    pub problem: String,
    /// Detection threshold on the normalized jump.
    #[arg(long, env = "JUMPMESH_ETA", default_value_t = 0.1)]
    pub eta: f64,
    /// Jump approximation orders, as `1..6` or `1,2,3`.
    #[arg(long, env = "JUMPMESH_ORDERS", default_value = "1..6", value_parser = parse_orders)]
    pub orders: Orders,
    #[arg(long = "max-iters", env = "JUMPMESH_MAX_ITERS", default_value_t = 20)]
    pub max_iters: usize,
    #[arg(long = "initial-intervals", env = "JUMPMESH_INITIAL_INTERVALS", default_value_t = 10)]
    pub initial_intervals: usize,
    #[arg(long = "initial-degree", env = "JUMPMESH_INITIAL_DEGREE", default_value_t = 4)]
    pub initial_degree: usize,
    /// Recorded in the output; the pipeline itself is deterministic.
    #[arg(long, env = "JUMPMESH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Repeat each run and report the median wall time.
    #[arg(long, env = "JUMPMESH_REPEATS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Mesh accuracy tolerance.
    #[arg(long, env = "JUMPMESH_TOL", default_value_t = 1e-6)]
    pub tol: f64,
    /// Safety factor on the discontinuity bounds.
    #[arg(long, env = "JUMPMESH_MU", default_value_t = 1.0)]
    pub mu: f64,
    /// Plain ph refinement with no discontinuity handling.
    #[arg(long = "no-jump-detection", env = "JUMPMESH_NO_JUMP_DETECTION")]
    pub no_jump_detection: bool,
    /// Run record (JSON).
    #[arg(long, env = "JUMPMESH_OUT")]
    pub out: Option<PathBuf>,
    /// Mesh history (CSV).
    #[arg(long, env = "JUMPMESH_HISTORY")]
    pub history: Option<PathBuf>,
    /// Directory for `tau,value` series.
    #[arg(long = "plot-data", env = "JUMPMESH_PLOT_DATA")]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, env = "JUMPMESH_TOLS", value_delimiter = ',', default_value = "1e-6,1e-7,1e-8")]
    pub tols: Vec<f64>,
    #[arg(long, env = "JUMPMESH_MUS", value_delimiter = ',', default_value = "1,1.5,2")]
    pub mus: Vec<f64>,
    /// Leave out the run without discontinuity handling.
    #[arg(long = "no-baseline", env = "JUMPMESH_NO_BASELINE")]
    pub no_baseline: bool,
    /// Directory receiving one run record per cell and `summary.csv`.
    #[arg(long = "out-dir", env = "JUMPMESH_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "JUMPMESH_JOBS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
}

/// Jump approximation orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orders(pub Vec<usize>);

/// `1..6` (inclusive) or a comma-separated list.
pub fn parse_orders(s: &str) -> std::result::Result<Orders, String> {
    let bad = || format!("invalid order list `{s}`");
    let orders: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<std::result::Result<_, _>>()?
    };
    if orders.is_empty() || orders.contains(&0) {
        return Err(bad());
    }
    Ok(Orders(orders))
}

/// One configuration of a sweep: `mu = None` is the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub tol: f64,
    pub mu: Option<f64>,
}

impl Cell {
    pub fn method(&self) -> String {
        match self.mu {
            Some(mu) => format!("hp-({mu})"),
            None => "hp".to_string(),
        }
    }

    fn file_stem(&self, problem: &str) -> String {
        let method = match self.mu {
            Some(mu) => format!("mu{mu}"),
            None => "baseline".to_string(),
        };
        format!("{problem}_tol{:e}_{method}", self.tol)
    }
}

impl CommonArgs {
    pub fn run_config(&self, tol: f64, mu: f64, detect: bool) -> RunConfig {
        RunConfig {
            epsilon: tol,
            max_iterations: self.max_iters,
            initial_intervals: self.initial_intervals,
            initial_degree: self.initial_degree,
            jump: JumpConfig {
                orders: self.orders.0.clone(),
                eta: self.eta,
                mu,
            },
            detect_jumps: detect,
            ..RunConfig::default()
        }
    }
}

/// Runs `config` `repeats` times; the record comes from the first run and
/// the timing is the median over all of them.
pub fn execute(problem: &str, config: RunConfig, seed: u64, repeats: usize) -> Result<RunRecord> {
    let p = by_name(problem)?;
    config.check()?;
    let mut times = Vec::with_capacity(repeats);
    let mut first = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let out = run(p.as_ref(), &config)?;
        times.push(start.elapsed().as_secs_f64());
        first.get_or_insert(out);
    }
    let out = first.expect("at least one run");
    let echo = ConfigEcho {
        problem: problem.to_string(),
        run: config,
        seed,
        repeats: repeats.max(1),
    };
    Ok(RunRecord::new(echo, &out.history, out.solution.as_ref(), Timing::new(times)))
}

pub fn solve(args: &SolveArgs) -> Result<RunRecord> {
    let c = &args.common;
    let config = c.run_config(args.tol, args.mu, !args.no_jump_detection);
    let record = execute(&c.problem, config, c.seed, c.repeats as usize)?;
    if let Some(path) = &args.out {
        record.write(path)?;
    }
    if let Some(path) = &args.history {
        record.write_history(path)?;
    }
    if let Some(dir) = &args.plot_data {
        record.write_plot_data(dir)?;
    }
    Ok(record)
}

pub fn solve_summary(record: &RunRecord) -> String {
    let mut s = String::new();
    let last = record.iterations.last();
    let _ = writeln!(s, "problem             {}", record.config.problem);
    let _ = writeln!(s, "status              {}", record.status.as_str());
    let _ = writeln!(s, "iterations M        {}", record.final_iteration());
    let _ = writeln!(s, "final intervals K   {}", record.final_intervals());
    let _ = writeln!(s, "final points P      {}", record.final_points());
    let _ = writeln!(s, "nonsmooth segments  {}", record.final_nonsmooth_segments());
    let _ = writeln!(s, "detections          {}", record.total_detections());
    if let Some(e) = last {
        let _ = writeln!(s, "cost                {:.12}", e.cost);
        let _ = writeln!(s, "final time          {:.12}", e.tf);
        let e_max = e.e_max.iter().fold(0.0f64, |a, &b| a.max(b));
        let _ = writeln!(s, "max error           {e_max:.3e}");
    }
    let _ = writeln!(s, "wall time (median)  {:.3} s", record.timing.median);
    s
}

pub fn sweep_cells(args: &SweepArgs) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &tol in &args.tols {
        if !args.no_baseline {
            cells.push(Cell { tol, mu: None });
        }
        for &mu in &args.mus {
            cells.push(Cell { tol, mu: Some(mu) });
        }
    }
    cells
}

/// Runs every cell, in parallel when `jobs > 1`; results keep cell order.
pub fn sweep(args: &SweepArgs) -> Result<Vec<(Cell, RunRecord)>> {
    let c = &args.common;
    by_name(&c.problem)?;
    let cells = sweep_cells(args);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunRecord>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let jobs = (args.jobs as usize).min(cells.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let config = c.run_config(cell.tol, cell.mu.unwrap_or(1.0), cell.mu.is_some());
                let rec = execute(&c.problem, config, c.seed, c.repeats as usize).and_then(|rec| {
                    if let Some(dir) = &args.out_dir {
                        rec.write(&dir.join(format!("{}.json", cell.file_stem(&c.problem))))?;
                    }
                    Ok(rec)
                });
                results.lock().expect("no poisoned workers")[i] = Some(rec);
            });
        }
    });
    let results = results.into_inner().expect("no poisoned workers");
    let mut out = Vec::with_capacity(cells.len());
    for (cell, rec) in cells.into_iter().zip(results) {
        out.push((cell, rec.expect("every cell ran")?));
    }
    if let Some(dir) = &args.out_dir {
        record::write_file(&dir.join("summary.csv"), &summary_csv(&out))?;
    }
    Ok(out)
}

pub fn summary_table(rows: &[(Cell, RunRecord)]) -> String {
    let mut s = format!(
        "{:>8}  {:<10} {:<16} {:>3} {:>4} {:>5} {:>9} {:>11}\n",
        "tol", "method", "status", "M", "K", "P", "nonsmooth", "time [s]"
    );
    for (cell, r) in rows {
        let _ = writeln!(
            s,
            "{:>8.0e}  {:<10} {:<16} {:>3} {:>4} {:>5} {:>9} {:>11.3}",
            cell.tol,
            cell.method(),
            r.status.as_str(),
            r.final_iteration(),
            r.final_intervals(),
            r.final_points(),
            r.final_nonsmooth_segments(),
            r.timing.median
        );
    }
    s
}

pub fn summary_csv(rows: &[(Cell, RunRecord)]) -> String {
    let mut s = String::from("tol,method,status,iterations,final_intervals,final_points,nonsmooth_segments,wall_time\n");
    for (cell, r) in rows {
        let _ = writeln!(
            s,
            "{:e},{},{},{},{},{},{},{}",
            cell.tol,
            cell.method(),
            r.status.as_str(),
            r.final_iteration(),
            r.final_intervals(),
            r.final_points(),
            r.final_nonsmooth_segments(),
            r.timing.median
        );
    }
    s
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Output goes to stdout, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a).map(|r| {
            print!("{}", solve_summary(&r));
            r.converged()
        }),
        Command::Sweep(a) => sweep(a).map(|rows| {
            print!("{}", summary_table(&rows));
            rows.iter().all(|(_, r)| r.converged())
        }),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_NOT_CONVERGED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_lists() {
        assert_eq!(parse_orders("1..6").unwrap().0, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(parse_orders("1..=3").unwrap().0, vec![1, 2, 3]);
        assert_eq!(parse_orders("2, 4").unwrap().0, vec![2, 4]);
        assert!(parse_orders("0..3").is_err());
        assert!(parse_orders("a").is_err());
        assert!(parse_orders("4..2").is_err());
    }

    #[test]
    fn sweep_grid_order() {
        let cli = Cli::try_parse_from(["jumpmesh", "sweep", "--problem", "min-energy-di", "--tols", "1e-6,1e-7", "--mus", "1,2"]).unwrap();
        let Command::Sweep(a) = cli.command else { panic!("sweep expected") };
        let cells = sweep_cells(&a);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], Cell { tol: 1e-6, mu: None });
        assert_eq!(cells[2], Cell { tol: 1e-6, mu: Some(2.0) });
        assert_eq!(cells[3].method(), "hp");
    }

    #[test]
    fn solve_defaults() {
        let cli = Cli::try_parse_from(["jumpmesh", "solve", "--problem", "robot-arm"]).unwrap();
        let Command::Solve(a) = cli.command else { panic!("solve expected") };
        let cfg = a.common.run_config(a.tol, a.mu, !a.no_jump_detection);
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn malformed_flags_exit_one() {
        assert_eq!(main_with_args(["jumpmesh", "solve"]), EXIT_ERROR);
        assert_eq!(main_with_args(["jumpmesh", "solve", "--problem", "x", "--tol", "abc"]), EXIT_ERROR);
        assert_eq!(main_with_args(["jumpmesh", "solve", "--problem", "shuttle"]), EXIT_ERROR);
    }
}

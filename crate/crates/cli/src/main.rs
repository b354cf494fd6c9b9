//! Command-line front end: pricing, solving, frontier and heatmap export,
//! purchase recommendations, and Monte Carlo validation.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or configuration
//! error. Output files are CSV with a header row and 17-significant-digit
//! floats; a failed run leaves no partial files behind.

mod config;
mod output;

use clap::{Parser, Subcommand};
use config::{Allocation, ConfigError, RunConfig};
use dia_core::policy::extract_frontier;
use dia_core::post::{solve_post, AllocationMode, ValueSurface};
use dia_core::pre::{solve_pre, PreSolution, Record};
use dia_core::sim::{compare_strategies, LifecyclePolicy, SimConfig, Strategy};
use dia_core::model::{dia_factor, refund_per_unit};
use dia_core::Grid2D;
use output::{b, f, n, Csv};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dia", about = "Optimal deferred income annuity purchase toolkit")]
struct Cli {
    /// Configuration file (flat key=value lines); defaults apply if absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Inline override, repeatable: --set market.mu=0.10
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Root random seed (simulate).
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price the DIA and its refund value at an age.
    Price {
        #[arg(long)]
        age: Option<f64>,
    },
    /// Solve the post-retirement problem and export a value slice.
    SolvePost {
        #[arg(long)]
        age: Option<f64>,
    },
    /// Solve both phases and export a pre-retirement value slice.
    SolvePre {
        #[arg(long)]
        age: Option<f64>,
    },
    /// Export the annuitization frontier w*(I) at an age.
    Frontier {
        #[arg(long)]
        age: Option<f64>,
    },
    /// Export the allocation / annuitization heatmap at an age.
    AlphaMap {
        #[arg(long)]
        age: Option<f64>,
    },
    /// Recommend a DIA purchase for a specific state.
    Recommend {
        #[arg(long)]
        age: Option<f64>,
        #[arg(long)]
        wealth: f64,
        #[arg(long)]
        income: Option<f64>,
    },
    /// Monte Carlo validation of the solved policy from a state.
    Simulate {
        #[arg(long)]
        age: Option<f64>,
        #[arg(long)]
        wealth: f64,
        #[arg(long)]
        income: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
    },
}

enum AppError {
    /// Bad flags or configuration; exit 2.
    Usage(String),
    /// The computation itself failed; exit 1.
    Failure(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Usage(e.to_string())
    }
}

impl From<dia_core::Error> for AppError {
    fn from(e: dia_core::Error) -> Self {
        AppError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Failure(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| AppError::Usage(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::from_text(&text)?;
    for pair in &cli.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| AppError::Usage(format!("--set expects key=value, got {pair:?}")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn post_grid(cfg: &RunConfig) -> Result<Grid2D, AppError> {
    let span = cfg.terminal_age - cfg.retirement_age;
    let n_t = (span / cfg.dt).round().max(1.0) as usize;
    Ok(Grid2D::uniform(0.0, span, n_t, cfg.w_max, cfg.w_nodes, cfg.i_max, cfg.i_nodes)?)
}

fn pre_grid(cfg: &RunConfig) -> Result<Grid2D, AppError> {
    let span = cfg.retirement_age - cfg.start_age;
    let n_t = (span / cfg.dt).round().max(1.0) as usize;
    Ok(Grid2D::uniform(0.0, span, n_t, cfg.w_max, cfg.w_nodes, cfg.i_max, cfg.i_nodes)?)
}

fn run_post(cfg: &RunConfig) -> Result<ValueSurface, AppError> {
    let grid = post_grid(cfg)?;
    let mode = match cfg.allocation {
        Allocation::Dynamic => AllocationMode::Dynamic,
        _ => AllocationMode::Fixed,
    };
    let stride = (0.25 / grid.dt).round().max(1.0) as usize;
    Ok(solve_post(
        &grid,
        &cfg.preferences()?,
        &cfg.market()?,
        &cfg.mortality()?,
        cfg.retirement_age,
        mode,
        stride,
    )?)
}

/// Recorded pre-retirement steps: yearly marks, the extra requested times,
/// the start, and the retirement slice.
fn record_steps(grid: &Grid2D, extra: &[f64]) -> Record {
    let horizon = *grid.t_nodes.last().unwrap();
    let mut steps = vec![0, grid.n_steps()];
    let mut y = 1.0;
    while y < horizon {
        steps.push(grid.nearest_step(y));
        y += 1.0;
    }
    for &t in extra {
        steps.push(grid.nearest_step(t));
    }
    steps.sort_unstable();
    steps.dedup();
    Record::Steps(steps)
}

fn run_pre(cfg: &RunConfig, seed: &ValueSurface, extra: &[f64]) -> Result<PreSolution, AppError> {
    let grid = pre_grid(cfg)?;
    let mode = match cfg.allocation {
        Allocation::Fixed => AllocationMode::Fixed,
        _ => AllocationMode::Dynamic,
    };
    let record = record_steps(&grid, extra);
    Ok(solve_pre(
        &grid,
        &cfg.preferences()?,
        &cfg.market()?,
        &cfg.mortality()?,
        &cfg.contract()?,
        seed,
        mode,
        &record,
    )?)
}

fn check_pre_age(cfg: &RunConfig, age: f64) -> Result<f64, AppError> {
    if !(cfg.start_age..=cfg.retirement_age).contains(&age) {
        return Err(AppError::Usage(format!(
            "age {age} outside the accumulation phase [{}, {}]",
            cfg.start_age, cfg.retirement_age
        )));
    }
    Ok(age - cfg.start_age)
}

fn run(cli: Cli) -> Result<(), AppError> {
    let cfg = load_config(&cli)?;
    std::fs::create_dir_all(&cli.out)?;
    let out = |name: &str| -> PathBuf { cli.out.join(name) };
    match cli.cmd {
        Cmd::Price { age } => {
            let age = age.unwrap_or(cfg.start_age);
            let t = check_pre_age(&cfg, age)?;
            let contract = cfg.contract()?;
            let market = cfg.market()?;
            let mortality = cfg.mortality()?;
            let a_tilde = dia_factor(&contract, &mortality, &market, t)?;
            let k_refund = refund_per_unit(&contract, &mortality, &market, t)?;
            let mut csv = Csv::new(&["age", "q", "a_tilde", "k_refund"]);
            csv.row(&[f(age), f(cfg.q), f(a_tilde), f(k_refund)]);
            write_and_report(&csv, &out("price.csv"))
        }
        Cmd::SolvePost { age } => {
            let age = age.unwrap_or(cfg.retirement_age);
            if !(cfg.retirement_age..=cfg.terminal_age).contains(&age) {
                return Err(AppError::Usage(format!(
                    "age {age} outside the retirement phase [{}, {}]",
                    cfg.retirement_age, cfg.terminal_age
                )));
            }
            let surface = run_post(&cfg)?;
            let s = surface.nearest_slice(age - cfg.retirement_age);
            let slice_age = surface.age0 + surface.times[s];
            let n_w = surface.grid.n_w();
            let mut csv = Csv::new(&["age", "w", "I", "value", "consumption", "alpha"]);
            for (q, &i) in surface.grid.i_nodes.iter().enumerate() {
                for (k, &w) in surface.grid.w_nodes.iter().enumerate() {
                    let idx = q * n_w + k;
                    let alpha = surface.alpha.as_ref().map_or(1.0, |a| a[s][idx]);
                    csv.row(&[
                        f(slice_age),
                        f(w),
                        f(i),
                        f(surface.values[s][idx]),
                        f(surface.consumption[s][idx]),
                        f(alpha),
                    ]);
                }
            }
            write_and_report(&csv, &out("post_surface.csv"))
        }
        Cmd::SolvePre { age } => {
            let age = age.unwrap_or(cfg.start_age);
            let t = check_pre_age(&cfg, age)?;
            let surface = run_post(&cfg)?;
            let pre = run_pre(&cfg, &surface, &[t])?;
            let slice = pre.nearest_slice(t)?;
            let n_w = pre.grid.n_w();
            let mut csv = Csv::new(&["age", "w", "I", "j_hold", "j_buy", "value", "annuitize"]);
            for (q, &i) in pre.grid.i_nodes.iter().enumerate() {
                for (k, &w) in pre.grid.w_nodes.iter().enumerate() {
                    let idx = q * n_w + k;
                    csv.row(&[
                        f(cfg.start_age + slice.t),
                        f(w),
                        f(i),
                        f(slice.j1[idx]),
                        f(slice.j2[idx]),
                        f(slice.value(idx)),
                        b(slice.annuitize[idx]),
                    ]);
                }
            }
            write_and_report(&csv, &out("pre_surface.csv"))
        }
        Cmd::Frontier { age } => {
            let age = age.unwrap_or(cfg.start_age);
            check_pre_age(&cfg, age)?;
            let surface = run_post(&cfg)?;
            let pre = run_pre(&cfg, &surface, &[age - cfg.start_age])?;
            let frontier = extract_frontier(&pre, age)?;
            let mut csv = Csv::new(&["age", "I", "w_star", "a_tilde"]);
            for (q, &i) in frontier.i_nodes.iter().enumerate() {
                let w_star = frontier.boundary[q].unwrap_or(f64::NAN);
                csv.row(&[f(frontier.age), f(i), f(w_star), f(frontier.a_tilde)]);
            }
            write_and_report(&csv, &out("frontier.csv"))
        }
        Cmd::AlphaMap { age } => {
            let age = age.unwrap_or(cfg.start_age);
            let t = check_pre_age(&cfg, age)?;
            let surface = run_post(&cfg)?;
            let pre = run_pre(&cfg, &surface, &[t])?;
            let slice = pre.nearest_slice(t)?;
            let n_w = pre.grid.n_w();
            let mut csv = Csv::new(&["age", "I", "w", "alpha", "annuitize"]);
            for (q, &i) in pre.grid.i_nodes.iter().enumerate() {
                for (k, &w) in pre.grid.w_nodes.iter().enumerate() {
                    let idx = q * n_w + k;
                    let alpha = slice.alpha.as_ref().map_or(1.0, |a| a[idx]);
                    csv.row(&[
                        f(cfg.start_age + slice.t),
                        f(i),
                        f(w),
                        f(alpha),
                        b(slice.annuitize[idx]),
                    ]);
                }
            }
            write_and_report(&csv, &out("alpha_map.csv"))
        }
        Cmd::Recommend { age, wealth, income } => {
            let age = age.unwrap_or(cfg.start_age);
            check_pre_age(&cfg, age)?;
            let income = income.unwrap_or(0.0);
            let surface = run_post(&cfg)?;
            let pre = run_pre(&cfg, &surface, &[age - cfg.start_age])?;
            let frontier = extract_frontier(&pre, age)?;
            let rec = frontier.recommend(wealth, income)?;
            let mut csv = Csv::new(&[
                "age",
                "wealth",
                "income",
                "delta_i",
                "a_tilde",
                "wealth_after",
                "income_after",
            ]);
            csv.row(&[
                f(age),
                f(wealth),
                f(income),
                f(rec.delta_i),
                f(frontier.a_tilde),
                f(rec.wealth_after),
                f(rec.income_after),
            ]);
            write_and_report(&csv, &out("recommend.csv"))
        }
        Cmd::Simulate { age, wealth, income, paths } => {
            let age = age.unwrap_or(cfg.start_age);
            let t0 = check_pre_age(&cfg, age)?;
            if paths == 0 {
                return Err(AppError::Usage("--paths must be at least 1".into()));
            }
            let income = income.unwrap_or(0.0);
            let surface = run_post(&cfg)?;
            let pre = run_pre(&cfg, &surface, &[t0])?;
            let policy = LifecyclePolicy::new(&pre, &surface);
            let sim_cfg = SimConfig {
                paths,
                dt: pre.grid.dt / 2.0,
                seed: cli.seed,
                t0,
                w0: wealth,
                i0: income,
            };
            let results = compare_strategies(
                &policy,
                &cfg.preferences()?,
                &cfg.market()?,
                &cfg.mortality()?,
                &sim_cfg,
                &[Strategy::Optimal, Strategy::NeverAnnuitize, Strategy::AnnuitizeAllAtStart],
            )?;
            let mut csv = Csv::new(&["strategy", "mean_utility", "ci95", "paths", "seed"]);
            for (strategy, res) in results {
                let name = match strategy {
                    Strategy::Optimal => "optimal",
                    Strategy::NeverAnnuitize => "never-annuitize",
                    Strategy::AnnuitizeAllAtStart => "annuitize-all-at-start",
                };
                csv.row(&[
                    name.to_string(),
                    f(res.mean_utility),
                    f(res.ci_halfwidth),
                    n(res.paths),
                    cli.seed.to_string(),
                ]);
            }
            write_and_report(&csv, &out("simulate.csv"))
        }
    }
}

fn write_and_report(csv: &Csv, path: &Path) -> Result<(), AppError> {
    csv.write(path)?;
    println!("wrote {}", path.display());
    Ok(())
}

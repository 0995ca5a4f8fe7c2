//! Command-line front end: validate scenario files, solve single instances,
//! run strategy comparisons, and sweep parameters, all deterministic given
//! the scenario file.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible
//! optimization, 3 partial sweep failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::disruption::{
    mean_offdiagonal, realized_probability_correlation, DisruptionProcess, DisruptionProcessConfig,
};
use crate::model::{build_portfolio_inputs, PortfolioInputs};
use crate::optimizer::verify::verify_solution;
use crate::optimizer::{ga_solve, grid_oracle_solve, GaConfig, Solution, Solver};
use crate::report;
use crate::scenario::{
    self, load_scenario, mode_token, scale_correlation, strategy_token, write_scenario,
};
use crate::seeds;
use crate::sim::{self, ScenarioConfig, SelectionMode, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "portfolio-cam",
    version,
    about = "Camera selection for reliable multi-view reconstruction under correlated disruptions"
)]
struct Cli {
    /// Suppress informational output (results files are still written).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeFlag {
    /// Bernoulli selection with probability alpha_i each epoch.
    Prob,
    /// Fixed floor(psi) cameras with the largest weights.
    Top,
}

impl ModeFlag {
    fn to_mode(self) -> SelectionMode {
        match self {
            ModeFlag::Prob => SelectionMode::ProbabilisticAlpha,
            ModeFlag::Top => SelectionMode::DeterministicTopAlpha,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SweepParam {
    Theta,
    TemporalPhi,
    CorrelationScale,
    QualityThreshold,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::TemporalPhi => "temporal_phi",
            SweepParam::CorrelationScale => "correlation_scale",
            SweepParam::QualityThreshold => "quality_threshold",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print its summary.
    Validate { scenario: PathBuf },
    /// Solve the camera-selection problem for one budget.
    Optimize {
        scenario: PathBuf,
        /// Budget to solve for; defaults to the scenario's first psi value.
        #[arg(long)]
        psi: Option<f64>,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the exhaustive grid oracle and print the gap.
        #[arg(long)]
        oracle: bool,
        /// Grid levels per camera for --oracle.
        #[arg(long, default_value_t = 5)]
        steps: usize,
        /// Write the selection weights to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare strategies over the scenario's psi values; write results CSV.
    Compare {
        scenario: PathBuf,
        /// Results CSV path; the plot companion lands next to it.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's selection mode.
        #[arg(long)]
        mode: Option<ModeFlag>,
    },
    /// Re-run the comparison for each value of one swept parameter.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's selection mode.
        #[arg(long)]
        mode: Option<ModeFlag>,
    },
    /// Write a randomly generated scenario file.
    Generate {
        #[arg(long, default_value_t = 7)]
        cameras: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Entry point used by the binary. Parses real process arguments.
pub fn run() -> i32 {
    run_from(std::env::args())
}

/// Testable entry point: parse the given arguments and execute.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are success, not usage errors.
            let is_usage_error = e.use_stderr();
            let _ = e.print();
            return if is_usage_error { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    configure_threads();
    let quiet = cli.quiet;
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario, quiet),
        Command::Optimize {
            scenario,
            psi,
            seed,
            oracle,
            steps,
            out,
        } => cmd_optimize(&scenario, psi, seed, oracle, steps, out.as_deref(), quiet),
        Command::Compare {
            scenario,
            out,
            seed,
            mode,
        } => cmd_compare(&scenario, &out, seed, mode.map(ModeFlag::to_mode), quiet),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            seed,
            mode,
        } => cmd_sweep(
            &scenario,
            param,
            &values,
            &out,
            seed,
            mode.map(ModeFlag::to_mode),
            quiet,
        ),
        Command::Generate { cameras, seed, out } => cmd_generate(cameras, seed, &out, quiet),
    }
}

/// Honors PORTFOLIO_CAM_THREADS (0 or unset = automatic).
fn configure_threads() {
    if let Ok(raw) = std::env::var("PORTFOLIO_CAM_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(0) => {}
            Ok(n) => {
                // A second initialization attempt in the same process is
                // harmless; the first pool wins.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            Err(_) => {
                eprintln!("warning: PORTFOLIO_CAM_THREADS `{raw}` is not an integer; using auto")
            }
        }
    }
}

fn apply_overrides(cfg: &mut ScenarioConfig, seed: Option<u64>, mode: Option<SelectionMode>) {
    if let Some(s) = seed {
        cfg.master_seed = s;
        cfg.disruption.rng_seed = s;
    }
    if let Some(m) = mode {
        cfg.selection_mode = m;
    }
}

fn cmd_validate(path: &Path, quiet: bool) -> i32 {
    let cfg = match load_scenario(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if !quiet {
        let rho = &cfg.disruption.spatial_rho;
        let min_eig = rho
            .as_matrix()
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let psis: Vec<String> = cfg
            .psi_values
            .iter()
            .map(|p| report::fmt_sig6(*p))
            .collect();
        let strategies: Vec<&str> = cfg.strategies.iter().map(|&s| strategy_token(s)).collect();
        println!("cameras: {}", cfg.cameras.len());
        println!("theta: {}", report::fmt_sig6(cfg.theta));
        println!("psi values: {}", psis.join(" "));
        println!(
            "quality threshold (tau): {}",
            report::fmt_sig6(cfg.quality_threshold)
        );
        println!(
            "epochs: {}, replications: {}, min views: {}",
            cfg.epochs, cfg.replications, cfg.min_views
        );
        println!(
            "selection mode: {}; strategies: {}",
            mode_token(cfg.selection_mode),
            strategies.join(" ")
        );
        println!(
            "correlation: positive semidefinite (min eigenvalue {})",
            report::fmt_sig6(min_eig)
        );
        println!(
            "temporal phi: {}; master seed: {}",
            report::fmt_sig6(cfg.disruption.temporal_phi),
            cfg.master_seed
        );
    }
    EXIT_OK
}

fn print_solution(label: &str, sol: &Solution, inputs: &PortfolioInputs) {
    println!("{label}:");
    println!("  feasible: {}", sol.feasible);
    println!("  objective: {}", report::fmt_sig6(sol.objective));
    println!(
        "  quality: {} (theta {})",
        report::fmt_sig6(sol.quality),
        report::fmt_sig6(inputs.theta)
    );
    println!(
        "  budget: {} (psi {})",
        report::fmt_sig6(sol.budget),
        report::fmt_sig6(inputs.psi)
    );
    if sol.generations_run > 0 {
        println!("  generations: {}", sol.generations_run);
    }
    println!("  alpha:");
    for (i, a) in sol.selection.alpha.iter().enumerate() {
        println!("    camera {i}: {}", report::fmt_sig6(*a));
    }
}

fn cmd_optimize(
    path: &Path,
    psi: Option<f64>,
    seed: Option<u64>,
    oracle: bool,
    steps: usize,
    out: Option<&Path>,
    quiet: bool,
) -> i32 {
    let mut cfg = match load_scenario(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut cfg, seed, None);
    let psi = psi.unwrap_or(cfg.psi_values[0]);
    let inputs =
        match build_portfolio_inputs(&cfg.cameras, &cfg.disruption.spatial_rho, cfg.theta, psi) {
            Ok(inputs) => inputs,
            Err(e) => {
                eprintln!("invalid scenario: {e}");
                return EXIT_CONFIG;
            }
        };
    // Same stream compare_strategies uses for replication 0, so the printed
    // solution matches that run's sample.
    let solver_seed = seeds::derive_seed(
        cfg.master_seed,
        &[seeds::ROLE_SOLVER, Solver::Ga.stream_id(), psi.to_bits(), 0],
    );
    let mut ga = GaConfig::for_inputs(&inputs, solver_seed);
    cfg.ga.apply(&mut ga);
    if let Err(msg) = ga.validate() {
        eprintln!("invalid scenario: {msg}");
        return EXIT_CONFIG;
    }
    let sol = ga_solve(&inputs, &ga);
    if let Err(e) = verify_solution(&inputs, &sol) {
        eprintln!("internal error: solution failed audit: {e}");
        return EXIT_CONFIG;
    }
    print_solution("solution", &sol, &inputs);

    if oracle {
        match grid_oracle_solve(&inputs, steps) {
            Ok(oracle_sol) => {
                println!("oracle (steps={steps}):");
                println!("  objective: {}", report::fmt_sig6(oracle_sol.objective));
                println!(
                    "  gap (solver - oracle): {}",
                    report::fmt_sig6(sol.objective - oracle_sol.objective)
                );
            }
            Err(e) => {
                eprintln!("oracle failed: {e}");
                return EXIT_CONFIG;
            }
        }
    }

    if let Some(out) = out {
        let mut text = String::from("camera,alpha\n");
        for (i, a) in sol.selection.alpha.iter().enumerate() {
            text.push_str(&format!("{i},{}\n", report::fmt_sig6(*a)));
        }
        if let Err(e) = std::fs::write(out, text) {
            eprintln!("cannot write {}: {e}", out.display());
            return EXIT_CONFIG;
        }
        if !quiet {
            println!("wrote selection weights to {}", out.display());
        }
    }

    if sol.feasible {
        EXIT_OK
    } else {
        eprintln!(
            "no feasible selection: theta {} exceeds the best achievable expected quality {} \
             under psi {}; printed the best-effort selection",
            report::fmt_sig6(inputs.theta),
            report::fmt_sig6(inputs.max_achievable_quality()),
            report::fmt_sig6(inputs.psi)
        );
        EXIT_INFEASIBLE
    }
}

/// `<out>` with its extension swapped for `.plot.csv`.
fn plot_path(out: &Path) -> PathBuf {
    let mut p = out.to_path_buf();
    p.set_extension("plot.csv");
    p
}

fn correlation_diagnostic(cfg: &ScenarioConfig) -> Option<(f64, f64, u64)> {
    let configured = mean_offdiagonal(&cfg.disruption.spatial_rho);
    let process = DisruptionProcess::new(cfg.disruption.clone()).ok()?;
    let mut rng = seeds::stream(cfg.master_seed, &[seeds::ROLE_STANDALONE]);
    let epochs = 2_000u64;
    let realized = realized_probability_correlation(&process, epochs, &mut rng);
    Some((configured, realized, epochs))
}

fn run_compare(cfg: &ScenarioConfig, quiet: bool) -> Result<Vec<sim::RunStats>, String> {
    let detailed = sim::compare_strategies_detailed(cfg).map_err(|e| e.to_string())?;
    for run in &detailed {
        if run.infeasible_replications > 0 {
            eprintln!(
                "warning: {} psi={}: {} of {} replications used a best-effort (infeasible) selection",
                run.stats.strategy.name(),
                report::fmt_sig6(run.stats.psi),
                run.infeasible_replications,
                cfg.replications
            );
        }
    }
    if !quiet {
        if let Some((configured, realized, epochs)) = correlation_diagnostic(cfg) {
            println!(
                "correlation check: configured latent mean {}, realized probability mean {} ({epochs} sampled epochs)",
                report::fmt_sig6(configured),
                report::fmt_sig6(realized)
            );
        }
    }
    Ok(detailed.into_iter().map(|r| r.stats).collect())
}

fn cmd_compare(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    mode: Option<SelectionMode>,
    quiet: bool,
) -> i32 {
    let mut cfg = match load_scenario(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut cfg, seed, mode);
    let rows = match run_compare(&cfg, quiet) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let csv = report::results_csv(&rows, cfg.master_seed);
    if let Err(e) = std::fs::write(out, csv) {
        eprintln!("cannot write {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    let plot = plot_path(out);
    if let Err(e) = std::fs::write(&plot, report::plot_csv(&rows)) {
        eprintln!("cannot write {}: {e}", plot.display());
        return EXIT_CONFIG;
    }
    if !quiet {
        print!("{}", report::summary_table(&rows));
        println!("wrote {} and {}", out.display(), plot.display());
    }
    EXIT_OK
}

/// Applies one sweep value to a fresh copy of the scenario.
fn apply_sweep_value(
    cfg: &ScenarioConfig,
    param: SweepParam,
    value: f64,
) -> Result<ScenarioConfig, String> {
    let mut cfg = cfg.clone();
    match param {
        SweepParam::Theta => {
            if value < 0.0 {
                return Err(format!("theta must be nonnegative, got {value}"));
            }
            cfg.theta = value;
        }
        SweepParam::QualityThreshold => {
            cfg.quality_threshold = value;
        }
        SweepParam::TemporalPhi => {
            cfg.disruption = DisruptionProcessConfig::new(
                cfg.disruption.spatial_rho.clone(),
                value,
                cfg.disruption.marginals.clone(),
                cfg.disruption.rng_seed,
            )
            .map_err(|e| e.to_string())?;
        }
        SweepParam::CorrelationScale => {
            let scaled =
                scale_correlation(&cfg.disruption.spatial_rho, value).map_err(|e| e.to_string())?;
            cfg.disruption = DisruptionProcessConfig::new(
                scaled,
                cfg.disruption.temporal_phi,
                cfg.disruption.marginals.clone(),
                cfg.disruption.rng_seed,
            )
            .map_err(|e| e.to_string())?;
        }
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn cmd_sweep(
    path: &Path,
    param: SweepParam,
    values: &[f64],
    out: &Path,
    seed: Option<u64>,
    mode: Option<SelectionMode>,
    quiet: bool,
) -> i32 {
    let mut cfg = match load_scenario(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    apply_overrides(&mut cfg, seed, mode);

    let mut blocks: Vec<(f64, Vec<sim::RunStats>)> = Vec::new();
    let mut skipped = 0usize;
    for &value in values {
        let block_cfg = match apply_sweep_value(&cfg, param, value) {
            Ok(c) => c,
            Err(e) => {
                eprintln!(
                    "sweep {} = {}: skipped: {e}",
                    param.name(),
                    report::fmt_sig6(value)
                );
                skipped += 1;
                continue;
            }
        };
        let detailed = match sim::compare_strategies_detailed(&block_cfg) {
            Ok(d) => d,
            Err(e) => {
                eprintln!(
                    "sweep {} = {}: skipped: {e}",
                    param.name(),
                    report::fmt_sig6(value)
                );
                skipped += 1;
                continue;
            }
        };
        if !quiet {
            for run in &detailed {
                if run.stats.strategy == Strategy::Portfolio {
                    println!(
                        "sweep {} = {}: portfolio objective at psi {} is {}{}",
                        param.name(),
                        report::fmt_sig6(value),
                        report::fmt_sig6(run.stats.psi),
                        report::fmt_sig6(run.sample_solution.objective),
                        if run.sample_solution.feasible {
                            ""
                        } else {
                            " (best effort, infeasible)"
                        }
                    );
                }
            }
        }
        blocks.push((value, detailed.into_iter().map(|r| r.stats).collect()));
    }

    if blocks.is_empty() {
        eprintln!("sweep produced no runnable configurations");
        return EXIT_CONFIG;
    }
    let csv = report::sweep_csv(&blocks, cfg.master_seed);
    if let Err(e) = std::fs::write(out, csv) {
        eprintln!("cannot write {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    if !quiet {
        println!(
            "wrote {} ({} of {} values)",
            out.display(),
            blocks.len(),
            values.len()
        );
    }
    if skipped > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn cmd_generate(cameras: usize, seed: u64, out: &Path, quiet: bool) -> i32 {
    let cfg = match scenario::random_scenario(cameras, seed) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = write_scenario(&cfg, out) {
        eprintln!("cannot write {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    if !quiet {
        println!(
            "wrote a {}-camera scenario to {} (seed {seed})",
            cfg.cameras.len(),
            out.display()
        );
    }
    EXIT_OK
}

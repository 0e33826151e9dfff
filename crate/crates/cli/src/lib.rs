//! Command-line front end: run one experiment, sweep a parameter, or run the
//! randomised self-checks.

pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ocean_core::scheduler::bound_report;
use ocean_core::sim::{export_schedule, run_on_channels, summary_row, write_summary_csv};
use ocean_core::verify::{
    bounds_suite, solver_suite, structure_suite, InstanceFamily, SuiteReport,
};
use ocean_core::SweepAxis;
use serde::Serialize;

pub use config::Experiment;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "ocean",
    version,
    about = "Energy-aware client selection and bandwidth allocation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trace, schedule and summaries.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Repeat an experiment over values of one parameter and several seeds.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "v")]
        axis: String,
        /// Comma-separated values; defaults to `policy.v_grid` for the `v` axis.
        #[arg(long)]
        values: Option<String>,
        /// Seeds per value, counted up from `run.seed`; defaults to `run.seeds`.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomised checks of the solver, decision structure and energy bound.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Instances (or traces for `bounds`) to check.
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Writes every report, failures included, as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Solver,
    Bounds,
    Structure,
}

/// Executes a parsed command, writing progress to `out`.
pub fn execute(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out: dir,
            seed,
        } => run(&config, &dir, seed, out),
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            out: dir,
        } => sweep(&config, &axis, values.as_deref(), seeds, &dir, out),
        Command::Verify {
            suite,
            instances,
            seed,
            dump,
        } => verify(suite, instances, seed, dump.as_deref(), out),
    }
}

#[derive(Serialize)]
struct BoundsFile {
    configured_floor: ocean_core::scheduler::BoundReport,
    empirical_min: ocean_core::scheduler::BoundReport,
}

fn run(config: &Path, dir: &Path, seed: Option<u64>, out: &mut impl Write) -> Result<(), CliError> {
    let mut exp = Experiment::load(config)?;
    if let Some(seed) = seed {
        exp.run = exp.run.with_seed(seed);
    }
    let channels = exp.channels()?;
    if channels.rounds() != exp.run.horizon || channels.clients() != exp.run.params.num_clients {
        return Err(CliError::config(
            "scenario.channels_csv",
            format!(
                "matrix is {}x{}, the run needs {}x{}",
                channels.rounds(),
                channels.clients(),
                exp.run.horizon,
                exp.run.params.num_clients
            ),
        ));
    }
    let trace = run_on_channels(exp.policy, &exp.run, &channels)?;

    create_dir(dir)?;
    trace.write(&dir.join("trace.csv"))?;
    channels.write_csv(&dir.join("channels.csv"))?;
    export_schedule(&trace, &dir.join("schedule.json"))?;
    let row = summary_row(&exp.policy.to_string(), exp.run.seed, &trace);
    write_summary_csv(std::slice::from_ref(&row), &dir.join("summary.csv"))?;
    let bounds = BoundsFile {
        configured_floor: bound_report(
            &trace,
            &exp.run,
            exp.run.scenario.gain_floor(exp.run.horizon),
        )?,
        empirical_min: bound_report(&trace, &exp.run, channels.min_gain())?,
    };
    write_json(&dir.join("bounds.json"), &bounds)?;

    let verdict = |holds: bool| if holds { "holds" } else { "VIOLATED" };
    writeln_out(
        out,
        format_args!(
            "{} seed {}: total utility {:.4}, mean selected {:.3}, max violation {:.6} J, \
             energy bound {} (configured floor) / {} (empirical min)",
            trace.policy,
            exp.run.seed,
            row.total_utility,
            row.mean_selected,
            row.max_violation_j,
            verdict(bounds.configured_floor.holds()),
            verdict(bounds.empirical_min.holds()),
        ),
    )
}

fn sweep(
    config: &Path,
    axis: &str,
    values: Option<&str>,
    seeds: Option<usize>,
    dir: &Path,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let exp = Experiment::load(config)?;
    if exp.channels_csv.is_some() {
        return Err(CliError::config(
            "scenario.channels_csv",
            "sweeps generate their own channels; remove channels_csv",
        ));
    }
    let values = match (values, axis, &exp.v_grid) {
        (Some(v), _, _) => v.to_string(),
        (None, "v", Some(grid)) => grid
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(","),
        (None, _, _) => return Err(CliError::config("--values", "required for this axis")),
    };
    let axis = SweepAxis::parse(axis, &values).map_err(CliError::from_validation)?;
    let count = seeds.unwrap_or(exp.seeds);
    if count == 0 {
        return Err(CliError::config("--seeds", "must be >= 1"));
    }
    let seed_list: Vec<u64> = (0..count as u64).map(|i| exp.run.seed + i).collect();
    let table = ocean_core::sweep(exp.policy, &exp.run, &axis, &seed_list)
        .map_err(CliError::from_validation)?;

    create_dir(dir)?;
    table.write_csv(&dir.join("summary.csv"))?;
    table.write_aggregate_csv(&dir.join("aggregate.csv"))?;
    for s in table.summarize() {
        writeln_out(
            out,
            format_args!(
                "{} = {}: utility {:.4} ± {:.4}, mean selected {:.3}, max violation {:.6} J ({} runs)",
                table.axis,
                s.axis_value,
                s.utility_mean,
                s.utility_std,
                s.mean_selected_mean,
                s.max_violation_mean,
                s.runs
            ),
        )?;
    }
    Ok(())
}

fn verify(
    suite: Suite,
    instances: Option<usize>,
    seed: u64,
    dump: Option<&Path>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let families = [InstanceFamily::Reference, InstanceFamily::Binding];
    let reports: Vec<SuiteReport> = match suite {
        Suite::Solver => families
            .iter()
            .map(|&f| solver_suite(instances.unwrap_or(1000), seed, f))
            .collect::<Result<_, _>>()?,
        Suite::Structure => families
            .iter()
            .map(|&f| structure_suite(instances.unwrap_or(1000), seed, f))
            .collect::<Result<_, _>>()?,
        Suite::Bounds => vec![bounds_suite(instances.unwrap_or(50), seed)?],
    };
    for r in &reports {
        let status = if r.ok() { "PASS" } else { "FAIL" };
        writeln_out(
            out,
            format_args!(
                "[{status}] {}: {}/{} passed",
                r.suite,
                r.passed(),
                r.checked
            ),
        )?;
    }
    if let Some(path) = dump {
        write_json(path, &reports)?;
    }
    let failures: Vec<_> = reports.iter().filter(|r| !r.ok()).collect();
    if failures.is_empty() {
        return Ok(());
    }
    let json = serde_json::to_string_pretty(&failures).unwrap_or_default();
    writeln_out(out, format_args!("{json}"))?;
    let total: usize = failures.iter().map(|r| r.failures.len()).sum();
    Err(CliError::Violation(format!("{total} failing instance(s)")))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let io = |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let json = serde_json::to_string_pretty(value).map_err(|e| io(e.into()))?;
    std::fs::write(path, json + "\n").map_err(io)
}

fn writeln_out(out: &mut impl Write, args: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    writeln!(out, "{args}").map_err(|e| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

//! Experiment orchestration: one policy over one seeded channel draw, seed
//! and parameter sweeps, and the files handed to downstream tools.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{run_benchmark, BenchmarkTag};
use crate::channel::{generate_channels, ChannelMatrix, ChannelScenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::scheduler::{eta_sequence, run_ocean_labelled, EtaKind, RunConfig};
use crate::stats::{mean, sample_std};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    Ocean(EtaKind),
    Benchmark(BenchmarkTag),
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Ocean(kind) => write!(f, "ocean-{}", kind.suffix()),
            Policy::Benchmark(tag) => tag.fmt(f),
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(kind) = s
            .strip_prefix("ocean-")
            .or_else(|| s.strip_prefix("ocean_"))
        {
            return Ok(Policy::Ocean(kind.parse()?));
        }
        match s.parse::<BenchmarkTag>() {
            Ok(BenchmarkTag::Lookahead(_)) => Err(Error::config(
                "policy.name",
                "the lookahead oracle runs only through `verify`, not as a run policy",
            )),
            Ok(tag) => Ok(Policy::Benchmark(tag)),
            Err(_) => Err(Error::config(
                "policy.name",
                format!("unknown policy `{s}` (ocean-a, ocean-d, ocean-u, select_all, smo, amo)"),
            )),
        }
    }
}

impl RunConfig {
    /// Copy with the run seed and the channel seed both set to `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.scenario.seed = seed;
        cfg
    }

    pub fn channels(&self) -> Result<ChannelMatrix> {
        generate_channels(&self.scenario, self.horizon, self.params.num_clients)
    }
}

/// Generates the configured channels and runs `policy` over them.
pub fn run_experiment(policy: Policy, config: &RunConfig) -> Result<Trace> {
    let channels = config.channels()?;
    run_on_channels(policy, config, &channels)
}

/// Runs `policy` over a given channel matrix. Online variants replace the
/// configured temporal weights with their own sequence.
pub fn run_on_channels(
    policy: Policy,
    config: &RunConfig,
    channels: &ChannelMatrix,
) -> Result<Trace> {
    match policy {
        Policy::Ocean(kind) => {
            let mut cfg = config.clone();
            cfg.eta = eta_sequence(kind, cfg.horizon);
            run_ocean_labelled(&cfg, channels, &policy.to_string())
        }
        Policy::Benchmark(tag) => run_benchmark(tag, config, channels),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    V(Vec<f64>),
    Scenario(Vec<ScenarioKind>),
    /// Explicit seeds; each value is one run.
    Seeds(Vec<u64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::V(_) => "v",
            SweepAxis::Scenario(_) => "scenario",
            SweepAxis::Seeds(_) => "seeds",
        }
    }

    /// Parses `--axis` / `--values` pairs such as `v` + `0.1,1,10`.
    pub fn parse(axis: &str, values: &str) -> Result<Self> {
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let bad = |msg: String| Error::config("--values", msg);
        let parsed = match axis {
            "v" => SweepAxis::V(
                items
                    .iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| bad(format!("`{s}` is not a number")))
                    })
                    .collect::<Result<_>>()?,
            ),
            "scenario" => SweepAxis::Scenario(
                items
                    .iter()
                    .map(|s| s.parse::<ScenarioKind>())
                    .collect::<Result<_>>()?,
            ),
            "seeds" => SweepAxis::Seeds(
                items
                    .iter()
                    .map(|s| {
                        s.parse::<u64>()
                            .map_err(|_| bad(format!("`{s}` is not a seed")))
                    })
                    .collect::<Result<_>>()?,
            ),
            other => {
                return Err(Error::config(
                    "--axis",
                    format!("unknown axis `{other}` (v, scenario, seeds)"),
                ))
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self.labels();
        if labels.is_empty() {
            return Err(Error::config("--values", "at least one value is required"));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(Error::config(
                    "--values",
                    format!("duplicate value `{label}`"),
                ));
            }
        }
        if let SweepAxis::V(vs) = self {
            if let Some(v) = vs.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::config("--values", format!("V must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    fn labels(&self) -> Vec<String> {
        match self {
            SweepAxis::V(vs) => vs.iter().map(|v| v.to_string()).collect(),
            SweepAxis::Scenario(ks) => ks.iter().map(|k| k.to_string()).collect(),
            SweepAxis::Seeds(ss) => ss.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// One `(axis value, seed)` run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub seed: u64,
    pub total_utility: f64,
    pub mean_selected: f64,
    pub max_violation_j: f64,
}

/// Aggregate over the seeds of one axis value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub axis_value: String,
    pub runs: usize,
    pub utility_mean: f64,
    pub utility_std: f64,
    pub mean_selected_mean: f64,
    pub mean_selected_std: f64,
    pub max_violation_mean: f64,
    pub max_violation_std: f64,
}

pub const SUMMARY_CSV_HEADER: &str = "axis_value,seed,total_utility,mean_selected,max_violation_J";

pub const AGGREGATE_CSV_HEADER: &str = "axis_value,runs,utility_mean,utility_std,\
mean_selected_mean,mean_selected_std,max_violation_mean_J,max_violation_std_J";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Per-value mean and sample standard deviation, in axis order.
    pub fn summarize(&self) -> Vec<SweepSummary> {
        let mut order: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !order.contains(&row.axis_value.as_str()) {
                order.push(&row.axis_value);
            }
        }
        order
            .into_iter()
            .map(|value| {
                let rows: Vec<&SweepRow> =
                    self.rows.iter().filter(|r| r.axis_value == value).collect();
                let col = |f: fn(&SweepRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
                let utility = col(|r| r.total_utility);
                let selected = col(|r| r.mean_selected);
                let violation = col(|r| r.max_violation_j);
                SweepSummary {
                    axis_value: value.to_string(),
                    runs: rows.len(),
                    utility_mean: mean(&utility),
                    utility_std: sample_std(&utility),
                    mean_selected_mean: mean(&selected),
                    mean_selected_std: sample_std(&selected),
                    max_violation_mean: mean(&violation),
                    max_violation_std: sample_std(&violation),
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_summary_csv(&self.rows, path)
    }

    /// Writes [`SweepTable::summarize`] with [`AGGREGATE_CSV_HEADER`].
    pub fn write_aggregate_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "{AGGREGATE_CSV_HEADER}").map_err(io)?;
        for s in self.summarize() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.axis_value,
                s.runs,
                s.utility_mean,
                s.utility_std,
                s.mean_selected_mean,
                s.mean_selected_std,
                s.max_violation_mean,
                s.max_violation_std
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

pub fn write_summary_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "{SUMMARY_CSV_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.axis_value, r.seed, r.total_utility, r.mean_selected, r.max_violation_j
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn summary_row(axis_value: &str, seed: u64, trace: &Trace) -> SweepRow {
    let totals = trace.totals();
    SweepRow {
        axis_value: axis_value.to_string(),
        seed,
        total_utility: totals.total_utility,
        mean_selected: trace.mean_selected(),
        max_violation_j: totals.max_violation(),
    }
}

/// Runs `policy` for every axis value and seed. Runs execute in parallel;
/// rows come back ordered by axis value, then seed.
pub fn sweep(
    policy: Policy,
    base: &RunConfig,
    axis: &SweepAxis,
    seeds: &[u64],
) -> Result<SweepTable> {
    axis.validate()?;
    let mut jobs: Vec<(String, RunConfig)> = Vec::new();
    match axis {
        SweepAxis::V(vs) => {
            require_seeds(seeds)?;
            for &v in vs {
                for &seed in seeds {
                    let mut cfg = base.with_seed(seed);
                    cfg.v_sequence = vec![v; cfg.num_frames()];
                    jobs.push((v.to_string(), cfg));
                }
            }
        }
        SweepAxis::Scenario(kinds) => {
            require_seeds(seeds)?;
            for &kind in kinds {
                for &seed in seeds {
                    let mut cfg = base.with_seed(seed);
                    cfg.scenario = ChannelScenario::with_kind(
                        kind,
                        base.scenario.pathloss_db_start,
                        base.scenario.fading,
                        seed,
                    );
                    jobs.push((kind.to_string(), cfg));
                }
            }
        }
        SweepAxis::Seeds(explicit) => {
            for &seed in explicit {
                jobs.push((seed.to_string(), base.with_seed(seed)));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(label, cfg)| {
            let trace = run_experiment(policy, cfg)?;
            Ok(summary_row(label, cfg.seed, &trace))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        axis: axis.name().to_string(),
        rows,
    })
}

fn require_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::config("--seeds", "must be >= 1"));
    }
    Ok(())
}

/// Per-round selected-client lists, the interchange format for replay tools:
/// `{"T": 300, "K": 10, "rounds": [[0, 3], [], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    #[serde(rename = "T")]
    pub rounds_total: usize,
    #[serde(rename = "K")]
    pub num_clients: usize,
    pub rounds: Vec<Vec<usize>>,
}

impl Schedule {
    pub fn from_trace(trace: &Trace) -> Self {
        Schedule {
            rounds_total: trace.records.len(),
            num_clients: trace.config.params.num_clients,
            rounds: trace
                .records
                .iter()
                .map(|r| {
                    r.selected
                        .iter()
                        .enumerate()
                        .filter_map(|(k, &a)| a.then_some(k))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds.len() != self.rounds_total {
            return Err(Error::domain(format!(
                "schedule declares {} rounds but lists {}",
                self.rounds_total,
                self.rounds.len()
            )));
        }
        for (t, ids) in self.rounds.iter().enumerate() {
            if let Some(k) = ids.iter().find(|&&k| k >= self.num_clients) {
                return Err(Error::domain(format!("round {t}: client {k} out of range")));
            }
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain(format!(
                    "round {t}: client lists must be strictly increasing"
                )));
            }
        }
        Ok(())
    }

    /// Selection vectors, one per round.
    pub fn selection_vectors(&self) -> Vec<Vec<bool>> {
        self.rounds
            .iter()
            .map(|ids| {
                let mut a = vec![false; self.num_clients];
                ids.iter().for_each(|&k| a[k] = true);
                a
            })
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schedule: Schedule =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        schedule
            .validate()
            .map_err(|e| Error::format(path, e.to_string()))?;
        Ok(schedule)
    }
}

/// Writes the selected-client lists of `trace` to `path`.
pub fn export_schedule(trace: &Trace, path: &Path) -> Result<Schedule> {
    let schedule = Schedule::from_trace(trace);
    schedule.write(path)?;
    Ok(schedule)
}

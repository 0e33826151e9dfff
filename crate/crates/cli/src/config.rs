//! TOML experiment files.
//!
//! ```toml
//! [network]
//! bandwidth_hz = 1e7
//! noise_w = 1e-12
//! deadline_s = 0.3
//! model_bits = 3.4e5
//! b_min_hz = 2e5
//!
//! [run]
//! rounds = 300
//! frame = 300      # defaults to `rounds`
//! clients = 10
//! seed = 0
//! seeds = 20       # sweep repetitions
//!
//! [budgets]
//! energy_j = 0.15  # one value for every client, or a list
//!
//! [policy]
//! name = "ocean"   # ocean | select_all | smo | amo
//! eta = "ascending"
//! v = 3e-6         # one value, or one per frame
//! v_grid = [0.1, 0.5, 2.0, 10.0, 50.0]
//!
//! [scenario]
//! kind = "static"  # static | pathloss_ramp_up | pathloss_ramp_down
//! pathloss_db = 36.0
//! fading = "rayleigh"
//! ```
//!
//! Ramps take `pathloss_db_start` / `pathloss_db_end` and default to
//! 32 → 45 dB (up) or 45 → 32 dB (down). `channels_csv` replaces the
//! generated channels with a stored matrix, resolved against the config
//! file's directory.

use std::path::{Path, PathBuf};

use ocean_core::channel::{ChannelMatrix, ChannelScenario, Fading, ScenarioKind};
use ocean_core::energy::NetworkParams;
use ocean_core::scheduler::{eta_sequence, EtaKind, RunConfig, DEFAULT_V};
use ocean_core::sim::Policy;
use ocean_core::BenchmarkTag;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub network: NetworkSection,
    pub run: RunSection,
    pub budgets: BudgetSection,
    pub policy: PolicySection,
    #[serde(default)]
    pub scenario: ScenarioSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    pub deadline_s: f64,
    pub model_bits: f64,
    pub b_min_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub rounds: usize,
    pub frame: Option<usize>,
    pub clients: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

fn default_seeds() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x; n],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub energy_j: OneOrMany,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub name: String,
    #[serde(default = "default_eta")]
    pub eta: String,
    pub v: Option<OneOrMany>,
    pub v_grid: Option<Vec<f64>>,
}

fn default_eta() -> String {
    "ascending".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    pub pathloss_db: Option<f64>,
    pub pathloss_db_start: Option<f64>,
    pub pathloss_db_end: Option<f64>,
    #[serde(default = "default_fading")]
    pub fading: String,
    pub channels_csv: Option<PathBuf>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            kind: default_kind(),
            pathloss_db: None,
            pathloss_db_start: None,
            pathloss_db_end: None,
            fading: default_fading(),
            channels_csv: None,
        }
    }
}

fn default_kind() -> String {
    "static".into()
}

fn default_fading() -> String {
    "rayleigh".into()
}

/// A validated experiment: the run configuration plus what the file says
/// about policy choice, sweeps and external channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub run: RunConfig,
    pub policy: Policy,
    pub seeds: usize,
    pub v_grid: Option<Vec<f64>>,
    pub channels_csv: Option<PathBuf>,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Config {
            field: "(file)".into(),
            message: format!("{}: {}", path.display(), e.message()),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_file(file, base)
    }

    pub fn from_file(file: ConfigFile, base_dir: &Path) -> Result<Self, CliError> {
        let n = &file.network;
        let k = file.run.clients;
        let params = NetworkParams {
            bandwidth_hz: n.bandwidth_hz,
            noise_w: n.noise_w,
            deadline_s: n.deadline_s,
            model_bits: n.model_bits,
            b_min: n.b_min_hz / n.bandwidth_hz,
            num_clients: k,
        };
        params.validate().map_err(CliError::from_validation)?;
        let horizon = file.run.rounds;
        let frame = file.run.frame.unwrap_or(horizon);
        if frame == 0 || horizon == 0 || !horizon.is_multiple_of(frame) {
            return Err(CliError::config(
                "run.frame",
                format!("frame length {frame} must divide rounds = {horizon} (both >= 1)"),
            ));
        }
        let frames = horizon / frame;

        let eta_kind: EtaKind = file.policy.eta.parse().map_err(CliError::from_validation)?;
        let policy = match file.policy.name.as_str() {
            "ocean" => Policy::Ocean(eta_kind),
            other => match other.parse::<BenchmarkTag>() {
                Ok(BenchmarkTag::Lookahead(_)) | Err(_) => {
                    return Err(CliError::config(
                        "policy.name",
                        format!("unknown policy `{other}` (ocean, select_all, smo, amo)"),
                    ))
                }
                Ok(tag) => Policy::Benchmark(tag),
            },
        };
        let v_sequence = match (&file.policy.v, policy) {
            (Some(v), _) => v.expand(frames),
            (None, Policy::Ocean(_)) => {
                return Err(CliError::config(
                    "policy.v",
                    "required for the ocean policy",
                ))
            }
            // baselines ignore V; keep the run config well-formed
            (None, Policy::Benchmark(_)) => vec![DEFAULT_V; frames],
        };

        let scenario = scenario_from(&file.scenario, file.run.seed)?;
        let run = RunConfig {
            horizon,
            frame,
            v_sequence,
            eta: eta_sequence(eta_kind, horizon),
            budgets: file.budgets.energy_j.expand(k),
            params,
            seed: file.run.seed,
            scenario,
        };
        run.validate().map_err(CliError::from_validation)?;

        if file.run.seeds == 0 {
            return Err(CliError::config("run.seeds", "must be >= 1"));
        }
        if let Some(grid) = &file.policy.v_grid {
            if grid.is_empty() || grid.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(CliError::config(
                    "policy.v_grid",
                    "values must be finite and > 0",
                ));
            }
        }
        Ok(Experiment {
            run,
            policy,
            seeds: file.run.seeds,
            v_grid: file.policy.v_grid.clone(),
            channels_csv: file
                .scenario
                .channels_csv
                .as_ref()
                .map(|p| base_dir.join(p)),
        })
    }

    /// Generated channels, or the stored matrix when `channels_csv` is set.
    pub fn channels(&self) -> Result<ChannelMatrix, CliError> {
        match &self.channels_csv {
            Some(path) => Ok(ChannelMatrix::read_csv(path)?),
            None => Ok(self.run.channels()?),
        }
    }
}

fn scenario_from(s: &ScenarioSection, seed: u64) -> Result<ChannelScenario, CliError> {
    let kind: ScenarioKind = s.kind.parse().map_err(CliError::from_validation)?;
    let fading = match s.fading.as_str() {
        "rayleigh" => Fading::Rayleigh,
        "none" => Fading::None,
        other => {
            return Err(CliError::config(
                "scenario.fading",
                format!("unknown fading `{other}` (rayleigh, none)"),
            ))
        }
    };
    let (start, end) = match kind {
        ScenarioKind::Static => {
            let db = s.pathloss_db.or(s.pathloss_db_start).unwrap_or(36.0);
            (db, db)
        }
        ScenarioKind::PathlossRampUp => (
            s.pathloss_db_start.unwrap_or(32.0),
            s.pathloss_db_end.unwrap_or(45.0),
        ),
        ScenarioKind::PathlossRampDown => (
            s.pathloss_db_start.unwrap_or(45.0),
            s.pathloss_db_end.unwrap_or(32.0),
        ),
    };
    let scenario = ChannelScenario {
        kind,
        pathloss_db_start: start,
        pathloss_db_end: end,
        fading,
        seed,
    };
    scenario.validate().map_err(CliError::from_validation)?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[network]
bandwidth_hz = 1e7
noise_w = 1e-12
deadline_s = 0.3
model_bits = 3.4e5
b_min_hz = 2e5

[run]
rounds = 30
clients = 4

[budgets]
energy_j = [0.1, 0.2, 0.3, 0.4]

[policy]
name = "smo"
"#;

    fn parse(text: &str) -> Result<Experiment, CliError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config {
            field: "(file)".into(),
            message: e.message().to_string(),
        })?;
        Experiment::from_file(file, Path::new("."))
    }

    #[test]
    fn minimal_file_fills_defaults() {
        let exp = parse(MINIMAL).unwrap();
        assert_eq!(exp.run.frame, 30);
        assert_eq!(exp.run.params.b_min, 0.02);
        assert_eq!(exp.run.budgets, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            exp.run.scenario,
            ChannelScenario::fixed(36.0, Fading::Rayleigh, 0)
        );
        assert_eq!(exp.policy, Policy::Benchmark(BenchmarkTag::Smo));
        assert_eq!(exp.seeds, 20);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("clients = 4", "clients = 4\nclient_count = 4");
        assert!(matches!(parse(&text), Err(CliError::Config { .. })));
    }

    #[test]
    fn field_level_messages() {
        let cases = [
            (
                MINIMAL.replace("b_min_hz = 2e5", "b_min_hz = 3e6"),
                "network.b_min_hz",
            ),
            (
                MINIMAL.replace("rounds = 30", "rounds = 30\nframe = 7"),
                "run.frame",
            ),
            (
                MINIMAL.replace("[0.1, 0.2, 0.3, 0.4]", "[0.1, 0.2]"),
                "budgets.energy_j",
            ),
            (MINIMAL.replace("\"smo\"", "\"ocean\""), "policy.v"),
            (MINIMAL.replace("\"smo\"", "\"greedy\""), "policy.name"),
            (
                MINIMAL.replace("noise_w = 1e-12", "noise_w = -1.0"),
                "network.noise_w",
            ),
        ];
        for (text, field) in cases {
            match parse(&text) {
                Err(CliError::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected a config error on {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn ramps_default_to_canonical_endpoints() {
        let text =
            format!("{MINIMAL}\n[scenario]\nkind = \"pathloss_ramp_up\"\nfading = \"none\"\n");
        let exp = parse(&text).unwrap();
        assert_eq!(exp.run.scenario.pathloss_db_start, 32.0);
        assert_eq!(exp.run.scenario.pathloss_db_end, 45.0);
        assert_eq!(exp.run.scenario.fading, Fading::None);
    }

    #[test]
    fn per_frame_v_values() {
        let text = MINIMAL
            .replace("rounds = 30", "rounds = 30\nframe = 10")
            .replace("\"smo\"", "\"ocean\"\nv = [1e-6, 2e-6, 3e-6]");
        let exp = parse(&text).unwrap();
        assert_eq!(exp.run.v_sequence, vec![1e-6, 2e-6, 3e-6]);
        let bad = text.replace("[1e-6, 2e-6, 3e-6]", "[1e-6, 2e-6]");
        assert!(parse(&bad).is_err());
    }
}

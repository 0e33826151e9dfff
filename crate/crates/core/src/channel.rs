//! Seeded channel-gain matrices for the simulated scenarios.
//!
//! `h²[t][k] = PL(t)·g[t][k]`, with the path loss `PL(t)` interpolated
//! linearly in dB across the horizon and `g` i.i.d. unit-mean exponential
//! (Rayleigh amplitude) or identically 1 without fading.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor on the small-scale fading draw, relative to its unit mean.
pub const FADING_FLOOR: f64 = 1e-12;

pub const CHANNEL_CSV_HEADER: &str = "round,client,h_squared";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Static,
    PathlossRampUp,
    PathlossRampDown,
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(ScenarioKind::Static),
            "pathloss_ramp_up" | "ramp_up" => Ok(ScenarioKind::PathlossRampUp),
            "pathloss_ramp_down" | "ramp_down" => Ok(ScenarioKind::PathlossRampDown),
            other => Err(Error::config(
                "scenario.kind",
                format!(
                    "unknown scenario `{other}` (static, pathloss_ramp_up, pathloss_ramp_down)"
                ),
            )),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Static => "static",
            ScenarioKind::PathlossRampUp => "pathloss_ramp_up",
            ScenarioKind::PathlossRampDown => "pathloss_ramp_down",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    Rayleigh,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScenario {
    pub kind: ScenarioKind,
    pub pathloss_db_start: f64,
    pub pathloss_db_end: f64,
    pub fading: Fading,
    pub seed: u64,
}

impl ChannelScenario {
    /// Constant average path loss.
    pub fn fixed(pathloss_db: f64, fading: Fading, seed: u64) -> Self {
        ChannelScenario {
            kind: ScenarioKind::Static,
            pathloss_db_start: pathloss_db,
            pathloss_db_end: pathloss_db,
            fading,
            seed,
        }
    }

    /// Clients drifting away: 32 dB rising to 45 dB.
    pub fn moving_away(seed: u64) -> Self {
        ChannelScenario {
            kind: ScenarioKind::PathlossRampUp,
            pathloss_db_start: 32.0,
            pathloss_db_end: 45.0,
            fading: Fading::Rayleigh,
            seed,
        }
    }

    /// Clients approaching: 45 dB falling to 32 dB.
    pub fn moving_closer(seed: u64) -> Self {
        ChannelScenario {
            kind: ScenarioKind::PathlossRampDown,
            pathloss_db_start: 45.0,
            pathloss_db_end: 32.0,
            fading: Fading::Rayleigh,
            seed,
        }
    }

    /// The same scenario kind with its canonical path-loss endpoints.
    pub fn with_kind(kind: ScenarioKind, static_db: f64, fading: Fading, seed: u64) -> Self {
        match kind {
            ScenarioKind::Static => Self::fixed(static_db, fading, seed),
            ScenarioKind::PathlossRampUp => ChannelScenario {
                fading,
                ..Self::moving_away(seed)
            },
            ScenarioKind::PathlossRampDown => ChannelScenario {
                fading,
                ..Self::moving_closer(seed)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, db) in [
            ("scenario.pathloss_db_start", self.pathloss_db_start),
            ("scenario.pathloss_db_end", self.pathloss_db_end),
        ] {
            if !(db > 0.0 && db < 200.0) {
                return Err(Error::config(field, format!("{db} dB outside (0, 200)")));
            }
        }
        let (start, end) = (self.pathloss_db_start, self.pathloss_db_end);
        let consistent = match self.kind {
            ScenarioKind::Static => start == end,
            ScenarioKind::PathlossRampUp => end >= start,
            ScenarioKind::PathlossRampDown => end <= start,
        };
        if !consistent {
            return Err(Error::config(
                "scenario",
                format!("{} does not fit path loss {start} -> {end} dB", self.kind),
            ));
        }
        Ok(())
    }

    /// Average path loss in dB at round `t` of `horizon`.
    pub fn pathloss_db(&self, t: usize, horizon: usize) -> f64 {
        if horizon <= 1 || self.kind == ScenarioKind::Static {
            return self.pathloss_db_start;
        }
        let frac = t as f64 / (horizon - 1) as f64;
        self.pathloss_db_start + (self.pathloss_db_end - self.pathloss_db_start) * frac
    }

    /// Smallest gain the generator can emit over `horizon` rounds.
    pub fn gain_floor(&self, horizon: usize) -> f64 {
        let worst_db = (0..horizon.max(1))
            .map(|t| self.pathloss_db(t, horizon))
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = match self.fading {
            Fading::Rayleigh => FADING_FLOOR,
            Fading::None => 1.0,
        };
        db_to_linear(worst_db) * floor
    }
}

/// Converts a path loss in dB into a linear power gain.
pub fn db_to_linear(pathloss_db: f64) -> f64 {
    10f64.powf(-pathloss_db / 10.0)
}

/// Row-major `T × K` matrix of channel power gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    rounds: usize,
    clients: usize,
    gains: Vec<f64>,
}

impl ChannelMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let rounds = rows.len();
        let clients = rows.first().map_or(0, Vec::len);
        if rounds == 0 || clients == 0 {
            return Err(Error::domain(
                "channel matrix needs at least one round and one client",
            ));
        }
        if rows.iter().any(|r| r.len() != clients) {
            return Err(Error::domain("channel matrix rows differ in length"));
        }
        let gains: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::domain(format!("channel gain {g} is not positive")));
        }
        Ok(ChannelMatrix {
            rounds,
            clients,
            gains,
        })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn round(&self, t: usize) -> &[f64] {
        &self.gains[t * self.clients..(t + 1) * self.clients]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.gains[t * self.clients + k]
    }

    pub fn min_gain(&self) -> f64 {
        self.gains.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{CHANNEL_CSV_HEADER}").map_err(io)?;
        for t in 0..self.rounds {
            for k in 0..self.clients {
                writeln!(out, "{t},{k},{}", self.get(t, k)).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    /// Reads the `round,client,h_squared` CSV; every (round, client) cell must appear once.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty file"))?
            .map_err(|e| Error::io(path, e))?;
        if header.trim() != CHANNEL_CSV_HEADER {
            return Err(Error::format(
                path,
                format!("expected header `{CHANNEL_CSV_HEADER}`, got `{header}`"),
            ));
        }
        let mut cells = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(path, format!("line {}: `{line}`", n + 2));
            let mut fields = line.split(',').map(str::trim);
            let t: usize = fields.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let k: usize = fields.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let h2: f64 = fields.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if fields.next().is_some() {
                return Err(bad());
            }
            cells.push((t, k, h2));
        }
        let rounds = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let clients = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        if cells.len() != rounds * clients {
            return Err(Error::format(
                path,
                format!("{} cells for a {rounds} x {clients} matrix", cells.len()),
            ));
        }
        let mut rows = vec![vec![f64::NAN; clients]; rounds];
        for (t, k, h2) in cells {
            if !rows[t][k].is_nan() {
                return Err(Error::format(path, format!("duplicate cell ({t}, {k})")));
            }
            rows[t][k] = h2;
        }
        ChannelMatrix::from_rows(rows).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Draws the `T × K` gain matrix of a scenario.
///
/// Round `t` uses its own ChaCha stream, so any subset of rounds can be
/// regenerated independently and the result depends only on the seed.
pub fn generate_channels(
    scenario: &ChannelScenario,
    horizon: usize,
    num_clients: usize,
) -> Result<ChannelMatrix> {
    if horizon == 0 || num_clients == 0 {
        return Err(Error::domain("horizon and client count must be >= 1"));
    }
    scenario.validate()?;
    let rows = (0..horizon)
        .map(|t| {
            let mean = db_to_linear(scenario.pathloss_db(t, horizon));
            match scenario.fading {
                Fading::None => vec![mean; num_clients],
                Fading::Rayleigh => {
                    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
                    rng.set_stream(t as u64);
                    (0..num_clients)
                        .map(|_| {
                            let g: f64 = Exp1.sample(&mut rng);
                            mean * g.max(FADING_FLOOR)
                        })
                        .collect()
                }
            }
        })
        .collect();
    ChannelMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_without_fading_is_constant() {
        let m = generate_channels(&ChannelScenario::fixed(36.0, Fading::None, 9), 5, 3).unwrap();
        let expected = 10f64.powf(-3.6);
        assert!((expected - 2.512e-4).abs() < 1e-7);
        for t in 0..5 {
            assert!(m.round(t).iter().all(|&g| (g - expected).abs() < 1e-18));
        }
    }

    #[test]
    fn two_round_ramp_hits_endpoints() {
        let scenario = ChannelScenario {
            fading: Fading::None,
            ..ChannelScenario::moving_away(0)
        };
        let m = generate_channels(&scenario, 2, 4).unwrap();
        assert!(m
            .round(0)
            .iter()
            .all(|&g| (g / 10f64.powf(-3.2) - 1.0).abs() < 1e-14));
        assert!(m
            .round(1)
            .iter()
            .all(|&g| (g / 10f64.powf(-4.5) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rayleigh_draws_have_unit_mean() {
        let pl = db_to_linear(36.0);
        let m = generate_channels(
            &ChannelScenario::fixed(36.0, Fading::Rayleigh, 42),
            10_000,
            10,
        )
        .unwrap();
        let mean: f64 = (0..m.rounds())
            .flat_map(|t| m.round(t).iter().map(|g| g / pl).collect::<Vec<_>>())
            .sum::<f64>()
            / 1e5;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn same_seed_same_matrix() {
        let s = ChannelScenario::fixed(36.0, Fading::Rayleigh, 7);
        let a = generate_channels(&s, 50, 10).unwrap();
        let b = generate_channels(&s, 50, 10).unwrap();
        assert_eq!(a, b);
        let c = generate_channels(&ChannelScenario { seed: 8, ..s }, 50, 10).unwrap();
        assert_ne!(a, c);
        // a prefix of rounds does not depend on the horizon's later rows
        let short = generate_channels(&s, 10, 10).unwrap();
        assert_eq!(short.round(3), a.round(3));
    }

    #[test]
    fn gains_respect_floor() {
        let s = ChannelScenario::moving_away(3);
        let m = generate_channels(&s, 300, 10).unwrap();
        assert!(m.min_gain() >= s.gain_floor(300));
        assert!((s.gain_floor(300) / (db_to_linear(45.0) * FADING_FLOOR) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_validation() {
        assert!(ChannelScenario::fixed(250.0, Fading::None, 0)
            .validate()
            .is_err());
        let backwards = ChannelScenario {
            pathloss_db_end: 20.0,
            ..ChannelScenario::moving_away(0)
        };
        assert!(backwards.validate().is_err());
        assert!("ramp_up".parse::<ScenarioKind>().is_ok());
        assert!("sideways".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("ocean-chan-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("h.csv");
        let m = generate_channels(&ChannelScenario::moving_closer(5), 7, 3).unwrap();
        m.write_csv(&path).unwrap();
        assert_eq!(ChannelMatrix::read_csv(&path).unwrap(), m);
        std::fs::write(&path, "round,client,h_squared\n0,0,1e-4\n0,1,-1\n").unwrap();
        assert!(ChannelMatrix::read_csv(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}

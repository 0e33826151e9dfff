//! The online loop: virtual energy-deficit queues, frame resets, and one
//! exact per-round solve per learning round.
//!
//! Each client `k` carries a queue `q_k` that grows by whatever it spends
//! above its pro-rated budget `H_k/T` and is clamped at zero. The horizon
//! is cut into `M` frames of `R` rounds; queues reset and the control
//! parameter switches to `V_m` at the start of frame `m`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrix, ChannelScenario, Fading};
use crate::energy::{energy_max, selected_energy, NetworkParams};
use crate::error::{Error, Result};
use crate::solver::{ocean_p, ClientRoundState};
use crate::trace::{RoundRecord, Trace};

/// Everything that determines a run, apart from the channel draws it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: usize,
    pub frame: usize,
    /// One control parameter per frame.
    pub v_sequence: Vec<f64>,
    /// Temporal weight of every round.
    pub eta: Vec<f64>,
    /// Long-term energy budget per client, in joules.
    pub budgets: Vec<f64>,
    pub params: NetworkParams,
    pub seed: u64,
    pub scenario: ChannelScenario,
}

/// Control parameter of the default setup. With queues in joules the
/// learning/energy trade-off turns over between roughly 1e-6 and 1e-4.
pub const DEFAULT_V: f64 = 3e-6;

impl RunConfig {
    /// Ten clients, 300 rounds in one frame, 0.15 J budgets, static 36 dB
    /// Rayleigh channels, ascending weights and [`DEFAULT_V`].
    pub fn standard() -> Self {
        let (k, horizon) = (10, 300);
        RunConfig {
            horizon,
            frame: horizon,
            v_sequence: vec![DEFAULT_V],
            eta: eta_sequence(EtaKind::Ascending, horizon),
            budgets: vec![0.15; k],
            params: NetworkParams::standard(k),
            seed: 0,
            scenario: ChannelScenario::fixed(36.0, Fading::Rayleigh, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.scenario.validate()?;
        if self.horizon == 0 {
            return Err(Error::config("run.rounds", "must be >= 1"));
        }
        if self.frame == 0 || !self.horizon.is_multiple_of(self.frame) {
            return Err(Error::config(
                "run.frame",
                format!(
                    "frame length {} must divide the horizon {}",
                    self.frame, self.horizon
                ),
            ));
        }
        let frames = self.horizon / self.frame;
        if self.v_sequence.len() != frames {
            return Err(Error::config(
                "policy.v",
                format!(
                    "{} frames need {frames} V values, got {}",
                    frames,
                    self.v_sequence.len()
                ),
            ));
        }
        if let Some(v) = self
            .v_sequence
            .iter()
            .find(|v| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::config("policy.v", format!("V must be > 0, got {v}")));
        }
        if self.eta.len() != self.horizon {
            return Err(Error::config(
                "policy.eta",
                format!(
                    "{} rounds need {} weights, got {}",
                    self.horizon,
                    self.horizon,
                    self.eta.len()
                ),
            ));
        }
        if let Some(e) = self.eta.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(Error::config(
                "policy.eta",
                format!("weights must be >= 0, got {e}"),
            ));
        }
        if self.budgets.len() != self.params.num_clients {
            return Err(Error::config(
                "budgets.energy_j",
                format!(
                    "{} clients need {} budgets, got {}",
                    self.params.num_clients,
                    self.params.num_clients,
                    self.budgets.len()
                ),
            ));
        }
        if let Some(h) = self.budgets.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::config(
                "budgets.energy_j",
                format!("budgets must be > 0, got {h}"),
            ));
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.horizon / self.frame
    }

    pub fn per_round_budgets(&self) -> Vec<f64> {
        self.budgets
            .iter()
            .map(|h| h / self.horizon as f64)
            .collect()
    }

    pub fn v_at(&self, t: usize) -> f64 {
        self.v_sequence[t / self.frame]
    }
}

/// `max(q + E − H/T, 0)`.
pub fn queue_update(q_prev: f64, energy: f64, budget_per_round: f64) -> Result<f64> {
    if !(q_prev >= 0.0) || !(energy >= 0.0) || !(budget_per_round > 0.0) {
        return Err(Error::domain(format!(
            "queue update needs q >= 0, E >= 0, H/T > 0; got {q_prev}, {energy}, {budget_per_round}"
        )));
    }
    Ok((q_prev + energy - budget_per_round).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaKind {
    Ascending,
    Descending,
    Uniform,
}

impl EtaKind {
    pub fn suffix(&self) -> &'static str {
        match self {
            EtaKind::Ascending => "a",
            EtaKind::Descending => "d",
            EtaKind::Uniform => "u",
        }
    }
}

impl FromStr for EtaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascending" | "a" => Ok(EtaKind::Ascending),
            "descending" | "d" => Ok(EtaKind::Descending),
            "uniform" | "u" => Ok(EtaKind::Uniform),
            other => Err(Error::config(
                "policy.eta",
                format!("unknown eta kind `{other}` (ascending, descending, uniform)"),
            )),
        }
    }
}

impl fmt::Display for EtaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaKind::Ascending => "ascending",
            EtaKind::Descending => "descending",
            EtaKind::Uniform => "uniform",
        })
    }
}

/// Endpoints of the ascending weight ramp; the mean is 1.
pub const ETA_LOW: f64 = 0.2;
pub const ETA_HIGH: f64 = 1.8;

/// Temporal weights over `horizon` rounds: uniform ones, or a linear ramp
/// from 0.2 to 1.8 (reversed for descending). Every sequence has mean 1.
pub fn eta_sequence(kind: EtaKind, horizon: usize) -> Vec<f64> {
    if horizon <= 1 || kind == EtaKind::Uniform {
        return vec![1.0; horizon];
    }
    let step = (ETA_HIGH - ETA_LOW) / (horizon - 1) as f64;
    let ascending: Vec<f64> = (0..horizon).map(|t| ETA_LOW + step * t as f64).collect();
    match kind {
        EtaKind::Descending => ascending.into_iter().rev().collect(),
        _ => ascending,
    }
}

/// Runs the online policy over a channel matrix.
pub fn run_ocean(config: &RunConfig, channels: &ChannelMatrix) -> Result<Trace> {
    run_ocean_labelled(config, channels, "ocean")
}

pub(crate) fn run_ocean_labelled(
    config: &RunConfig,
    channels: &ChannelMatrix,
    label: &str,
) -> Result<Trace> {
    config.validate()?;
    check_shape(config, channels)?;
    let params = &config.params;
    let k = params.num_clients;
    let per_round = config.per_round_budgets();
    let mut queues = vec![0.0; k];
    let mut records = Vec::with_capacity(config.horizon);

    for t in 0..config.horizon {
        if t % config.frame == 0 {
            queues.iter_mut().for_each(|q| *q = 0.0);
        }
        let v = config.v_at(t);
        let eta = config.eta[t];
        let gains = channels.round(t);
        let states = ClientRoundState::for_round(gains, &queues)?;
        let decision = ocean_p(&states, v, eta, params)?;

        let energy: Vec<f64> = (0..k)
            .map(|i| {
                if decision.selected[i] {
                    selected_energy(decision.shares[i], gains[i], params)
                } else {
                    0.0
                }
            })
            .collect();
        for i in 0..k {
            queues[i] = queue_update(queues[i], energy[i], per_round[i])?;
        }
        records.push(RoundRecord {
            round: t,
            utility: eta * decision.num_selected() as f64,
            selected: decision.selected,
            shares: decision.shares,
            energy,
            queue_after: queues.clone(),
            eta,
            v,
            objective: Some(decision.objective_value),
        });
    }
    Ok(Trace {
        policy: label.to_string(),
        config: config.clone(),
        records,
    })
}

pub(crate) fn check_shape(config: &RunConfig, channels: &ChannelMatrix) -> Result<()> {
    if channels.rounds() != config.horizon || channels.clients() != config.params.num_clients {
        return Err(Error::domain(format!(
            "channel matrix is {} x {}, run needs {} x {}",
            channels.rounds(),
            channels.clients(),
            config.horizon,
            config.params.num_clients
        )));
    }
    Ok(())
}

/// Long-term energy guarantee evaluated on a finished trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub h_squared_min: f64,
    pub energy_max: f64,
    /// `K·(E^max − H^min/T)²/2`.
    pub c1: f64,
    /// `C1·R + R(R−1)K·(E^max)²/2`.
    pub c2: f64,
    pub eta_max: f64,
    /// `Σ_m sqrt(2(V_m·η̄·K + C1)/R)`, the deviation allowed above `H_k`.
    pub slack: f64,
    /// `Σ_m sqrt(2R(V_m·η̄·K + C1))`: the queue bound of each frame summed,
    /// before the division by `R`.
    pub frame_queue_slack: f64,
    pub client_energy: Vec<f64>,
    pub client_bound: Vec<f64>,
    /// Clients whose energy exceeds `H_k + slack`.
    pub violators: Vec<usize>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.violators.is_empty()
    }
}

/// Compares each client's spent energy with `H_k + Σ_m sqrt(2(V_m·η̄·K + C1)/R)`,
/// where `E^max` comes from the gain floor `h_squared_min` and `η̄ = max_t η^t`.
pub fn bound_report(trace: &Trace, config: &RunConfig, h_squared_min: f64) -> Result<BoundReport> {
    let params = &config.params;
    let k = params.num_clients as f64;
    let r = config.frame as f64;
    let e_max = energy_max(params, h_squared_min)?;
    let h_min = config.budgets.iter().copied().fold(f64::INFINITY, f64::min);
    let c1 = k * (e_max - h_min / config.horizon as f64).powi(2) / 2.0;
    let c2 = c1 * r + r * (r - 1.0) * k / 2.0 * e_max * e_max;
    let eta_max = config.eta.iter().copied().fold(0.0, f64::max);

    let slack: f64 = config
        .v_sequence
        .iter()
        .map(|v| (2.0 * (v * eta_max * k + c1) / r).sqrt())
        .sum();
    let frame_queue_slack: f64 = config
        .v_sequence
        .iter()
        .map(|v| (2.0 * r * (v * eta_max * k + c1)).sqrt())
        .sum();

    let client_energy = trace.totals().energy;
    let client_bound: Vec<f64> = config.budgets.iter().map(|h| h + slack).collect();
    let violators = client_energy
        .iter()
        .zip(&client_bound)
        .enumerate()
        .filter_map(|(i, (e, b))| (e > b).then_some(i))
        .collect();
    Ok(BoundReport {
        h_squared_min,
        energy_max: e_max,
        c1,
        c2,
        eta_max,
        slack,
        frame_queue_slack,
        client_energy,
        client_bound,
        violators,
    })
}

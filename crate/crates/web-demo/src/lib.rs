//! Browser bindings for the simulator. Every exported function returns a
//! JSON string; the plain Rust functions behind them are usable natively.

use ocean_core::channel::{ChannelScenario, Fading};
use ocean_core::scheduler::{eta_sequence, EtaKind, RunConfig};
use ocean_core::sim::{run_experiment, Policy};
use ocean_core::solver::{ocean_p, ClientRoundState};
use ocean_core::{NetworkParams, SweepAxis};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Clients in every demo run.
pub const DEMO_CLIENTS: usize = 10;
/// Per-client energy budget over a run, in Joules.
pub const DEMO_BUDGET_J: f64 = 0.15;
/// Longest run the page may request.
pub const DEMO_MAX_ROUNDS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunView {
    pub policy: String,
    pub selected_counts: Vec<usize>,
    pub client_energy: Vec<f64>,
    pub budget_j: f64,
    pub total_utility: f64,
    pub mean_selected: f64,
    pub max_violation_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundView {
    pub selected: Vec<bool>,
    pub shares: Vec<f64>,
    pub energy_j: Vec<f64>,
    /// Client ids from highest to lowest selection priority.
    pub rank: Vec<usize>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub v: f64,
    pub mean_selected: f64,
    pub max_violation_j: f64,
    pub total_utility: f64,
}

fn demo_config(v: f64, pathloss_db: f64, rounds: usize, seed: u64) -> Result<RunConfig, String> {
    if rounds == 0 || rounds > DEMO_MAX_ROUNDS {
        return Err(format!(
            "rounds must be in 1..={DEMO_MAX_ROUNDS}, got {rounds}"
        ));
    }
    let config = RunConfig {
        horizon: rounds,
        frame: rounds,
        v_sequence: vec![v],
        eta: eta_sequence(EtaKind::Ascending, rounds),
        budgets: vec![DEMO_BUDGET_J; DEMO_CLIENTS],
        params: NetworkParams::standard(DEMO_CLIENTS),
        seed,
        scenario: ChannelScenario::fixed(pathloss_db, Fading::Rayleigh, seed),
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

/// Runs `policy` (`ocean-a`, `ocean-d`, `ocean-u`, `select_all`, `smo`, `amo`)
/// on ten clients with Rayleigh fading around a fixed path loss.
pub fn simulate(
    policy: &str,
    v: f64,
    pathloss_db: f64,
    rounds: usize,
    seed: u64,
) -> Result<RunView, String> {
    let policy: Policy = policy
        .parse()
        .map_err(|e: ocean_core::Error| e.to_string())?;
    let config = demo_config(v, pathloss_db, rounds, seed)?;
    let trace = run_experiment(policy, &config).map_err(|e| e.to_string())?;
    let totals = trace.totals();
    Ok(RunView {
        policy: trace.policy.clone(),
        selected_counts: trace.selected_counts(),
        client_energy: totals.energy.clone(),
        budget_j: DEMO_BUDGET_J,
        total_utility: totals.total_utility,
        mean_selected: trace.mean_selected(),
        max_violation_j: totals.max_violation(),
    })
}

/// Solves one round for the given path losses (dB) and queue backlogs (J).
pub fn solve(pathloss_db: &[f64], queues: &[f64], v: f64, eta: f64) -> Result<RoundView, String> {
    let gains: Vec<f64> = pathloss_db
        .iter()
        .map(|db| 10f64.powf(-db / 10.0))
        .collect();
    let params = NetworkParams::standard(gains.len());
    params.validate().map_err(|e| e.to_string())?;
    let states = ClientRoundState::for_round(&gains, queues).map_err(|e| e.to_string())?;
    let decision = ocean_p(&states, v, eta, &params).map_err(|e| e.to_string())?;
    let energy_j = (0..gains.len())
        .map(|k| {
            ocean_core::energy::tx_energy(
                decision.selected[k],
                decision.shares[k],
                gains[k],
                &params,
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let rank = ocean_core::solver::rank_by_priority(&states)
        .iter()
        .map(ClientRoundState::client_id)
        .collect();
    Ok(RoundView {
        selected: decision.selected,
        shares: decision.shares,
        energy_j,
        rank,
        objective: decision.objective_value,
    })
}

/// Mean over `seeds` runs of OCEAN with ascending weights, for each `V`.
pub fn sweep_v(
    values: &[f64],
    pathloss_db: f64,
    rounds: usize,
    seeds: u32,
) -> Result<Vec<SweepPoint>, String> {
    if seeds == 0 {
        return Err("seeds must be >= 1".into());
    }
    let base = demo_config(
        values.first().copied().unwrap_or(1.0),
        pathloss_db,
        rounds,
        0,
    )?;
    let axis = SweepAxis::V(values.to_vec());
    let seed_list: Vec<u64> = (0..u64::from(seeds)).collect();
    let table = ocean_core::sweep(Policy::Ocean(EtaKind::Ascending), &base, &axis, &seed_list)
        .map_err(|e| e.to_string())?;
    Ok(values
        .iter()
        .zip(table.summarize())
        .map(|(&v, s)| SweepPoint {
            v,
            mean_selected: s.mean_selected_mean,
            max_violation_j: s.max_violation_mean,
            total_utility: s.utility_mean,
        })
        .collect())
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(
    policy: &str,
    v: f64,
    pathloss_db: f64,
    rounds: usize,
    seed: u32,
) -> Result<String, JsError> {
    to_js(simulate(policy, v, pathloss_db, rounds, u64::from(seed)))
}

#[wasm_bindgen(js_name = solveRound)]
pub fn solve_js(
    pathloss_db: Vec<f64>,
    queues: Vec<f64>,
    v: f64,
    eta: f64,
) -> Result<String, JsError> {
    to_js(solve(&pathloss_db, &queues, v, eta))
}

#[wasm_bindgen(js_name = sweepV)]
pub fn sweep_v_js(
    values: Vec<f64>,
    pathloss_db: f64,
    rounds: usize,
    seeds: u32,
) -> Result<String, JsError> {
    to_js(sweep_v(&values, pathloss_db, rounds, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_reports_every_round_and_client() {
        let view = simulate("ocean-a", 3e-6, 36.0, 50, 1).unwrap();
        assert_eq!(view.selected_counts.len(), 50);
        assert_eq!(view.client_energy.len(), DEMO_CLIENTS);
        assert!(view.selected_counts.iter().all(|&n| n <= DEMO_CLIENTS));
        let total: usize = view.selected_counts.iter().sum();
        assert!((view.mean_selected - total as f64 / 50.0).abs() < 1e-12);
        assert_eq!(view, simulate("ocean-a", 3e-6, 36.0, 50, 1).unwrap());
    }

    #[test]
    fn simulate_rejects_bad_input() {
        assert!(simulate("greedy", 1e-6, 36.0, 10, 0).is_err());
        assert!(simulate("smo", 1e-6, 36.0, 0, 0).is_err());
        assert!(simulate("smo", -1.0, 36.0, 10, 0).is_err());
    }

    #[test]
    fn solve_prefers_strong_channels_at_equal_queues() {
        let view = solve(&[40.0, 32.0, 36.0], &[0.01, 0.01, 0.01], 1e-6, 1.0).unwrap();
        assert_eq!(view.rank, vec![1, 2, 0]);
        let on: f64 = view.shares.iter().sum();
        assert!(on <= 1.0 + 1e-9);
        for k in 0..3 {
            assert_eq!(view.energy_j[k] > 0.0, view.selected[k]);
        }
        assert!(solve(&[40.0], &[0.01, 0.02], 1e-6, 1.0).is_err());
    }

    #[test]
    fn sweep_returns_one_point_per_value() {
        let points = sweep_v(&[1e-9, 1e-2], 36.0, 30, 2).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].v, 1e-9);
        assert!(points[0].mean_selected < points[1].mean_selected);
        assert!(sweep_v(&[1e-6], 36.0, 30, 0).is_err());
        assert!(sweep_v(&[1e-6, 1e-6], 36.0, 30, 1).is_err());
    }
}

//! Randomised self-checks: the prefix solver against exhaustive search, the
//! structure of optimal decisions, and the long-term energy bound on full
//! traces. Each suite reports every failing instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{generate_channels, ChannelScenario, Fading};
use crate::energy::NetworkParams;
use crate::error::Result;
use crate::oracle::{brute_force_round, check_structure};
use crate::scheduler::{bound_report, eta_sequence, run_ocean_labelled, EtaKind, RunConfig};
use crate::solver::{ocean_p, ClientRoundState};

/// Path-loss interval the random gains are drawn from, in dB.
pub const INSTANCE_PATHLOSS_DB: (f64, f64) = (32.0, 45.0);

/// How random single-round instances are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    /// `K ∈ 2..=6`, queues uniform on `[0, 0.05]` J, `V ∈ {0.1, 1, 10}`.
    Reference,
    /// Like `Reference`, but one queue in five is zero and `V` is
    /// log-uniform on `[1e-9, 1e-3]`, so budgets bind and selections are partial.
    Binding,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub gains: Vec<f64>,
    pub queues: Vec<f64>,
    pub v: f64,
    pub eta: f64,
}

impl Instance {
    pub fn states(&self) -> Result<Vec<ClientRoundState>> {
        ClientRoundState::for_round(&self.gains, &self.queues)
    }

    pub fn params(&self) -> NetworkParams {
        NetworkParams::standard(self.gains.len())
    }
}

pub fn random_instance(rng: &mut impl Rng, family: InstanceFamily) -> Instance {
    let k = rng.gen_range(2..=6);
    let (pl_lo, pl_hi) = INSTANCE_PATHLOSS_DB;
    let gains = (0..k)
        .map(|_| 10f64.powf(-rng.gen_range(pl_lo..pl_hi) / 10.0))
        .collect();
    let zero_prob = match family {
        InstanceFamily::Reference => 0.0,
        InstanceFamily::Binding => 0.2,
    };
    let queues = (0..k)
        .map(|_| {
            if rng.gen_bool(zero_prob) {
                0.0
            } else {
                rng.gen_range(0.0..0.05)
            }
        })
        .collect();
    let v = match family {
        InstanceFamily::Reference => [0.1, 1.0, 10.0][rng.gen_range(0..3)],
        InstanceFamily::Binding => 10f64.powf(rng.gen_range(-9.0..-3.0)),
    };
    Instance {
        gains,
        queues,
        v,
        eta: 1.0,
    }
}

pub fn random_instances(count: usize, seed: u64, family: InstanceFamily) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_instance(&mut rng, family))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub index: usize,
    pub message: String,
    pub instance: Option<Instance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checked: usize,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    pub fn passed(&self) -> usize {
        self.checked - self.failures.len()
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Relative tolerance between the prefix solver and exhaustive search.
pub const SOLVER_REL_TOL: f64 = 1e-6;

/// Compares [`ocean_p`] with [`brute_force_round`] on `count` instances.
pub fn solver_suite(count: usize, seed: u64, family: InstanceFamily) -> Result<SuiteReport> {
    let mut failures = Vec::new();
    for (index, inst) in random_instances(count, seed, family)
        .into_iter()
        .enumerate()
    {
        let params = inst.params();
        let states = inst.states()?;
        let fast = ocean_p(&states, inst.v, inst.eta, &params)?;
        let exact = brute_force_round(&states, inst.v, inst.eta, &params)?;
        let (a, b) = (fast.objective_value, exact.objective_value);
        let message = if let Err(e) = fast.validate(&params, fast.num_selected() > 0) {
            Some(format!("invalid decision: {e}"))
        } else if (a - b).abs() > SOLVER_REL_TOL * a.abs().max(b.abs()).max(1e-300) {
            Some(format!("prefix objective {a} vs exhaustive {b}"))
        } else {
            None
        };
        if let Some(message) = message {
            failures.push(Failure {
                index,
                message,
                instance: Some(inst),
            });
        }
    }
    Ok(SuiteReport {
        suite: format!("solver/{}", family_name(family)),
        checked: count,
        failures,
    })
}

/// Checks prefix selection and share / weighted-energy monotonicity.
pub fn structure_suite(count: usize, seed: u64, family: InstanceFamily) -> Result<SuiteReport> {
    let mut failures = Vec::new();
    for (index, inst) in random_instances(count, seed, family)
        .into_iter()
        .enumerate()
    {
        let params = inst.params();
        let states = inst.states()?;
        let decision = ocean_p(&states, inst.v, inst.eta, &params)?;
        if let Err(message) = check_structure(&states, &decision, &params) {
            failures.push(Failure {
                index,
                message,
                instance: Some(inst),
            });
        }
    }
    Ok(SuiteReport {
        suite: format!("structure/{}", family_name(family)),
        checked: count,
        failures,
    })
}

/// Control parameters cycled through by [`bounds_suite`].
pub const BOUND_SUITE_V: [f64; 3] = [0.5, 5.0, 50.0];

/// Runs `count` single-frame traces (`K = 10`, `T = 300`, static 36 dB
/// Rayleigh channels, ascending weights) and checks every client's energy
/// against the long-term bound computed from the configured gain floor.
pub fn bounds_suite(count: usize, seed: u64) -> Result<SuiteReport> {
    let (k, horizon) = (10, 300);
    let outcomes = (0..count)
        .into_par_iter()
        .map(|index| -> Result<Option<Failure>> {
            let run_seed = seed.wrapping_add(index as u64);
            let v = BOUND_SUITE_V[index % BOUND_SUITE_V.len()];
            let config = RunConfig {
                horizon,
                frame: horizon,
                v_sequence: vec![v],
                eta: eta_sequence(EtaKind::Ascending, horizon),
                budgets: vec![0.15; k],
                params: NetworkParams::standard(k),
                seed: run_seed,
                scenario: ChannelScenario::fixed(36.0, Fading::Rayleigh, run_seed),
            };
            let channels = generate_channels(&config.scenario, horizon, k)?;
            let trace = run_ocean_labelled(&config, &channels, "ocean-a")?;
            let report = bound_report(&trace, &config, config.scenario.gain_floor(horizon))?;
            Ok((!report.holds()).then(|| Failure {
                index,
                message: format!(
                    "seed {run_seed}, V = {v}: clients {:?} exceed their bound",
                    report.violators
                ),
                instance: None,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let failures = outcomes.into_iter().flatten().collect();
    Ok(SuiteReport {
        suite: "bounds".into(),
        checked: count,
        failures,
    })
}

fn family_name(family: InstanceFamily) -> &'static str {
    match family {
        InstanceFamily::Reference => "reference",
        InstanceFamily::Binding => "binding",
    }
}

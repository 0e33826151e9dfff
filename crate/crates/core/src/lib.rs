//! Joint client selection and bandwidth allocation for federated learning
//! over a shared wireless uplink, under long-term per-client energy budgets.
//!
//! The online policy keeps one virtual energy-deficit queue per client and
//! solves a small convex problem each round: rank clients by queue-weighted
//! inverse channel gain, grow a selection prefix, and split the band so that
//! marginal energy costs are equalised. Baselines, a finite-horizon oracle
//! and a seeded channel simulator are included for comparison.

pub mod benchmarks;
pub mod channel;
pub mod energy;
pub mod error;
pub mod oracle;
pub mod scheduler;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod trace;
pub mod verify;

pub use benchmarks::{run_benchmark, BenchmarkTag};
pub use channel::{generate_channels, ChannelMatrix, ChannelScenario, Fading, ScenarioKind};
pub use energy::NetworkParams;
pub use error::{Error, Result};
pub use scheduler::{eta_sequence, run_ocean, EtaKind, RunConfig};
pub use sim::{run_experiment, sweep, Policy, Schedule, SweepAxis, SweepTable};
pub use solver::{ocean_p, ClientRoundState, RoundDecision};
pub use trace::Trace;

//! Per-round records and their on-disk format.
//!
//! A trace file is one JSON header line (schema version, policy, config
//! snapshot and totals) followed by a CSV body with one row per
//! `(round, client)`:
//!
//! ```text
//! {"schema_version":1,"policy":"ocean-a",...}
//! t,k,a,b,energy_J,q_after_J,eta,v
//! 0,0,1,0.1,0.0014,0.0009,0.2,0.001
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a reload is
//! bit-exact.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::energy::tx_energy;
use crate::error::{Error, Result};
use crate::scheduler::RunConfig;

pub const TRACE_SCHEMA_VERSION: u32 = 1;
pub const TRACE_CSV_HEADER: &str = "t,k,a,b,energy_J,q_after_J,eta,v";

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: Vec<bool>,
    pub shares: Vec<f64>,
    pub energy: Vec<f64>,
    /// Deficit queues after the update; zeros for policies without queues.
    pub queue_after: Vec<f64>,
    pub utility: f64,
    pub eta: f64,
    /// Control parameter in effect; zero for baselines.
    pub v: f64,
    /// Round objective reported by the solver. Not persisted.
    pub objective: Option<f64>,
}

impl RoundRecord {
    pub fn num_selected(&self) -> usize {
        self.selected.iter().filter(|&&a| a).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTotals {
    pub total_utility: f64,
    pub energy: Vec<f64>,
    pub violation: Vec<f64>,
}

impl TraceTotals {
    pub fn max_violation(&self) -> f64 {
        self.violation.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub policy: String,
    pub config: RunConfig,
    pub records: Vec<RoundRecord>,
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    schema_version: u32,
    policy: String,
    config: RunConfig,
    totals: TraceTotals,
}

impl Trace {
    pub fn totals(&self) -> TraceTotals {
        let k = self.config.params.num_clients;
        let mut energy = vec![0.0; k];
        let mut total_utility = 0.0;
        for r in &self.records {
            total_utility += r.utility;
            for (acc, e) in energy.iter_mut().zip(&r.energy) {
                *acc += e;
            }
        }
        let violation = energy
            .iter()
            .zip(&self.config.budgets)
            .map(|(e, h)| (e - h).max(0.0))
            .collect();
        TraceTotals {
            total_utility,
            energy,
            violation,
        }
    }

    pub fn selected_counts(&self) -> Vec<usize> {
        self.records.iter().map(RoundRecord::num_selected).collect()
    }

    pub fn mean_selected(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.selected_counts().iter().sum::<usize>() as f64 / self.records.len() as f64
    }

    /// Recomputes every energy from the decisions and `channels`, and every
    /// utility from the selections, and compares against the stored values.
    pub fn check_consistency(&self, channels: &ChannelMatrix, rel_tol: f64) -> Result<()> {
        let params = &self.config.params;
        if channels.rounds() != self.records.len() || channels.clients() != params.num_clients {
            return Err(Error::domain(
                "channel matrix does not match the trace shape",
            ));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs());
        for r in &self.records {
            let utility = r.eta * r.num_selected() as f64;
            if !close(utility, r.utility) {
                return Err(Error::domain(format!(
                    "round {}: utility {} but selections give {utility}",
                    r.round, r.utility
                )));
            }
            for k in 0..params.num_clients {
                let e = tx_energy(r.selected[k], r.shares[k], channels.get(r.round, k), params)?;
                if !close(e, r.energy[k]) {
                    return Err(Error::domain(format!(
                        "round {} client {k}: stored energy {} but recomputed {e}",
                        r.round, r.energy[k]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut out = BufWriter::new(file);
        let header = TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            policy: self.policy.clone(),
            config: self.config.clone(),
            totals: self.totals(),
        };
        let json = serde_json::to_string(&header)
            .map_err(|e| Error::format(path, format!("header: {e}")))?;
        writeln!(out, "{json}").map_err(io)?;
        writeln!(out, "{TRACE_CSV_HEADER}").map_err(io)?;
        for r in &self.records {
            for k in 0..r.selected.len() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.round,
                    k,
                    u8::from(r.selected[k]),
                    r.shares[k],
                    r.energy[k],
                    r.queue_after[k],
                    r.eta,
                    r.v
                )
                .map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    /// Loads a trace and checks that the stored totals match the records.
    pub fn read(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::open(path).map_err(io)?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::format(path, "empty trace file"))?
            .map_err(io)?;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::format(path, format!("header: {e}")))?;
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported schema version {}", header.schema_version),
            ));
        }
        let csv_header = lines
            .next()
            .ok_or_else(|| Error::format(path, "missing CSV header"))?
            .map_err(io)?;
        if csv_header.trim() != TRACE_CSV_HEADER {
            return Err(Error::format(
                path,
                format!("unexpected CSV header `{csv_header}`"),
            ));
        }

        let k = header.config.params.num_clients;
        let t_total = header.config.horizon;
        let mut records: Vec<RoundRecord> = (0..t_total)
            .map(|t| RoundRecord {
                round: t,
                selected: vec![false; k],
                shares: vec![0.0; k],
                energy: vec![0.0; k],
                queue_after: vec![0.0; k],
                utility: 0.0,
                eta: 0.0,
                v: 0.0,
                objective: None,
            })
            .collect();
        let mut seen = vec![false; t_total * k];
        for (n, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::format(path, format!("line {}: {what}: `{line}`", n + 3));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(bad("expected 8 fields"));
            }
            let t: usize = f[0].parse().map_err(|_| bad("round"))?;
            let c: usize = f[1].parse().map_err(|_| bad("client"))?;
            if t >= t_total || c >= k {
                return Err(bad("index out of range"));
            }
            if std::mem::replace(&mut seen[t * k + c], true) {
                return Err(bad("duplicate row"));
            }
            let num = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
            let r = &mut records[t];
            r.selected[c] = match f[2] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("selection flag")),
            };
            r.shares[c] = num(3, "share")?;
            r.energy[c] = num(4, "energy")?;
            r.queue_after[c] = num(5, "queue")?;
            r.eta = num(6, "eta")?;
            r.v = num(7, "v")?;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::format(path, "trace body is missing rows"));
        }
        for r in &mut records {
            r.utility = r.eta * r.num_selected() as f64;
        }
        let trace = Trace {
            policy: header.policy,
            config: header.config,
            records,
        };
        let recomputed = trace.totals();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        let stored = &header.totals;
        let consistent = close(recomputed.total_utility, stored.total_utility)
            && recomputed.energy.len() == stored.energy.len()
            && recomputed
                .energy
                .iter()
                .zip(&stored.energy)
                .all(|(a, b)| close(*a, *b));
        if !consistent {
            return Err(Error::format(
                path,
                "stored totals do not match the records",
            ));
        }
        Ok(trace)
    }
}

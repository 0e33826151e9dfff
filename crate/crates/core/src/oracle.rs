//! Exhaustive reference solver for the per-round problem.
//!
//! Enumerates every selection subset, allocates bandwidth optimally inside
//! each, and keeps the best. Exponential in `K`; used to cross-check the
//! prefix search in [`crate::solver::ocean_p`] on small instances.

use crate::energy::{kernel_f_unchecked, selected_energy, shares_fit, NetworkParams};
use crate::error::{Error, Result};
use crate::solver::{allocate_shares, rank_by_priority, ClientRoundState, RoundDecision};

/// Largest `K` the enumeration accepts.
pub const MAX_BRUTE_FORCE_CLIENTS: usize = 16;

/// Best decision over all `2^K` selection sets.
///
/// Ties (within `1e-12` relative) go to the lexicographically smallest
/// selection vector.
pub fn brute_force_round(
    states: &[ClientRoundState],
    v: f64,
    eta: f64,
    params: &NetworkParams,
) -> Result<RoundDecision> {
    let k = states.len();
    if k > MAX_BRUTE_FORCE_CLIENTS {
        return Err(Error::OracleScale(format!(
            "brute force limited to {MAX_BRUTE_FORCE_CLIENTS} clients, got {k}"
        )));
    }
    let mut by_id: Vec<Option<ClientRoundState>> = vec![None; k];
    for s in states {
        if s.client_id() >= k || by_id[s.client_id()].is_some() {
            return Err(Error::domain("client ids must be a permutation of 0..K"));
        }
        by_id[s.client_id()] = Some(*s);
    }
    let by_id: Vec<ClientRoundState> = by_id.into_iter().map(|s| s.expect("filled")).collect();
    let v_eta = v * eta;

    let mut best = RoundDecision::empty(k);
    for mask in 1u32..(1u32 << k) {
        let members: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        if !shares_fit(members.len(), params.b_min) {
            continue;
        }
        let (zero, positive): (Vec<usize>, Vec<usize>) = members
            .iter()
            .partition(|&&i| by_id[i].priority_rho() == 0.0);

        let mut candidate = RoundDecision::empty(k);
        let mut value = v_eta * members.len() as f64;
        if positive.is_empty() {
            for &i in &zero {
                candidate.selected[i] = true;
                candidate.shares[i] = 1.0 / zero.len() as f64;
            }
        } else {
            let budget = 1.0 - zero.len() as f64 * params.b_min;
            let weights: Vec<f64> = positive.iter().map(|&i| by_id[i].priority_rho()).collect();
            let shares = allocate_shares(&weights, budget, params)?;
            for &i in &zero {
                candidate.selected[i] = true;
                candidate.shares[i] = params.b_min;
            }
            for (&i, &b) in positive.iter().zip(&shares) {
                candidate.selected[i] = true;
                candidate.shares[i] = b;
                value -= by_id[i].priority_rho()
                    * params.noise_w
                    * params.deadline_s
                    * kernel_f_unchecked(b * params.bandwidth_hz, params.beta());
            }
        }
        candidate.objective_value = value;

        let margin = 1e-12 * best.objective_value.abs().max(value.abs());
        let better = value > best.objective_value + margin;
        let tie = (value - best.objective_value).abs() <= margin;
        if better || (tie && candidate.selected < best.selected) {
            best = candidate;
        }
    }
    Ok(best)
}

/// Checks the shape of an optimal round decision: the selected clients form
/// a prefix of the priority order, and among selected clients with positive
/// priority both the share and the weighted energy `q·E` are nondecreasing
/// in priority. Returns a description of the first violation.
pub fn check_structure(
    states: &[ClientRoundState],
    decision: &RoundDecision,
    params: &NetworkParams,
) -> std::result::Result<(), String> {
    let ranked = rank_by_priority(states);
    let mut gap = None;
    for s in &ranked {
        let id = s.client_id();
        match (decision.selected[id], gap) {
            (false, None) => gap = Some(id),
            (true, Some(skipped)) => {
                return Err(format!(
                    "client {id} selected although client {skipped} has lower priority"
                ))
            }
            _ => {}
        }
    }
    let chosen: Vec<&ClientRoundState> = ranked
        .iter()
        .filter(|s| decision.selected[s.client_id()] && s.priority_rho() > 0.0)
        .collect();
    for pair in chosen.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ba, bb) = (
            decision.shares[a.client_id()],
            decision.shares[b.client_id()],
        );
        if ba > bb * (1.0 + 1e-9) {
            return Err(format!(
                "client {} (rho {}) has share {ba} above client {} (rho {}) with {bb}",
                a.client_id(),
                a.priority_rho(),
                b.client_id(),
                b.priority_rho()
            ));
        }
        let weighted = |s: &ClientRoundState, share: f64| {
            s.queue_q() * selected_energy(share, s.h_squared(), params)
        };
        let (wa, wb) = (weighted(a, ba), weighted(b, bb));
        if wa > wb * (1.0 + 1e-9) {
            return Err(format!(
                "client {} has q*E = {wa} above client {} with {wb}",
                a.client_id(),
                b.client_id()
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ocean_p;

    #[test]
    fn matches_prefix_search_on_a_small_round() {
        let params = NetworkParams::standard(4);
        let states =
            ClientRoundState::for_round(&[2.5e-4, 1e-4, 6e-4, 3e-5], &[0.02, 0.0, 0.05, 0.01])
                .unwrap();
        for v in [1e-6, 1e-4, 1e-3, 1.0] {
            let exact = brute_force_round(&states, v, 1.0, &params).unwrap();
            let fast = ocean_p(&states, v, 1.0, &params).unwrap();
            let scale = exact.objective_value.abs().max(1e-300);
            assert!((exact.objective_value - fast.objective_value).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn refuses_large_instances() {
        let params = NetworkParams::standard(20);
        let states = ClientRoundState::for_round(&[1e-4; 20], &[0.0; 20]).unwrap();
        assert!(matches!(
            brute_force_round(&states, 1.0, 1.0, &params),
            Err(Error::OracleScale(_))
        ));
    }
}

//! Exact per-round client selection and bandwidth allocation.
//!
//! Each round maximises
//!
//! ```text
//! Σ_k a_k · [ V·η − ρ_k·N0·τ̄·f(b_k·B) ],    ρ_k = q_k / h_k²
//! ```
//!
//! over binary selections `a` and shares `b` with `Σ b = 1`, `b_k ≥ b_min`
//! on selected clients. The optimal selection is a prefix of the clients
//! ranked by ascending priority `ρ`, so the search only ever tries `K`
//! candidate sets, each requiring one convex allocation ([`solve_p4`]).

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::energy::{
    kernel_f_prime_unchecked, kernel_f_second_unchecked, kernel_f_unchecked, marginal_of_z,
    shares_fit, NetworkParams,
};
use crate::error::{Error, Result};

/// Per-client view of one round: channel, deficit queue and the derived priority.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientRoundState {
    client_id: usize,
    h_squared: f64,
    queue_q: f64,
    priority_rho: f64,
}

impl ClientRoundState {
    pub fn new(client_id: usize, h_squared: f64, queue_q: f64) -> Result<Self> {
        if !(h_squared > 0.0) || !h_squared.is_finite() {
            return Err(Error::domain(format!(
                "client {client_id}: gain must be finite and > 0, got {h_squared}"
            )));
        }
        if !(queue_q >= 0.0) || !queue_q.is_finite() {
            return Err(Error::domain(format!(
                "client {client_id}: queue must be finite and >= 0, got {queue_q}"
            )));
        }
        Ok(ClientRoundState {
            client_id,
            h_squared,
            queue_q,
            priority_rho: queue_q / h_squared,
        })
    }

    /// Builds the states for a whole round; `gains` and `queues` are indexed by client.
    pub fn for_round(gains: &[f64], queues: &[f64]) -> Result<Vec<Self>> {
        if gains.len() != queues.len() {
            return Err(Error::domain(format!(
                "{} gains but {} queues",
                gains.len(),
                queues.len()
            )));
        }
        gains
            .iter()
            .zip(queues)
            .enumerate()
            .map(|(k, (&h2, &q))| ClientRoundState::new(k, h2, q))
            .collect()
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn h_squared(&self) -> f64 {
        self.h_squared
    }

    pub fn queue_q(&self) -> f64 {
        self.queue_q
    }

    /// Selection priority `q/h²`; lower is served first.
    pub fn priority_rho(&self) -> f64 {
        self.priority_rho
    }
}

/// Selection vector and bandwidth shares for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDecision {
    pub selected: Vec<bool>,
    pub shares: Vec<f64>,
    pub objective_value: f64,
}

impl RoundDecision {
    pub fn empty(num_clients: usize) -> Self {
        RoundDecision {
            selected: vec![false; num_clients],
            shares: vec![0.0; num_clients],
            objective_value: 0.0,
        }
    }

    pub fn num_selected(&self) -> usize {
        self.selected.iter().filter(|&&a| a).count()
    }

    pub fn selected_ids(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(k, &a)| a.then_some(k))
            .collect()
    }

    /// Checks the structural invariants. `require_full_band` demands
    /// `Σ b = 1` whenever someone is selected; myopic baselines may leave
    /// spectrum unassigned and pass `false`.
    pub fn validate(&self, params: &NetworkParams, require_full_band: bool) -> Result<()> {
        if self.selected.len() != self.shares.len() {
            return Err(Error::domain(
                "selection and share vectors differ in length",
            ));
        }
        let mut total = 0.0;
        for (k, (&a, &b)) in self.selected.iter().zip(&self.shares).enumerate() {
            if !a && b != 0.0 {
                return Err(Error::domain(format!(
                    "client {k} is not selected but holds share {b}"
                )));
            }
            if a && (b < params.b_min * (1.0 - 1e-9) || b > 1.0 + 1e-9) {
                return Err(Error::domain(format!(
                    "client {k} is selected with share {b} outside [b_min, 1]"
                )));
            }
            total += b;
        }
        let any = self.selected.iter().any(|&a| a);
        if any && total > 1.0 + 1e-9 {
            return Err(Error::domain(format!("shares sum to {total} > 1")));
        }
        if require_full_band && any && (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("shares sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// Optimal allocation over `S − S0` and the resulting objective `W*(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct P4Solution {
    pub shares: Vec<f64>,
    /// Contribution of the positive-priority clients only.
    pub objective: f64,
}

const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Minimises `Σ_k w_k·f(b_k·B)` subject to `Σ b_k = budget`, `b_k ≥ b_min`.
///
/// Stationarity reads `w_k·f'(b_k·B) = c` for a common multiplier `c < 0`
/// on every client not pinned at `b_min`. Since `f'` is increasing each
/// `b_k(c)` is found by safeguarded Newton, and `c` itself by safeguarded
/// Newton on the monotone map `c ↦ Σ b_k(c)`. Clients whose unconstrained
/// share falls below `b_min` are pinned and the multiplier is re-solved;
/// the pinned set only grows, so this settles within `K` passes.
pub fn allocate_shares(weights: &[f64], budget: f64, params: &NetworkParams) -> Result<Vec<f64>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::domain("no clients to allocate"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::domain(format!(
            "allocation weight {w} is not positive"
        )));
    }
    if !(budget > 0.0) || budget > 1.0 + 1e-12 {
        return Err(Error::domain(format!("budget {budget} outside (0, 1]")));
    }
    if budget < n as f64 * params.b_min * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!(
            "budget {budget} cannot give {n} clients b_min = {}",
            params.b_min
        )));
    }

    let mut pinned = vec![false; n];
    let mut shares = vec![params.b_min; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&k| !pinned[k]).collect();
        let free_budget = budget - (n - free.len()) as f64 * params.b_min;
        if free.is_empty() {
            break;
        }
        let free_weights: Vec<f64> = free.iter().map(|&k| weights[k]).collect();
        let free_shares = equalize_marginals(&free_weights, free_budget, params);
        let mut newly_pinned = false;
        for (&k, &b) in free.iter().zip(&free_shares) {
            if b < params.b_min {
                pinned[k] = true;
                newly_pinned = true;
            }
        }
        if !newly_pinned {
            for (&k, &b) in free.iter().zip(&free_shares) {
                shares[k] = b;
            }
            break;
        }
    }
    for k in 0..n {
        if pinned[k] {
            shares[k] = params.b_min;
        }
    }
    Ok(shares)
}

/// Unconstrained (below) solve of `w_k f'(b_k B) = c`, `Σ b_k = budget`.
/// Returned shares may fall under `b_min`; the caller pins those.
fn equalize_marginals(weights: &[f64], budget: f64, params: &NetworkParams) -> Vec<f64> {
    if weights.len() == 1 {
        return vec![budget];
    }
    let bw = params.bandwidth_hz;
    let beta = params.beta();
    let b_floor = params.b_min * 1e-3;

    let shares_at = |c: f64| -> (Vec<f64>, f64) {
        let mut slope = 0.0;
        let shares = weights
            .iter()
            .map(|&w| {
                let b = invert_marginal(c / w, b_floor, budget, bw, beta);
                if b > b_floor && b < budget {
                    slope += 1.0 / (w * bw * kernel_f_second_unchecked(b * bw, beta));
                }
                b
            })
            .collect();
        (shares, slope)
    };

    // bracket on the multiplier: everyone at the floor / everyone at the full budget
    let mut c_lo = weights
        .iter()
        .map(|&w| w * kernel_f_prime_unchecked(b_floor * bw, beta))
        .fold(f64::INFINITY, f64::min);
    let mut c_hi = weights
        .iter()
        .map(|&w| w * kernel_f_prime_unchecked(budget * bw, beta))
        .fold(f64::NEG_INFINITY, f64::max);
    if !c_lo.is_finite() {
        c_lo = -f64::MAX;
    }

    let mut c = 0.5 * (c_lo + c_hi);
    let mut best = Vec::new();
    for _ in 0..MAX_ITER {
        let (shares, slope) = shares_at(c);
        let residual = shares.iter().sum::<f64>() - budget;
        best = shares;
        if residual.abs() <= OUTER_TOL * budget {
            break;
        }
        if residual > 0.0 {
            c_hi = c;
        } else {
            c_lo = c;
        }
        let newton = if slope > 0.0 {
            c - residual / slope
        } else {
            f64::NAN
        };
        let next = if newton > c_lo && newton < c_hi {
            newton
        } else if c_lo < 0.0 && c_hi < 0.0 && c_lo / c_hi > 4.0 {
            // multiplier spans decades early on
            -((-c_lo).ln() * 0.5 + (-c_hi).ln() * 0.5).exp()
        } else {
            0.5 * (c_lo + c_hi)
        };
        if next == c || c_hi - c_lo <= f64::EPSILON * c_lo.abs() {
            break;
        }
        c = next;
    }

    // absorb the last rounding residual in the largest free share
    let residual = budget - best.iter().sum::<f64>();
    if let Some((idx, _)) = best.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        best[idx] += residual;
    }
    best
}

/// Solves `f'(b·B) = target` for `b`, clamped to `[lo, hi]`.
///
/// In `z = ln2·β/(b·B)` the equation reads `e^z(1 − z) − 1 = target`, whose
/// left side is concave and decreasing for `z > 0`. Newton started right of
/// the root therefore descends onto it monotonically.
fn invert_marginal(target: f64, lo: f64, hi: f64, bw: f64, beta: f64) -> f64 {
    if !(target < 0.0) {
        return hi;
    }
    let t = -target;
    // both are upper bounds on the root
    let mut z = (2.0 * t).sqrt().min((1.0 + t.ln()).max(2.0));
    for _ in 0..MAX_ITER {
        let g = marginal_of_z(z) + t;
        let slope = -z * z.exp();
        let next = z - g / slope;
        if !(next < z) || z - next <= INNER_TOL * 1e-3 * z {
            z = next.min(z);
            break;
        }
        z = next;
    }
    (LN_2 * beta / (z * bw)).clamp(lo, hi)
}

fn check_ranked(candidates: &[ClientRoundState]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for state in candidates {
        if !seen.insert(state.client_id) {
            return Err(Error::domain(format!(
                "client {} appears twice in the selection set",
                state.client_id
            )));
        }
    }
    for pair in candidates.windows(2) {
        if rank_order(&pair[0], &pair[1]) == std::cmp::Ordering::Greater {
            return Err(Error::domain(format!(
                "selection set is not ranked by priority: client {} before client {}",
                pair[0].client_id, pair[1].client_id
            )));
        }
    }
    Ok(())
}

fn rank_order(a: &ClientRoundState, b: &ClientRoundState) -> std::cmp::Ordering {
    a.priority_rho
        .total_cmp(&b.priority_rho)
        .then(a.client_id.cmp(&b.client_id))
}

/// Per-client term `V·η − ρ·N0·τ̄·f(b·B)` of the round objective.
fn client_term(v_eta: f64, rho: f64, b: f64, params: &NetworkParams) -> f64 {
    if rho == 0.0 {
        return v_eta;
    }
    v_eta
        - rho
            * params.noise_w
            * params.deadline_s
            * kernel_f_unchecked(b * params.bandwidth_hz, params.beta())
}

/// Optimal shares for the positive-priority part `S − S0` of a candidate set.
///
/// `candidates` must be ranked by ascending priority with unique clients and
/// strictly positive priority; `s0_size` zero-priority clients hold `b_min`
/// each, leaving `1 − s0_size·b_min` to split.
pub fn solve_p4(
    candidates: &[ClientRoundState],
    s0_size: usize,
    v_eta: f64,
    params: &NetworkParams,
) -> Result<P4Solution> {
    if candidates.is_empty() {
        return Err(Error::domain(
            "solve_p4 needs at least one positive-priority client",
        ));
    }
    check_ranked(candidates)?;
    if let Some(s) = candidates.iter().find(|s| !(s.priority_rho > 0.0)) {
        return Err(Error::domain(format!(
            "client {} has zero priority and belongs to S0",
            s.client_id
        )));
    }
    let budget = 1.0 - s0_size as f64 * params.b_min;
    if !shares_fit(s0_size + candidates.len(), params.b_min) {
        return Err(Error::Infeasible(format!(
            "{} clients cannot each hold b_min = {}",
            s0_size + candidates.len(),
            params.b_min
        )));
    }
    let weights: Vec<f64> = candidates.iter().map(|s| s.priority_rho).collect();
    let shares = allocate_shares(&weights, budget, params)?;
    let objective = candidates
        .iter()
        .zip(&shares)
        .map(|(s, &b)| client_term(v_eta, s.priority_rho, b, params))
        .sum();
    Ok(P4Solution { shares, objective })
}

/// Ranks clients by ascending priority, ties broken by client index.
pub fn rank_by_priority(states: &[ClientRoundState]) -> Vec<ClientRoundState> {
    let mut ranked = states.to_vec();
    ranked.sort_by(rank_order);
    ranked
}

/// Solves the round exactly by growing the selection along the priority order.
pub fn ocean_p(
    states: &[ClientRoundState],
    v: f64,
    eta: f64,
    params: &NetworkParams,
) -> Result<RoundDecision> {
    search_prefixes(states, v, eta, params, true)
}

/// [`ocean_p`] without the early termination test: every feasible prefix is
/// solved and compared. Exists to check that stopping early never changes
/// the answer.
pub fn ocean_p_full_scan(
    states: &[ClientRoundState],
    v: f64,
    eta: f64,
    params: &NetworkParams,
) -> Result<RoundDecision> {
    search_prefixes(states, v, eta, params, false)
}

fn search_prefixes(
    states: &[ClientRoundState],
    v: f64,
    eta: f64,
    params: &NetworkParams,
    early_stop: bool,
) -> Result<RoundDecision> {
    if !(v >= 0.0) || !(eta >= 0.0) {
        return Err(Error::domain(format!(
            "V and eta must be >= 0, got V = {v}, eta = {eta}"
        )));
    }
    let k = states.len();
    let mut ids = std::collections::HashSet::new();
    if states
        .iter()
        .any(|s| s.client_id >= k || !ids.insert(s.client_id))
    {
        return Err(Error::domain("client ids must be a permutation of 0..K"));
    }
    let v_eta = v * eta;
    let ranked = rank_by_priority(states);
    let s0 = ranked.iter().take_while(|s| s.priority_rho == 0.0).count();
    let cap = params.max_selectable().min(k);
    let s0 = s0.min(cap);

    // best so far: (prefix length, W*, shares of the positive part)
    let mut best: (usize, f64, Vec<f64>) = (s0, v_eta * s0 as f64, Vec::new());
    for end in s0 + 1..=cap {
        let positive = &ranked[s0..end];
        let solution = solve_p4(positive, s0, v_eta, params)?;
        let last = ranked[end - 1];
        let last_share = *solution.shares.last().expect("nonempty");
        let last_term = client_term(v_eta, last.priority_rho, last_share, params);
        if early_stop && last_term < 0.0 {
            break;
        }
        let total = v_eta * s0 as f64 + solution.objective;
        if total > best.1 {
            best = (end, total, solution.shares);
        }
    }

    let (len, objective, positive_shares) = best;
    let mut decision = RoundDecision::empty(k);
    decision.objective_value = objective;
    if len == 0 {
        return Ok(decision);
    }
    let zero_share = if len == s0 {
        1.0 / s0 as f64
    } else {
        params.b_min
    };
    for (i, state) in ranked[..len].iter().enumerate() {
        let id = state.client_id;
        decision.selected[id] = true;
        decision.shares[id] = if i < s0 {
            zero_share
        } else {
            positive_shares[i - s0]
        };
    }
    Ok(decision)
}

/// Round objective `Σ_k a_k·[V·η − ρ_k·N0·τ̄·f(b_k·B)]` of a given decision.
pub fn p3_objective(
    decision: &RoundDecision,
    states: &[ClientRoundState],
    v: f64,
    eta: f64,
    params: &NetworkParams,
) -> Result<f64> {
    decision.validate(params, true)?;
    if decision.selected.len() != states.len() {
        return Err(Error::domain(format!(
            "decision covers {} clients, round has {}",
            decision.selected.len(),
            states.len()
        )));
    }
    let mut total = 0.0;
    for state in states {
        let k = state.client_id;
        if decision.selected[k] {
            total += client_term(v * eta, state.priority_rho, decision.shares[k], params);
        }
    }
    Ok(total)
}

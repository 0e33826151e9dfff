//! Reference policies the online scheduler is compared against.
//!
//! * Select-All serves every client every round with energy-minimal shares.
//! * SMO gives each client a hard per-round cap `H_k/T` and packs the
//!   clients whose required share fits.
//! * AMO is SMO with the unspent budget re-spread over the remaining rounds.
//! * The lookahead oracle knows a whole frame of channels in advance and
//!   enumerates every selection sequence on a bandwidth grid. Desk scale only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::energy::{selected_energy, shares_fit, NetworkParams};
use crate::error::{Error, Result};
use crate::scheduler::{check_shape, RunConfig};
use crate::solver::{allocate_shares, RoundDecision};
use crate::trace::{RoundRecord, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkTag {
    SelectAll,
    Smo,
    Amo,
    Lookahead(usize),
}

impl fmt::Display for BenchmarkTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchmarkTag::SelectAll => f.write_str("select_all"),
            BenchmarkTag::Smo => f.write_str("smo"),
            BenchmarkTag::Amo => f.write_str("amo"),
            BenchmarkTag::Lookahead(r) => write!(f, "lookahead({r})"),
        }
    }
}

impl FromStr for BenchmarkTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "select_all" | "select-all" => Ok(BenchmarkTag::SelectAll),
            "smo" => Ok(BenchmarkTag::Smo),
            "amo" => Ok(BenchmarkTag::Amo),
            other => {
                let inner = other
                    .strip_prefix("lookahead(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|r| r.parse().ok());
                inner.map(BenchmarkTag::Lookahead).ok_or_else(|| {
                    Error::config("policy.name", format!("unknown benchmark `{other}`"))
                })
            }
        }
    }
}

/// Every client selected; shares minimise the round's total energy.
pub fn select_all_round(gains: &[f64], params: &NetworkParams) -> Result<RoundDecision> {
    let k = gains.len();
    if k == 0 {
        return Err(Error::domain("no clients"));
    }
    if !shares_fit(k, params.b_min) {
        return Err(Error::Infeasible(format!(
            "{k} clients cannot each hold b_min = {}",
            params.b_min
        )));
    }
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::domain(format!("gain {g} is not positive")));
    }
    let weights: Vec<f64> = gains.iter().map(|h2| 1.0 / h2).collect();
    let shares = allocate_shares(&weights, 1.0, params)?;
    Ok(RoundDecision {
        selected: vec![true; k],
        shares,
        objective_value: 0.0,
    })
}

/// Smallest share at which the client's upload costs at most `budget`, or
/// `None` if even the whole band is too expensive.
pub fn required_share(h_squared: f64, budget: f64, params: &NetworkParams) -> Option<f64> {
    let cost = |b: f64| selected_energy(b, h_squared, params);
    if !(budget > 0.0) {
        return None;
    }
    if cost(params.b_min) <= budget {
        return Some(params.b_min);
    }
    if cost(1.0) > budget {
        return None;
    }
    // cost is decreasing in b; keep `hi` on the affordable side
    let (mut lo, mut hi) = (params.b_min, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cost(mid) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Myopic selection under hard per-round caps `budgets_per_round`.
///
/// Clients are admitted in ascending order of required share (ties by
/// index) until the next one no longer fits; leftover spectrum stays unused.
pub fn smo_round(
    gains: &[f64],
    budgets_per_round: &[f64],
    params: &NetworkParams,
) -> Result<RoundDecision> {
    if gains.len() != budgets_per_round.len() {
        return Err(Error::domain("gains and budgets differ in length"));
    }
    if let Some(h) = budgets_per_round.iter().find(|h| !(**h >= 0.0)) {
        return Err(Error::domain(format!("per-round budget {h} is negative")));
    }
    let k = gains.len();
    let mut needs: Vec<(usize, f64)> = gains
        .iter()
        .zip(budgets_per_round)
        .enumerate()
        .filter_map(|(i, (&h2, &e))| {
            // a hair under the cap so that the spent energy never rounds above it
            required_share(h2, e * (1.0 - 1e-12), params).map(|b| (i, b))
        })
        .collect();
    needs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut decision = RoundDecision::empty(k);
    let mut used = 0.0;
    for (i, b) in needs {
        if used + b > 1.0 + 1e-12 {
            break;
        }
        used += b;
        decision.selected[i] = true;
        decision.shares[i] = b;
    }
    Ok(decision)
}

/// SMO with budget recycling: client `k` may spend `(H_k − spent_k)/(T − t)` in round `t`.
pub fn amo_round(
    gains: &[f64],
    budgets: &[f64],
    spent: &[f64],
    t: usize,
    horizon: usize,
    params: &NetworkParams,
) -> Result<RoundDecision> {
    if t >= horizon {
        return Err(Error::domain(format!(
            "round {t} outside horizon {horizon}"
        )));
    }
    if budgets.len() != spent.len() {
        return Err(Error::domain("budgets and spent energy differ in length"));
    }
    let remaining = (horizon - t) as f64;
    let per_round: Vec<f64> = budgets
        .iter()
        .zip(spent)
        .map(|(h, s)| (h - s).max(0.0) / remaining)
        .collect();
    smo_round(gains, &per_round, params)
}

/// Runs a myopic baseline or Select-All over the horizon.
pub fn run_benchmark(
    tag: BenchmarkTag,
    config: &RunConfig,
    channels: &ChannelMatrix,
) -> Result<Trace> {
    config.validate()?;
    check_shape(config, channels)?;
    let params = &config.params;
    let k = params.num_clients;
    let per_round = config.per_round_budgets();
    let mut spent = vec![0.0; k];
    let mut records = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let gains = channels.round(t);
        let decision = match tag {
            BenchmarkTag::SelectAll => select_all_round(gains, params)?,
            BenchmarkTag::Smo => smo_round(gains, &per_round, params)?,
            BenchmarkTag::Amo => {
                amo_round(gains, &config.budgets, &spent, t, config.horizon, params)?
            }
            BenchmarkTag::Lookahead(_) => {
                return Err(Error::OracleScale(
                    "the lookahead oracle is not a per-round policy; call lookahead_oracle".into(),
                ))
            }
        };
        let energy: Vec<f64> = (0..k)
            .map(|i| {
                if decision.selected[i] {
                    selected_energy(decision.shares[i], gains[i], params)
                } else {
                    0.0
                }
            })
            .collect();
        for (s, e) in spent.iter_mut().zip(&energy) {
            *s += e;
        }
        let eta = config.eta[t];
        records.push(RoundRecord {
            round: t,
            utility: eta * decision.num_selected() as f64,
            selected: decision.selected,
            shares: decision.shares,
            energy,
            queue_after: vec![0.0; k],
            eta,
            v: 0.0,
            objective: None,
        });
    }
    Ok(Trace {
        policy: tag.to_string(),
        config: config.clone(),
        records,
    })
}

pub const LOOKAHEAD_MAX_CLIENTS: usize = 3;
pub const LOOKAHEAD_MAX_ROUNDS: usize = 3;
pub const LOOKAHEAD_MIN_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadResult {
    /// Best frame utility `Σ_t η^t·|S_t|` found on the grid.
    pub utility: f64,
    pub decisions: Vec<RoundDecision>,
}

/// One grid assignment of a round: per-client energy and share.
#[derive(Debug, Clone)]
struct GridPoint {
    energy: Vec<f64>,
    shares: Vec<f64>,
}

/// Offline optimum of one frame with perfect channel knowledge.
///
/// Shares are restricted to `grid_n` evenly spaced levels in `[b_min, 1]`,
/// so the result never exceeds the continuous optimum and approaches it as
/// the grid is refined.
pub fn lookahead_oracle(
    channels: &ChannelMatrix,
    frame_budget: &[f64],
    eta: &[f64],
    params: &NetworkParams,
    grid_n: usize,
) -> Result<LookaheadResult> {
    let (rounds, k) = (channels.rounds(), channels.clients());
    if k > LOOKAHEAD_MAX_CLIENTS || rounds > LOOKAHEAD_MAX_ROUNDS {
        return Err(Error::OracleScale(format!(
            "lookahead enumeration is limited to K <= {LOOKAHEAD_MAX_CLIENTS}, \
             R <= {LOOKAHEAD_MAX_ROUNDS}; got K = {k}, R = {rounds}"
        )));
    }
    if grid_n < LOOKAHEAD_MIN_GRID {
        return Err(Error::OracleScale(format!(
            "grid_n must be >= {LOOKAHEAD_MIN_GRID}, got {grid_n}"
        )));
    }
    if frame_budget.len() != k || eta.len() != rounds {
        return Err(Error::domain(
            "budget or eta length does not match the channel matrix",
        ));
    }
    let levels: Vec<f64> = (0..grid_n)
        .map(|i| params.b_min + (1.0 - params.b_min) * i as f64 / (grid_n - 1) as f64)
        .collect();

    let masks = 1usize << k;
    // frontier[t][mask]: non-dominated grid assignments of round t
    let frontier: Vec<Vec<Vec<GridPoint>>> = (0..rounds)
        .map(|t| {
            (0..masks)
                .map(|mask| round_frontier(channels.round(t), mask, &levels, frame_budget, params))
                .collect()
        })
        .collect();

    let mut sequences: Vec<(f64, Vec<usize>)> = (0..masks.pow(rounds as u32))
        .map(|code| {
            let seq: Vec<usize> = (0..rounds)
                .map(|t| (code / masks.pow(t as u32)) % masks)
                .collect();
            let utility = seq
                .iter()
                .zip(eta)
                .map(|(&m, &e)| e * m.count_ones() as f64)
                .sum();
            (utility, seq)
        })
        .collect();
    sequences.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    for (utility, seq) in sequences {
        if let Some(path) = feasible_path(&seq, &frontier, frame_budget) {
            let decisions = seq
                .iter()
                .zip(&path)
                .enumerate()
                .map(|(t, (&mask, &idx))| {
                    let mut d = RoundDecision::empty(k);
                    if mask != 0 {
                        let point = &frontier[t][mask][idx];
                        for i in 0..k {
                            d.selected[i] = mask & (1 << i) != 0;
                            d.shares[i] = point.shares[i];
                        }
                    }
                    d
                })
                .collect();
            return Ok(LookaheadResult { utility, decisions });
        }
    }
    unreachable!("the empty selection sequence is always feasible")
}

fn round_frontier(
    gains: &[f64],
    mask: usize,
    levels: &[f64],
    budget: &[f64],
    params: &NetworkParams,
) -> Vec<GridPoint> {
    let k = gains.len();
    let members: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
    if members.is_empty() {
        return vec![GridPoint {
            energy: vec![0.0; k],
            shares: vec![0.0; k],
        }];
    }
    let mut points = Vec::new();
    let mut idx = vec![0usize; members.len()];
    loop {
        let total: f64 = idx.iter().map(|&i| levels[i]).sum();
        if total <= 1.0 + 1e-12 {
            let mut energy = vec![0.0; k];
            let mut shares = vec![0.0; k];
            for (&c, &i) in members.iter().zip(&idx) {
                shares[c] = levels[i];
                energy[c] = selected_energy(levels[i], gains[c], params);
            }
            if energy.iter().zip(budget).all(|(e, h)| e <= h) {
                points.push(GridPoint { energy, shares });
            }
        }
        // odometer over grid indices
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return pareto(points, |p| &p.energy);
            }
            idx[pos] += 1;
            if idx[pos] < levels.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Drops every item whose energy vector is weakly dominated by another kept one.
fn pareto<T>(mut items: Vec<T>, key: impl Fn(&T) -> &Vec<f64>) -> Vec<T> {
    items.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.iter().sum::<f64>().total_cmp(&kb.iter().sum::<f64>())
    });
    let mut kept: Vec<T> = Vec::new();
    for item in items {
        let e = key(&item);
        let dominated = kept
            .iter()
            .any(|other| key(other).iter().zip(e).all(|(o, x)| o <= x));
        if !dominated {
            kept.push(item);
        }
    }
    kept
}

/// Finds one grid assignment per round whose summed energy fits the budget.
fn feasible_path(
    seq: &[usize],
    frontier: &[Vec<Vec<GridPoint>>],
    budget: &[f64],
) -> Option<Vec<usize>> {
    let mut partial: Vec<(Vec<f64>, Vec<usize>)> = vec![(vec![0.0; budget.len()], Vec::new())];
    for (t, &mask) in seq.iter().enumerate() {
        let mut next = Vec::new();
        for (sum, path) in &partial {
            for (i, point) in frontier[t][mask].iter().enumerate() {
                let total: Vec<f64> = sum.iter().zip(&point.energy).map(|(a, b)| a + b).collect();
                if total.iter().zip(budget).all(|(e, h)| e <= h) {
                    let mut p = path.clone();
                    p.push(i);
                    next.push((total, p));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        partial = pareto(next, |(sum, _)| sum);
    }
    partial.into_iter().next().map(|(_, path)| path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::tx_energy;

    fn params(k: usize) -> NetworkParams {
        NetworkParams::standard(k)
    }

    #[test]
    fn select_all_equal_gains_split_evenly() {
        let d = select_all_round(&[2e-4; 4], &params(4)).unwrap();
        assert!(d.selected.iter().all(|&a| a));
        assert!(d.shares.iter().all(|b| (b - 0.25).abs() < 1e-12));
        let one = select_all_round(&[3e-4], &params(1)).unwrap();
        assert_eq!(one.shares, vec![1.0]);
    }

    #[test]
    fn select_all_favours_worse_channels_and_beats_a_grid() {
        let p = params(2);
        let gains = [5e-5, 4e-4];
        let d = select_all_round(&gains, &p).unwrap();
        assert!(d.shares[0] >= d.shares[1]);
        let cost = |b0: f64| {
            tx_energy(true, b0, gains[0], &p).unwrap()
                + tx_energy(true, 1.0 - b0, gains[1], &p).unwrap()
        };
        let best_grid = (0..=9600)
            .map(|i| p.b_min + (1.0 - 2.0 * p.b_min) * i as f64 / 9600.0)
            .map(cost)
            .fold(f64::INFINITY, f64::min);
        let solver = cost(d.shares[0]);
        assert!(solver <= best_grid * (1.0 + 1e-12));
        assert!(select_all_round(&[1e-4; 60], &params(50)).is_err());
    }

    #[test]
    fn required_share_hits_the_budget() {
        let p = params(10);
        let h2 = 2.5e-4;
        let e1 = tx_energy(true, 1.0, h2, &p).unwrap();
        let e_mid = tx_energy(true, 0.3, h2, &p).unwrap();
        let b = required_share(h2, e_mid, &p).unwrap();
        assert!((b - 0.3).abs() < 1e-9);
        assert!(tx_energy(true, b, h2, &p).unwrap() <= e_mid);
        assert_eq!(required_share(h2, 1.0, &p), Some(p.b_min));
        assert_eq!(required_share(h2, e1 * 0.99, &p), None);
        assert_eq!(required_share(h2, 0.0, &p), None);
    }

    #[test]
    fn smo_admits_cheapest_first() {
        let p = params(10);
        let gains = [2.5e-4; 10];
        let all = smo_round(&gains, &[1.0; 10], &p).unwrap();
        assert_eq!(all.num_selected(), 10);
        assert!(all.shares.iter().all(|&b| b == p.b_min));

        let e1 = tx_energy(true, 1.0, 2.5e-4, &p).unwrap();
        let none = smo_round(&gains, &[e1 * 0.9; 10], &p).unwrap();
        assert_eq!(none.num_selected(), 0);

        let e06 = tx_energy(true, 0.6, 2.5e-4, &p).unwrap();
        let one = smo_round(&gains[..2], &[e06 * (1.0 + 1e-9); 2], &params(2)).unwrap();
        assert_eq!(one.selected, vec![true, false]);
        assert!((one.shares[0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn amo_recycles_unspent_budget() {
        let p = params(3);
        let gains = [2.5e-4; 3];
        let h = [0.15; 3];
        let smo = smo_round(&gains, &[0.15 / 300.0; 3], &p).unwrap();
        let amo = amo_round(&gains, &h, &[0.0; 3], 0, 300, &p).unwrap();
        assert_eq!(smo, amo);
        // nothing spent by round 100: the per-round allowance grew
        let allowance = (0.15 - 0.0) / 200.0;
        assert!(allowance > 0.15 / 300.0);
        let exhausted = amo_round(&gains, &h, &[0.15, 0.0, 0.0], 10, 300, &p).unwrap();
        assert!(!exhausted.selected[0]);
        assert!(amo_round(&gains, &h, &[0.0; 3], 300, 300, &p).is_err());
    }

    #[test]
    fn oracle_trivial_budgets() {
        let p = params(2);
        let ch = ChannelMatrix::from_rows(vec![vec![2e-4, 1e-4], vec![3e-4, 2e-4]]).unwrap();
        let eta = [0.4, 1.6];
        let rich = lookahead_oracle(&ch, &[1e3, 1e3], &eta, &p, 8).unwrap();
        assert!((rich.utility - 2.0 * (0.4 + 1.6)).abs() < 1e-12);
        let broke = lookahead_oracle(&ch, &[0.0, 0.0], &eta, &p, 8).unwrap();
        assert_eq!(broke.utility, 0.0);
        assert!(broke.decisions.iter().all(|d| d.num_selected() == 0));
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let p = params(4);
        let ch = ChannelMatrix::from_rows(vec![vec![1e-4; 4]]).unwrap();
        assert!(matches!(
            lookahead_oracle(&ch, &[1.0; 4], &[1.0], &p, 16),
            Err(Error::OracleScale(_))
        ));
        let ch = ChannelMatrix::from_rows(vec![vec![1e-4; 2]]).unwrap();
        assert!(matches!(
            lookahead_oracle(&ch, &[1.0; 2], &[1.0], &params(2), 4),
            Err(Error::OracleScale(_))
        ));
    }

    #[test]
    fn oracle_decisions_respect_budget() {
        let p = params(2);
        let ch = ChannelMatrix::from_rows(vec![vec![2e-4, 1e-4], vec![1e-4, 3e-4]]).unwrap();
        let budget = [2.2e-3, 2.2e-3];
        let res = lookahead_oracle(&ch, &budget, &[1.0, 1.0], &p, 32).unwrap();
        let mut spent = [0.0; 2];
        for (t, d) in res.decisions.iter().enumerate() {
            d.validate(&p, false).unwrap();
            for (k, s) in spent.iter_mut().enumerate() {
                *s += tx_energy(d.selected[k], d.shares[k], ch.get(t, k), &p).unwrap();
            }
        }
        assert!(spent.iter().zip(&budget).all(|(s, h)| s <= h));
        let total: usize = res.decisions.iter().map(RoundDecision::num_selected).sum();
        assert_eq!(res.utility, total as f64);
    }

    #[test]
    fn tag_parsing() {
        assert_eq!("smo".parse::<BenchmarkTag>().unwrap(), BenchmarkTag::Smo);
        assert_eq!(
            "lookahead(2)".parse::<BenchmarkTag>().unwrap(),
            BenchmarkTag::Lookahead(2)
        );
        assert!("greedy".parse::<BenchmarkTag>().is_err());
        assert_eq!(BenchmarkTag::SelectAll.to_string(), "select_all");
    }
}

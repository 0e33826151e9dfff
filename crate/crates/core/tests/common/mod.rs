#![allow(dead_code)]

use ocean_core::energy::{kernel_f, kernel_f_prime, NetworkParams};
use ocean_core::solver::ClientRoundState;
use rand::Rng;

/// Gain range spanned by the 32 to 45 dB path-loss interval.
pub const GAIN_LO: f64 = 3.162_277_660_168_379_4e-5;
pub const GAIN_HI: f64 = 6.309_573_444_801_932e-4;

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// One round: `k` clients with queues uniform on `[0, q_max]` and
/// log-uniform gains. With `zero_prob > 0` some queues are set to zero.
pub fn random_round(
    rng: &mut impl Rng,
    k: usize,
    q_max: f64,
    zero_prob: f64,
) -> Vec<ClientRoundState> {
    (0..k)
        .map(|id| {
            let h2 = log_uniform(rng, GAIN_LO, GAIN_HI);
            let q = if rng.gen_bool(zero_prob) {
                0.0
            } else {
                rng.gen_range(0.0..q_max)
            };
            ClientRoundState::new(id, h2, q).unwrap()
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Minimises `Σ w_i f(b_i B)` over `Σ b_i = budget`, `b_i ≥ b_min` by
/// repeated exact two-client exchanges. Slow but shares no code with the
/// library allocator.
pub fn pairwise_exchange(weights: &[f64], budget: f64, params: &NetworkParams) -> Vec<f64> {
    let n = weights.len();
    let bw = params.bandwidth_hz;
    let beta = params.beta();
    let mut b = vec![budget / n as f64; n];
    if n == 1 {
        return b;
    }
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let s = b[i] + b[j];
                let slope = |x: f64| {
                    weights[i] * kernel_f_prime(x * bw, beta).unwrap()
                        - weights[j] * kernel_f_prime((s - x) * bw, beta).unwrap()
                };
                let (mut lo, mut hi) = (params.b_min, s - params.b_min);
                let x = if slope(lo) >= 0.0 {
                    lo
                } else if slope(hi) <= 0.0 {
                    hi
                } else {
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if slope(mid) < 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                };
                moved = moved.max((x - b[i]).abs());
                b[i] = x;
                b[j] = s - x;
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    b
}

pub fn weighted_cost(weights: &[f64], shares: &[f64], params: &NetworkParams) -> f64 {
    weights
        .iter()
        .zip(shares)
        .map(|(w, b)| w * kernel_f(b * params.bandwidth_hz, params.beta()).unwrap())
        .sum()
}

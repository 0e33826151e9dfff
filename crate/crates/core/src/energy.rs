//! Uplink transmission energy model.
//!
//! A selected client must push `L` bits within the deadline `τ̄` over its
//! OFDMA share `b·B` of the band. Inverting Shannon's formula gives the
//! required power spectral density and, multiplied by `τ̄·b·B`, the energy
//!
//! ```text
//! E(b | h²) = (τ̄·N0 / h²) · f(b·B),     f(x) = x·(2^(β/x) − 1),  β = L/τ̄
//! ```
//!
//! `f` is strictly decreasing and strictly convex on `(0, ∞)`, which is what
//! makes every per-round bandwidth problem in this crate a convex program.
//!
//! Powers of two are evaluated as `exp(y·ln 2)`. When the exponent overflows
//! the functions return `+∞`; callers treat such a client as infeasible.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static physical-layer constants shared by all clients, in SI units.
///
/// `b_min` is a dimensionless share of `bandwidth_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    pub deadline_s: f64,
    pub model_bits: f64,
    pub b_min: f64,
    pub num_clients: usize,
}

impl NetworkParams {
    pub fn new(
        bandwidth_hz: f64,
        noise_w: f64,
        deadline_s: f64,
        model_bits: f64,
        b_min: f64,
        num_clients: usize,
    ) -> Result<Self> {
        let params = NetworkParams {
            bandwidth_hz,
            noise_w,
            deadline_s,
            model_bits,
            b_min,
            num_clients,
        };
        params.validate()?;
        Ok(params)
    }

    /// B = 10 MHz, N0 = 1e-12 W, τ̄ = 300 ms, L = 3.4e5 bit, b_min = 200 kHz.
    pub fn standard(num_clients: usize) -> Self {
        NetworkParams {
            bandwidth_hz: 1e7,
            noise_w: 1e-12,
            deadline_s: 0.3,
            model_bits: 3.4e5,
            b_min: 2e5 / 1e7,
            num_clients,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_w", self.noise_w),
            ("deadline_s", self.deadline_s),
            ("model_bits", self.model_bits),
            ("b_min", self.b_min),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    name,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if self.b_min > 1.0 {
            return Err(Error::config(
                "b_min",
                format!("share must be in (0, 1], got {}", self.b_min),
            ));
        }
        if self.num_clients == 0 {
            return Err(Error::config("num_clients", "must be >= 1"));
        }
        if !shares_fit(self.num_clients, self.b_min) {
            return Err(Error::config(
                "b_min",
                format!(
                    "b_min = {} exceeds 1/K = {} (K = {}); not every client can be served",
                    self.b_min,
                    1.0 / self.num_clients as f64,
                    self.num_clients
                ),
            ));
        }
        Ok(())
    }

    /// Exponent scale `β = L/τ̄` of the kernel, in bit/s.
    pub fn beta(&self) -> f64 {
        self.model_bits / self.deadline_s
    }

    /// Largest number of clients that can simultaneously receive `b_min`.
    pub fn max_selectable(&self) -> usize {
        let n = (1.0 / self.b_min + 1e-9).floor();
        n as usize
    }
}

/// `n` clients each holding `b_min` fit in a unit band, with rounding slack.
pub(crate) fn shares_fit(n: usize, b_min: f64) -> bool {
    n as f64 * b_min <= 1.0 + 1e-12
}

fn check_kernel_args(x: f64, beta: f64) -> Result<()> {
    if !(x > 0.0) || !(beta > 0.0) {
        return Err(Error::domain(format!(
            "kernel needs x > 0 and beta > 0, got x = {x}, beta = {beta}"
        )));
    }
    Ok(())
}

/// `f(x) = x·(2^(β/x) − 1)`.
pub fn kernel_f(x: f64, beta: f64) -> Result<f64> {
    check_kernel_args(x, beta)?;
    Ok(kernel_f_unchecked(x, beta))
}

#[inline]
pub(crate) fn kernel_f_unchecked(x: f64, beta: f64) -> f64 {
    x * (LN_2 * beta / x).exp_m1()
}

/// `f'(x) = 2^(β/x)·(1 − ln2·β/x) − 1`, negative on `(0, ∞)`.
pub fn kernel_f_prime(x: f64, beta: f64) -> Result<f64> {
    check_kernel_args(x, beta)?;
    Ok(kernel_f_prime_unchecked(x, beta))
}

#[inline]
pub(crate) fn kernel_f_prime_unchecked(x: f64, beta: f64) -> f64 {
    marginal_of_z(LN_2 * beta / x)
}

/// `f'` written in `z = ln2·β/x`: `e^z(1 − z) − 1`.
#[inline]
pub(crate) fn marginal_of_z(z: f64) -> f64 {
    if z < 1e-2 {
        // e^z(1 − z) − 1 = −Σ_{n≥2} (n−1) zⁿ/n!, summed to avoid cancellation
        let mut term = z * z / 2.0;
        let mut sum = term;
        for n in 3..12 {
            term *= z / n as f64;
            sum += (n - 1) as f64 * term;
        }
        -sum
    } else {
        z.exp_m1() * (1.0 - z) - z
    }
}

/// `f''(x) = (ln 2)²·2^(β/x)·β²/x³`, positive on `(0, ∞)`.
pub fn kernel_f_second(x: f64, beta: f64) -> Result<f64> {
    check_kernel_args(x, beta)?;
    Ok(kernel_f_second_unchecked(x, beta))
}

#[inline]
pub(crate) fn kernel_f_second_unchecked(x: f64, beta: f64) -> f64 {
    let z = LN_2 * beta / x;
    z * z * z.exp() / x
}

fn check_gain(h_squared: f64) -> Result<()> {
    if !(h_squared > 0.0) || !h_squared.is_finite() {
        return Err(Error::domain(format!(
            "channel gain must be finite and > 0, got {h_squared}"
        )));
    }
    Ok(())
}

fn check_share(b: f64, params: &NetworkParams) -> Result<()> {
    // tolerate round-off on shares produced by the solvers
    let slack = 1e-12;
    if !(b >= params.b_min * (1.0 - slack)) || b > 1.0 + slack {
        return Err(Error::domain(format!(
            "share {b} outside [b_min = {}, 1]",
            params.b_min
        )));
    }
    Ok(())
}

/// Power spectral density (W/Hz) that makes the upload finish exactly at
/// the deadline on share `b`.
pub fn required_power(b: f64, h_squared: f64, params: &NetworkParams) -> Result<f64> {
    check_share(b, params)?;
    check_gain(h_squared)?;
    let y = params.beta() / (b * params.bandwidth_hz);
    Ok(params.noise_w / h_squared * (LN_2 * y).exp_m1())
}

/// Energy (J) spent by a client in one round.
///
/// Zero when the client is not selected; `b` is ignored in that case.
pub fn tx_energy(selected: bool, b: f64, h_squared: f64, params: &NetworkParams) -> Result<f64> {
    check_gain(h_squared)?;
    if !selected {
        return Ok(0.0);
    }
    check_share(b, params)?;
    Ok(selected_energy(b, h_squared, params))
}

/// Energy of a selected client without argument validation.
#[inline]
pub(crate) fn selected_energy(b: f64, h_squared: f64, params: &NetworkParams) -> f64 {
    params.deadline_s * params.noise_w / h_squared
        * kernel_f_unchecked(b * params.bandwidth_hz, params.beta())
}

/// Upper bound on any per-round energy when every gain is at least
/// `h_squared_min`: the cost of a client pinned at `b_min` on the worst channel.
pub fn energy_max(params: &NetworkParams, h_squared_min: f64) -> Result<f64> {
    check_gain(h_squared_min)?;
    Ok(selected_energy(params.b_min, h_squared_min, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> NetworkParams {
        NetworkParams::standard(10)
    }

    #[test]
    fn kernel_reference_values() {
        assert!((kernel_f(1.0, 2.0).unwrap() - 3.0).abs() < 1e-14);
        assert!((kernel_f(2.0, 2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((kernel_f(0.5, 2.0).unwrap() - 7.5).abs() < 1e-13);
        // 4(1 − 2 ln 2) − 1
        let expected = -2.545_177_444_479_562;
        assert!((kernel_f_prime(1.0, 2.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn kernel_rejects_non_positive_arguments() {
        assert!(matches!(kernel_f(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(kernel_f(1.0, -1.0), Err(Error::Domain(_))));
        assert!(matches!(kernel_f_prime(-2.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_series_branch_is_continuous() {
        // z = ln2·β/x crosses 1e-2 here
        let beta = 1.0;
        let x = LN_2 * beta / 1e-2;
        let below = kernel_f_prime_unchecked(x * (1.0 + 1e-9), beta);
        let above = kernel_f_prime_unchecked(x * (1.0 - 1e-9), beta);
        assert!(((below - above) / above).abs() < 1e-6);
    }

    #[test]
    fn required_power_unit_exponent() {
        // L/(τ̄B) = 1 and b = 1 gives 2¹ − 1 = 1
        let params = NetworkParams::new(1e6, 1e-9, 1.0, 1e6, 0.1, 4).unwrap();
        let p = required_power(1.0, 1.0, &params).unwrap();
        assert!((p - 1e-9).abs() < 1e-22);
        assert!(required_power(0.05, 1.0, &params).is_err());
    }

    #[test]
    fn power_and_energy_are_linked() {
        let params = standard();
        let h2 = 10f64.powf(-3.6);
        for &b in &[0.02, 0.1, 0.5, 1.0] {
            let p = required_power(b, h2, &params).unwrap();
            let e = tx_energy(true, b, h2, &params).unwrap();
            let via_power = params.deadline_s * b * params.bandwidth_hz * p;
            assert!(((e - via_power) / e).abs() < 1e-13);
        }
        let p_small = required_power(0.02, h2, &params).unwrap();
        let p_large = required_power(0.5, h2, &params).unwrap();
        assert!(p_small > p_large);
    }

    #[test]
    fn energy_at_standard_constants() {
        // (0.3·1e-12·2e5/10^-3.6)·(2^(3.4e5/(0.3·2e5)) − 1), evaluated with mpmath
        let expected = 1.189_468_593_125_583_7e-2;
        let e = tx_energy(true, 0.02, 10f64.powf(-3.6), &standard()).unwrap();
        assert!(((e - expected) / expected).abs() < 1e-10, "{e}");
        let emax = energy_max(&standard(), 10f64.powf(-3.6)).unwrap();
        assert_eq!(emax, e);
    }

    #[test]
    fn unselected_client_spends_nothing() {
        let params = standard();
        assert_eq!(tx_energy(false, 0.0, 1e-4, &params).unwrap(), 0.0);
        assert_eq!(tx_energy(false, 7.0, 1e-4, &params).unwrap(), 0.0);
        assert!(tx_energy(true, 0.0, 1e-4, &params).is_err());
        assert!(tx_energy(true, 1.5, 1e-4, &params).is_err());
        assert!(tx_energy(false, 0.5, 0.0, &params).is_err());
    }

    #[test]
    fn energy_max_scales_inversely_with_gain_floor() {
        let params = standard();
        let a = energy_max(&params, 1e-4).unwrap();
        let b = energy_max(&params, 2e-4).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(NetworkParams::new(1e7, 1e-12, 0.3, 3.4e5, 0.2, 10).is_err());
        assert!(NetworkParams::new(1e7, 0.0, 0.3, 3.4e5, 0.02, 10).is_err());
        assert!(NetworkParams::new(1e7, 1e-12, 0.3, 3.4e5, 0.1, 10).is_ok());
        assert!(standard().validate().is_ok());
        assert_eq!(
            NetworkParams::new(1.0, 1.0, 1.0, 1.0, 0.1, 10)
                .unwrap()
                .max_selectable(),
            10
        );
    }

    #[test]
    fn overflow_is_infinite_energy() {
        let params = NetworkParams::new(1.0, 1.0, 1.0, 1e5, 1e-3, 10).unwrap();
        let e = tx_energy(true, 1e-3, 1.0, &params).unwrap();
        assert!(e.is_infinite() && e > 0.0);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Closed-form precision bounds. Every value is a variance bound for `μ`
//! repeats, for normalized function vectors unless stated otherwise.
//!
//! Symbols: `d` is the number of parameters (probe sensors), `d′` the number
//! of probe modes in the imaging problems (the reference mode is extra),
//! `Δλ = λ_max − λ_min`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fisher::symmetric_qfim_inverse;

/// A named bound value with its inputs echoed back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub inputs: BTreeMap<String, Value>,
    /// Formula identifier, e.g. `ghz-sum`.
    pub formula: String,
}

impl BoundReport {
    fn new(name: &str, formula: &str, value: f64, inputs: Value) -> Self {
        let inputs = match inputs {
            Value::Object(map) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        Self { name: name.into(), value, inputs, formula: formula.into() }
    }

    /// Bound on `Var(c·θ)` for an unnormalized function `c·θ`.
    pub fn rescaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.value *= c * c;
        out.inputs.insert("scale".into(), json!(c));
        out
    }
}

fn check_mu(mu: u32) -> Result<f64> {
    if mu == 0 {
        return Err(Error::InvalidArgument("μ must be positive".into()));
    }
    Ok(mu as f64)
}

fn gap(lam_max: f64, lam_min: f64) -> Result<f64> {
    let g = lam_max - lam_min;
    if !(g.abs() > 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("λ_max − λ_min = {g} must be non-zero")));
    }
    Ok(g)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v.is_empty() || (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("v must have unit 2-norm, got {n}")));
    }
    Ok(())
}

/// `d/(μ N_max² Δλ²)` with `N_max = n·d`.
pub fn ghz_sum(d: usize, n: usize, lam_max: f64, lam_min: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let g = gap(lam_max, lam_min)?;
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("need d ≥ 1 and n ≥ 1".into()));
    }
    let n_max = (n * d) as f64;
    let value = d as f64 / (m * n_max * n_max * g * g);
    Ok(BoundReport::new(
        "GHZ sum estimation",
        "ghz-sum",
        value,
        json!({"d": d, "n": n, "N_max": n * d, "lambda_max": lam_max, "lambda_min": lam_min, "mu": mu}),
    ))
}

/// `d²/(μ N_max² Δλ²)`.
pub fn local_sum(d: usize, n_max: usize, lam_max: f64, lam_min: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let g = gap(lam_max, lam_min)?;
    if d == 0 || n_max == 0 {
        return Err(Error::InvalidArgument("need d ≥ 1 and N_max ≥ 1".into()));
    }
    let nm = n_max as f64;
    let value = (d * d) as f64 / (m * nm * nm * g * g);
    Ok(BoundReport::new(
        "local sum estimation",
        "local-sum",
        value,
        json!({"d": d, "N_max": n_max, "lambda_max": lam_max, "lambda_min": lam_min, "mu": mu}),
    ))
}

/// `‖v‖₁²/(μ N_max² Δλ²)`; needs `N_max·|v_k|/‖v‖₁ ∈ ℕ`.
pub fn weighted_ghz_bound(v: &[f64], n_max: usize, lam_max: f64, lam_min: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let g = gap(lam_max, lam_min)?;
    check_unit(v)?;
    crate::probes::proportional_weights(v, n_max)?;
    let nm = n_max as f64;
    let value = l1(v).powi(2) / (m * nm * nm * g * g);
    Ok(BoundReport::new(
        "weighted GHZ single function",
        "weighted-ghz",
        value,
        json!({"v": v, "N_max": n_max, "lambda_max": lam_max, "lambda_min": lam_min, "mu": mu}),
    ))
}

/// `‖x‖₁² Σ_k (v_k/x_k)² / (μ N_max² Δλ²)` for the separable allocation `x`.
pub fn local_weighted(v: &[f64], x: &[f64], n_max: usize, lam_max: f64, lam_min: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let g = gap(lam_max, lam_min)?;
    if v.len() != x.len() {
        return Err(Error::DimensionMismatch(format!("{} function weights, {} allocations", v.len(), x.len())));
    }
    let mut s = 0.0;
    for (k, (&vk, &xk)) in v.iter().zip(x).enumerate() {
        if vk == 0.0 {
            continue;
        }
        if xk == 0.0 {
            return Err(Error::InvalidArgument(format!("allocation x_{} is zero where v is not", k + 1)));
        }
        s += (vk / xk).powi(2);
    }
    let nm = n_max as f64;
    let value = l1(x).powi(2) * s / (m * nm * nm * g * g);
    Ok(BoundReport::new(
        "local single function",
        "local-weighted",
        value,
        json!({"v": v, "x": x, "N_max": n_max, "lambda_max": lam_max, "lambda_min": lam_min, "mu": mu}),
    ))
}

/// `x_k = |v_k|^{2/3}`.
pub fn local_optimal_allocation(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.abs().powf(2.0 / 3.0)).collect()
}

/// `(Σ |v_k|^{2/3})³ / (μ N_max² Δλ²)`.
pub fn local_optimal(v: &[f64], n_max: usize, lam_max: f64, lam_min: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let g = gap(lam_max, lam_min)?;
    check_unit(v)?;
    let nm = n_max as f64;
    let value = local_optimal_allocation(v).iter().sum::<f64>().powi(3) / (m * nm * nm * g * g);
    Ok(BoundReport::new(
        "optimal local single function",
        "local-optimal",
        value,
        json!({"v": v, "x": local_optimal_allocation(v), "N_max": n_max, "lambda_max": lam_max, "lambda_min": lam_min, "mu": mu}),
    ))
}

/// `(d + 1)/(μ N_max² max(λ_max², λ_min²))`.
pub fn gns_bound(d: usize, n_max: usize, lam_max: f64, lam_min: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let lam2 = f64::max(lam_max * lam_max, lam_min * lam_min);
    if lam2 == 0.0 || d == 0 || n_max == 0 {
        return Err(Error::InvalidArgument("need d ≥ 1, N_max ≥ 1 and a non-zero λ".into()));
    }
    let nm = n_max as f64;
    let value = (d + 1) as f64 / (m * nm * nm * lam2);
    Ok(BoundReport::new(
        "GNS single function",
        "gns",
        value,
        json!({"d": d, "N_max": n_max, "lambda_max": lam_max, "lambda_min": lam_min, "mu": mu}),
    ))
}

/// `d′²/(μ N²)`: NOON states with `N/d′` photons each, one phase at a time.
pub fn noon_individual(d_prime: usize, n_total: usize, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    if d_prime == 0 || n_total == 0 || n_total % d_prime != 0 {
        return Err(Error::InvalidArgument(format!("N = {n_total} is not divisible by d′ = {d_prime}")));
    }
    let n = n_total as f64;
    let value = (d_prime * d_prime) as f64 / (m * n * n);
    Ok(BoundReport::new(
        "individual NOON states",
        "noon-individual",
        value,
        json!({"d_prime": d_prime, "d": d_prime + 1, "N": n_total, "mu": mu}),
    ))
}

/// `g/(4μv)` for a probe-symmetric state with mode variance `v` and
/// correlation `J = c/v`.
pub fn imaging_symmetric(v: f64, j: f64, d_prime: usize, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    let (_, g) = symmetric_qfim_inverse(v, j * v, d_prime)?;
    Ok(BoundReport::new(
        "imaging, known reference",
        "imaging-symmetric",
        g / (4.0 * m * v),
        json!({"v": v, "J": j, "g": g, "d_prime": d_prime, "d": d_prime + 1, "mu": mu}),
    ))
}

/// `(1/μα)(β/2v + J′/√(vv′) + γ/2v′)` with `δ(a, b) = 1 + J(b − 1) − a²b`,
/// `α = δ(J′, d′)`, `β = δ(J′, d′ − 1)/(1 − J)`, `γ = δ(0, d′)`.
pub fn imaging_unknown_reference(v: f64, v_ref: f64, j: f64, j_ref: f64, d_prime: usize, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    if !(v > 0.0 && v_ref > 0.0) || d_prime == 0 {
        return Err(Error::InvalidArgument("variances must be positive and d′ ≥ 1".into()));
    }
    if (1.0 - j).abs() < 1e-12 {
        return Err(Error::Singular("J = 1".into()));
    }
    let dp = d_prime as f64;
    let delta = |a: f64, b: f64| 1.0 + j * (b - 1.0) - a * a * b;
    let alpha = delta(j_ref, dp);
    if alpha.abs() < 1e-12 {
        return Err(Error::Singular(format!("α = {alpha}")));
    }
    let beta = delta(j_ref, dp - 1.0) / (1.0 - j);
    let gamma = delta(0.0, dp);
    let value = (beta / (2.0 * v) + j_ref / (v * v_ref).sqrt() + gamma / (2.0 * v_ref)) / (m * alpha);
    Ok(BoundReport::new(
        "imaging, unknown reference",
        "imaging-unknown-reference",
        value,
        json!({"v": v, "v_ref": v_ref, "J": j, "J_ref": j_ref, "alpha": alpha, "beta": beta, "gamma": gamma,
               "d_prime": d_prime, "d": d_prime + 1, "mu": mu}),
    ))
}

/// `(d′ + 1)/(d′ μ v)`: separable comparison state for the unknown-reference
/// problem at matched photon number.
pub fn imaging_separable_reference(v: f64, d_prime: usize, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    if !(v > 0.0) || d_prime == 0 {
        return Err(Error::InvalidArgument("need v > 0 and d′ ≥ 1".into()));
    }
    let dp = d_prime as f64;
    Ok(BoundReport::new(
        "imaging, separable reference comparison",
        "imaging-separable-reference",
        (dp + 1.0) / (dp * m * v),
        json!({"v": v, "d_prime": d_prime, "d": d_prime + 1, "mu": mu}),
    ))
}

/// `g(α, β) = sin 2α + sin 2β`.
pub fn two_qubit_g(alpha: f64, beta: f64) -> f64 {
    (2.0 * alpha).sin() + (2.0 * beta).sin()
}

fn check_angles(alpha: f64, beta: f64) -> Result<()> {
    if (alpha + beta).cos().abs() < 1e-12 {
        return Err(Error::InvalidArgument("cos(α + β) = 0: the functions are linearly dependent".into()));
    }
    Ok(())
}

/// `E(x) = (2 − g x)/(1 − x²)` divided by `μ`: `Tr F(θ)⁻¹` for the two-qubit
/// state with QFIM `[[1, x], [x, 1]]` and `θ = Mφ`,
/// `M = [[cos α, sin α], [sin β, cos β]]`.
pub fn two_qubit_nonorthogonal(alpha: f64, beta: f64, x: f64, mu: u32) -> Result<BoundReport> {
    let m = check_mu(mu)?;
    check_angles(alpha, beta)?;
    if !(x.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("|x| = {} must be below 1", x.abs())));
    }
    let g = two_qubit_g(alpha, beta);
    Ok(BoundReport::new(
        "two-qubit non-orthogonal functions",
        "two-qubit-nonorthogonal",
        (2.0 - g * x) / ((1.0 - x * x) * m),
        json!({"alpha": alpha, "beta": beta, "x": x, "g": g, "mu": mu}),
    ))
}

/// Minimizer `x_min = (2 − √(4 − g²))/g` of `E(x)`, `0` when `g = 0`.
pub fn two_qubit_x_min(alpha: f64, beta: f64) -> Result<f64> {
    check_angles(alpha, beta)?;
    let g = two_qubit_g(alpha, beta);
    if g.abs() < 1e-6 {
        // series: x_min = g/4 + g³/64 + …
        return Ok(if g == 0.0 { 0.0 } else { g / 4.0 + g.powi(3) / 64.0 });
    }
    Ok((2.0 - (4.0 - g * g).max(0.0).sqrt()) / g)
}

/// `Σ_k c_k² Var_k`.
pub fn propagate_variance(coeffs: &[f64], variances: &[f64]) -> Result<f64> {
    if coeffs.len() != variances.len() {
        return Err(Error::DimensionMismatch(format!("{} coefficients, {} variances", coeffs.len(), variances.len())));
    }
    Ok(coeffs.iter().zip(variances).map(|(c, v)| c * c * v).sum())
}

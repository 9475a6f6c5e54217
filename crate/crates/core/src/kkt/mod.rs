//! Solver-independent checks of the stationarity structure of the optima.
//!
//! For an output law `v` and service law `p`, write
//! `x_n = E_S[-ln v_{n+S}] = -Σ_s p_s ln v_{n+s}`. At a full-feedback optimum
//! `x_n = 1 + α + nβ` wherever `P(W = n) > 0`; at a generalized-feedback
//! optimum with `q_i = P(T = i)`,
//! `Σ_{i<n} q_i x_{n-i} + (1 - Σ_{i<n} q_i) x_0 = 1 + γ + δ Σ_{j=1}^n j q_{n-j}`
//! wherever `P(X = n) > 0`. Off the support the left side may only fall
//! below the right side.

mod recursion;
mod toeplitz;

pub use recursion::{
    alternates_in_sign, deviations, linked_deviations_alternate, receq_residuals, recursion_closed_form,
    recursion_deviation, recursion_with_amplitude,
};
pub use toeplitz::{toeplitz_build, toeplitz_homogeneous_null, NullVerdict, ToeplitzSystem};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{Pmf, ServiceModel};
use crate::entmax::EntMaxSolution;
use crate::Scalar;

/// Input mass above which an index counts as active.
pub const ACTIVE_MASS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error("output law of length {output_len} leaves no evaluation window for a service of length {service_len}")]
    WindowTooSmall { output_len: usize, service_len: usize },
    #[error("q_0 = 0; the first positive entry is q_{shift}")]
    ZeroQ0 { shift: usize },
    #[error("recursion parameter q = {0} must lie in (0, 1)")]
    BadQ(f64),
    #[error("dimension must be at least 1")]
    EmptySystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StationarityReport<T> {
    /// `lhs(n) - rhs(n)` for `n = 0..=window`; `+∞` (JSON `null`) at
    /// excluded indices.
    #[serde(with = "crate::entmax::nonfinite::vec")]
    pub residuals: Vec<T>,
    /// Largest `|residual|` on the active set and largest positive residual
    /// off it, excluded indices aside.
    #[serde(with = "crate::entmax::nonfinite")]
    pub max_abs_residual: T,
    /// `(α, β)` or `(γ, δ)`, recovered from the two lowest active indices
    /// with distinct costs.
    #[serde(with = "crate::entmax::nonfinite::pair")]
    pub fitted_multipliers: (T, T),
    pub active_set: Vec<usize>,
    /// Largest `n` evaluated: every `v_{n+s}` with `p_s > 0` lies in the
    /// stored output law.
    pub window: usize,
    /// Inactive indices whose expectation hits a zero of the output law.
    pub excluded: Vec<usize>,
    /// `x_n = E_S[-ln v_{n+S}]`.
    #[serde(with = "crate::entmax::nonfinite::vec")]
    pub scores: Vec<T>,
    /// First index with `q_j > 0` when `q_0 = 0` (the recursion then starts
    /// at `q_j`).
    pub q_shift: Option<usize>,
}

/// `E_S[-ln v_{n+S}]` for `n = 0..=len(v) - len(p)`.
pub fn expected_log_scores<T: Scalar>(output: &Pmf<T>, service: &Pmf<T>) -> Result<Vec<T>, KktError> {
    let (v, p) = (output.probs(), service.probs());
    if v.len() < p.len() {
        return Err(KktError::WindowTooSmall { output_len: v.len(), service_len: p.len() });
    }
    Ok((0..=v.len() - p.len())
        .map(|n| {
            let mut acc = T::zero();
            for (s, &ps) in p.iter().enumerate() {
                if ps > T::zero() {
                    let w = v[n + s];
                    if w <= T::zero() {
                        return T::infinity();
                    }
                    acc = acc - ps * w.ln();
                }
            }
            acc
        })
        .collect())
}

/// Stationarity of a full-feedback optimum: `x_n = 1 + α + nβ`.
pub fn residual_full<T: Scalar>(
    solution: &EntMaxSolution<T>,
    service: &ServiceModel<T>,
) -> Result<StationarityReport<T>, KktError> {
    let scores = expected_log_scores(&solution.output_law, &service.pmf)?;
    let costs: Vec<T> = (0..scores.len()).map(T::from_count).collect();
    Ok(assemble(&solution.input_law, scores.clone(), scores, &costs, None))
}

/// Stationarity of a generalized-feedback optimum with parameter `tau`.
pub fn residual_gfeedback<T: Scalar>(
    solution: &EntMaxSolution<T>,
    service: &ServiceModel<T>,
    tau: u64,
) -> Result<StationarityReport<T>, KktError> {
    let scores = expected_log_scores(&solution.output_law, &service.pmf)?;
    let t = service.pmf.threshold_transform(tau as usize);
    let q = t.probs();
    let shift = t.first_positive_index();
    let len = scores.len();
    let mut lhs = Vec::with_capacity(len);
    let mut costs = Vec::with_capacity(len);
    for n in 0..len {
        lhs.push(recursion_lhs(q, &scores, n));
        costs.push(
            (1..=n)
                .map(|j| T::from_count(j) * q.get(n - j).copied().unwrap_or_else(T::zero))
                .sum(),
        );
    }
    Ok(assemble(&solution.input_law, scores, lhs, &costs, (shift > 0).then_some(shift)))
}

/// `Σ_{i<n} q_i x_{n-i} + (1 - Σ_{i<n} q_i) x_0`.
pub fn recursion_lhs<T: Scalar>(q: &[T], x: &[T], n: usize) -> T {
    let mut acc = T::zero();
    let mut head = T::zero();
    for (i, &qi) in q.iter().enumerate().take(n) {
        if qi > T::zero() {
            acc = acc + qi * x[n - i];
        }
        head = head + qi;
    }
    let rest = T::one() - head;
    if rest > T::zero() {
        acc = acc + rest * x[0];
    }
    acc
}

fn assemble<T: Scalar>(
    input: &Pmf<T>,
    scores: Vec<T>,
    lhs: Vec<T>,
    costs: &[T],
    q_shift: Option<usize>,
) -> StationarityReport<T> {
    let window = lhs.len() - 1;
    let active_mass = T::lit(ACTIVE_MASS);
    let active_set: Vec<usize> = (0..=window).filter(|&n| input.get(n) > active_mass).collect();
    let fitted_multipliers = fit(&active_set, &lhs, costs);
    let (a, b) = fitted_multipliers;
    let mut residuals = Vec::with_capacity(lhs.len());
    let mut excluded = Vec::new();
    let mut worst = T::zero();
    for n in 0..=window {
        let mean_term = if costs[n] == T::zero() { T::zero() } else { b * costs[n] };
        let r = lhs[n] - (T::one() + a + mean_term);
        let is_active = active_set.binary_search(&n).is_ok();
        if !lhs[n].is_finite() && !is_active {
            excluded.push(n);
            residuals.push(T::infinity());
            continue;
        }
        residuals.push(r);
        let v = if is_active { r.abs() } else { r.max(T::zero()) };
        if !(v <= worst) {
            worst = if v.is_nan() { T::infinity() } else { v };
        }
    }
    StationarityReport {
        residuals,
        max_abs_residual: worst,
        fitted_multipliers,
        active_set,
        window,
        excluded,
        scores,
        q_shift,
    }
}

fn fit<T: Scalar>(active: &[usize], lhs: &[T], costs: &[T]) -> (T, T) {
    let Some(&j0) = active.first() else {
        return (T::nan(), T::nan());
    };
    let j1 = active.iter().copied().find(|&j| costs[j] != costs[j0]);
    let beta = match j1 {
        Some(j1) => (lhs[j1] - lhs[j0]) / (costs[j1] - costs[j0]),
        // a single cost level is only optimal when the budget is exhausted at zero
        None => T::infinity(),
    };
    let mean_term = if costs[j0] == T::zero() { T::zero() } else { beta * costs[j0] };
    (lhs[j0] - T::one() - mean_term, beta)
}

//! The two entropy-maximization programs behind the capacity bounds.
//!
//! Full feedback: maximize `H(W + S)` over laws of `W ≥ 0` with
//! `E[W] ≤ q = 1/λ - 1/μ`. Generalized feedback with parameter `τ`: maximize
//! `H((X - T)+ + S₂)` over laws of `X ≥ 0` with `E[(X - T)+] ≤ q`, where
//! `T = (S₁ - τ)+` and `S₁, S₂` are independent copies of the service time.
//! Both are concave programs `max H(K x) s.t. c·x ≤ q` over a truncated
//! simplex, solved by [`dual_bisection`].

mod banded;
mod channel;
mod oracle;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistError, Pmf, RateParams, ServiceModel, Tau};
use crate::Scalar;

pub use oracle::{oracle_grid_search, OracleSolution};
pub use solver::dual_bisection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Mode {
    Full,
    GFeedback { tau: u64 },
}

impl Mode {
    /// `τ = ∞` is the full-feedback program.
    pub fn from_tau(tau: Tau) -> Self {
        match tau {
            Tau::Finite(tau) => Mode::GFeedback { tau },
            Tau::Infinite => Mode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Bound on the stationarity residual at the returned optimum (nats).
    pub kkt_tol: f64,
    /// Accepted violation `|E[W] - q|` when the mean constraint binds (slots).
    pub feas_tol: f64,
    /// Largest input mass allowed at the top of the truncation window.
    pub boundary_tol: f64,
    /// Cap on inner iterations (ascent plus Newton steps) per solve.
    pub max_iters: usize,
    /// Largest input window the adaptive truncation may reach.
    pub n_in_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tol: 1e-9,
            feas_tol: 1e-10,
            boundary_tol: 1e-10,
            max_iters: 100_000,
            n_in_cap: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// Start at `max(8, ⌈4 (q + E[S])⌉)` and double until the top input
    /// index carries less than `boundary_tol`.
    Adaptive,
    /// Input law restricted to `{0..=n}`; no boundary test.
    Fixed(usize),
}

/// One instance of either program. `service` is a bare law so that
/// degenerate services such as a point mass at 0 can be studied with a raw
/// budget.
#[derive(Debug, Clone, PartialEq)]
pub struct EntMaxProblem<T> {
    pub service: Pmf<T>,
    pub budget_q: T,
    pub mode: Mode,
    pub truncation: Truncation,
    pub options: SolverOptions,
}

impl<T: Scalar> EntMaxProblem<T> {
    pub fn new(service: &ServiceModel<T>, rate: &RateParams<T>, mode: Mode, options: SolverOptions) -> Self {
        EntMaxProblem {
            service: service.pmf.clone(),
            budget_q: rate.budget_q,
            mode,
            truncation: Truncation::Adaptive,
            options,
        }
    }

    pub fn with_budget(service: Pmf<T>, budget_q: T, mode: Mode) -> Self {
        EntMaxProblem { service, budget_q, mode, truncation: Truncation::Adaptive, options: SolverOptions::default() }
    }

    pub fn truncation(mut self, truncation: Truncation) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TruncationReport<T> {
    pub n_in: usize,
    /// Input mass at index `n_in`.
    pub boundary_mass: T,
    pub doublings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IterationCounts {
    pub ascent: usize,
    pub newton: usize,
    /// Inner solves performed by the multiplier search.
    pub outer: usize,
}

/// Optimizer output. For full feedback the input law is that of `W` and the
/// multipliers are `(β, α)`; for generalized feedback it is the law of `X`
/// with multipliers `(δ, γ)`. Stationarity reads
/// `D_j = colsum_j + α + β c_j` on the support, where
/// `D_j = -Σ_n K_nj ln y_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EntMaxSolution<T> {
    pub mode: Mode,
    pub budget_q: T,
    pub input_law: Pmf<T>,
    pub output_law: Pmf<T>,
    /// `H(output_law)` in nats.
    pub entropy_value: T,
    /// Infinite when `q = 0` (serialized as `null`).
    #[serde(with = "nonfinite")]
    pub multiplier_mean: T,
    pub multiplier_norm: T,
    pub constraint_slack: T,
    pub kkt_max_residual: T,
    /// Upper bound on `|entropy_value - optimum|` (nats), covering the
    /// duality gap of the returned point and the window truncation.
    pub error_bound: T,
    pub truncation_report: TruncationReport<T>,
    pub iterations: IterationCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub n_in: usize,
    pub multiplier_mean: f64,
    /// Absent when the failure happened before a candidate was evaluated.
    pub kkt_residual: Option<f64>,
    pub constraint_slack: f64,
    pub iterations: IterationCounts,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntMaxError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("input mass {boundary_mass:e} at the window edge n_in={n_in} exceeds the boundary tolerance")]
    TruncationInsufficient { n_in: usize, boundary_mass: f64 },
    #[error("solver did not converge (kkt residual {}, slack {:e}, n_in {})", .0.kkt_residual.map_or("n/a".into(), |r| format!("{r:e}")), .0.constraint_slack, .0.n_in)]
    NoConvergence(Box<Diagnostics>),
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
}

/// Full-feedback program at rate `rate`.
pub fn solve_full<T: Scalar>(
    service: &ServiceModel<T>,
    rate: &RateParams<T>,
    options: &SolverOptions,
) -> Result<EntMaxSolution<T>, EntMaxError> {
    dual_bisection(&EntMaxProblem::new(service, rate, Mode::Full, *options))
}

/// Generalized-feedback program with parameter `tau`.
pub fn solve_gfeedback<T: Scalar>(
    service: &ServiceModel<T>,
    rate: &RateParams<T>,
    tau: u64,
    options: &SolverOptions,
) -> Result<EntMaxSolution<T>, EntMaxError> {
    dual_bisection(&EntMaxProblem::new(service, rate, Mode::GFeedback { tau }, *options))
}

/// Output law of `input` through the channel of `mode`, composed from the
/// [`Pmf`] operations rather than the solver's matrix.
pub fn channel_output<T: Scalar>(service: &Pmf<T>, mode: Mode, input: &Pmf<T>) -> Pmf<T> {
    match mode {
        Mode::Full => input.convolve(service),
        Mode::GFeedback { tau } => input
            .clip_subtract(&service.threshold_transform(tau as usize))
            .convolve(service),
    }
}

/// Serializes non-finite values as `null` and reads `null` back as `+∞`.
pub(crate) mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::Scalar;

    pub fn serialize<T: Scalar, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        Ok(Option::<T>::deserialize(d)?.unwrap_or_else(T::infinity))
    }

    fn wrap<T: Scalar>(v: T) -> Option<T> {
        v.is_finite().then_some(v)
    }

    fn unwrap<T: Scalar>(v: Option<T>) -> T {
        v.unwrap_or_else(T::infinity)
    }

    pub mod vec {
        use super::*;
        use serde::Serialize;

        pub fn serialize<T: Scalar, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| wrap(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
            Ok(Vec::<Option<T>>::deserialize(d)?.into_iter().map(unwrap).collect())
        }
    }

    pub mod pair {
        use super::*;
        use serde::Serialize;

        pub fn serialize<T: Scalar, S: Serializer>(v: &(T, T), s: S) -> Result<S::Ok, S::Error> {
            (wrap(v.0), wrap(v.1)).serialize(s)
        }

        pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<(T, T), D::Error> {
            let (a, b) = <(Option<T>, Option<T>)>::deserialize(d)?;
            Ok((unwrap(a), unwrap(b)))
        }
    }
}

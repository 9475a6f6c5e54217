//! Capacity values, λ-sweeps and strict-gap verdicts.
//!
//! `C_F(λ) = λ (max H(W + S) - H(S))` and the generalized-feedback bound
//! `λ (max H((X - T)+ + S₂) - H(S))`, both reported in bits per slot.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistError, RateParams, ServiceModel, ServiceSpec, Tau};
use crate::entmax::{dual_bisection, EntMaxError, EntMaxProblem, EntMaxSolution, Mode, SolverOptions};

pub const TOOL_NAME: &str = "queuecap";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Solver(#[from] EntMaxError),
    #[error("lambda grid must be nonempty and inside (0, mu)")]
    BadGrid,
}

/// One capacity-type value with its error budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub lambda: f64,
    pub tau: Tau,
    pub bits: f64,
    /// Optimal output entropy (nats).
    pub entropy_nats: f64,
    pub error_bound_bits: f64,
    pub n_in: usize,
}

fn point(service: &ServiceModel<f64>, lambda: f64, tau: Tau, options: &SolverOptions) -> Result<(CapacityPoint, EntMaxSolution<f64>), CapacityError> {
    let rate = RateParams::for_service(service, lambda, tau)?;
    let sol = dual_bisection(&EntMaxProblem::new(service, &rate, Mode::from_tau(tau), *options))?;
    let p = CapacityPoint {
        lambda,
        tau,
        bits: (lambda * (sol.entropy_value - service.entropy()) / LN_2).max(0.0),
        entropy_nats: sol.entropy_value,
        error_bound_bits: lambda * sol.error_bound / LN_2,
        n_in: sol.truncation_report.n_in,
    };
    Ok((p, sol))
}

/// `C_F(λ)` with the optimizer behind it.
pub fn cf_point(service: &ServiceModel<f64>, lambda: f64, options: &SolverOptions) -> Result<(CapacityPoint, EntMaxSolution<f64>), CapacityError> {
    point(service, lambda, Tau::Infinite, options)
}

/// Generalized-feedback bound with the optimizer behind it.
pub fn g_point(
    service: &ServiceModel<f64>,
    lambda: f64,
    tau: u64,
    options: &SolverOptions,
) -> Result<(CapacityPoint, EntMaxSolution<f64>), CapacityError> {
    point(service, lambda, Tau::Finite(tau), options)
}

/// `C_F(λ)` in bits per slot.
pub fn cf_lambda(service: &ServiceModel<f64>, lambda: f64, options: &SolverOptions) -> Result<f64, CapacityError> {
    Ok(cf_point(service, lambda, options)?.0.bits)
}

/// Upper bound on the capacity with parameter-`τ` feedback, bits per slot.
pub fn g_bound_lambda(service: &ServiceModel<f64>, lambda: f64, tau: u64, options: &SolverOptions) -> Result<f64, CapacityError> {
    Ok(g_point(service, lambda, tau, options)?.0.bits)
}

/// `λ (bound(1/λ) - H(S))+` in bits: the cap every `C_F(λ)` respects because
/// `W + S` has mean `1/λ` at the budget.
pub fn cf_entropy_cap(service: &ServiceModel<f64>, lambda: f64) -> f64 {
    let h = crate::dist::max_entropy_mean_bound(1.0 / lambda);
    (lambda * (h - service.entropy()) / LN_2).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Strict,
    Equal,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Strict => "Strict",
            Verdict::Equal => "Equal",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

impl Verdict {
    /// Strict when the gap clears the error budget, Equal when it is within
    /// it, Inconclusive when the bound exceeds `C_F` by more than the budget.
    pub fn classify(gap: f64, err: f64) -> Self {
        if gap > err {
            Verdict::Strict
        } else if gap.abs() <= err {
            Verdict::Equal
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub lambda: f64,
    pub tau: u64,
    pub verdict: Verdict,
    /// `C_F(λ) - bound_τ(λ)` in bits per slot.
    pub gap_bits: f64,
    /// Combined error budget of both solves, bits per slot.
    pub error_bound_bits: f64,
    pub cf_bits: f64,
    pub g_bits: f64,
    pub cf_entropy_nats: f64,
    pub g_entropy_nats: f64,
}

impl GapReport {
    /// `VERDICT=<...> GAP_BITS=<...> ERR=<...>`.
    pub fn verdict_line(&self) -> String {
        format!("VERDICT={} GAP_BITS={:.6e} ERR={:.6e}", self.verdict, self.gap_bits, self.error_bound_bits)
    }
}

fn gap_from(full: &CapacityPoint, g: &CapacityPoint, tau: u64) -> GapReport {
    // unclamped values so that the gap is the entropy difference
    let gap_bits = full.lambda * (full.entropy_nats - g.entropy_nats) / LN_2;
    let err = full.error_bound_bits + g.error_bound_bits;
    GapReport {
        lambda: full.lambda,
        tau,
        verdict: Verdict::classify(gap_bits, err),
        gap_bits,
        error_bound_bits: err,
        cf_bits: full.bits,
        g_bits: g.bits,
        cf_entropy_nats: full.entropy_nats,
        g_entropy_nats: g.entropy_nats,
    }
}

pub fn gap_verdict(service: &ServiceModel<f64>, lambda: f64, tau: u64, options: &SolverOptions) -> Result<GapReport, CapacityError> {
    let (full, _) = cf_point(service, lambda, options)?;
    let (g, _) = g_point(service, lambda, tau, options)?;
    Ok(gap_from(&full, &g, tau))
}

/// `points` geometrically spaced rates on `[0.02 μ, 0.98 μ]`.
pub fn default_lambda_grid(mu: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = (0.02 * mu, 0.98 * mu);
    if points <= 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { hi } else { lo * (r * i as f64).exp() }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub c_full_bits: f64,
    pub full_entropy_nats: f64,
    pub full_error_bits: f64,
    /// Bound per τ, in the order of `CapacityCurve::taus`.
    pub g_bits: Vec<f64>,
    pub g_entropy_nats: Vec<f64>,
    /// Verdict against the largest τ in the list.
    pub verdict: Option<Verdict>,
    pub gap_bits: Option<f64>,
    pub error_bound_bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityCurve {
    pub taus: Vec<u64>,
    pub rows: Vec<SweepRow>,
    /// `(λ*, C_F(λ*))` after golden-section refinement.
    pub sup_full: (f64, f64),
}

impl CapacityCurve {
    pub fn lambda_grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lambda).collect()
    }

    pub fn full_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.c_full_bits).collect()
    }

    pub fn g_bounds(&self) -> BTreeMap<u64, Vec<f64>> {
        self.taus
            .iter()
            .enumerate()
            .map(|(k, &t)| (t, self.rows.iter().map(|r| r.g_bits[k]).collect()))
            .collect()
    }

    /// Columns `lambda, c_full_bits, g_tau<τ>_bits..., verdict, gap, error_bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,c_full_bits");
        for t in &self.taus {
            out.push_str(&format!(",g_tau{t}_bits"));
        }
        out.push_str(",verdict,gap,error_bound\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.lambda, r.c_full_bits));
            for g in &r.g_bits {
                out.push_str(&format!(",{g}"));
            }
            match (r.verdict, r.gap_bits, r.error_bound_bits) {
                (Some(v), Some(g), Some(e)) => out.push_str(&format!(",{v},{g},{e}\n")),
                _ => out.push_str(",,,\n"),
            }
        }
        out
    }
}

/// JSON mirror of a sweep with the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveDocument {
    pub tool: String,
    pub version: String,
    pub service: ServiceSpec,
    pub options: SolverOptions,
    pub curve: CapacityCurve,
}

impl CurveDocument {
    pub fn new(service: &ServiceModel<f64>, options: &SolverOptions, curve: CapacityCurve) -> Self {
        CurveDocument {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            service: service.spec.clone(),
            options: *options,
            curve,
        }
    }
}

const GOLDEN_ITERS: usize = 40;

/// Evaluates the full-feedback value and every bound on `grid` (in
/// parallel), then refines the supremum of the full-feedback curve by golden
/// section on the grid cells adjacent to the best point.
pub fn sweep(service: &ServiceModel<f64>, taus: &[u64], grid: &[f64], options: &SolverOptions) -> Result<CapacityCurve, CapacityError> {
    let mu = service.rate_mu;
    if grid.is_empty() || grid.iter().any(|&l| !(l > 0.0 && l < mu)) {
        return Err(CapacityError::BadGrid);
    }
    let rows = grid
        .par_iter()
        .map(|&lambda| {
            let (full, _) = cf_point(service, lambda, options)?;
            let mut g_bits = Vec::with_capacity(taus.len());
            let mut g_nats = Vec::with_capacity(taus.len());
            let mut last = None;
            for &t in taus {
                let (g, _) = g_point(service, lambda, t, options)?;
                g_bits.push(g.bits);
                g_nats.push(g.entropy_nats);
                last = Some((t, g));
            }
            let gap = last.map(|(t, g)| gap_from(&full, &g, t));
            Ok(SweepRow {
                lambda,
                c_full_bits: full.bits,
                full_entropy_nats: full.entropy_nats,
                full_error_bits: full.error_bound_bits,
                g_bits,
                g_entropy_nats: g_nats,
                verdict: gap.as_ref().map(|g| g.verdict),
                gap_bits: gap.as_ref().map(|g| g.gap_bits),
                error_bound_bits: gap.as_ref().map(|g| g.error_bound_bits),
            })
        })
        .collect::<Result<Vec<_>, CapacityError>>()?;

    let best = (0..rows.len())
        .max_by(|&a, &b| rows[a].c_full_bits.total_cmp(&rows[b].c_full_bits))
        .unwrap_or(0);
    let mut sup = (rows[best].lambda, rows[best].c_full_bits);
    if rows.len() >= 3 {
        let lo = rows[best.saturating_sub(1)].lambda;
        let hi = rows[(best + 1).min(rows.len() - 1)].lambda;
        let f = |l: f64| cf_lambda(service, l, options);
        let refined = golden_max(f, lo, hi)?;
        if refined.1 > sup.1 {
            sup = refined;
        }
    }
    Ok(CapacityCurve { taus: taus.to_vec(), rows, sup_full: sup })
}

fn golden_max<E>(f: impl Fn(f64) -> Result<f64, E>, mut a: f64, mut b: f64) -> Result<(f64, f64), E> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..GOLDEN_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

//! Multiplier search with a barrier-Newton inner solver.
//!
//! For a fixed mean multiplier `β` the inner problem
//! `max H(K x) - β c·x` over the simplex is solved by a short
//! exponentiated-gradient warm-up followed by primal log-barrier Newton
//! steps with a decreasing barrier weight. Newton steps use the scaled
//! Hessian `diag(√x) Kᵀ Y⁻¹ K diag(√x) + diag(μ/x)`, which is banded because
//! columns of `K` only overlap over a service-support-sized window. The
//! outer loop finds `β` with `c·x(β) = q` by Illinois-modified regula falsi.

use super::banded::SymBand;
use super::channel::Channel;
use super::{
    Diagnostics, EntMaxError, EntMaxProblem, EntMaxSolution, IterationCounts, Truncation, TruncationReport,
};
use crate::dist::{entropy_of, Pmf};
use crate::Scalar;

const ASCENT_WARMUP: usize = 50;
const BARRIER_START: f64 = 1e-2;
const BARRIER_END: f64 = 1e-20;
const BARRIER_SHRINK: f64 = 0.1;
const STAGE_ITERS: usize = 100;
const STAGE_TOL: f64 = 1e-2;
const FINAL_TOL: f64 = 1e-12;
const ACTIVE_MASS: f64 = 1e-9;
const MAX_OUTER: usize = 200;
const MAX_MULTIPLIER: f64 = 1e12;

/// Solves `problem`, enlarging the input window as configured.
pub fn dual_bisection<T: Scalar>(problem: &EntMaxProblem<T>) -> Result<EntMaxSolution<T>, EntMaxError> {
    let q = problem.budget_q;
    if !(q >= T::zero()) || !q.is_finite() {
        return Err(EntMaxError::Invalid(format!("budget q = {q} must be finite and nonnegative")));
    }
    let o = &problem.options;
    if !(o.kkt_tol > 0.0 && o.feas_tol > 0.0 && o.boundary_tol > 0.0 && o.max_iters > 0 && o.n_in_cap >= 1) {
        return Err(EntMaxError::Invalid("solver options must be positive".into()));
    }
    if q == T::zero() {
        return Ok(zero_budget(problem));
    }
    match problem.truncation {
        Truncation::Fixed(n) => {
            if n == 0 {
                return Err(EntMaxError::Invalid("input window must contain at least {0, 1}".into()));
            }
            solve_window(problem, n, 0)
        }
        Truncation::Adaptive => {
            let es = problem.service.mean_value();
            let start = (T::lit(4.0) * (q + es)).ceil().to_usize().unwrap_or(usize::MAX);
            let mut n = start.max(8).min(o.n_in_cap);
            let mut doublings = 0;
            loop {
                let sol = solve_window(problem, n, doublings)?;
                let edge = sol.truncation_report.boundary_mass;
                if edge < T::lit(o.boundary_tol) {
                    return Ok(sol);
                }
                if n >= o.n_in_cap {
                    return Err(EntMaxError::TruncationInsufficient { n_in: n, boundary_mass: edge.as_f64() });
                }
                n = (2 * n).min(o.n_in_cap);
                doublings += 1;
            }
        }
    }
}

fn zero_budget<T: Scalar>(problem: &EntMaxProblem<T>) -> EntMaxSolution<T> {
    let ch = Channel::build(&problem.service, problem.mode, 1);
    let x = [T::one(), T::zero()];
    let y = ch.apply(&x);
    let logy = logs(&y);
    let d = ch.log_scores(&logy);
    EntMaxSolution {
        mode: problem.mode,
        budget_q: T::zero(),
        input_law: Pmf::point(0),
        output_law: Pmf::from_raw(y.clone(), problem.service.tail_mass()),
        entropy_value: entropy_of(&y),
        multiplier_mean: T::infinity(),
        multiplier_norm: d[0] - ch.colsum[0],
        constraint_slack: T::zero(),
        kkt_max_residual: T::zero(),
        error_bound: T::zero(),
        truncation_report: TruncationReport { n_in: 0, boundary_mass: T::zero(), doublings: 0 },
        iterations: IterationCounts::default(),
    }
}

struct Inner<'a, T> {
    ch: &'a Channel<T>,
    counts: IterationCounts,
    cap: usize,
}

/// Iteration budget exhausted.
struct Exhausted;

fn solve_window<T: Scalar>(
    problem: &EntMaxProblem<T>,
    n: usize,
    doublings: usize,
) -> Result<EntMaxSolution<T>, EntMaxError> {
    let ch = Channel::build(&problem.service, problem.mode, n);
    let q = problem.budget_q;
    let opts = &problem.options;
    let feas = T::lit(opts.feas_tol);
    let mut inner = Inner { ch: &ch, counts: IterationCounts::default(), cap: opts.max_iters };
    let mut x = vec![T::one() / T::from_count(n + 1); n + 1];

    let fail = |x: &[T], beta: T, counts: IterationCounts| {
        EntMaxError::NoConvergence(Box::new(Diagnostics {
            n_in: n,
            multiplier_mean: beta.as_f64(),
            kkt_residual: None,
            constraint_slack: (q - ch.mean_cost(x)).as_f64(),
            iterations: counts,
        }))
    };

    inner.ascent(T::zero(), &mut x, ASCENT_WARMUP);
    if inner.barrier(T::zero(), &mut x, T::lit(BARRIER_START)).is_err() {
        return Err(fail(&x, T::zero(), inner.counts));
    }
    inner.counts.outer += 1;
    let mut beta = T::zero();
    let g0 = ch.mean_cost(&x) - q;
    if g0 > feas {
        let end = barrier_end::<T>();
        let (mut lo, mut glo) = (T::zero(), g0);
        let mut hi = T::one();
        let eval = |beta: T, x: &mut Vec<T>, inner: &mut Inner<T>| -> Result<T, EntMaxError> {
            inner.counts.outer += 1;
            if inner.counts.outer > MAX_OUTER {
                return Err(fail(x, beta, inner.counts));
            }
            // a warm start far from the new optimum can stall at the final
            // barrier weight; fall back to the full path from the centre
            let warm = inner.barrier(beta, x, end).map_err(|_| fail(x, beta, inner.counts))?;
            if !warm {
                x.iter_mut().for_each(|v| *v = T::one() / T::from_count(n + 1));
                inner.ascent(beta, x, ASCENT_WARMUP);
                inner.barrier(beta, x, T::lit(BARRIER_START)).map_err(|_| fail(x, beta, inner.counts))?;
            }
            Ok(ch.mean_cost(x) - q)
        };
        let mut ghi = eval(hi, &mut x, &mut inner)?;
        while ghi > T::zero() {
            if hi > T::lit(MAX_MULTIPLIER) {
                return Err(fail(&x, hi, inner.counts));
            }
            lo = hi;
            glo = ghi;
            hi = hi + hi;
            ghi = eval(hi, &mut x, &mut inner)?;
        }
        beta = hi;
        let mut gm = ghi;
        let mut side = 0i8;
        let half = T::lit(0.5);
        while gm.abs() >= feas && hi - lo > T::lit(1e-15) * hi {
            let mut m = (lo * ghi - hi * glo) / (ghi - glo);
            if !(m > lo && m < hi) {
                m = half * (lo + hi);
            }
            beta = m;
            gm = eval(m, &mut x, &mut inner)?;
            if gm > T::zero() {
                lo = m;
                glo = gm;
                if side == -1 {
                    ghi = ghi * half;
                }
                side = -1;
            } else {
                hi = m;
                ghi = gm;
                if side == 1 {
                    glo = glo * half;
                }
                side = 1;
            }
        }
    }
    finish(problem, &ch, x, beta, inner.counts, doublings)
}

fn finish<T: Scalar>(
    problem: &EntMaxProblem<T>,
    ch: &Channel<T>,
    x: Vec<T>,
    beta: T,
    counts: IterationCounts,
    doublings: usize,
) -> Result<EntMaxSolution<T>, EntMaxError> {
    let n = x.len() - 1;
    let q = problem.budget_q;
    let y = ch.apply(&x);
    let d = ch.log_scores(&logs(&y));
    let g: Vec<T> = (0..=n).map(|j| d[j] - ch.colsum[j] - beta * ch.cost[j]).collect();
    let alpha: T = x.iter().zip(&g).map(|(&a, &b)| a * b).sum();
    let active = T::lit(ACTIVE_MASS);
    let mut residual = T::zero();
    let mut gmax = T::neg_infinity();
    for j in 0..=n {
        let r = g[j] - alpha;
        let v = if x[j] > active { r.abs() } else { r.max(T::zero()) };
        residual = residual.max(v);
        gmax = gmax.max(g[j]);
    }
    let slack = q - ch.mean_cost(&x);
    let opts = &problem.options;
    let n_edge = problem.service.len().max(4).min(n + 1);
    let edge_mass: T = x[n + 1 - n_edge..].iter().copied().sum();
    let tail = if edge_mass > T::zero() {
        T::lit(10.0) * edge_mass * (T::one() + edge_mass.ln().abs() + beta * T::from_count(n))
    } else {
        T::zero()
    };
    let error_bound = (gmax - alpha).max(T::zero())
        + beta * slack.abs()
        + T::lit(opts.kkt_tol) * T::from_count(n + 1)
        + tail;
    let converged = residual <= T::lit(opts.kkt_tol)
        && slack >= -T::lit(opts.feas_tol).max(T::tol(1e-12))
        && beta * slack.abs() <= T::tol(1e-6)
        && residual.is_finite();
    if !converged {
        return Err(EntMaxError::NoConvergence(Box::new(Diagnostics {
            n_in: n,
            multiplier_mean: beta.as_f64(),
            kkt_residual: Some(residual.as_f64()),
            constraint_slack: slack.as_f64(),
            iterations: counts,
        })));
    }
    Ok(EntMaxSolution {
        mode: problem.mode,
        budget_q: q,
        entropy_value: entropy_of(&y),
        output_law: Pmf::from_raw(y, problem.service.tail_mass()),
        truncation_report: TruncationReport { n_in: n, boundary_mass: x[n], doublings },
        input_law: Pmf::from_raw(x, T::zero()),
        multiplier_mean: beta,
        multiplier_norm: alpha,
        constraint_slack: slack,
        kkt_max_residual: residual,
        error_bound,
        iterations: counts,
    })
}

/// Final barrier weight, raised for short floating-point types.
fn barrier_end<T: Scalar>() -> T {
    T::lit(BARRIER_END).max(T::epsilon() * T::epsilon())
}

fn logs<T: Scalar>(y: &[T]) -> Vec<T> {
    y.iter().map(|&v| if v > T::zero() { v.ln() } else { T::zero() }).collect()
}

impl<T: Scalar> Inner<'_, T> {
    fn used(&self) -> usize {
        self.counts.ascent + self.counts.newton
    }

    /// Gradient of `H(K x) - β c·x`.
    fn gradient(&self, beta: T, x: &[T]) -> (Vec<T>, Vec<T>) {
        let ch = self.ch;
        let y = ch.apply(x);
        let d = ch.log_scores(&logs(&y));
        let g = (0..x.len()).map(|j| d[j] - ch.colsum[j] - beta * ch.cost[j]).collect();
        (g, y)
    }

    fn lagrangian(&self, beta: T, x: &[T]) -> T {
        entropy_of(&self.ch.apply(x)) - beta * self.ch.mean_cost(x)
    }

    /// Exponentiated-gradient ascent with Armijo backtracking.
    fn ascent(&mut self, beta: T, x: &mut Vec<T>, iters: usize) {
        let mut eta = T::one();
        let mut f = self.lagrangian(beta, x);
        for _ in 0..iters {
            if self.used() >= self.cap {
                return;
            }
            self.counts.ascent += 1;
            let (g, _) = self.gradient(beta, x);
            let gmax = g.iter().copied().fold(T::neg_infinity(), T::max);
            loop {
                let mut xn: Vec<T> = x.iter().zip(&g).map(|(&xi, &gi)| xi * (eta * (gi - gmax)).exp()).collect();
                let s: T = xn.iter().copied().sum();
                for v in xn.iter_mut() {
                    *v = (*v / s).max(T::min_positive_value());
                }
                let fnew = self.lagrangian(beta, &xn);
                let lin: T = g.iter().zip(xn.iter().zip(x.iter())).map(|(&gi, (&a, &b))| gi * (a - b)).sum();
                if fnew >= f + T::lit(1e-4) * lin {
                    *x = xn;
                    f = fnew;
                    eta = eta + eta;
                    break;
                }
                eta = eta * T::lit(0.5);
                if eta < T::lit(1e-12) {
                    return;
                }
            }
        }
    }

    /// Barrier path-following from weight `mu0` down to the final weight.
    /// Returns whether the final stage reached its tolerance.
    fn barrier(&mut self, beta: T, x: &mut Vec<T>, mu0: T) -> Result<bool, Exhausted> {
        let end = barrier_end::<T>();
        let tiny = T::min_positive_value();
        for v in x.iter_mut() {
            *v = v.max(tiny);
        }
        let mut mu = mu0.max(end);
        loop {
            let last = mu <= end;
            let thr = if last { T::tol(FINAL_TOL) } else { T::lit(STAGE_TOL) };
            for _ in 0..STAGE_ITERS {
                let (g, y) = self.gradient(beta, x);
                let gb: Vec<T> = g.iter().zip(x.iter()).map(|(&gi, &xi)| gi + mu / xi).collect();
                let nu: T = gb.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
                let rg: Vec<T> = gb.iter().map(|&v| v - nu).collect();
                let worst = rg.iter().fold(T::zero(), |m, v| m.max(v.abs()));
                if worst < thr || !worst.is_finite() {
                    break;
                }
                if self.used() >= self.cap {
                    return Err(Exhausted);
                }
                self.counts.newton += 1;
                if !self.newton_step(beta, mu, x, &y, &rg) {
                    break;
                }
            }
            if last {
                let (g, _) = self.gradient(beta, x);
                let nu: T = g.iter().zip(x.iter()).map(|(&a, &b)| a * b + mu).sum();
                let worst = g.iter().zip(x.iter()).fold(T::zero(), |m, (&gi, &xi)| m.max((gi + mu / xi - nu).abs()));
                return Ok(worst < thr);
            }
            mu = (mu * T::lit(BARRIER_SHRINK)).max(end);
        }
    }

    fn barrier_objective(&self, beta: T, mu: T, x: &[T]) -> T {
        let logsum: T = x.iter().map(|v| v.ln()).sum();
        self.lagrangian(beta, x) + mu * logsum
    }

    /// One damped Newton step on the barrier objective restricted to the
    /// simplex. Returns false when no ascent direction is available.
    fn newton_step(&self, beta: T, mu: T, x: &mut Vec<T>, y: &[T], rg: &[T]) -> bool {
        let ch = self.ch;
        let n = x.len();
        let bw = ch.bandwidth;
        let inv_y: Vec<T> = y.iter().map(|&v| if v > T::zero() { v.recip() } else { T::zero() }).collect();
        let sx: Vec<T> = x.iter().map(|v| v.sqrt()).collect();
        let mut h = SymBand::zeros(n, bw);
        for j in 0..n {
            let (sj, cj) = (ch.starts[j], &ch.cols[j]);
            let ej = sj + cj.len();
            for k in j..n.min(j + bw + 1) {
                let (sk, ck) = (ch.starts[k], &ch.cols[k]);
                let lo = sj.max(sk);
                let hi = ej.min(sk + ck.len());
                let mut acc = T::zero();
                for r in lo..hi {
                    acc = acc + cj[r - sj] * ck[r - sk] * inv_y[r];
                }
                h.set(k, j, sx[j] * sx[k] * acc);
            }
            h.add_diag(j, mu / x[j]);
        }
        let Some(chol) = factor(h) else { return false };
        let rhs: Vec<T> = sx.iter().zip(rg).map(|(&s, &r)| s * r).collect();
        let a = chol.solve(&rhs);
        let b = chol.solve(&sx);
        let sa: T = sx.iter().zip(&a).map(|(&s, &v)| s * v).sum();
        let sb: T = sx.iter().zip(&b).map(|(&s, &v)| s * v).sum();
        let da = sa / sb;
        let dx: Vec<T> = (0..n).map(|j| sx[j] * (a[j] - da * b[j])).collect();
        let dec: T = rg.iter().zip(&dx).map(|(&r, &d)| r * d).sum();
        if !(dec > T::zero()) {
            return false;
        }
        let mut t = T::one();
        for j in 0..n {
            if dx[j] < T::zero() {
                t = t.min(T::lit(0.995) * x[j] / -dx[j]);
            }
        }
        let f0 = self.barrier_objective(beta, mu, x);
        let tiny = T::min_positive_value();
        loop {
            let mut xn: Vec<T> = x.iter().zip(&dx).map(|(&v, &d)| (v + t * d).max(tiny)).collect();
            let s: T = xn.iter().copied().sum();
            for v in xn.iter_mut() {
                *v = (*v / s).max(tiny);
            }
            let f = self.barrier_objective(beta, mu, &xn);
            if f >= f0 + T::lit(1e-4) * t * dec - T::lit(1e-15) * f0.abs() || t < T::lit(1e-10) {
                *x = xn;
                return true;
            }
            t = t * T::lit(0.5);
        }
    }
}

/// Cholesky with a growing diagonal ridge when rounding breaks definiteness.
fn factor<T: Scalar>(h: SymBand<T>) -> Option<super::banded::BandCholesky<T>> {
    let scale = h.max_diag();
    let mut ridge = T::epsilon() * scale;
    let mut m = h.clone();
    for _ in 0..8 {
        if let Some(c) = m.clone().cholesky() {
            return Some(c);
        }
        m = h.clone();
        for i in 0..h.dim() {
            m.add_diag(i, ridge);
        }
        ridge = ridge * T::lit(100.0);
    }
    None
}

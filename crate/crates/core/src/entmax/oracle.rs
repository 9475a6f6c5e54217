//! Exhaustive grid search over input laws on a small support, used as an
//! independent check of the solver.

use serde::{Deserialize, Serialize};

use super::channel::Channel;
use super::{EntMaxError, EntMaxProblem, Mode};
use crate::dist::{entropy_of, Pmf};
use crate::Scalar;

pub const MAX_SUPPORT_CAP: usize = 6;
const MAX_GRID_POINTS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OracleSolution<T> {
    pub mode: Mode,
    pub budget_q: T,
    pub support_cap: usize,
    pub resolution: f64,
    pub input_law: Pmf<T>,
    pub output_law: Pmf<T>,
    pub entropy_value: T,
    /// The optimum over laws on `{0..=support_cap}` exceeds `entropy_value`
    /// by at most this much (nats).
    pub lipschitz_bound: T,
    pub grid_points: u64,
}

/// Best feasible law on `{0..=support_cap}` whose entries are multiples of
/// `resolution`.
///
/// Rounding every entry above 0 of a feasible law down to the grid and moving
/// the remainder to index 0 keeps it feasible (costs are nonnegative and
/// `c_0 = 0`) and moves at most `support_cap · resolution` of mass, so the
/// output laws are within that total variation. The continuity bound
/// `|H(P) - H(Q)| ≤ t ln(m - 1) + h(t)` for total variation `t` on `m` atoms
/// then bounds the loss.
pub fn oracle_grid_search<T: Scalar>(
    problem: &EntMaxProblem<T>,
    support_cap: usize,
    resolution: f64,
) -> Result<OracleSolution<T>, EntMaxError> {
    if support_cap == 0 || support_cap > MAX_SUPPORT_CAP {
        return Err(EntMaxError::InstanceTooLarge(format!(
            "support cap {support_cap} outside 1..={MAX_SUPPORT_CAP}"
        )));
    }
    if !(1e-3..=1e-1).contains(&resolution) {
        return Err(EntMaxError::Invalid(format!("resolution {resolution} outside [1e-3, 1e-1]")));
    }
    let units = (1.0 / resolution).round() as usize;
    let points = binomial(units + support_cap, support_cap);
    if points > MAX_GRID_POINTS {
        return Err(EntMaxError::InstanceTooLarge(format!("{points:e} grid points")));
    }
    let q = problem.budget_q;
    if !(q >= T::zero()) {
        return Err(EntMaxError::Invalid(format!("budget q = {q}")));
    }
    let ch = Channel::build(&problem.service, problem.mode, support_cap);
    let mut search = Search {
        ch: &ch,
        h: T::one() / T::from_count(units),
        limit: q + T::tol(1e-12) * q.max(T::one()),
        best: T::neg_infinity(),
        best_counts: vec![0; support_cap + 1],
        counts: vec![0; support_cap + 1],
        evaluated: 0,
        scratch: vec![vec![T::zero(); ch.out_len]; support_cap + 2],
    };
    search.descend(support_cap, units, T::zero());

    let x: Vec<T> = search.best_counts.iter().map(|&k| T::from_count(k) * search.h).collect();
    let y = ch.apply(&x);
    let m = ch.out_len;
    let t = T::from_count(support_cap) * search.h;
    let lipschitz_bound = if t >= T::one() - T::one() / T::from_count(m) {
        T::from_count(m).ln()
    } else {
        t * T::from_count(m - 1).ln() + binary_entropy(t)
    };
    Ok(OracleSolution {
        mode: problem.mode,
        budget_q: q,
        support_cap,
        resolution,
        entropy_value: entropy_of(&y),
        output_law: Pmf::from_raw(y, problem.service.tail_mass()),
        input_law: Pmf::from_raw(x, T::zero()),
        lipschitz_bound,
        grid_points: search.evaluated,
    })
}

struct Search<'a, T> {
    ch: &'a Channel<T>,
    h: T,
    limit: T,
    best: T,
    best_counts: Vec<usize>,
    counts: Vec<usize>,
    evaluated: u64,
    /// `scratch[j]` holds the partial output with entries above `j` placed.
    scratch: Vec<Vec<T>>,
}

impl<T: Scalar> Search<'_, T> {
    fn descend(&mut self, j: usize, rem: usize, cost: T) {
        let (start, col) = (self.ch.starts[j], &self.ch.cols[j]);
        if j == 0 {
            self.evaluated += 1;
            let w = T::from_count(rem) * self.h;
            let mut y = self.scratch[1].clone();
            for (i, &v) in col.iter().enumerate() {
                y[start + i] = y[start + i] + w * v;
            }
            let h = entropy_of(&y);
            if h > self.best {
                self.best = h;
                self.counts[0] = rem;
                self.best_counts.clone_from(&self.counts);
            }
            return;
        }
        for k in 0..=rem {
            let c = cost + self.ch.cost[j] * T::from_count(k) * self.h;
            if c > self.limit {
                break;
            }
            let w = T::from_count(k) * self.h;
            let (lower, upper) = self.scratch.split_at_mut(j + 1);
            let dst = &mut lower[j];
            dst.clone_from(&upper[0]);
            for (i, &v) in col.iter().enumerate() {
                dst[start + i] = dst[start + i] + w * v;
            }
            self.counts[j] = k;
            self.descend(j - 1, rem - k, c);
        }
        self.counts[j] = 0;
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binary_entropy<T: Scalar>(t: T) -> T {
    if t <= T::zero() || t >= T::one() {
        return T::zero();
    }
    -t * t.ln() - (T::one() - t) * (T::one() - t).ln()
}

//! Sparse column representation of the input-to-output map of either program.

use super::Mode;
use crate::dist::{clip_column, convolve_slices, Pmf};
use crate::Scalar;

/// Output law `y = K x` for an input law `x` on `{0..=n}`. Column `j` is the
/// law of `W(j) + S` with `W(j) = j` (full feedback) or `(j - T)+`
/// (generalized feedback), stored from its first nonzero row.
#[derive(Debug, Clone)]
pub(crate) struct Channel<T> {
    pub starts: Vec<usize>,
    pub cols: Vec<Vec<T>>,
    /// `E[W(j)]`.
    pub cost: Vec<T>,
    /// Column sums (`1 - tail(S)`).
    pub colsum: Vec<T>,
    pub out_len: usize,
    /// Largest `k - j` for which columns `j < k` share a row.
    pub bandwidth: usize,
}

impl<T: Scalar> Channel<T> {
    pub fn build(service: &Pmf<T>, mode: Mode, n: usize) -> Self {
        let s = service.probs();
        let t = match mode {
            Mode::Full => Pmf::point(0),
            Mode::GFeedback { tau } => service.threshold_transform(tau as usize),
        };
        let mut starts = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n + 1);
        let mut cost = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let m = clip_column(&t, j);
            cost.push(
                m.iter()
                    .enumerate()
                    .map(|(k, &v)| T::from_count(k) * v)
                    .sum(),
            );
            let lo = m.iter().position(|&v| v > T::zero()).unwrap_or(0);
            let mut col = convolve_slices(&m[lo..], s);
            let lead = col.iter().position(|&v| v > T::zero()).unwrap_or(0);
            col.drain(..lead);
            while col.len() > 1 && col[col.len() - 1] <= T::zero() {
                col.pop();
            }
            starts.push(lo + lead);
            cols.push(col);
        }
        let colsum = cols.iter().map(|c| c.iter().copied().sum()).collect();
        let mut bandwidth = 0;
        let mut k = 0;
        for j in 0..=n {
            let end = starts[j] + cols[j].len();
            k = k.max(j);
            while k < n && starts[k + 1] < end {
                k += 1;
            }
            bandwidth = bandwidth.max(k - j);
        }
        Channel { starts, cols, cost, colsum, out_len: n + s.len(), bandwidth }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.out_len];
        for (j, col) in self.cols.iter().enumerate() {
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            let s = self.starts[j];
            for (i, &v) in col.iter().enumerate() {
                y[s + i] = y[s + i] + v * xj;
            }
        }
        y
    }

    pub fn mean_cost(&self, x: &[T]) -> T {
        self.cost.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// `D_j = -Σ_n K_nj ln y_n`; `+∞` when a row reached by column `j` has
    /// zero output mass.
    pub fn log_scores(&self, logy: &[T]) -> Vec<T> {
        self.cols
            .iter()
            .zip(&self.starts)
            .map(|(col, &s)| {
                let mut d = T::zero();
                for (i, &v) in col.iter().enumerate() {
                    if v > T::zero() {
                        d = d - v * logy[s + i];
                    }
                }
                d
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_columns_are_shifted_service() {
        let s = Pmf::<f64>::new(vec![0.0, 0.5, 0.5]).unwrap();
        let ch = Channel::build(&s, Mode::Full, 4);
        assert_eq!(ch.starts, vec![1, 2, 3, 4, 5]);
        assert_eq!(ch.cols[2], vec![0.5, 0.5]);
        assert_eq!(ch.cost, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ch.bandwidth, 1);
    }

    #[test]
    fn gfeedback_columns_match_composition() {
        let s = Pmf::<f64>::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let ch = Channel::build(&s, Mode::GFeedback { tau: 1 }, 6);
        let t = s.threshold_transform(1);
        for j in 0..=6 {
            let want = Pmf::point(j).clip_subtract(&t).convolve(&s);
            let mut e = vec![0.0; ch.out_len];
            e[ch.starts[j]..ch.starts[j] + ch.cols[j].len()].copy_from_slice(&ch.cols[j]);
            for (n, v) in e.iter().enumerate() {
                assert!((v - want.get(n)).abs() < 1e-15);
            }
            let c = Pmf::point(j).clip_subtract(&t).mean_value();
            assert!((ch.cost[j] - c).abs() < 1e-15);
        }
        // columns j and j+k overlap iff k ≤ len(T) + len(S) - 2
        assert_eq!(ch.bandwidth, 3 + 4 - 2);
    }
}

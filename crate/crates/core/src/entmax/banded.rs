//! Symmetric positive-definite banded matrices and their Cholesky factors.

use crate::Scalar;

/// Lower band of a symmetric matrix: `rows[i][d]` holds entry `(i, i - d)`.
#[derive(Debug, Clone)]
pub(crate) struct SymBand<T> {
    n: usize,
    bw: usize,
    rows: Vec<T>,
}

impl<T: Scalar> SymBand<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand { n, bw, rows: vec![T::zero(); n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, d: usize) -> usize {
        i * (self.bw + 1) + d
    }

    /// Entry `(i, j)` with `j ≤ i` and `i - j ≤ bw`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, i - j);
        self.rows[k] = v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return T::zero();
        }
        self.rows[self.idx(i, i - j)]
    }

    pub fn add_diag(&mut self, i: usize, v: T) {
        let k = self.idx(i, 0);
        self.rows[k] = self.rows[k] + v;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_diag(&self) -> T {
        (0..self.n).map(|i| self.rows[self.idx(i, 0)]).fold(T::zero(), T::max)
    }

    /// In-place Cholesky `A = L Lᵀ`; `None` if a pivot is not positive.
    pub fn cholesky(mut self) -> Option<BandCholesky<T>> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = self.rows[self.idx(i, i - j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s = s - self.rows[self.idx(i, i - k)] * self.rows[self.idx(j, j - k)];
                }
                let v = if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    s.sqrt()
                } else {
                    s / self.rows[self.idx(j, 0)]
                };
                let k = self.idx(i, i - j);
                self.rows[k] = v;
            }
        }
        Some(BandCholesky { l: self })
    }
}

pub(crate) struct BandCholesky<T> {
    l: SymBand<T>,
}

impl<T: Scalar> BandCholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let l = &self.l;
        let (n, bw) = (l.n, l.bw);
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in i.saturating_sub(bw)..i {
                s = s - l.rows[l.idx(i, i - k)] * z[k];
            }
            z[i] = s / l.rows[l.idx(i, 0)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n.min(i + bw + 1) {
                s = s - l.rows[l.idx(k, k - i)] * z[k];
            }
            z[i] = s / l.rows[l.idx(i, 0)];
        }
        z
    }
}

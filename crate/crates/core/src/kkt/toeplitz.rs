//! Lower-triangular Toeplitz systems `A z = b` with `A[i][j] = q_{i-j}`,
//! unknowns `z_k = x_k - (1 + γ)` and `b_k = δ Σ_{j=1}^k j q_{k-j}`.

use serde::{Deserialize, Serialize};

use super::KktError;
use crate::dist::Pmf;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ToeplitzSystem<T> {
    /// First column `q_0, ..., q_{n-1}`.
    pub q: Vec<T>,
    pub n: usize,
    pub delta: T,
    pub rhs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NullVerdict<T> {
    /// Forward substitution on `A z = 0` produced exactly `z = 0` with every
    /// pivot nonzero.
    pub only_zero_solution: bool,
    /// Common diagonal entry `q_0`, which is also every eigenvalue.
    pub diagonal: T,
    /// Smallest singular value, for comparison with the diagonal.
    pub sigma_min: T,
}

pub fn toeplitz_build<T: Scalar>(q: &Pmf<T>, n: usize, delta: T) -> Result<ToeplitzSystem<T>, KktError> {
    if n == 0 {
        return Err(KktError::EmptySystem);
    }
    let q: Vec<T> = (0..n).map(|i| q.get(i)).collect();
    let rhs = (1..=n)
        .map(|k| delta * (1..=k).map(|j| T::from_count(j) * q[k - j]).sum::<T>())
        .collect();
    Ok(ToeplitzSystem { q, n, delta, rhs })
}

impl<T: Scalar> ToeplitzSystem<T> {
    pub fn entry(&self, i: usize, j: usize) -> T {
        if i >= j {
            self.q[i - j]
        } else {
            T::zero()
        }
    }

    pub fn matrix(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }

    pub fn apply(&self, z: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..=i).map(|j| self.q[i - j] * z[j]).sum())
            .collect()
    }

    /// Forward substitution.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, KktError> {
        let q0 = self.q[0];
        if q0 == T::zero() {
            return Err(KktError::ZeroQ0 { shift: self.q.iter().position(|&v| v > T::zero()).unwrap_or(self.n) });
        }
        let mut z = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let s: T = (0..i).map(|j| self.q[i - j] * z[j]).sum();
            z.push((b[i] - s) / q0);
        }
        Ok(z)
    }

    /// Solves `A z = rhs`.
    pub fn solve_rhs(&self) -> Result<Vec<T>, KktError> {
        self.solve(&self.rhs)
    }

    /// `σ_min(A)` by one-sided Jacobi rotations on the columns of `A`.
    /// Unlike inverse iteration this does not slow down when the two smallest
    /// singular values are close.
    pub fn sigma_min(&self) -> Result<T, KktError> {
        if self.q[0] == T::zero() {
            return Err(KktError::ZeroQ0 { shift: self.q.iter().position(|&v| v > T::zero()).unwrap_or(self.n) });
        }
        let n = self.n;
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..n).map(|i| self.entry(i, j)).collect()).collect();
        let eps = T::epsilon();
        for _ in 0..80 {
            let mut rotated = false;
            for i in 0..n {
                for j in i + 1..n {
                    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
                    let (alpha, beta, gamma) = (dot(&cols[i], &cols[i]), dot(&cols[j], &cols[j]), dot(&cols[i], &cols[j]));
                    if gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = (T::one() + t * t).sqrt().recip();
                    let s = c * t;
                    let (lo, hi) = cols.split_at_mut(j);
                    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                        let (a, b) = (*x, *y);
                        *x = c * a - s * b;
                        *y = s * a + c * b;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        Ok(cols
            .iter()
            .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
            .fold(T::infinity(), T::min))
    }
}

/// Whether `A z = 0` forces `z = 0`. Forward substitution settles this
/// exactly: each pivot is `q_0 ≠ 0` and each step divides a zero residual.
pub fn toeplitz_homogeneous_null<T: Scalar>(system: &ToeplitzSystem<T>) -> Result<NullVerdict<T>, KktError> {
    let zero = vec![T::zero(); system.n];
    let z = system.solve(&zero)?;
    Ok(NullVerdict {
        only_zero_solution: z.iter().all(|&v| v == T::zero()),
        diagonal: system.q[0],
        sigma_min: system.sigma_min()?,
    })
}

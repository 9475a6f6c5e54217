//! The order-one recursion `(1 - q) x_n + q x_{n-1} = 1 + γ + δ (n - q)`
//! satisfied by `x_n = E_S[-ln w_{n+S}]` when `τ = ess sup(S) - 1` and `S`
//! takes two adjacent values.

use super::KktError;
use crate::Scalar;

/// `x_n = 1 + γ + nδ + (q/(q-1))ⁿ (1 + γ)` for `n = 0..=n_max`: the
/// particular solution plus the homogeneous one with amplitude `1 + γ`.
pub fn recursion_closed_form<T: Scalar>(q: T, gamma: T, delta: T, n_max: usize) -> Result<Vec<T>, KktError> {
    recursion_with_amplitude(q, gamma, delta, T::one() + gamma, n_max)
}

/// Particular solution `1 + γ + nδ` plus `amplitude · (q/(q-1))ⁿ`. Every
/// amplitude solves the recursion for `n ≥ 1`; the stationarity condition at
/// `n = 0` (`x_0 = 1 + γ`) singles out amplitude 0.
pub fn recursion_with_amplitude<T: Scalar>(
    q: T,
    gamma: T,
    delta: T,
    amplitude: T,
    n_max: usize,
) -> Result<Vec<T>, KktError> {
    if !(q > T::zero() && q < T::one()) {
        return Err(KktError::BadQ(q.as_f64()));
    }
    let ratio = q / (q - T::one());
    let mut pow = T::one();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        out.push(T::one() + gamma + T::from_count(n) * delta + pow * amplitude);
        pow = pow * ratio;
    }
    Ok(out)
}

/// `(1 - q) x_n + q x_{n-1} - (1 + γ + δ (n - q))` for `n = 1..len(x)`.
pub fn receq_residuals<T: Scalar>(q: T, gamma: T, delta: T, x: &[T]) -> Vec<T> {
    (1..x.len())
        .map(|n| {
            (T::one() - q) * x[n] + q * x[n - 1] - (T::one() + gamma + delta * (T::from_count(n) - q))
        })
        .collect()
}

/// `x_n - (1 + γ + nδ)`.
pub fn deviations<T: Scalar>(x: &[T], gamma: T, delta: T) -> Vec<T> {
    x.iter()
        .enumerate()
        .map(|(n, &v)| v - (T::one() + gamma + T::from_count(n) * delta))
        .collect()
}

/// True when consecutive entries with magnitude above `tol` have opposite
/// signs.
pub fn alternates_in_sign<T: Scalar>(d: &[T], tol: T) -> bool {
    let mut prev: Option<bool> = None;
    for &v in d {
        if v.abs() <= tol {
            continue;
        }
        let pos = v > T::zero();
        if prev == Some(pos) {
            return false;
        }
        prev = Some(pos);
    }
    true
}

/// Sign alternation restricted to pairs `(n - 1, n)` with `n` in `active`,
/// where stationarity turns the recursion into an equality. Pairs with a
/// deviation of magnitude at most `tol` are skipped.
pub fn linked_deviations_alternate<T: Scalar>(d: &[T], active: &[usize], tol: T) -> bool {
    active
        .iter()
        .filter(|&&n| n >= 1 && n < d.len())
        .all(|&n| {
            let (a, b) = (d[n - 1], d[n]);
            a.abs() <= tol || b.abs() <= tol || (a > T::zero()) != (b > T::zero())
        })
}

/// The homogeneous term `(q/(q-1))ⁿ (1 + γ)` alone, free of the rounding
/// incurred by subtracting the particular solution from `x_n`.
pub fn recursion_deviation<T: Scalar>(q: T, gamma: T, n_max: usize) -> Result<Vec<T>, KktError> {
    recursion_with_amplitude(q, -T::one(), T::zero(), T::one() + gamma, n_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_gives_alternating_deviation() {
        let g = 0.2f64;
        let d = recursion_deviation(0.5, g, 16).unwrap();
        for (n, v) in d.iter().enumerate() {
            let want = if n % 2 == 0 { 1.0 + g } else { -(1.0 + g) };
            assert_eq!(*v, want);
        }
        assert!(alternates_in_sign(&d, 0.0));
        let x = recursion_closed_form(0.5, g, 0.1, 16).unwrap();
        for (a, b) in deviations(&x, g, 0.1).iter().zip(&d) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn vanishing_terms() {
        assert!(recursion_closed_form(0.3, -1.0, 0.0, 10).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_unrolled_value() {
        let x = recursion_closed_form(1.0f64 / 3.0, 0.0, 1.0, 2).unwrap();
        assert!((x[2] - 3.25).abs() < 1e-15);
        let r = receq_residuals(1.0 / 3.0, 0.0, 1.0, &x);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_q() {
        assert!(matches!(recursion_closed_form(1.0, 0.0, 0.0, 3), Err(KktError::BadQ(_))));
        assert!(matches!(recursion_closed_form(0.0, 0.0, 0.0, 3), Err(KktError::BadQ(_))));
    }

    #[test]
    fn alternation_detector() {
        assert!(!alternates_in_sign(&[1.0, 0.0, 2.0], 1e-9));
        assert!(alternates_in_sign(&[1.0, 0.0, -2.0, 1e-12, 3.0], 1e-9));
    }
}

//! Exact rank of integer matrices by fraction-free (Bareiss) elimination.
//!
//! Elimination runs in checked 64-bit arithmetic first and restarts with
//! arbitrary-precision integers as soon as an intermediate value overflows.
//! Every intermediate entry is a minor of the input, so the divisions by the
//! previous pivot are exact.

use num_bigint::BigInt;
use num_traits::Zero;

trait Scalar: Clone + Sized {
    fn is_zero(&self) -> bool;
    /// `(a * b - c * d) / e`, or `None` on overflow.
    fn cross_div(a: &Self, b: &Self, c: &Self, d: &Self, e: &Self) -> Option<Self>;
    fn one() -> Self;
    fn zero() -> Self;
}

impl Scalar for i64 {
    fn is_zero(&self) -> bool {
        *self == 0
    }

    fn cross_div(a: &i64, b: &i64, c: &i64, d: &i64, e: &i64) -> Option<i64> {
        let num = a.checked_mul(*b)?.checked_sub(c.checked_mul(*d)?)?;
        debug_assert_eq!(num % e, 0, "Bareiss division must be exact");
        num.checked_div(*e)
    }

    fn one() -> i64 {
        1
    }

    fn zero() -> i64 {
        0
    }
}

impl Scalar for BigInt {
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn cross_div(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt, e: &BigInt) -> Option<BigInt> {
        let num = a * b - c * d;
        debug_assert!(Zero::is_zero(&(&num % e)), "Bareiss division must be exact");
        Some(num / e)
    }

    fn one() -> BigInt {
        BigInt::from(1)
    }

    fn zero() -> BigInt {
        BigInt::from(0)
    }
}

fn bareiss_rank<T: Scalar>(mut m: Vec<Vec<T>>) -> Option<usize> {
    let n_rows = m.len();
    let n_cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev = T::one();
    for col in 0..n_cols {
        if rank == n_rows {
            break;
        }
        let Some(p) = (rank..n_rows).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(rank, p);
        let (head, tail) = m.split_at_mut(rank + 1);
        let pivot_row = &head[rank];
        let pivot = &pivot_row[col];
        for row in tail.iter_mut() {
            for j in col + 1..n_cols {
                row[j] = T::cross_div(pivot, &row[j], &row[col], &pivot_row[j], &prev)?;
            }
            row[col] = T::zero();
        }
        prev = pivot.clone();
        rank += 1;
    }
    Some(rank)
}

/// Rank over the rationals of the matrix with the given rows.
///
/// Panics if the rows have different lengths.
pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    if let Some(first) = rows.first() {
        assert!(rows.iter().all(|r| r.len() == first.len()), "ragged matrix");
    }
    match bareiss_rank(rows.to_vec()) {
        Some(r) => r,
        None => {
            log::debug!("integer rank: 64-bit overflow, switching to big integers");
            let big = rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
            bareiss_rank::<BigInt>(big).expect("big integers do not overflow")
        }
    }
}

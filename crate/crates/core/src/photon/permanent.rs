use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, ZERO};

/// Matrix permanent by Ryser's inclusion–exclusion formula, visiting column
/// subsets in Gray-code order: `O(2^k · k)` for a `k x k` matrix.
pub fn permanent(m: &ComplexMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::dims("permanent input", (m.rows(), m.rows()), m.shape()));
    }
    Ok(permanent_with(m.rows(), |i, j| m[(i, j)]))
}

/// Permanent of the `k x k` matrix with entries `entry(i, j)`.
pub(crate) fn permanent_with(k: usize, entry: impl Fn(usize, usize) -> Complex64) -> Complex64 {
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    assert!(k < 31, "permanent of a {k}x{k} matrix is out of reach");
    let a: Vec<Complex64> = (0..k * k).map(|idx| entry(idx / k, idx % k)).collect();
    let mut row_sums = vec![ZERO; k];
    let mut total = ZERO;
    for step in 1u32..(1 << k) {
        // column whose membership flips between consecutive Gray codes
        let col = step.trailing_zeros() as usize;
        let next = step ^ (step >> 1);
        let sign = if next & (1 << col) != 0 { 1.0 } else { -1.0 };
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * a[i * k + col];
        }
        let prod: Complex64 = row_sums.iter().product();
        if (k - next.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}

use num_complex::Complex64;

use crate::matrix::ComplexMatrix;

/// `⟨0| B(ξ_a1)…B(ξ_am) B*(ξ_b1)…B*(ξ_bm) |0⟩` by repeatedly commuting the
/// innermost annihilator to the right with `[B(f), B*(g)] = ⟨f|g⟩`.
///
/// Indices are 0-based rows/columns of `gram`. Exponential in `m`; meant for
/// cross-checking the permanent-based normalization on small inputs.
pub fn vacuum_expectation(gram: &ComplexMatrix, bra: &[usize], ket: &[usize]) -> Complex64 {
    if bra.len() != ket.len() {
        return Complex64::new(0.0, 0.0);
    }
    let Some((&a, rest)) = bra.split_last() else {
        return Complex64::new(1.0, 0.0);
    };
    // B(ξ_a) acting on B*(b_1)…B*(b_m)|0⟩ contracts with each creator in turn.
    let mut total = Complex64::new(0.0, 0.0);
    for (j, &b) in ket.iter().enumerate() {
        let g = gram[(a, b)];
        if g == Complex64::new(0.0, 0.0) {
            continue;
        }
        let remaining: Vec<usize> = ket.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &x)| x).collect();
        total += g * vacuum_expectation(gram, rest, &remaining);
    }
    total
}

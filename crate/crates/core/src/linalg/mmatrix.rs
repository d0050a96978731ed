use super::CsrMatrix;

/// Outcome of the sufficient-condition check for a column M-matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixReport {
    /// All off-diagonal entries are ≤ 0.
    pub offdiag_sign_ok: bool,
    /// All diagonal entries are > 0.
    pub diagonal_positive_ok: bool,
    /// Every column sum is ≥ 0 (weak column diagonal dominance).
    pub column_weak_dominance_ok: bool,
    /// At least one column sum is > 0.
    pub strict_column_exists: bool,
    /// Number of strictly dominant columns.
    pub strict_column_count: usize,
    /// Offending `(row, col, value)` entries: positive off-diagonals,
    /// nonpositive diagonals, and negative column sums (reported at the diagonal).
    pub violations: Vec<(usize, usize, f64)>,
    /// Irreducibility is not checked; the verdict certifies the M-matrix
    /// property only together with irreducibility or strict dominance in
    /// every column.
    pub irreducibility_unchecked: bool,
}

impl MMatrixReport {
    pub fn verdict(&self) -> bool {
        self.offdiag_sign_ok && self.diagonal_positive_ok && self.column_weak_dominance_ok && self.strict_column_exists
    }
}

/// Checks nonpositive off-diagonals, positive diagonals, nonnegative column
/// sums and at least one positive column sum. Column sums are compared with a
/// relative slack of `1e-12` times the largest magnitude in the column.
pub fn column_mmatrix_check(a: &CsrMatrix) -> MMatrixReport {
    assert!(a.is_square(), "column M-matrix check needs a square matrix");
    let n = a.nrows();
    let mut offdiag_sign_ok = true;
    let mut diagonal_positive_ok = true;
    let mut violations = Vec::new();
    let mut sums = vec![0.0; n];
    let mut scale = vec![0.0f64; n];
    let mut diag = vec![0.0; n];
    for r in 0..n {
        for (c, v) in a.row(r) {
            sums[c] += v;
            scale[c] = scale[c].max(v.abs());
            if r == c {
                diag[c] = v;
            } else if v > 0.0 {
                offdiag_sign_ok = false;
                violations.push((r, c, v));
            }
        }
    }
    for (c, &d) in diag.iter().enumerate() {
        if d <= 0.0 {
            diagonal_positive_ok = false;
            violations.push((c, c, d));
        }
    }
    let mut column_weak_dominance_ok = true;
    let mut strict_column_count = 0;
    for c in 0..n {
        let slack = 1e-12 * scale[c];
        if sums[c] < -slack {
            column_weak_dominance_ok = false;
            violations.push((c, c, sums[c]));
        } else if sums[c] > slack {
            strict_column_count += 1;
        }
    }
    MMatrixReport {
        offdiag_sign_ok,
        diagonal_positive_ok,
        column_weak_dominance_ok,
        strict_column_exists: strict_column_count > 0,
        strict_column_count,
        violations,
        irreducibility_unchecked: strict_column_count < n,
    }
}

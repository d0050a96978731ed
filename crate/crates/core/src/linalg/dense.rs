use super::{CsrMatrix, LinalgError};

/// Row-major dense square matrix, used for small fallback solves and for
/// inverse-positivity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_csr(a: &CsrMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut data = vec![0.0; n * n];
        for (r, c, v) in a.triplets() {
            data[r * n + c] = v;
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    /// LU factorization with partial pivoting, in place.
    fn factor(mut self) -> Result<LuFactors, LinalgError> {
        let n = self.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..n {
            let mut piv = col;
            let mut best = self.data[col * n + col].abs();
            for r in col + 1..n {
                let v = self.data[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= f64::EPSILON * scale * n as f64 || best == 0.0 {
                return Err(LinalgError::Singular { col, pivot: best });
            }
            if piv != col {
                for c in 0..n {
                    self.data.swap(col * n + c, piv * n + c);
                }
                perm.swap(col, piv);
            }
            let d = self.data[col * n + col];
            for r in col + 1..n {
                let f = self.data[r * n + col] / d;
                if f == 0.0 {
                    continue;
                }
                self.data[r * n + col] = f;
                for c in col + 1..n {
                    self.data[r * n + c] -= f * self.data[col * n + c];
                }
            }
        }
        Ok(LuFactors { lu: self, perm })
    }
}

struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactors {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let a = &self.lu.data;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= a[r * n + c] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc -= a[r * n + c] * x[c];
            }
            x[r] = acc / a[r * n + r];
        }
        x
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    Ok(DenseMatrix::from_csr(a)?.factor()?.solve(b))
}

/// Dense inverse, column by column.
pub fn dense_inverse(a: &CsrMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.nrows();
    let lu = DenseMatrix::from_csr(a)?.factor()?;
    let mut data = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = lu.solve(&e);
        e[c] = 0.0;
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
    Ok(DenseMatrix { n, data })
}

use std::fmt::Write as _;

use super::LinalgError;

/// Square or rectangular matrix in compressed-row storage. Column indices are
/// strictly increasing within each row; explicit zeros may be stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are
    /// summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::OutOfBounds {
                    row: r,
                    col: c,
                    rows: nrows,
                    cols: ncols,
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1, k));
        let mut row_offsets = vec![0; nrows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Raw constructor; validates the structural invariants.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if row_offsets.len() != nrows + 1 {
            return Err(LinalgError::DimensionMismatch {
                expected: nrows + 1,
                found: row_offsets.len(),
            });
        }
        if col_indices.len() != values.len() || row_offsets[nrows] != values.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: row_offsets[nrows],
                found: values.len(),
            });
        }
        for r in 0..nrows {
            let (s, e) = (row_offsets[r], row_offsets[r + 1]);
            assert!(s <= e, "row offsets must be monotone");
            for k in s..e {
                if col_indices[k] >= ncols {
                    return Err(LinalgError::OutOfBounds {
                        row: r,
                        col: col_indices[k],
                        rows: nrows,
                        cols: ncols,
                    });
                }
                assert!(
                    k == s || col_indices[k - 1] < col_indices[k],
                    "columns must be strictly increasing"
                );
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    /// Copy of the structure with all stored values set to zero.
    pub fn zeroed_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Position of `(r, c)` in the value array, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let s = self.row_offsets[r];
        let e = self.row_offsets[r + 1];
        self.col_indices[s..e].binary_search(&c).ok().map(|k| s + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.ncols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                col_indices[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// `self + scale · other`; both operands must share dimensions.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Result<Self, LinalgError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.nrows,
                found: other.nrows,
            });
        }
        if self.row_offsets == other.row_offsets && self.col_indices == other.col_indices {
            let mut out = self.clone();
            for (a, b) in out.values.iter_mut().zip(&other.values) {
                *a += scale * b;
            }
            return Ok(out);
        }
        let mut triplets = self.triplets();
        triplets.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, scale * v)));
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.ncols];
        for (&c, &v) in self.col_indices.iter().zip(&self.values) {
            s[c] += v;
        }
        s
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for (r, c, v) in self.triplets() {
            d = d.max((v - other.get(r, c)).abs());
        }
        for (r, c, v) in other.triplets() {
            d = d.max((v - self.get(r, c)).abs());
        }
        d
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    /// `B[i][j] = A[perm[i]][perm[j]]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<Self, LinalgError> {
        if !self.is_square() || perm.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.nrows,
                found: perm.len(),
            });
        }
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let triplets: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (inverse[r], inverse[c], v))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Submatrix on the rows and columns listed in `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.ncols];
        for (i, &k) in keep.iter().enumerate() {
            map[k] = i;
        }
        let mut triplets = Vec::new();
        for (i, &r) in keep.iter().enumerate() {
            for (c, v) in self.row(r) {
                if map[c] != usize::MAX {
                    triplets.push((i, map[c], v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), &triplets).expect("indices in range")
    }

    /// Imposes `x[k] = values[k]` for every `k` with `constrained[k]`:
    /// constrained rows become identity rows with the prescribed value on the
    /// right-hand side, and constrained columns are moved to the right-hand
    /// side of the free rows. Symmetry of the free block is preserved.
    pub fn apply_dirichlet(
        &mut self,
        rhs: &mut [f64],
        constrained: &[bool],
        values: &[f64],
    ) -> Result<(), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.nrows,
                cols: self.ncols,
            });
        }
        for len in [rhs.len(), constrained.len(), values.len()] {
            if len != self.nrows {
                return Err(LinalgError::DimensionMismatch {
                    expected: self.nrows,
                    found: len,
                });
            }
        }
        for r in 0..self.nrows {
            let range = self.row_offsets[r]..self.row_offsets[r + 1];
            if constrained[r] {
                let mut has_diag = false;
                for k in range {
                    if self.col_indices[k] == r {
                        self.values[k] = 1.0;
                        has_diag = true;
                    } else {
                        self.values[k] = 0.0;
                    }
                }
                assert!(has_diag, "constrained row {r} lacks a stored diagonal");
                rhs[r] = values[r];
            } else {
                for k in range {
                    let c = self.col_indices[k];
                    if constrained[c] {
                        rhs[r] -= self.values[k] * values[c];
                        self.values[k] = 0.0;
                    }
                }
            }
        }
        Ok(())
    }

    /// Coordinate text dump, one zero-based `row col value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for (r, c, v) in self.triplets() {
            let _ = writeln!(out, "{r} {c} {v}");
        }
        out
    }
}

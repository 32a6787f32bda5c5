//! Compressed sparse row operators.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::abs;

/// An assembled sparse matrix. Entries are stored row-compressed with
/// strictly increasing column indices per row, so there are no duplicate
/// `(row, col)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Assemble from `(row, col, value)` triplets, summing duplicates.
    /// Entries that sum to exactly zero are kept (structural nonzeros).
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut trip: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &trip {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of range {rows}x{cols}");
        }
        // Stable sort keeps duplicate summation order deterministic.
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator { rows, cols, row_ptr, col_idx, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseOperator {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `self^T x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                out[c] += v * xr;
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseOperator {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, o: &SparseOperator) -> SparseOperator {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self::from_triplets(self.rows, self.cols, self.triplets().chain(o.triplets()))
    }

    /// Sparse product `self * o`.
    pub fn mul(&self, o: &SparseOperator) -> SparseOperator {
        assert_eq!(self.cols, o.rows);
        let mut acc = vec![0.0; o.cols];
        let mut mark = vec![usize::MAX; o.cols];
        let mut touched = Vec::new();
        let mut trip = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            let (ac, av) = self.row(r);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = o.row(k);
                for (&c, &b) in bc.iter().zip(bv) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            trip.extend(touched.iter().map(|&c| (r, c, acc[c])));
        }
        Self::from_triplets(self.rows, o.cols, trip)
    }

    /// `self^T * self`.
    pub fn gram(&self) -> SparseOperator {
        self.transpose().mul(self)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(abs(*v)))
    }

    /// Largest entrywise difference `|self - o|`, including structural
    /// entries present in only one of the two.
    pub fn max_abs_diff(&self, o: &SparseOperator) -> f64 {
        self.add(&o.scaled(-1.0)).max_abs()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.max_abs_diff(&self.transpose()) <= tol
    }

    /// Select rows `rs` and columns `cs` (each given as old indices, in the
    /// order they should appear).
    pub fn submatrix(&self, rs: &[usize], cs: &[usize]) -> SparseOperator {
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, &old) in cs.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trip = Vec::new();
        for (nr, &r) in rs.iter().enumerate() {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                if col_map[c] != usize::MAX {
                    trip.push((nr, col_map[c], v));
                }
            }
        }
        Self::from_triplets(rs.len(), cs.len(), trip)
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// Stack `self` on top of `o`.
    pub fn vstack(&self, o: &SparseOperator) -> SparseOperator {
        assert_eq!(self.cols, o.cols);
        let off = self.rows;
        Self::from_triplets(
            self.rows + o.rows,
            self.cols,
            self.triplets().chain(o.triplets().map(|(r, c, v)| (r + off, c, v))),
        )
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

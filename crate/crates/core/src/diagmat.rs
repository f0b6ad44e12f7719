//! Square matrices stored as a sorted set of nonzero diagonals.
//!
//! Each stored diagonal keeps exactly `N - |d|` values with no padding.
//! `values[r]` holds the entry at row `r + max(0, -d)`, column `row + d`.
//! Every other module relies on this indexing convention.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Scalar = Complex64;

pub const ZERO: Scalar = Complex64::new(0.0, 0.0);
pub const ONE: Scalar = Complex64::new(1.0, 0.0);

/// Number of entries on diagonal `d` of an `n x n` matrix.
pub fn diag_length(n: usize, d: isize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Domain("matrix dimension must be positive".into()));
    }
    if d.unsigned_abs() >= n {
        return Err(Error::Domain(format!(
            "offset {d} out of range for dimension {n}"
        )));
    }
    Ok(n - d.unsigned_abs())
}

/// First row touched by diagonal `d`.
#[inline]
pub fn first_row(d: isize) -> usize {
    if d < 0 {
        d.unsigned_abs()
    } else {
        0
    }
}

/// Row-major dense square matrix. Used for conversions and as the
/// verification oracle's working representation.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Scalar>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Scalar>]) -> Result<Self> {
        let n = rows.len();
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(Error::Shape(format!(
                "row {r} has {} entries, expected {n} for a square matrix",
                row.len()
            )));
        }
        Ok(DenseMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Scalar] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||self - other||_F / max(||other||_F, tiny)`.
    pub fn rel_frobenius_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let diff: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = other.frobenius_norm();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    pub fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = Scalar;
    fn index(&self, (i, j): (usize, usize)) -> &Scalar {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Scalar {
        &mut self.data[i * self.n + j]
    }
}

/// One stored diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagonal {
    pub offset: isize,
    pub values: Vec<Scalar>,
}

impl Diagonal {
    pub fn first_row(&self) -> usize {
        first_row(self.offset)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `(row, col, value)` for every stored entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Scalar)> + '_ {
        let r0 = self.first_row();
        let d = self.offset;
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (r0 + k, (r0 + k).wrapping_add_signed(d), *v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagMatrix {
    dim: usize,
    diagonals: Vec<Diagonal>,
}

impl DiagMatrix {
    /// Validates offsets, lengths, ordering and finiteness.
    pub fn new(dim: usize, diagonals: Vec<Diagonal>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("matrix dimension must be positive".into()));
        }
        for (k, diag) in diagonals.iter().enumerate() {
            let len = diag_length(dim, diag.offset)?;
            if diag.values.len() != len {
                return Err(Error::Shape(format!(
                    "diagonal {} has {} values, expected {len}",
                    diag.offset,
                    diag.values.len()
                )));
            }
            if k > 0 && diagonals[k - 1].offset >= diag.offset {
                return Err(Error::Domain(
                    "diagonal offsets must be strictly increasing".into(),
                ));
            }
            if diag.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Domain(format!(
                    "diagonal {} contains a non-finite value",
                    diag.offset
                )));
            }
        }
        Ok(DiagMatrix { dim, diagonals })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        DiagMatrix {
            dim,
            diagonals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        DiagMatrix {
            dim,
            diagonals: vec![Diagonal {
                offset: 0,
                values: vec![ONE; dim],
            }],
        }
    }

    pub fn from_dense(dense: &DenseMatrix) -> Result<Self> {
        let n = dense.dim();
        if n == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        let mut diagonals = Vec::new();
        for d in -(n as isize - 1)..=(n as isize - 1) {
            let r0 = first_row(d);
            let len = n - d.unsigned_abs();
            let values: Vec<Scalar> = (0..len)
                .map(|k| dense[(r0 + k, (r0 + k).wrapping_add_signed(d))])
                .collect();
            if values.iter().any(|v| *v != ZERO) {
                diagonals.push(Diagonal { offset: d, values });
            }
        }
        DiagMatrix::new(n, diagonals)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut dense = DenseMatrix::zeros(self.dim);
        for diag in &self.diagonals {
            for (i, j, v) in diag.entries() {
                dense[(i, j)] = v;
            }
        }
        dense
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonals(&self) -> &[Diagonal] {
        &self.diagonals
    }

    pub fn into_diagonals(self) -> Vec<Diagonal> {
        self.diagonals
    }

    pub fn offsets(&self) -> Vec<isize> {
        self.diagonals.iter().map(|d| d.offset).collect()
    }

    pub fn diagonal(&self, offset: isize) -> Option<&Diagonal> {
        self.diagonals
            .binary_search_by_key(&offset, |d| d.offset)
            .ok()
            .map(|k| &self.diagonals[k])
    }

    pub fn get(&self, i: usize, j: usize) -> Result<Scalar> {
        if i >= self.dim || j >= self.dim {
            return Err(Error::Domain(format!(
                "index ({i}, {j}) out of range for dimension {}",
                self.dim
            )));
        }
        let d = j as isize - i as isize;
        Ok(self
            .diagonal(d)
            .map(|diag| diag.values[i - first_row(d)])
            .unwrap_or(ZERO))
    }

    /// Number of stored diagonals (NNZD).
    pub fn nnzd(&self) -> usize {
        self.diagonals.len()
    }

    /// Number of nonzero entries (NNZE).
    pub fn nnze(&self) -> usize {
        self.diagonals
            .iter()
            .map(|d| d.values.iter().filter(|v| **v != ZERO).count())
            .sum()
    }

    /// Entries with magnitude above `tol`.
    pub fn nnze_above(&self, tol: f64) -> usize {
        self.diagonals
            .iter()
            .map(|d| d.values.iter().filter(|v| v.norm() > tol).count())
            .sum()
    }

    /// Scalars held in storage, `sum(N - |d|)` over stored diagonals.
    pub fn storage_scalars(&self) -> usize {
        self.diagonals.iter().map(Diagonal::len).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.diagonals.iter().map(Diagonal::max_abs).fold(0.0, f64::max)
    }

    /// Removes diagonals whose largest magnitude is `<= eps`.
    pub fn drop_zero_diagonals(&self, eps: f64) -> DiagMatrix {
        assert!(eps >= 0.0, "eps must be non-negative");
        DiagMatrix {
            dim: self.dim,
            diagonals: self
                .diagonals
                .iter()
                .filter(|d| d.max_abs() > eps)
                .cloned()
                .collect(),
        }
    }

    /// Drops diagonals below `rel * max|entry|`. Exact zeros are always dropped.
    pub fn drop_relative(&self, rel: f64) -> DiagMatrix {
        self.drop_zero_diagonals(rel * self.max_abs())
    }

    /// Maximum absolute column sum, accumulated diagonal-wise.
    pub fn one_norm(&self) -> f64 {
        let mut col_sums = vec![0.0f64; self.dim];
        for diag in &self.diagonals {
            for (_, j, v) in diag.entries() {
                col_sums[j] += v.norm();
            }
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: Scalar) -> DiagMatrix {
        DiagMatrix {
            dim: self.dim,
            diagonals: self
                .diagonals
                .iter()
                .map(|d| Diagonal {
                    offset: d.offset,
                    values: d.values.iter().map(|v| v * factor).collect(),
                })
                .collect(),
        }
    }

    /// Elementwise sum; the offset set of the result is the union.
    pub fn add(&self, other: &DiagMatrix) -> Result<DiagMatrix> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "cannot add {0}x{0} and {1}x{1}",
                self.dim, other.dim
            )));
        }
        let mut out = Vec::with_capacity(self.nnzd() + other.nnzd());
        let (mut p, mut q) = (0, 0);
        let (a, b) = (&self.diagonals, &other.diagonals);
        while p < a.len() || q < b.len() {
            let take_a = q == b.len() || (p < a.len() && a[p].offset < b[q].offset);
            let take_b = p == a.len() || (q < b.len() && b[q].offset < a[p].offset);
            if take_a {
                out.push(a[p].clone());
                p += 1;
            } else if take_b {
                out.push(b[q].clone());
                q += 1;
            } else {
                out.push(Diagonal {
                    offset: a[p].offset,
                    values: a[p].values.iter().zip(&b[q].values).map(|(x, y)| x + y).collect(),
                });
                p += 1;
                q += 1;
            }
        }
        Ok(DiagMatrix {
            dim: self.dim,
            diagonals: out,
        })
    }

    pub fn conj_transpose(&self) -> DiagMatrix {
        let mut diagonals: Vec<Diagonal> = self
            .diagonals
            .iter()
            .rev()
            .map(|d| Diagonal {
                offset: -d.offset,
                values: d.values.iter().map(|v| v.conj()).collect(),
            })
            .collect();
        diagonals.sort_by_key(|d| d.offset);
        DiagMatrix {
            dim: self.dim,
            diagonals,
        }
    }

    /// Diagonal `-d` must be the elementwise conjugate of diagonal `d`.
    /// Under the `values[r]` convention both vectors run in the same
    /// row order, so no reversal is involved.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.diagonals.iter().all(|diag| match self.diagonal(-diag.offset) {
            Some(mirror) => diag
                .values
                .iter()
                .zip(&mirror.values)
                .all(|(v, w)| (v - w.conj()).norm() <= tol),
            None => diag.max_abs() <= tol,
        })
    }

    /// Rounds every stored value through `f32`, mimicking a single
    /// precision datapath.
    pub fn round_to_f32(&self) -> DiagMatrix {
        DiagMatrix {
            dim: self.dim,
            diagonals: self
                .diagonals
                .iter()
                .map(|d| Diagonal {
                    offset: d.offset,
                    values: d
                        .values
                        .iter()
                        .map(|v| Complex64::new(v.re as f32 as f64, v.im as f32 as f64))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for DiagMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim as f64;
        let total_diags = 2.0 * n - 1.0;
        write!(
            f,
            "dim {}  NNZE {}  NNZD {}  sparsity {:.2}%  diagonal sparsity {:.2}%",
            self.dim,
            self.nnze(),
            self.nnzd(),
            100.0 * (1.0 - self.nnze() as f64 / (n * n)),
            100.0 * (1.0 - self.nnzd() as f64 / total_diags),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Scalar {
        Complex64::new(re, 0.0)
    }

    /// a 0 0 b / 0 c 0 0 / 0 0 d 0 / e 0 0 f
    fn figure_matrix(vals: [f64; 6]) -> DenseMatrix {
        let [a, b, cc, d, e, f] = vals.map(c);
        let z = ZERO;
        DenseMatrix::from_rows(&[
            vec![a, z, z, b],
            vec![z, cc, z, z],
            vec![z, z, d, z],
            vec![e, z, z, f],
        ])
        .unwrap()
    }

    #[test]
    fn diag_length_examples() {
        assert_eq!(diag_length(1024, 3).unwrap(), 1021);
        assert_eq!(diag_length(1024, -3).unwrap(), 1021);
        assert_eq!(diag_length(5, 0).unwrap(), 5);
        assert_eq!(diag_length(4, -3).unwrap(), 1);
        assert!(matches!(diag_length(4, 4), Err(Error::Domain(_))));
        assert!(matches!(diag_length(4, -4), Err(Error::Domain(_))));
    }

    #[test]
    fn figure_matrix_layout() {
        let m = DiagMatrix::from_dense(&figure_matrix([1., 2., 3., 4., 5., 6.])).unwrap();
        assert_eq!(m.offsets(), vec![-3, 0, 3]);
        assert_eq!(m.diagonal(-3).unwrap().values, vec![c(5.)]);
        assert_eq!(m.diagonal(0).unwrap().values, vec![c(1.), c(3.), c(4.), c(6.)]);
        assert_eq!(m.diagonal(3).unwrap().values, vec![c(2.)]);
        assert_eq!(m.get(3, 0).unwrap(), c(5.));
        assert_eq!(m.get(1, 0).unwrap(), ZERO);
        assert!(m.get(4, 0).is_err());
        assert_eq!(m.to_dense(), figure_matrix([1., 2., 3., 4., 5., 6.]));
    }

    #[test]
    fn small_conversions() {
        let zero = DiagMatrix::from_dense(&DenseMatrix::zeros(4)).unwrap();
        assert_eq!(zero.nnzd(), 0);

        let id = DiagMatrix::from_dense(&DenseMatrix::identity(8)).unwrap();
        assert_eq!(id.offsets(), vec![0]);
        assert_eq!(id.diagonals()[0].values, vec![ONE; 8]);
        for k in 0..8 {
            assert_eq!(id.get(k, k).unwrap(), ONE);
        }

        let upper = DiagMatrix::new(2, vec![Diagonal { offset: 1, values: vec![c(7.)] }]).unwrap();
        let dense = upper.to_dense();
        assert_eq!(dense.as_slice(), &[ZERO, c(7.), ZERO, ZERO]);
    }

    #[test]
    fn non_square_rejected() {
        let rows = vec![vec![ONE, ZERO], vec![ONE]];
        assert!(matches!(DenseMatrix::from_rows(&rows), Err(Error::Shape(_))));
    }

    #[test]
    fn invalid_construction_rejected() {
        let short = Diagonal { offset: 1, values: vec![ONE] };
        assert!(DiagMatrix::new(3, vec![short]).is_err());
        let dup = vec![
            Diagonal { offset: 0, values: vec![ONE; 3] },
            Diagonal { offset: 0, values: vec![ONE; 3] },
        ];
        assert!(DiagMatrix::new(3, dup).is_err());
        let nan = Diagonal { offset: 0, values: vec![Complex64::new(f64::NAN, 0.0); 2] };
        assert!(DiagMatrix::new(2, vec![nan]).is_err());
    }

    #[test]
    fn drop_zero_diagonals_cases() {
        let m = DiagMatrix::new(
            3,
            vec![
                Diagonal { offset: -1, values: vec![ZERO; 2] },
                Diagonal { offset: 0, values: vec![ONE; 3] },
            ],
        )
        .unwrap();
        assert_eq!(m.drop_zero_diagonals(0.0).offsets(), vec![0]);
        let id = DiagMatrix::identity(5);
        assert_eq!(id.drop_zero_diagonals(0.0), id);
    }

    #[test]
    fn one_norm_examples() {
        assert_eq!(DiagMatrix::identity(16).one_norm(), 1.0);
        let m = DiagMatrix::from_dense(&figure_matrix([1.0; 6])).unwrap();
        assert_eq!(m.one_norm(), 2.0);
    }

    #[test]
    fn hermitian_mirror_same_order() {
        let v = Complex64::new(1.0, 2.0);
        let w = Complex64::new(-3.0, 0.5);
        let m = DiagMatrix::new(
            3,
            vec![
                Diagonal { offset: -1, values: vec![v.conj(), w.conj()] },
                Diagonal { offset: 0, values: vec![c(1.), c(2.), c(3.)] },
                Diagonal { offset: 1, values: vec![v, w] },
            ],
        )
        .unwrap();
        assert!(m.is_hermitian(0.0));
        assert_eq!(m.conj_transpose(), m);
    }
}

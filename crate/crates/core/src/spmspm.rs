//! Diagonal-space sparse matrix products.
//!
//! Diagonal `dA` of A times diagonal `dB` of B lands entirely on output
//! diagonal `dA + dB`, so the product is a sum of shifted elementwise
//! products over the rows where both factors are defined.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagmat::{first_row, DenseMatrix, DiagMatrix, Diagonal, Scalar, ZERO};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetSet(Vec<isize>);

impl OffsetSet {
    pub fn new(mut offsets: Vec<isize>) -> Self {
        offsets.sort_unstable();
        offsets.dedup();
        OffsetSet(offsets)
    }

    pub fn of(m: &DiagMatrix) -> Self {
        OffsetSet(m.offsets())
    }

    pub fn as_slice(&self) -> &[isize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, d: isize) -> bool {
        self.0.binary_search(&d).is_ok()
    }

    pub fn is_subset(&self, other: &OffsetSet) -> bool {
        self.0.iter().all(|d| other.contains(*d))
    }
}

impl FromIterator<isize> for OffsetSet {
    fn from_iter<I: IntoIterator<Item = isize>>(iter: I) -> Self {
        OffsetSet::new(iter.into_iter().collect())
    }
}

pub fn minkowski(a: &OffsetSet, b: &OffsetSet) -> OffsetSet {
    a.0.iter().flat_map(|x| b.0.iter().map(move |y| x + y)).collect()
}

/// Rows `r` of A for which A(r, r+dA), B(r+dA, r+dA+dB) and
/// C(r, r+dA+dB) all exist. Inclusive; empty when `r_lo > r_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OverlapRange {
    pub r_lo: isize,
    pub r_hi: isize,
}

impl OverlapRange {
    pub fn is_empty(&self) -> bool {
        self.r_lo > self.r_hi
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.r_hi - self.r_lo + 1) as usize
        }
    }

    pub fn rows(&self) -> std::ops::RangeInclusive<isize> {
        self.r_lo..=self.r_hi
    }
}

pub fn overlap_range(da: isize, db: isize, n: usize) -> OverlapRange {
    let n = n as isize;
    let dc = da + db;
    OverlapRange {
        r_lo: 0.max(-da).max(-dc),
        r_hi: n - 1 - 0.max(da).max(dc),
    }
}

/// Multiplies counted while computing a product.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCount {
    pub multiplies: u64,
    pub pairs: u64,
    pub empty_pairs: u64,
}

pub fn diag_matmul(a: &DiagMatrix, b: &DiagMatrix) -> Result<DiagMatrix> {
    diag_matmul_counted(a, b).map(|(c, _)| c)
}

/// Product plus work count. Each output diagonal is computed
/// independently; within one output diagonal, contributions are added
/// in ascending `dA`, which is the global ascending-(dA, dB) order
/// restricted to that diagonal.
pub fn diag_matmul_counted(a: &DiagMatrix, b: &DiagMatrix) -> Result<(DiagMatrix, WorkCount)> {
    let n = a.dim();
    if n != b.dim() {
        return Err(Error::Shape(format!(
            "cannot multiply {n}x{n} by {0}x{0}",
            b.dim()
        )));
    }
    let mut by_output: BTreeMap<isize, Vec<(&Diagonal, &Diagonal, OverlapRange)>> = BTreeMap::new();
    let mut work = WorkCount::default();
    for da in a.diagonals() {
        for db in b.diagonals() {
            work.pairs += 1;
            let range = overlap_range(da.offset, db.offset, n);
            if range.is_empty() {
                work.empty_pairs += 1;
                continue;
            }
            work.multiplies += range.len() as u64;
            by_output
                .entry(da.offset + db.offset)
                .or_default()
                .push((da, db, range));
        }
    }
    let diagonals: Vec<Diagonal> = by_output
        .into_par_iter()
        .map(|(dc, contributions)| {
            let mut values = vec![ZERO; n - dc.unsigned_abs()];
            let c0 = first_row(dc) as isize;
            for (da, db, range) in contributions {
                let a0 = first_row(da.offset) as isize;
                let b0 = first_row(db.offset) as isize;
                for r in range.rows() {
                    let av = da.values[(r - a0) as usize];
                    let bv = db.values[(r + da.offset - b0) as usize];
                    values[(r - c0) as usize] += av * bv;
                }
            }
            Diagonal { offset: dc, values }
        })
        .filter(|d| d.values.iter().any(|v| *v != ZERO))
        .collect();
    Ok((DiagMatrix::new(n, diagonals)?, work))
}

/// Textbook triple loop.
pub fn dense_matmul_oracle(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.dim();
    if n != b.dim() {
        return Err(Error::Shape(format!(
            "cannot multiply {n}x{n} by {0}x{0}",
            b.dim()
        )));
    }
    let mut c = DenseMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[(i, k)];
            if aik == ZERO {
                continue;
            }
            for j in 0..n {
                c[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    Ok(c)
}

/// `sum_k M^k / k!` on the dense representation, `k = 0..=terms`.
pub fn dense_taylor_oracle(m: &DenseMatrix, terms: usize) -> Result<DenseMatrix> {
    let n = m.dim();
    let mut total = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=terms {
        term = dense_matmul_oracle(&term, m)?;
        let inv = 1.0 / k as f64;
        for i in 0..n {
            for j in 0..n {
                term[(i, j)] *= inv;
                total[(i, j)] += term[(i, j)];
            }
        }
    }
    Ok(total)
}

pub fn dense_scale(m: &DenseMatrix, factor: Scalar) -> DenseMatrix {
    let n = m.dim();
    let mut out = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = m[(i, j)] * factor;
        }
    }
    out
}

#![allow(dead_code)]

use diagsim_core::{DiagMatrix, Diagonal, Scalar};
use proptest::prelude::*;

/// Random matrix from an offset set and a value seed stream.
pub fn build(n: usize, offsets: &[isize], vals: &[(f64, f64)]) -> DiagMatrix {
    let mut k = 0;
    let diagonals = offsets
        .iter()
        .map(|&d| Diagonal {
            offset: d,
            values: (0..n - d.unsigned_abs())
                .map(|_| {
                    let (re, im) = vals[k % vals.len()];
                    k += 1;
                    Scalar::new(re, im + 0.25 * k as f64 % 1.0)
                })
                .collect(),
        })
        .collect();
    DiagMatrix::new(n, diagonals).unwrap().drop_zero_diagonals(0.0)
}

pub fn offsets(n: usize, max: usize) -> impl Strategy<Value = Vec<isize>> {
    let span = n as isize - 1;
    prop::collection::btree_set(-span..=span, 0..=max.min(2 * n - 1)).prop_map(|s| s.into_iter().collect())
}

pub fn values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..16)
}

pub fn matrix(max_n: usize, max_diags: usize) -> impl Strategy<Value = DiagMatrix> {
    (1..=max_n).prop_flat_map(move |n| (offsets(n, max_diags), values()).prop_map(move |(o, v)| build(n, &o, &v)))
}

pub fn pair(max_n: usize, max_diags: usize) -> impl Strategy<Value = (DiagMatrix, DiagMatrix)> {
    (1..=max_n).prop_flat_map(move |n| {
        (offsets(n, max_diags), offsets(n, max_diags), values())
            .prop_map(move |(oa, ob, v)| (build(n, &oa, &v), build(n, &ob, &v[v.len() / 2..])))
    })
}

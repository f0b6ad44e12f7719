//! Pauli-string Hamiltonians and the benchmark model generators.
//!
//! Qubit `q` is bit `q` of the basis-state index, so `axes[0]` is the
//! rightmost factor of the Kronecker product. A Pauli string is a signed
//! permutation of basis states: X and Y flip bit `q`, Y and Z contribute
//! a phase. That makes every term a single-diagonal-per-column operator
//! and lets us build the diagonal form without any dense intermediate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagmat::{first_row, DiagMatrix, Diagonal, Scalar, ZERO};
use crate::error::{Error, Result};

pub const DEFAULT_QUBIT_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: Scalar,
    pub axes: Vec<Pauli>,
}

impl PauliTerm {
    pub fn identity(n: usize, coefficient: f64) -> Self {
        PauliTerm {
            coefficient: Complex64::new(coefficient, 0.0),
            axes: vec![Pauli::I; n],
        }
    }

    /// Term acting with `ops` on the listed qubits, identity elsewhere.
    pub fn on(n: usize, coefficient: f64, ops: &[(usize, Pauli)]) -> Self {
        let mut term = Self::identity(n, coefficient);
        for &(q, p) in ops {
            term.axes[q] = p;
        }
        term
    }

    fn masks(&self) -> (usize, usize, u32) {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut ys = 0u32;
        for (q, p) in self.axes.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    phase |= 1 << q;
                    ys += 1;
                }
                Pauli::Z => phase |= 1 << q,
            }
        }
        (flip, phase, ys)
    }
}

/// `sum_t c_t (s_{t,n-1} x ... x s_{t,0})` as a diagonal matrix of dim `2^n`.
pub fn pauli_to_diagmatrix(terms: &[PauliTerm], n: usize) -> Result<DiagMatrix> {
    pauli_to_diagmatrix_capped(terms, n, DEFAULT_QUBIT_CAP)
}

pub fn pauli_to_diagmatrix_capped(terms: &[PauliTerm], n: usize, cap: usize) -> Result<DiagMatrix> {
    if n > cap {
        return Err(Error::QubitCap { qubits: n, cap });
    }
    if let Some(bad) = terms.iter().find(|t| t.axes.len() != n) {
        return Err(Error::Shape(format!(
            "Pauli term has {} axes, expected {n}",
            bad.axes.len()
        )));
    }
    let dim = 1usize << n;
    let mut diags: BTreeMap<isize, Vec<Scalar>> = BTreeMap::new();
    for term in terms {
        let (flip, phase_mask, ys) = term.masks();
        let global = term.coefficient * Complex64::i().powu(ys);
        for col in 0..dim {
            let row = col ^ flip;
            let sign = if (col & phase_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let d = col as isize - row as isize;
            let values = diags
                .entry(d)
                .or_insert_with(|| vec![ZERO; dim - d.unsigned_abs()]);
            values[row - first_row(d)] += global * sign;
        }
    }
    let diagonals = diags
        .into_iter()
        .map(|(offset, values)| Diagonal { offset, values })
        .collect();
    Ok(DiagMatrix::new(dim, diagonals)?.drop_zero_diagonals(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    Tfim,
    Heisenberg,
    MaxCutIsing,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfim" => Ok(Model::Tfim),
            "heisenberg" => Ok(Model::Heisenberg),
            "maxcut" | "maxcut-ising" | "max-cut" => Ok(Model::MaxCutIsing),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Tfim => "tfim",
            Model::Heisenberg => "heisenberg",
            Model::MaxCutIsing => "maxcut-ising",
        })
    }
}

/// Coupling constants and boundary conditions for the chain models.
///
/// MaxCut-Ising ignores `field` and defaults to a ring, the other models
/// default to an open chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub coupling: f64,
    pub field: f64,
    pub periodic: Option<bool>,
    pub qubit_cap: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            coupling: 1.0,
            field: 1.0,
            periodic: None,
            qubit_cap: DEFAULT_QUBIT_CAP,
        }
    }
}

impl ModelParams {
    /// Applies one `key=value` override (`j`, `g`, `periodic`, `cap`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Domain(format!("bad value `{value}` for model parameter `{key}`"));
        match key {
            "j" | "coupling" => self.coupling = value.parse().map_err(|_| bad())?,
            "g" | "h" | "field" => self.field = value.parse().map_err(|_| bad())?,
            "periodic" => self.periodic = Some(value.parse().map_err(|_| bad())?),
            "cap" => self.qubit_cap = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::Domain(format!("unknown model parameter `{key}`"))),
        }
        Ok(())
    }
}

fn bonds(n: usize, periodic: bool) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if periodic && n > 2 {
        out.push((n - 1, 0));
    }
    out
}

pub fn model_terms(model: Model, n: usize, params: &ModelParams) -> Vec<PauliTerm> {
    let j = params.coupling;
    match model {
        Model::Heisenberg => bonds(n, params.periodic.unwrap_or(false))
            .into_iter()
            .flat_map(|(a, b)| {
                [Pauli::X, Pauli::Y, Pauli::Z]
                    .into_iter()
                    .map(move |p| PauliTerm::on(n, j, &[(a, p), (b, p)]))
            })
            .collect(),
        Model::Tfim => {
            let mut terms: Vec<PauliTerm> = bonds(n, params.periodic.unwrap_or(false))
                .into_iter()
                .map(|(a, b)| PauliTerm::on(n, -j, &[(a, Pauli::Z), (b, Pauli::Z)]))
                .collect();
            terms.extend((0..n).map(|q| PauliTerm::on(n, -params.field, &[(q, Pauli::X)])));
            terms
        }
        Model::MaxCutIsing => bonds(n, params.periodic.unwrap_or(true))
            .into_iter()
            .map(|(a, b)| PauliTerm::on(n, j, &[(a, Pauli::Z), (b, Pauli::Z)]))
            .collect(),
    }
}

pub fn gen_benchmark(model: Model, n: usize, params: &ModelParams) -> Result<DiagMatrix> {
    if n == 0 {
        return Err(Error::Domain("need at least one qubit".into()));
    }
    pauli_to_diagmatrix_capped(&model_terms(model, n, params), n, params.qubit_cap)
}

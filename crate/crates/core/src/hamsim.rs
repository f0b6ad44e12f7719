//! Truncated Taylor expansion of `exp(-i t H)` as a chain of diagonal
//! products, optionally executed on the modeled accelerator.
//!
//! `T_0 = I`, `T_1 = M = -i t H`, and iteration `k` computes
//! `T_{k+1} = T_k M / (k+1)`. The identity product is never executed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::accel::{simulate_product, AccelConfig};
use crate::dataflow::{JobEvents, StageCycles};
use crate::diagmat::DiagMatrix;
use crate::error::{Error, Result};
use crate::memory::{MatrixTags, MemStats, MemorySystem};
use crate::spmspm::diag_matmul_counted;

pub const MAX_TERMS: usize = 64;
pub const DEFAULT_EPS: f64 = 1e-8;
pub const DROP_RELATIVE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorConfig {
    pub t: f64,
    /// Highest power kept. `None` picks it from the one-norm bound.
    pub terms: Option<usize>,
    pub eps: f64,
    pub use_simulator: bool,
    /// Split `t` into this many equal steps and multiply the results.
    pub segments: usize,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        TaylorConfig {
            t: 1.0,
            terms: None,
            eps: DEFAULT_EPS,
            use_simulator: true,
            segments: 1,
        }
    }
}

/// Smallest `k` with `norm^(k+1) / (k+1)! <= eps`.
pub fn terms_for(norm: f64, eps: f64) -> Result<usize> {
    let mut bound = norm;
    for k in 0..=MAX_TERMS {
        // bound == norm^(k+1) / (k+1)!
        if bound <= eps {
            return Ok(k);
        }
        bound *= norm / (k + 2) as f64;
    }
    Err(Error::Convergence { cap: MAX_TERMS, norm })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Number of products executed so far; 0 describes `T_1 = M`.
    pub k: usize,
    /// Power of M held by the running term.
    pub power: usize,
    pub nnzd: usize,
    /// Entries of the running term above rounding noise.
    pub nnze: usize,
    /// Scalars stored for the running term, `sum(N - |d|)`.
    pub storage_scalars: usize,
    pub savings: f64,
    pub multiplies: u64,
    pub stage_cycles: StageCycles,
    pub mem: MemStats,
    pub hit_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaylorRun {
    pub u: DiagMatrix,
    pub records: Vec<IterationRecord>,
    /// Highest power in each expansion.
    pub terms: usize,
    pub norm: f64,
    pub cycles: StageCycles,
    pub events: JobEvents,
    pub mem: MemStats,
    pub peak_active_dpes: u64,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

struct Engine<'a> {
    accel: Option<(&'a AccelConfig, MemorySystem)>,
    cycles: StageCycles,
    events: JobEvents,
    mem: MemStats,
    peak: u64,
    rows: usize,
    cols: usize,
}

impl Engine<'_> {
    fn multiply(&mut self, a: &DiagMatrix, b: &DiagMatrix, tags: MatrixTags) -> Result<(DiagMatrix, u64, StageCycles, MemStats)> {
        match &mut self.accel {
            None => {
                let (c, work) = diag_matmul_counted(a, b)?;
                self.events.multiplies += work.multiplies;
                Ok((c, work.multiplies, StageCycles::default(), MemStats::default()))
            }
            Some((cfg, mem)) => {
                mem.tags = tags;
                let run = simulate_product(a, b, cfg, mem, None)?;
                self.cycles += run.cycles;
                self.events += run.events;
                self.mem += run.mem;
                self.peak = self.peak.max(run.peak_active_dpes);
                for j in &run.jobs {
                    self.rows = self.rows.max(j.rows);
                    self.cols = self.cols.max(j.cols);
                }
                Ok((run.c, run.events.multiplies, run.cycles, run.mem))
            }
        }
    }
}

fn record(k: usize, term: &DiagMatrix, multiplies: u64, cycles: StageCycles, mem: MemStats) -> IterationRecord {
    let n = term.dim() as f64;
    IterationRecord {
        k,
        power: k + 1,
        nnzd: term.nnzd(),
        nnze: term.nnze_above(DROP_RELATIVE * term.max_abs()),
        storage_scalars: term.storage_scalars(),
        savings: 1.0 - term.storage_scalars() as f64 / (n * n),
        multiplies,
        stage_cycles: cycles,
        mem,
        hit_rate: mem.hit_rate(),
    }
}

/// Runs the expansion. `accel` selects the simulated path when
/// `cfg.use_simulator` is set; otherwise products are functional.
pub fn taylor_expm(h: &DiagMatrix, cfg: &TaylorConfig, accel: Option<&AccelConfig>) -> Result<TaylorRun> {
    if cfg.eps.is_nan() || cfg.eps <= 0.0 {
        return Err(Error::Domain("eps must be positive".into()));
    }
    if cfg.segments == 0 {
        return Err(Error::Domain("segments must be at least 1".into()));
    }
    let n = h.dim();
    let m = h.scale(Complex64::new(0.0, -cfg.t / cfg.segments as f64));
    let norm = m.one_norm();
    let terms = match cfg.terms {
        Some(k) if k > MAX_TERMS => return Err(Error::Convergence { cap: MAX_TERMS, norm }),
        Some(k) => k,
        None => terms_for(norm, cfg.eps)?,
    };

    let default_accel = AccelConfig::default();
    let accel_cfg = accel.unwrap_or(&default_accel);
    let mut engine = Engine {
        accel: if cfg.use_simulator {
            Some((accel_cfg, MemorySystem::new(accel_cfg.cache)?))
        } else {
            None
        },
        cycles: StageCycles::default(),
        events: JobEvents::default(),
        mem: MemStats::default(),
        peak: 0,
        rows: 0,
        cols: 0,
    };

    let mut u = DiagMatrix::identity(n);
    let mut records = Vec::new();
    if terms >= 1 {
        u = u.add(&m)?;
        let mut term = m.clone();
        records.push(record(0, &term, 0, StageCycles::default(), MemStats::default()));
        // M and T_1 are the same data; later terms get their own tags
        let tag_of = |power: usize| if power <= 1 { 0 } else { power as u64 };
        for k in 1..terms {
            let tags = MatrixTags { a: tag_of(k), b: 0, c: tag_of(k + 1) };
            let (prod, mults, cycles, mem) = engine.multiply(&term, &m, tags)?;
            term = prod
                .scale(Complex64::new(1.0 / (k + 1) as f64, 0.0))
                .drop_relative(DROP_RELATIVE);
            u = u.add(&term)?;
            records.push(record(k, &term, mults, cycles, mem));
        }
    }

    let step = u.clone();
    for s in 1..cfg.segments {
        let base = 1000 * s as u64;
        let tags = MatrixTags { a: base, b: base + 1, c: base + 2 };
        u = engine.multiply(&u, &step, tags)?.0.drop_relative(DROP_RELATIVE);
    }

    Ok(TaylorRun {
        u,
        records,
        terms,
        norm,
        cycles: engine.cycles,
        events: engine.events,
        mem: engine.mem,
        peak_active_dpes: engine.peak,
        grid_rows: engine.rows,
        grid_cols: engine.cols,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageRow {
    pub k: usize,
    pub storage_scalars: usize,
    pub dense_scalars: usize,
    pub savings: f64,
}

pub fn storage_report(n: usize, records: &[IterationRecord]) -> Vec<StorageRow> {
    records
        .iter()
        .map(|r| StorageRow {
            k: r.k,
            storage_scalars: r.storage_scalars,
            dense_scalars: n * n,
            savings: 1.0 - r.storage_scalars as f64 / (n * n) as f64,
        })
        .collect()
}

//! Cycle-level model of the DPE grid.
//!
//! A segments stream down the columns and B segments stream right along
//! the rows, one element per cycle, column `c` (row `r`) starting at cycle
//! `c + 1` (`r + 1`). Each DPE compares the inner indices of the operands
//! it holds and either multiplies, forwards the smaller one, or waits.
//! Partial products go straight to the accumulator of diagonal `dA + dB`.

mod grid;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocking::{AccumulatorBank, DiagSegment, Side};
use crate::diagmat::Scalar;
use crate::error::{Error, Result};

pub use grid::{DpeGrid, Stream, TraceEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    Ascending,
    Descending,
}

impl FromStr for Order {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asc" | "ascending" => Ok(Order::Ascending),
            "desc" | "descending" => Ok(Order::Descending),
            _ => Err(Error::Domain(format!("feed order must be asc or desc, got `{s}`"))),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order::Ascending => "asc",
            Order::Descending => "desc",
        })
    }
}

/// Offset order of the diagonals across the grid's columns (A) and rows (B).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeedConfig {
    pub a_order: Order,
    pub b_order: Order,
}

impl Default for FeedConfig {
    fn default() -> Self {
        FeedConfig {
            a_order: Order::Ascending,
            b_order: Order::Descending,
        }
    }
}

impl FromStr for FeedConfig {
    type Err = Error;

    /// `a=asc,b=desc`; either key may be omitted.
    fn from_str(s: &str) -> Result<Self> {
        let mut feed = FeedConfig::default();
        for part in s.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("bad feed spec `{part}`")))?;
            match k.trim() {
                "a" => feed.a_order = v.trim().parse()?,
                "b" => feed.b_order = v.trim().parse()?,
                other => return Err(Error::Domain(format!("unknown feed side `{other}`"))),
            }
        }
        Ok(feed)
    }
}

impl fmt::Display for FeedConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a={},b={}", self.a_order, self.b_order)
    }
}

pub fn feed_order<T: Clone>(items: &[T], key: impl Fn(&T) -> isize, order: Order) -> Vec<T> {
    let mut out = items.to_vec();
    out.sort_by_key(|x| key(x));
    if order == Order::Descending {
        out.reverse();
    }
    out
}

/// Output diagonal served by DPE `(row, col)`.
pub fn minkowski_mapping(feed: FeedConfig, a_offsets: &[isize], b_offsets: &[isize], (row, col): (usize, usize)) -> isize {
    let cols = feed_order(a_offsets, |d| *d, feed.a_order);
    let rows = feed_order(b_offsets, |d| *d, feed.b_order);
    cols[col] + rows[row]
}

/// An in-flight element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Operand {
    pub value: Scalar,
    pub i: usize,
    pub j: usize,
    pub side: Side,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialProduct {
    pub value: Scalar,
    pub i: usize,
    pub j: usize,
    pub d_c: isize,
}

/// Stage lengths. Individual stages may be negative when they overlap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCycles {
    pub preload: i64,
    pub compute: i64,
    pub popout: i64,
    pub total: i64,
}

impl std::ops::AddAssign for StageCycles {
    fn add_assign(&mut self, o: Self) {
        self.preload += o.preload;
        self.compute += o.compute;
        self.popout += o.popout;
        self.total += o.total;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobEvents {
    pub multiplies: u64,
    pub fifo_reads: u64,
    pub fifo_writes: u64,
    pub accumulator_writes: u64,
    pub comparator_stalls: u64,
    pub active_dpes: u64,
    /// Sum over active DPEs of the cycles the job occupied the grid.
    pub dpe_active_cycles: u64,
}

impl JobEvents {
    pub fn fifo_rw(&self) -> u64 {
        self.fifo_reads + self.fifo_writes
    }
}

impl std::ops::AddAssign for JobEvents {
    fn add_assign(&mut self, o: Self) {
        self.multiplies += o.multiplies;
        self.fifo_reads += o.fifo_reads;
        self.fifo_writes += o.fifo_writes;
        self.accumulator_writes += o.accumulator_writes;
        self.comparator_stalls += o.comparator_stalls;
        self.active_dpes += o.active_dpes;
        self.dpe_active_cycles += o.dpe_active_cycles;
    }
}

/// Timing landmarks of one job, all 1-based cycle numbers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobTiming {
    pub stages: StageCycles,
    /// First cycle after the last element entered the grid.
    pub t_ff: i64,
    /// First cycle after the last multiply.
    pub t_pf: i64,
    /// First cycle at which every DPE had held both an A and a B element.
    pub measured_fill: Option<i64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct JobResult {
    pub timing: JobTiming,
    pub events: JobEvents,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub feed: FeedConfig,
    /// Element-interleaved lanes for 1x1 jobs; 1 disables interleaving.
    pub lanes: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            feed: FeedConfig::default(),
            lanes: 1,
        }
    }
}

/// Simulates one job to completion, adding its partial products to `bank`.
pub fn run_job(
    a_segments: &[DiagSegment],
    b_segments: &[DiagSegment],
    cfg: &SimConfig,
    bank: &mut AccumulatorBank,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<JobResult> {
    if a_segments.is_empty() || b_segments.is_empty() {
        return Ok(JobResult::default());
    }
    if cfg.lanes > 1 && a_segments.len() == 1 && b_segments.len() == 1 {
        return run_lanes(&a_segments[0], &b_segments[0], cfg.lanes, bank, trace);
    }
    let mut grid = DpeGrid::build(a_segments, b_segments, cfg.feed)?;
    grid.run(bank, trace, 0)
}

/// One 1x1 grid per lane; lane `l` gets the A elements with column
/// `j = l (mod lanes)` and the B elements with row `i = l (mod lanes)`.
fn run_lanes(
    a: &DiagSegment,
    b: &DiagSegment,
    lanes: usize,
    bank: &mut AccumulatorBank,
    mut trace: Option<&mut Vec<TraceEvent>>,
) -> Result<JobResult> {
    let mut out = JobResult {
        grid_rows: 1,
        grid_cols: lanes,
        ..JobResult::default()
    };
    let mut timing: Option<JobTiming> = None;
    for lane in 0..lanes {
        let sa = Stream::strided(a, Side::A, lane, lanes);
        let sb = Stream::strided(b, Side::B, lane, lanes);
        if sa.is_empty() || sb.is_empty() {
            continue;
        }
        let mut grid = DpeGrid::from_streams(vec![sa], vec![sb]);
        let r = grid.run(bank, trace.as_deref_mut(), lane)?;
        out.events += r.events;
        timing = Some(match timing {
            None => r.timing,
            Some(t) => JobTiming {
                stages: if r.timing.stages.total > t.stages.total { r.timing.stages } else { t.stages },
                t_ff: t.t_ff.max(r.timing.t_ff),
                t_pf: t.t_pf.max(r.timing.t_pf),
                measured_fill: t.measured_fill.max(r.timing.measured_fill),
            },
        });
    }
    if let Some(t) = timing {
        out.timing = t;
        // lanes run in lockstep, so every active lane is busy for the
        // longest lane's duration
        out.events.dpe_active_cycles = out.events.active_dpes * t.stages.total as u64;
    }
    Ok(out)
}

/// The diagonal that bounds feed time, and where it enters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmaxInfo {
    pub side: Side,
    pub len: usize,
    /// 1-based column (A) or row (B) receiving it.
    pub position: usize,
}

/// Longest segment over both sides; B wins ties.
pub fn dmax_info(a_segments: &[DiagSegment], b_segments: &[DiagSegment], feed: FeedConfig) -> Option<DmaxInfo> {
    let cols = feed_order(a_segments, |s| s.offset, feed.a_order);
    let rows = feed_order(b_segments, |s| s.offset, feed.b_order);
    let mut best: Option<DmaxInfo> = None;
    for (k, s) in rows.iter().enumerate() {
        if best.is_none_or(|b| s.len() > b.len) {
            best = Some(DmaxInfo { side: Side::B, len: s.len(), position: k + 1 });
        }
    }
    for (k, s) in cols.iter().enumerate() {
        if best.is_none_or(|b| s.len() > b.len) {
            best = Some(DmaxInfo { side: Side::A, len: s.len(), position: k + 1 });
        }
    }
    best
}

/// Closed-form stage model for a stall-free job.
pub fn predict_cycles(rows: usize, cols: usize, dmax: DmaxInfo) -> JobTiming {
    let (r, c, l, p) = (rows as i64, cols as i64, dmax.len as i64, dmax.position as i64);
    let preload = r + c - 1;
    let t_ff = l + p;
    let t_pf = match dmax.side {
        Side::B => l + p + c - 1 + r - p,
        Side::A => l + p + r - 1 + c - p,
    };
    let compute = t_ff - preload;
    let popout = r + c - 1 - p;
    JobTiming {
        stages: StageCycles {
            preload,
            compute,
            popout,
            total: preload + compute + popout,
        },
        t_ff,
        t_pf,
        measured_fill: None,
    }
}

#[cfg(test)]
mod tests;

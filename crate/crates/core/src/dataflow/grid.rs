use serde::Serialize;

use crate::blocking::{AccumulatorBank, DiagSegment, Side};
use crate::diagmat::Scalar;
use crate::error::{Error, Result};

use super::{feed_order, FeedConfig, JobEvents, JobResult, JobTiming, PartialProduct, StageCycles};

/// Elements of one segment in feed order. Element `k` sits at
/// `(first_i + k*stride, first_j + k*stride)`; only the first coordinate
/// is stored, the rest follow by increment.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub offset: isize,
    pub first_i: usize,
    pub stride: usize,
    pub values: Vec<Scalar>,
}

impl Stream {
    pub fn from_segment(s: &DiagSegment) -> Self {
        Stream {
            offset: s.offset,
            first_i: s.row_start,
            stride: 1,
            values: s.values.clone(),
        }
    }

    /// Elements whose inner index is `lane (mod lanes)`. The inner index
    /// is the column for A and the row for B.
    pub fn strided(s: &DiagSegment, side: Side, lane: usize, lanes: usize) -> Self {
        let inner0 = match side {
            Side::A => s.col_start(),
            Side::B => s.row_start,
        };
        let skip = (lane + lanes - inner0 % lanes) % lanes;
        Stream {
            offset: s.offset,
            first_i: s.row_start + skip,
            stride: lanes,
            values: s.values.iter().skip(skip).step_by(lanes).copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn element(&self, k: usize) -> Slot {
        let i = self.first_i + k * self.stride;
        Slot {
            i,
            j: i.wrapping_add_signed(self.offset),
            value: self.values[k],
            used: false,
        }
    }

    /// First and last inner index (column for A, row for B).
    fn inner_range(&self, side: Side) -> (usize, usize) {
        let last_i = self.first_i + (self.len() - 1) * self.stride;
        match side {
            Side::A => (
                self.first_i.wrapping_add_signed(self.offset),
                last_i.wrapping_add_signed(self.offset),
            ),
            Side::B => (self.first_i, last_i),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    i: usize,
    j: usize,
    value: Scalar,
    used: bool,
}

/// One line of the optional per-cycle trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEvent {
    pub cycle: u64,
    /// Position of the job in the schedule; set by the caller.
    pub job: usize,
    pub row: usize,
    pub col: usize,
    pub action: &'static str,
    pub i: usize,
    pub j: usize,
}

/// Grid state. Each DPE has one depth-1 slot per side; operands move one
/// hop per cycle when the slot ahead is free or being vacated.
#[derive(Clone, Debug)]
pub struct DpeGrid {
    rows: usize,
    cols: usize,
    a_streams: Vec<Stream>,
    b_streams: Vec<Stream>,
    a_range: Vec<(usize, usize)>,
    b_range: Vec<(usize, usize)>,
    a_pos: Vec<usize>,
    b_pos: Vec<usize>,
    a: Vec<Option<Slot>>,
    b: Vec<Option<Slot>>,
    last_a: Vec<Option<usize>>,
    last_b: Vec<Option<usize>>,
    seen_a: Vec<bool>,
    seen_b: Vec<bool>,
    cycle: u64,
    events: JobEvents,
    last_inject: u64,
    last_multiply: u64,
    fill: Option<u64>,
}

impl DpeGrid {
    /// Columns take A segments and rows take B segments, each in feed order.
    pub fn build(a_segments: &[DiagSegment], b_segments: &[DiagSegment], feed: FeedConfig) -> Result<Self> {
        let cols = feed_order(a_segments, |s| s.offset, feed.a_order);
        let rows = feed_order(b_segments, |s| s.offset, feed.b_order);
        if cols.iter().chain(&rows).any(DiagSegment::is_empty) {
            return Err(Error::Plan("empty segment fed to the grid".into()));
        }
        Ok(Self::from_streams(
            cols.iter().map(Stream::from_segment).collect(),
            rows.iter().map(Stream::from_segment).collect(),
        ))
    }

    pub fn from_streams(a_streams: Vec<Stream>, b_streams: Vec<Stream>) -> Self {
        let (rows, cols) = (b_streams.len(), a_streams.len());
        let cells = rows * cols;
        DpeGrid {
            rows,
            cols,
            a_range: a_streams.iter().map(|s| s.inner_range(Side::A)).collect(),
            b_range: b_streams.iter().map(|s| s.inner_range(Side::B)).collect(),
            a_pos: vec![0; cols],
            b_pos: vec![0; rows],
            a_streams,
            b_streams,
            a: vec![None; cells],
            b: vec![None; cells],
            last_a: vec![None; cells],
            last_b: vec![None; cells],
            seen_a: vec![false; cells],
            seen_b: vec![false; cells],
            cycle: 0,
            events: JobEvents::default(),
            last_inject: 0,
            last_multiply: 0,
            fill: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn events(&self) -> &JobEvents {
        &self.events
    }

    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    pub fn is_done(&self) -> bool {
        self.a.iter().all(Option::is_none)
            && self.b.iter().all(Option::is_none)
            && self.a_pos.iter().zip(&self.a_streams).all(|(p, s)| *p == s.len())
            && self.b_pos.iter().zip(&self.b_streams).all(|(p, s)| *p == s.len())
    }

    /// Advances one cycle. Returns the partial products emitted and
    /// whether any state changed.
    pub fn step(&mut self, mut trace: Option<&mut Vec<TraceEvent>>, lane: usize) -> Result<(Vec<PartialProduct>, bool)> {
        self.cycle += 1;
        let t = self.cycle;
        let (rows, cols) = (self.rows, self.cols);
        let mut changed = false;
        let mut log = |row: usize, col: usize, action: &'static str, s: &Slot| {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(TraceEvent { cycle: t, job: 0, row, col: col + lane, action, i: s.i, j: s.j });
            }
        };

        // injection at the top and left edges
        for c in 0..cols {
            let k = self.a_pos[c];
            if k < self.a_streams[c].len() && t > c as u64 && self.a[c].is_none() {
                let s = self.a_streams[c].element(k);
                log(0, c, "inject_a", &s);
                self.a[c] = Some(s);
                self.a_pos[c] += 1;
                self.events.fifo_writes += 1;
                self.last_inject = t;
                changed = true;
            }
        }
        for r in 0..rows {
            let k = self.b_pos[r];
            let at = r * cols;
            if k < self.b_streams[r].len() && t > r as u64 && self.b[at].is_none() {
                let s = self.b_streams[r].element(k);
                log(r, 0, "inject_b", &s);
                self.b[at] = Some(s);
                self.b_pos[r] += 1;
                self.events.fifo_writes += 1;
                self.last_inject = t;
                changed = true;
            }
        }
        for k in 0..rows * cols {
            self.seen_a[k] |= self.a[k].is_some();
            self.seen_b[k] |= self.b[k].is_some();
        }
        if self.fill.is_none() && self.seen_a.iter().zip(&self.seen_b).all(|(x, y)| *x && *y) {
            self.fill = Some(t);
        }

        // comparators
        let mut products = Vec::new();
        let mut want_a = vec![false; rows * cols];
        let mut want_b = vec![false; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let k = self.idx(r, c);
                match (self.a[k], self.b[k]) {
                    (Some(a), Some(b)) if !a.used && !b.used => {
                        if a.j == b.i {
                            let value = a.value * b.value;
                            let d_c = self.a_streams[c].offset + self.b_streams[r].offset;
                            products.push(PartialProduct { value, i: a.i, j: b.j, d_c });
                            log(r, c, "multiply", &Slot { i: a.i, j: b.j, value, used: true });
                            self.a[k].as_mut().unwrap().used = true;
                            self.b[k].as_mut().unwrap().used = true;
                            want_a[k] = true;
                            want_b[k] = true;
                            self.events.multiplies += 1;
                            self.last_multiply = t;
                            changed = true;
                        } else if a.j < b.i {
                            want_a[k] = true;
                            self.events.comparator_stalls += 1;
                            log(r, c, "hold_b", &b);
                        } else {
                            want_b[k] = true;
                            self.events.comparator_stalls += 1;
                            log(r, c, "hold_a", &a);
                        }
                    }
                    (a, b) => {
                        if let Some(a) = a {
                            want_a[k] = a.used || (b.is_none() && self.a_passes(r, c, a.j));
                        }
                        if let Some(b) = b {
                            want_b[k] = b.used || (a.is_none() && self.b_passes(r, c, b.i));
                        }
                    }
                }
            }
        }

        // movement, downstream first so a vacating slot can be refilled
        let mut leave_a = vec![false; rows * cols];
        let mut leave_b = vec![false; rows * cols];
        for r in (0..rows).rev() {
            for c in (0..cols).rev() {
                let k = self.idx(r, c);
                if want_a[k] {
                    let below = k + cols;
                    leave_a[k] = r + 1 == rows || self.a[below].is_none() || leave_a[below];
                }
                if want_b[k] {
                    leave_b[k] = c + 1 == cols || self.b[k + 1].is_none() || leave_b[k + 1];
                }
            }
        }
        let mut next_a: Vec<Option<Slot>> = vec![None; rows * cols];
        let mut next_b: Vec<Option<Slot>> = vec![None; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let k = self.idx(r, c);
                if let Some(a) = self.a[k] {
                    if leave_a[k] {
                        changed = true;
                        self.last_a[k] = Some(a.j);
                        self.events.fifo_reads += 1;
                        if r + 1 < rows {
                            put(&mut next_a, k + cols, Slot { used: false, ..a }, r + 1, c, t)?;
                            self.events.fifo_writes += 1;
                            log(r, c, "forward_a", &a);
                        } else {
                            log(r, c, "discard_a", &a);
                        }
                    } else {
                        put(&mut next_a, k, a, r, c, t)?;
                    }
                }
                if let Some(b) = self.b[k] {
                    if leave_b[k] {
                        changed = true;
                        self.last_b[k] = Some(b.i);
                        self.events.fifo_reads += 1;
                        if c + 1 < cols {
                            put(&mut next_b, k + 1, Slot { used: false, ..b }, r, c + 1, t)?;
                            self.events.fifo_writes += 1;
                            log(r, c, "forward_b", &b);
                        } else {
                            log(r, c, "discard_b", &b);
                        }
                    } else {
                        put(&mut next_b, k, b, r, c, t)?;
                    }
                }
            }
        }
        self.a = next_a;
        self.b = next_b;
        Ok((products, changed))
    }

    /// A lone A element moves on unless a B element with row `j` can
    /// still arrive at this DPE.
    fn a_passes(&self, r: usize, c: usize, j: usize) -> bool {
        let (first, last) = self.b_range[r];
        let next = match self.last_b[self.idx(r, c)] {
            Some(i) => i + self.b_streams[r].stride,
            None => first,
        };
        j < next || j > last
    }

    fn b_passes(&self, r: usize, c: usize, i: usize) -> bool {
        let (first, last) = self.a_range[c];
        let next = match self.last_a[self.idx(r, c)] {
            Some(j) => j + self.a_streams[c].stride,
            None => first,
        };
        i < next || i > last
    }

    /// Steps until the grid drains, accumulating products into `bank`.
    pub fn run(&mut self, bank: &mut AccumulatorBank, mut trace: Option<&mut Vec<TraceEvent>>, lane: usize) -> Result<JobResult> {
        if self.rows == 0 || self.cols == 0 {
            return Ok(JobResult::default());
        }
        let l_max = self
            .a_streams
            .iter()
            .chain(&self.b_streams)
            .map(Stream::len)
            .max()
            .unwrap_or(0) as u64;
        let patience = (self.rows + self.cols) as u64 + l_max;
        let mut idle = 0u64;
        loop {
            let (products, changed) = self.step(trace.as_deref_mut(), lane)?;
            for p in products {
                bank.add(p.d_c, p.i, p.value);
            }
            if self.is_done() {
                break;
            }
            idle = if changed { 0 } else { idle + 1 };
            if idle > patience {
                return Err(Error::Livelock { cycle: self.cycle, idle });
            }
        }
        let total = self.cycle as i64 + 1;
        // Stream descriptors (first index, stride, length) leave the index
        // builder with the first element and are never held, so DPE (r, c)
        // knows both streams by cycle r + c + 1.
        let preload = (self.rows + self.cols - 1) as i64;
        let t_ff = self.last_inject as i64 + 1;
        let active = self
            .seen_a
            .iter()
            .zip(&self.seen_b)
            .filter(|(x, y)| **x || **y)
            .count() as u64;
        self.events.active_dpes = active;
        self.events.dpe_active_cycles = active * total as u64;
        self.events.accumulator_writes = self.events.multiplies;
        Ok(JobResult {
            timing: JobTiming {
                stages: StageCycles {
                    preload,
                    compute: t_ff - preload,
                    popout: total - t_ff,
                    total,
                },
                t_ff,
                t_pf: self.last_multiply as i64 + 1,
                measured_fill: self.fill.map(|f| f as i64),
            },
            events: self.events,
            grid_rows: self.rows,
            grid_cols: self.cols,
        })
    }
}

fn put(slots: &mut [Option<Slot>], k: usize, s: Slot, row: usize, col: usize, cycle: u64) -> Result<()> {
    if slots[k].is_some() {
        return Err(Error::FifoOverwrite { row, col, cycle });
    }
    slots[k] = Some(s);
    Ok(())
}

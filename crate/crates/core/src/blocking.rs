//! Splitting one SpMSpM into grid-sized jobs.
//!
//! Row/col blocking cuts A by column windows and B by row windows at the
//! same indices; only equal windows are paired. Diagonal blocking then
//! chunks each side's segments into groups that fit the grid (A groups
//! feed columns, B groups feed rows) and pairs every A group with every
//! B group of the same window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagmat::{first_row, DiagMatrix, Diagonal, Scalar, ZERO};
use crate::error::{Error, Result};

/// Widest window used when no cuts are given.
pub const DEFAULT_WINDOW: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// A contiguous slice of one diagonal, starting at matrix row `row_start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagSegment {
    pub offset: isize,
    pub row_start: usize,
    pub values: Vec<Scalar>,
}

impl DiagSegment {
    pub fn whole(d: &Diagonal) -> Self {
        DiagSegment {
            offset: d.offset,
            row_start: d.first_row(),
            values: d.values.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last row.
    pub fn row_end(&self) -> usize {
        self.row_start + self.values.len()
    }

    pub fn col_start(&self) -> usize {
        self.row_start.wrapping_add_signed(self.offset)
    }

    fn slice(d: &Diagonal, lo: usize, hi: usize) -> Option<Self> {
        let r0 = d.first_row();
        let lo = lo.max(r0);
        let hi = hi.min(r0 + d.values.len());
        (lo < hi).then(|| DiagSegment {
            offset: d.offset,
            row_start: lo,
            values: d.values[lo - r0..hi - r0].to_vec(),
        })
    }
}

/// Rows `r` (inclusive) where A's segment entry (r, r+dA) meets B's
/// segment entry (r+dA, r+dA+dB).
pub fn pair_rows(a: &DiagSegment, b: &DiagSegment) -> Option<(usize, usize)> {
    let lo = (a.row_start as isize).max(b.row_start as isize - a.offset);
    let hi = (a.row_end() as isize - 1).min(b.row_end() as isize - 1 - a.offset);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockGroup {
    pub group_id: usize,
    pub kind: Side,
    /// Inner-index window `[start, end)`: columns of A, rows of B.
    pub window: (usize, usize),
    pub segments: Vec<DiagSegment>,
}

impl BlockGroup {
    pub fn offsets(&self) -> Vec<isize> {
        self.segments.iter().map(|s| s.offset).collect()
    }

    pub fn max_len(&self) -> usize {
        self.segments.iter().map(DiagSegment::len).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub a: usize,
    pub b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub n: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub cuts: Vec<usize>,
    pub a_groups: Vec<BlockGroup>,
    pub b_groups: Vec<BlockGroup>,
    pub jobs: Vec<Job>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// `None` picks [`default_cuts`].
    pub cuts: Option<Vec<usize>>,
    /// Diagonals per A group; defaults to `grid_cols`.
    pub a_group_size: Option<usize>,
    /// Diagonals per B group; defaults to `grid_rows`.
    pub b_group_size: Option<usize>,
}

impl PlanConfig {
    pub fn new(grid_rows: usize, grid_cols: usize) -> Self {
        PlanConfig {
            grid_rows,
            grid_cols,
            cuts: None,
            a_group_size: None,
            b_group_size: None,
        }
    }
}

pub fn default_cuts(n: usize) -> Vec<usize> {
    if n <= DEFAULT_WINDOW {
        Vec::new()
    } else {
        (1..n.div_ceil(DEFAULT_WINDOW)).map(|k| k * DEFAULT_WINDOW).collect()
    }
}

fn windows(n: usize, cuts: &[usize]) -> Result<Vec<(usize, usize)>> {
    let mut prev = 0;
    for &c in cuts {
        if c == 0 || c >= n {
            return Err(Error::Plan(format!("cut {c} outside [1, {}]", n.saturating_sub(1))));
        }
        if c <= prev {
            return Err(Error::Plan("cuts must be strictly increasing".into()));
        }
        prev = c;
    }
    let mut bounds = vec![0];
    bounds.extend_from_slice(cuts);
    bounds.push(n);
    Ok(bounds.windows(2).map(|w| (w[0], w[1])).collect())
}

fn a_segment(d: &Diagonal, (c0, c1): (usize, usize)) -> Option<DiagSegment> {
    // columns c0..c1 are rows c0-d..c1-d
    let lo = (c0 as isize - d.offset).max(0) as usize;
    let hi = (c1 as isize - d.offset).max(0) as usize;
    DiagSegment::slice(d, lo, hi)
}

fn b_segment(d: &Diagonal, (r0, r1): (usize, usize)) -> Option<DiagSegment> {
    DiagSegment::slice(d, r0, r1)
}

/// One group per window and side, holding every diagonal's slice in that
/// window. Windows where a side has no entries produce no group.
pub fn partition_rowcol(
    a: &DiagMatrix,
    b: &DiagMatrix,
    cuts: &[usize],
) -> Result<(Vec<BlockGroup>, Vec<BlockGroup>)> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("cannot block {0}x{0} by {1}x{1}", a.dim(), b.dim())));
    }
    let mut a_groups = Vec::new();
    let mut b_groups = Vec::new();
    for w in windows(a.dim(), cuts)? {
        let segs: Vec<_> = a.diagonals().iter().filter_map(|d| a_segment(d, w)).collect();
        if !segs.is_empty() {
            a_groups.push(BlockGroup { group_id: 0, kind: Side::A, window: w, segments: segs });
        }
        let segs: Vec<_> = b.diagonals().iter().filter_map(|d| b_segment(d, w)).collect();
        if !segs.is_empty() {
            b_groups.push(BlockGroup { group_id: 0, kind: Side::B, window: w, segments: segs });
        }
    }
    Ok((a_groups, b_groups))
}

/// Ascending-offset chunks of `group_size` whole diagonals.
pub fn partition_diagonals(m: &DiagMatrix, group_size: usize, kind: Side) -> Vec<BlockGroup> {
    let whole = BlockGroup {
        group_id: 0,
        kind,
        window: (0, m.dim()),
        segments: m.diagonals().iter().map(DiagSegment::whole).collect(),
    };
    let mut groups = chunk(whole, group_size);
    for (k, g) in groups.iter_mut().enumerate() {
        g.group_id = k;
    }
    groups
}

fn chunk(group: BlockGroup, size: usize) -> Vec<BlockGroup> {
    assert!(size >= 1, "group size must be positive");
    group
        .segments
        .chunks(size)
        .map(|segs| BlockGroup {
            group_id: 0,
            kind: group.kind,
            window: group.window,
            segments: segs.to_vec(),
        })
        .collect()
}

pub fn make_plan(a: &DiagMatrix, b: &DiagMatrix, grid_rows: usize, grid_cols: usize, cuts: &[usize]) -> Result<BlockPlan> {
    make_plan_with(
        a,
        b,
        &PlanConfig {
            cuts: Some(cuts.to_vec()),
            ..PlanConfig::new(grid_rows, grid_cols)
        },
    )
}

pub fn make_plan_with(a: &DiagMatrix, b: &DiagMatrix, cfg: &PlanConfig) -> Result<BlockPlan> {
    if cfg.grid_rows == 0 || cfg.grid_cols == 0 {
        return Err(Error::Plan("grid dimensions must be positive".into()));
    }
    let a_size = cfg.a_group_size.unwrap_or(cfg.grid_cols);
    let b_size = cfg.b_group_size.unwrap_or(cfg.grid_rows);
    if a_size == 0 || a_size > cfg.grid_cols {
        return Err(Error::Plan(format!("A group size {a_size} must be in [1, {}]", cfg.grid_cols)));
    }
    if b_size == 0 || b_size > cfg.grid_rows {
        return Err(Error::Plan(format!("B group size {b_size} must be in [1, {}]", cfg.grid_rows)));
    }
    let cuts = cfg.cuts.clone().unwrap_or_else(|| default_cuts(a.dim()));
    let (a_win, b_win) = partition_rowcol(a, b, &cuts)?;

    let mut plan = BlockPlan {
        n: a.dim(),
        grid_rows: cfg.grid_rows,
        grid_cols: cfg.grid_cols,
        cuts,
        a_groups: Vec::new(),
        b_groups: Vec::new(),
        jobs: Vec::new(),
    };
    let mut next_id = 0;
    for aw in a_win {
        let Some(bw) = b_win.iter().find(|g| g.window == aw.window) else {
            continue;
        };
        let a_first = plan.a_groups.len();
        for mut g in chunk(aw, a_size) {
            g.group_id = next_id;
            next_id += 1;
            plan.a_groups.push(g);
        }
        let b_first = plan.b_groups.len();
        for mut g in chunk(bw.clone(), b_size) {
            g.group_id = next_id;
            next_id += 1;
            plan.b_groups.push(g);
        }
        for bi in b_first..plan.b_groups.len() {
            for ai in a_first..plan.a_groups.len() {
                plan.jobs.push(Job { a: ai, b: bi });
            }
        }
    }
    Ok(plan)
}

impl BlockPlan {
    pub fn job_groups(&self, job: usize) -> (&BlockGroup, &BlockGroup) {
        let j = self.jobs[job];
        (&self.a_groups[j.a], &self.b_groups[j.b])
    }

    /// Output offsets a job contributes to, ignoring numerical cancellation.
    pub fn job_output_offsets(&self, job: usize) -> Vec<isize> {
        let (ga, gb) = self.job_groups(job);
        let mut out: Vec<isize> = ga
            .segments
            .iter()
            .flat_map(|sa| {
                gb.segments
                    .iter()
                    .filter(move |sb| pair_rows(sa, sb).is_some())
                    .map(move |sb| sa.offset + sb.offset)
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Checks the grid-fit and window-matching invariants.
    pub fn validate(&self) -> Result<()> {
        for job in &self.jobs {
            let ga = self.a_groups.get(job.a).ok_or_else(|| Error::Plan("dangling A group".into()))?;
            let gb = self.b_groups.get(job.b).ok_or_else(|| Error::Plan("dangling B group".into()))?;
            if ga.window != gb.window {
                return Err(Error::Plan(format!(
                    "job pairs window {:?} with {:?}",
                    ga.window, gb.window
                )));
            }
            if ga.segments.len() > self.grid_cols {
                return Err(Error::GridCapacity {
                    side: "A",
                    axis: "columns",
                    segments: ga.segments.len(),
                    capacity: self.grid_cols,
                });
            }
            if gb.segments.len() > self.grid_rows {
                return Err(Error::GridCapacity {
                    side: "B",
                    axis: "rows",
                    segments: gb.segments.len(),
                    capacity: self.grid_rows,
                });
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> PlanSummary {
        let group = |g: &BlockGroup| GroupSummary {
            group_id: g.group_id,
            kind: g.kind,
            window: g.window,
            offsets: g.offsets(),
            lengths: g.segments.iter().map(DiagSegment::len).collect(),
        };
        PlanSummary {
            n: self.n,
            grid_rows: self.grid_rows,
            grid_cols: self.grid_cols,
            cuts: self.cuts.clone(),
            a_groups: self.a_groups.iter().map(group).collect(),
            b_groups: self.b_groups.iter().map(group).collect(),
            jobs: self
                .jobs
                .iter()
                .map(|j| [self.a_groups[j.a].group_id, self.b_groups[j.b].group_id])
                .collect(),
        }
    }
}

/// Debug view of a plan without the numeric payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanSummary {
    pub n: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub cuts: Vec<usize>,
    pub a_groups: Vec<GroupSummary>,
    pub b_groups: Vec<GroupSummary>,
    pub jobs: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_id: usize,
    pub kind: Side,
    pub window: (usize, usize),
    pub offsets: Vec<isize>,
    pub lengths: Vec<usize>,
}

/// Per-output-diagonal partial sums of one job, each spanning only the
/// rows the job can touch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JobOutput {
    pub partials: Vec<DiagSegment>,
}

/// Accumulators for one job, sized from the static pair ranges.
#[derive(Clone, Debug)]
pub struct AccumulatorBank {
    accs: BTreeMap<isize, DiagSegment>,
    pub writes: u64,
}

impl AccumulatorBank {
    pub fn for_groups(a: &[DiagSegment], b: &[DiagSegment]) -> Self {
        let mut span: BTreeMap<isize, (usize, usize)> = BTreeMap::new();
        for sa in a {
            for sb in b {
                if let Some((lo, hi)) = pair_rows(sa, sb) {
                    let e = span.entry(sa.offset + sb.offset).or_insert((lo, hi));
                    e.0 = e.0.min(lo);
                    e.1 = e.1.max(hi);
                }
            }
        }
        let accs = span
            .into_iter()
            .map(|(d, (lo, hi))| {
                (
                    d,
                    DiagSegment {
                        offset: d,
                        row_start: lo,
                        values: vec![ZERO; hi - lo + 1],
                    },
                )
            })
            .collect();
        AccumulatorBank { accs, writes: 0 }
    }

    pub fn offsets(&self) -> Vec<isize> {
        self.accs.keys().copied().collect()
    }

    /// Adds a partial product for output row `row` on diagonal `dc`.
    pub fn add(&mut self, dc: isize, row: usize, value: Scalar) {
        let acc = self
            .accs
            .get_mut(&dc)
            .unwrap_or_else(|| panic!("no accumulator for output diagonal {dc}"));
        acc.values[row - acc.row_start] += value;
        self.writes += 1;
    }

    pub fn finish(self) -> JobOutput {
        JobOutput {
            partials: self.accs.into_values().collect(),
        }
    }
}

/// Functional product of one job, pairs in ascending (dA, dB) order.
pub fn job_product(plan: &BlockPlan, job: usize) -> JobOutput {
    let (ga, gb) = plan.job_groups(job);
    let mut bank = AccumulatorBank::for_groups(&ga.segments, &gb.segments);
    for sa in &ga.segments {
        for sb in &gb.segments {
            if let Some((lo, hi)) = pair_rows(sa, sb) {
                let dc = sa.offset + sb.offset;
                for r in lo..=hi {
                    let av = sa.values[r - sa.row_start];
                    let bv = sb.values[(r as isize + sa.offset) as usize - sb.row_start];
                    bank.add(dc, r, av * bv);
                }
            }
        }
    }
    bank.finish()
}

/// Sums job outputs in the given order; exact-zero diagonals are dropped.
pub fn merge_outputs<'a>(n: usize, outputs: impl IntoIterator<Item = &'a JobOutput>) -> Result<DiagMatrix> {
    let mut full: BTreeMap<isize, Vec<Scalar>> = BTreeMap::new();
    for out in outputs {
        for p in &out.partials {
            let values = full
                .entry(p.offset)
                .or_insert_with(|| vec![ZERO; n - p.offset.unsigned_abs()]);
            let base = p.row_start - first_row(p.offset);
            for (k, v) in p.values.iter().enumerate() {
                values[base + k] += v;
            }
        }
    }
    let diagonals = full
        .into_iter()
        .filter(|(_, v)| v.iter().any(|x| *x != ZERO))
        .map(|(offset, values)| Diagonal { offset, values })
        .collect();
    DiagMatrix::new(n, diagonals)
}

/// Runs every job functionally and merges in schedule order.
pub fn execute_functional(plan: &BlockPlan) -> Result<DiagMatrix> {
    let outputs: Vec<JobOutput> = (0..plan.jobs.len()).map(|j| job_product(plan, j)).collect();
    merge_outputs(plan.n, &outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagmat::ONE;
    use crate::spmspm::diag_matmul;
    use num_complex::Complex64;

    fn tri(n: usize) -> DiagMatrix {
        let diagonals = (-1..=1)
            .map(|d: isize| Diagonal {
                offset: d,
                values: (0..n - d.unsigned_abs())
                    .map(|k| Complex64::new(1.0 + k as f64 + 10.0 * d as f64, 0.5))
                    .collect(),
            })
            .collect();
        DiagMatrix::new(n, diagonals).unwrap()
    }

    #[test]
    fn rowcol_worked_example() {
        let m = tri(5);
        let (ag, bg) = partition_rowcol(&m, &m, &[3]).unwrap();
        assert_eq!(ag.iter().map(|g| g.window).collect::<Vec<_>>(), vec![(0, 3), (3, 5)]);
        assert_eq!(bg.iter().map(|g| g.window).collect::<Vec<_>>(), vec![(0, 3), (3, 5)]);
        let lens = |g: &BlockGroup| g.segments.iter().map(DiagSegment::len).max().unwrap();
        assert_eq!((lens(&ag[0]), lens(&ag[1])), (3, 2));
        assert_eq!((lens(&bg[0]), lens(&bg[1])), (3, 2));
        // A column window [0,3) on diagonal +1 covers columns 1, 2
        let s = &ag[0].segments[2];
        assert_eq!((s.offset, s.row_start, s.col_start(), s.len()), (1, 0, 1, 2));
    }

    #[test]
    fn no_cuts_is_whole_diagonals() {
        let m = tri(6);
        let (ag, bg) = partition_rowcol(&m, &m, &[]).unwrap();
        assert_eq!(ag.len(), 1);
        assert_eq!(bg.len(), 1);
        assert_eq!(ag[0].segments, m.diagonals().iter().map(DiagSegment::whole).collect::<Vec<_>>());
    }

    #[test]
    fn bad_cuts() {
        let m = tri(5);
        assert!(matches!(partition_rowcol(&m, &m, &[3, 2]), Err(Error::Plan(_))));
        assert!(matches!(partition_rowcol(&m, &m, &[0]), Err(Error::Plan(_))));
        assert!(matches!(partition_rowcol(&m, &m, &[5]), Err(Error::Plan(_))));
    }

    #[test]
    fn diagonal_groups() {
        let m = tri(5);
        let groups = partition_diagonals(&m, 2, Side::A);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].offsets(), vec![-1, 0]);
        assert_eq!(groups[1].offsets(), vec![1]);
        assert_eq!(partition_diagonals(&m, 3, Side::B).len(), 1);
        assert_eq!(partition_diagonals(&m, 99, Side::B).len(), 1);

        let diagonals = (-391..=391)
            .map(|d: isize| Diagonal { offset: d, values: vec![ONE; 1000 - d.unsigned_abs()] })
            .collect();
        let big = DiagMatrix::new(1000, diagonals).unwrap();
        assert_eq!(big.nnzd(), 783);
        assert_eq!(partition_diagonals(&big, 64, Side::A).len(), 13);
    }

    #[test]
    fn job_order_is_b_major() {
        let m = tri(5);
        let plan = make_plan(&m, &m, 2, 2, &[]).unwrap();
        assert_eq!(plan.a_groups.len(), 2);
        assert_eq!(plan.b_groups.len(), 2);
        let order: Vec<(usize, usize)> = plan.jobs.iter().map(|j| (j.a, j.b)).collect();
        assert_eq!(order, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
        plan.validate().unwrap();

        let single = make_plan(&m, &m, 3, 3, &[]).unwrap();
        assert_eq!(single.jobs.len(), 1);
    }

    #[test]
    fn blocked_product_matches_unblocked() {
        let m = tri(9);
        let expected = diag_matmul(&m, &m).unwrap();
        for cuts in [vec![], vec![4], vec![1, 2, 7], vec![3, 6]] {
            for (r, c) in [(1, 1), (2, 1), (1, 3), (3, 3)] {
                let plan = make_plan(&m, &m, r, c, &cuts).unwrap();
                plan.validate().unwrap();
                let got = execute_functional(&plan).unwrap();
                let diff = got.to_dense().rel_frobenius_diff(&expected.to_dense());
                assert!(diff < 1e-14, "cuts {cuts:?} grid {r}x{c}: {diff}");
            }
        }
    }

    #[test]
    fn explicit_group_sizes_checked() {
        let m = tri(5);
        let cfg = PlanConfig { a_group_size: Some(3), ..PlanConfig::new(2, 2) };
        assert!(matches!(make_plan_with(&m, &m, &cfg), Err(Error::Plan(_))));
        let cfg = PlanConfig { a_group_size: Some(1), b_group_size: Some(1), ..PlanConfig::new(2, 2) };
        assert_eq!(make_plan_with(&m, &m, &cfg).unwrap().jobs.len(), 9);
    }

    #[test]
    fn default_cut_rule() {
        assert!(default_cuts(4096).is_empty());
        assert_eq!(default_cuts(10000), vec![4096, 8192]);
    }

    #[test]
    fn summary_serializes() {
        let m = tri(5);
        let plan = make_plan(&m, &m, 2, 2, &[3]).unwrap();
        let json = serde_json::to_string(&plan.summary()).unwrap();
        assert!(json.contains("\"jobs\""));
        assert_eq!(plan.summary().jobs.len(), plan.jobs.len());
    }
}

//! One full product on the modeled accelerator: plan, simulate every job,
//! charge the memory system in schedule order, merge partial outputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocking::{make_plan_with, merge_outputs, AccumulatorBank, BlockPlan, JobOutput, PlanConfig};
use crate::dataflow::{dmax_info, predict_cycles, run_job, JobEvents, JobResult, SimConfig, StageCycles, TraceEvent};
use crate::diagmat::DiagMatrix;
use crate::error::Result;
use crate::memory::{CacheConfig, MemStats, MemorySystem};

pub const DEFAULT_GRID: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    pub plan: PlanConfig,
    pub sim: SimConfig,
    pub cache: CacheConfig,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            plan: PlanConfig::new(DEFAULT_GRID, DEFAULT_GRID),
            sim: SimConfig::default(),
            cache: CacheConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub a_group: usize,
    pub b_group: usize,
    pub rows: usize,
    pub cols: usize,
    pub cycles: StageCycles,
    /// Closed-form total for the same job.
    pub predicted_total: i64,
    pub active_dpes: u64,
    pub comparator_stalls: u64,
    pub mem: MemStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductRun {
    pub c: DiagMatrix,
    /// Stage cycles summed over jobs run back to back.
    pub cycles: StageCycles,
    pub events: JobEvents,
    pub mem: MemStats,
    /// Largest number of DPEs any single job used.
    pub peak_active_dpes: u64,
    pub jobs: Vec<JobRecord>,
}

/// Simulates `a * b`. Jobs run in parallel unless a trace is requested;
/// memory charging and output merging always follow schedule order.
pub fn simulate_product(
    a: &DiagMatrix,
    b: &DiagMatrix,
    cfg: &AccelConfig,
    mem: &mut MemorySystem,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<ProductRun> {
    let plan = make_plan_with(a, b, &cfg.plan)?;
    plan.validate()?;
    simulate_plan(&plan, &cfg.sim, mem, trace)
}

pub fn simulate_plan(
    plan: &BlockPlan,
    sim: &SimConfig,
    mem: &mut MemorySystem,
    trace: Option<&mut Vec<TraceEvent>>,
) -> Result<ProductRun> {
    let run_one = |job: usize, trace: Option<&mut Vec<TraceEvent>>| -> Result<(JobResult, JobOutput)> {
        let (ga, gb) = plan.job_groups(job);
        let mut bank = AccumulatorBank::for_groups(&ga.segments, &gb.segments);
        let res = run_job(&ga.segments, &gb.segments, sim, &mut bank, trace)?;
        Ok((res, bank.finish()))
    };
    let results: Vec<(JobResult, JobOutput)> = match trace {
        Some(tr) => {
            let mut out = Vec::with_capacity(plan.jobs.len());
            for job in 0..plan.jobs.len() {
                let start = tr.len();
                out.push(run_one(job, Some(&mut *tr))?);
                for e in &mut tr[start..] {
                    e.job = job;
                }
            }
            out
        }
        None => (0..plan.jobs.len())
            .into_par_iter()
            .map(|job| run_one(job, None))
            .collect::<Result<_>>()?,
    };

    let mut cycles = StageCycles::default();
    let mut events = JobEvents::default();
    let mut mem_total = MemStats::default();
    let mut peak = 0;
    let mut jobs = Vec::with_capacity(results.len());
    for (job, (res, _)) in results.iter().enumerate() {
        let (ga, gb) = plan.job_groups(job);
        let m = mem.charge_job(plan, job);
        mem_total += m;
        cycles += res.timing.stages;
        events += res.events;
        peak = peak.max(res.events.active_dpes);
        let predicted_total = dmax_info(&ga.segments, &gb.segments, sim.feed)
            .map(|d| predict_cycles(gb.segments.len(), ga.segments.len(), d).stages.total)
            .unwrap_or(0);
        jobs.push(JobRecord {
            a_group: ga.group_id,
            b_group: gb.group_id,
            rows: res.grid_rows,
            cols: res.grid_cols,
            cycles: res.timing.stages,
            predicted_total,
            active_dpes: res.events.active_dpes,
            comparator_stalls: res.events.comparator_stalls,
            mem: m,
        });
    }
    let c = merge_outputs(plan.n, results.iter().map(|(_, o)| o))?;
    Ok(ProductRun {
        c,
        cycles,
        events,
        mem: mem_total,
        peak_active_dpes: peak,
        jobs,
    })
}

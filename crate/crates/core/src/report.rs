//! Run summaries and the event-count energy proxy.

use serde::{Deserialize, Serialize};

use crate::dataflow::{JobEvents, StageCycles};
use crate::hamsim::IterationRecord;
use crate::memory::MemStats;

pub const SCHEMA_VERSION: u32 = 1;

/// Synthesized DPE power and its multiplier and FIFO shares, in mW,
/// at the modeled clock.
pub const DPE_POWER_MW: f64 = 4.3877;
pub const MULTIPLIER_POWER_MW: f64 = 1.6354;
pub const FIFO_POWER_MW: f64 = 0.7568;
pub const CLOCK_MHZ: f64 = 700.0;

/// Picojoules per event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub dpe_active_cycle: f64,
    pub multiply: f64,
    pub fifo_rw: f64,
    pub cache_access: f64,
    pub dram_access: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        // mW / MHz is nJ per cycle
        let per_cycle = |mw: f64| mw / CLOCK_MHZ * 1000.0;
        EnergyModel {
            dpe_active_cycle: per_cycle(DPE_POWER_MW),
            multiply: per_cycle(MULTIPLIER_POWER_MW),
            fifo_rw: per_cycle(FIFO_POWER_MW),
            cache_access: 5.0,
            dram_access: 640.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounters {
    pub dpe_active_cycles: u64,
    pub multiplies: u64,
    pub fifo_rw: u64,
    pub cache_accesses: u64,
    pub dram_accesses: u64,
}

impl EventCounters {
    pub fn from_parts(events: &JobEvents, mem: &MemStats) -> Self {
        EventCounters {
            dpe_active_cycles: events.dpe_active_cycles,
            multiplies: events.multiplies,
            fifo_rw: events.fifo_rw(),
            cache_accesses: mem.accesses(),
            dram_accesses: mem.dram_reads + mem.dram_writes,
        }
    }
}

pub fn energy(c: &EventCounters, m: &EnergyModel) -> f64 {
    c.dpe_active_cycles as f64 * m.dpe_active_cycle
        + c.multiplies as f64 * m.multiply
        + c.fifo_rw as f64 * m.fifo_rw
        + c.cache_accesses as f64 * m.cache_access
        + c.dram_accesses as f64 * m.dram_access
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycles {
    pub preload: i64,
    pub compute: i64,
    pub popout: i64,
    pub total: i64,
}

impl From<StageCycles> for Cycles {
    fn from(s: StageCycles) -> Self {
        Cycles {
            preload: s.preload,
            compute: s.compute,
            popout: s.popout,
            total: s.total,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Events {
    pub multiplies: u64,
    pub fifo_rw: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub dram_reads: u64,
    pub dram_writes: u64,
    pub accumulator_writes: u64,
    pub comparator_stalls: u64,
    pub dpe_active_cycles: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: u32,
    pub workload: String,
    pub grid: GridDims,
    pub cycles: Cycles,
    pub events: Events,
    pub hit_rate: f64,
    pub energy_pj: f64,
    pub active_dpes: u64,
    pub mem_stall_cycles: u64,
    /// Dataflow cycles plus memory stalls, run back to back.
    pub serialized_total: i64,
    pub iterations: Vec<IterationRecord>,
}

impl SimReport {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        workload: &str,
        grid: GridDims,
        cycles: StageCycles,
        events: &JobEvents,
        mem: &MemStats,
        active_dpes: u64,
        model: &EnergyModel,
        iterations: Vec<IterationRecord>,
    ) -> Self {
        SimReport {
            schema: SCHEMA_VERSION,
            workload: workload.to_string(),
            grid,
            cycles: cycles.into(),
            events: Events {
                multiplies: events.multiplies,
                fifo_rw: events.fifo_rw(),
                cache_hits: mem.hits,
                cache_misses: mem.misses,
                dram_reads: mem.dram_reads,
                dram_writes: mem.dram_writes,
                accumulator_writes: events.accumulator_writes,
                comparator_stalls: events.comparator_stalls,
                dpe_active_cycles: events.dpe_active_cycles,
            },
            hit_rate: mem.hit_rate(),
            energy_pj: energy(&EventCounters::from_parts(events, mem), model),
            active_dpes,
            mem_stall_cycles: mem.stall_cycles,
            serialized_total: cycles.total + mem.stall_cycles as i64,
            iterations,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Summary as a two-line CSV.
    pub fn summary_csv(&self) -> String {
        let c = &self.cycles;
        let e = &self.events;
        let header = "workload,grid_rows,grid_cols,preload,compute,popout,total,multiplies,fifo_rw,\
cache_hits,cache_misses,dram_reads,dram_writes,hit_rate,energy_pj,active_dpes,mem_stall_cycles";
        format!(
            "{header}\n{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&self.workload),
            self.grid.rows,
            self.grid.cols,
            c.preload,
            c.compute,
            c.popout,
            c.total,
            e.multiplies,
            e.fifo_rw,
            e.cache_hits,
            e.cache_misses,
            e.dram_reads,
            e.dram_writes,
            self.hit_rate,
            self.energy_pj,
            self.active_dpes,
            self.mem_stall_cycles
        )
    }

    /// One row per iteration: k, nnzd, nnze, savings, cycles_total, hit_rate.
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from("k,nnzd,nnze,savings,cycles_total,hit_rate\n");
        for r in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.k, r.nnzd, r.nnze, r.savings, r.stage_cycles.total, r.hit_rate
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        if self.iterations.is_empty() {
            self.summary_csv()
        } else {
            self.iterations_csv()
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

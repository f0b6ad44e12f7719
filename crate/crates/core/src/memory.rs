//! Set-associative LRU cache over diagonal block groups, backed by a
//! fixed-latency DRAM. One line holds one block group regardless of size.

use std::collections::HashMap;
use std::ops::{AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::blocking::BlockPlan;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub sets: usize,
    pub ways: usize,
    pub hit_cycles: u64,
    pub miss_penalty_cycles: u64,
    pub dram_cycles: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            sets: 2,
            ways: 2,
            hit_cycles: 1,
            miss_penalty_cycles: 5,
            dram_cycles: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineKind {
    AGroup,
    BGroup,
    CPartial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineId {
    pub kind: LineKind,
    pub group_id: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemStats {
    pub hits: u64,
    pub misses: u64,
    pub dram_reads: u64,
    pub dram_writes: u64,
    pub stall_cycles: u64,
}

impl MemStats {
    pub fn accesses(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        if self.accesses() == 0 {
            0.0
        } else {
            self.hits as f64 / self.accesses() as f64
        }
    }
}

impl AddAssign for MemStats {
    fn add_assign(&mut self, o: Self) {
        self.hits += o.hits;
        self.misses += o.misses;
        self.dram_reads += o.dram_reads;
        self.dram_writes += o.dram_writes;
        self.stall_cycles += o.stall_cycles;
    }
}

impl Sub for MemStats {
    type Output = MemStats;
    fn sub(self, o: Self) -> MemStats {
        MemStats {
            hits: self.hits - o.hits,
            misses: self.misses - o.misses,
            dram_reads: self.dram_reads - o.dram_reads,
            dram_writes: self.dram_writes - o.dram_writes,
            stall_cycles: self.stall_cycles - o.stall_cycles,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Line {
    id: LineId,
    dirty: bool,
}

/// Write-allocate, write-back. Each set is ordered LRU first.
#[derive(Clone, Debug)]
pub struct Cache {
    cfg: CacheConfig,
    sets: Vec<Vec<Line>>,
    stats: MemStats,
}

impl Cache {
    pub fn new(cfg: CacheConfig) -> Result<Self> {
        if cfg.sets == 0 || cfg.ways == 0 {
            return Err(Error::Domain("cache needs at least one set and one way".into()));
        }
        Ok(Cache {
            cfg,
            sets: vec![Vec::with_capacity(cfg.ways); cfg.sets],
            stats: MemStats::default(),
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn stats(&self) -> MemStats {
        self.stats
    }

    /// Lines of a set, least recently used first.
    pub fn resident(&self, set: usize) -> Vec<LineId> {
        self.sets[set].iter().map(|l| l.id).collect()
    }

    /// Returns the access latency in cycles.
    pub fn access(&mut self, id: LineId, rw: Access) -> u64 {
        let cfg = self.cfg;
        let set = &mut self.sets[id.group_id % cfg.sets];
        let latency;
        if let Some(pos) = set.iter().position(|l| l.id.group_id == id.group_id) {
            let mut line = set.remove(pos);
            line.id.kind = id.kind;
            line.dirty |= rw == Access::Write;
            set.push(line);
            self.stats.hits += 1;
            latency = cfg.hit_cycles;
        } else {
            self.stats.misses += 1;
            self.stats.dram_reads += 1;
            let mut lat = cfg.miss_penalty_cycles + cfg.dram_cycles;
            if set.len() == cfg.ways {
                let victim = set.remove(0);
                if victim.dirty {
                    self.stats.dram_writes += 1;
                    lat += cfg.dram_cycles;
                }
            }
            set.push(Line { id, dirty: rw == Access::Write });
            latency = lat;
        }
        self.stats.stall_cycles += latency;
        latency
    }
}

/// Content key of a cached block group: which matrix, which index window,
/// and which offset span. Equal keys are the same line, so a product
/// written as one C line is found again when it is read back as A.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct LineKey {
    tag: u64,
    window: (usize, usize),
    lo: isize,
    hi: isize,
}

/// Matrix identities for the next product's operands and result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixTags {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl Default for MatrixTags {
    fn default() -> Self {
        MatrixTags { a: 1, b: 2, c: 3 }
    }
}

/// Cache plus the registry assigning stable line ids to block groups.
#[derive(Clone, Debug)]
pub struct MemorySystem {
    pub cache: Cache,
    registry: HashMap<LineKey, usize>,
    pub tags: MatrixTags,
}

impl MemorySystem {
    pub fn new(cfg: CacheConfig) -> Result<Self> {
        Ok(MemorySystem {
            cache: Cache::new(cfg)?,
            registry: HashMap::new(),
            tags: MatrixTags::default(),
        })
    }

    fn line(&mut self, kind: LineKind, tag: u64, window: (usize, usize), offsets: &[isize]) -> LineId {
        let key = LineKey {
            tag,
            window,
            lo: offsets.first().copied().unwrap_or(0),
            hi: offsets.last().copied().unwrap_or(0),
        };
        let next = self.registry.len();
        let group_id = *self.registry.entry(key).or_insert(next);
        LineId { kind, group_id }
    }

    /// One read per operand group at job start, then one write per
    /// touched output diagonal into the job's C-partial line. Reuse
    /// inside the grid costs nothing.
    pub fn charge_job(&mut self, plan: &BlockPlan, job: usize) -> MemStats {
        let before = self.cache.stats();
        let (ga, gb) = plan.job_groups(job);
        let (window, a_offs, b_offs) = (ga.window, ga.offsets(), gb.offsets());
        let out = plan.job_output_offsets(job);
        let tags = self.tags;
        let a_line = self.line(LineKind::AGroup, tags.a, window, &a_offs);
        let b_line = self.line(LineKind::BGroup, tags.b, gb.window, &b_offs);
        self.cache.access(a_line, Access::Read);
        self.cache.access(b_line, Access::Read);
        if !out.is_empty() {
            let c_line = self.line(LineKind::CPartial, tags.c, window, &out);
            for _ in &out {
                self.cache.access(c_line, Access::Write);
            }
        }
        self.cache.stats() - before
    }
}

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diagsim_core::accel::{simulate_plan, AccelConfig};
use diagsim_core::blocking::{make_plan_with, PlanConfig};
use diagsim_core::dataflow::{SimConfig, TraceEvent};
use diagsim_core::hamsim::{taylor_expm, TaylorConfig};
use diagsim_core::io::{read_path, write_format, Format};
use diagsim_core::memory::{CacheConfig, MemorySystem};
use diagsim_core::pauli::{gen_benchmark, Model, ModelParams};
use diagsim_core::report::{EnergyModel, GridDims, SimReport};
use diagsim_core::spmspm::{dense_matmul_oracle, diag_matmul};
use diagsim_core::{DiagMatrix, Diagonal, Scalar};

use crate::config::Config;
use crate::{AccelArgs, Cli, Command, ConvertArgs, ExpmArgs, GenArgs, MatmulArgs, ReportArgs, SimulateArgs, Usage, Verify};

pub const CHECK_LIMIT: usize = 1024;
const CHECK_TOL: f64 = 1e-12;
const DEFAULT_T: f64 = 0.1;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(n) = cfg.pick(cli.threads, "threads")? {
        if n == 0 {
            bail!(Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cfg.pick(cli.seed, "seed")?.unwrap_or(0);
    match cli.command {
        Command::Gen(a) => gen(a, &cfg, seed),
        Command::Convert(a) => convert(a, &cfg),
        Command::Matmul(a) => matmul(a, &cfg),
        Command::Simulate(a) => simulate(a, &cfg),
        Command::Expm(a) => expm(a, &cfg),
        Command::Report(a) => report(a),
    }
}

/// Writes through a temporary file in the target directory so a failed
/// run never leaves a partial output behind. `None` writes to stdout.
fn write_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let Some(path) = path else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        body(&mut lock)?;
        return Ok(lock.flush()?);
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn parse_format(name: &str) -> Result<Format> {
    match name {
        "bin" | "binary" | "diaq" => Ok(Format::Binary),
        "json" => Ok(Format::Json),
        "mtx" | "mm" | "matrix-market" => Ok(Format::MatrixMarket),
        other => bail!(Usage(format!("unknown format `{other}` (binary, json, mtx)"))),
    }
}

fn output_format(flag: Option<String>, cfg: &Config, path: Option<&Path>) -> Result<Format> {
    match cfg.pick(flag, "format")? {
        Some(f) => parse_format(&f),
        None => Ok(path.map(Format::from_path).unwrap_or(Format::Json)),
    }
}

fn write_matrix(m: &DiagMatrix, path: Option<&Path>, format: Format) -> Result<()> {
    if path.is_none() && format == Format::Binary {
        bail!(Usage("binary output needs --output".into()));
    }
    write_output(path, |w| Ok(write_format(m, format, w)?))
}

fn load(path: &Path) -> Result<DiagMatrix> {
    read_path(path).with_context(|| format!("reading {}", path.display()))
}

fn model_params(pairs: &[String]) -> Result<ModelParams> {
    let mut params = ModelParams::default();
    for p in pairs {
        let Some((k, v)) = p.split_once('=') else {
            bail!(Usage(format!("model parameter `{p}` is not KEY=VALUE")));
        };
        params.set(k.trim(), v.trim())?;
    }
    Ok(params)
}

fn random_matrix(n: usize, diags: usize, seed: u64) -> Result<DiagMatrix> {
    if n == 0 {
        bail!(Usage("dimension must be positive".into()));
    }
    let slots = 2 * n - 1;
    if diags > slots {
        bail!(Usage(format!("{diags} diagonals do not fit in dimension {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets: Vec<isize> = sample(&mut rng, slots, diags)
        .into_iter()
        .map(|s| s as isize - (n as isize - 1))
        .collect();
    offsets.sort_unstable();
    let diagonals = offsets
        .into_iter()
        .map(|d| Diagonal {
            offset: d,
            values: (0..n - d.unsigned_abs())
                .map(|_| Scalar::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        })
        .collect();
    Ok(DiagMatrix::new(n, diagonals)?)
}

fn gen(a: GenArgs, cfg: &Config, seed: u64) -> Result<()> {
    let format = output_format(a.format, cfg, a.output.as_deref())?;
    let (label, m) = if a.model.eq_ignore_ascii_case("random") {
        (format!("random n={} seed={seed}", a.size), random_matrix(a.size, a.diags, seed)?)
    } else {
        let model: Model = a.model.parse()?;
        let params = model_params(&a.params)?;
        (format!("{model} qubits={}", a.size), gen_benchmark(model, a.size, &params)?)
    };
    write_matrix(&m, a.output.as_deref(), format)?;
    if a.output.is_some() {
        println!("{label}: {m}");
    }
    Ok(())
}

fn convert(a: ConvertArgs, cfg: &Config) -> Result<()> {
    let m = load(&a.input)?;
    let format = output_format(a.format, cfg, Some(&a.output))?;
    write_matrix(&m, Some(&a.output), format)
}

fn matmul(a: MatmulArgs, cfg: &Config) -> Result<()> {
    let (ma, mb) = (load(&a.a)?, load(&a.b)?);
    if a.check && ma.dim() > CHECK_LIMIT {
        bail!(Usage(format!("--check densifies; dimension {} exceeds {CHECK_LIMIT}", ma.dim())));
    }
    let c = diag_matmul(&ma, &mb)?;
    if a.check {
        let oracle = dense_matmul_oracle(&ma.to_dense(), &mb.to_dense())?;
        let diff = c.to_dense().rel_frobenius_diff(&oracle);
        if diff.is_nan() || diff > CHECK_TOL {
            bail!(Verify(format!("dense check failed: relative difference {diff:.3e}")));
        }
        eprintln!("check: pass (relative difference {diff:.3e})");
    }
    let format = output_format(a.format, cfg, a.output.as_deref())?;
    write_matrix(&c, a.output.as_deref(), format)?;
    if a.output.is_some() {
        println!("{c}");
    }
    Ok(())
}

fn parse_cuts(s: &str) -> Result<Vec<usize>> {
    if s.trim() == "none" || s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|c| c.trim().parse().map_err(|_| Usage(format!("bad cut `{c}`")).into()))
        .collect()
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Usage(format!("bad grid `{s}`, expected RxC"));
    let (r, c) = s.split_once(['x', 'X']).unwrap_or((s, s));
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

impl AccelArgs {
    pub fn resolve(&self, cfg: &Config) -> Result<AccelConfig> {
        let mut accel = AccelConfig::default();
        if let Some(g) = cfg.pick(self.grid.clone(), "grid")? {
            (accel.plan.grid_rows, accel.plan.grid_cols) = parse_grid(&g)?;
        }
        let PlanConfig { grid_rows, grid_cols, .. } = accel.plan;
        accel.plan.grid_rows = cfg.pick(self.grid_rows, "grid-rows")?.unwrap_or(grid_rows);
        accel.plan.grid_cols = cfg.pick(self.grid_cols, "grid-cols")?.unwrap_or(grid_cols);
        if accel.plan.grid_rows == 0 || accel.plan.grid_cols == 0 {
            bail!(Usage("grid sides must be positive".into()));
        }
        accel.plan.a_group_size = cfg.pick(self.a_group, "a-group")?;
        accel.plan.b_group_size = cfg.pick(self.b_group, "b-group")?;
        if let Some(c) = cfg.pick(self.cuts.clone(), "cuts")? {
            accel.plan.cuts = Some(parse_cuts(&c)?);
        }
        accel.sim = SimConfig {
            feed: cfg.pick(self.feed, "feed")?.unwrap_or_default(),
            lanes: cfg.pick(self.lanes, "lanes")?.unwrap_or(1),
        };
        if accel.sim.lanes == 0 {
            bail!(Usage("--lanes must be at least 1".into()));
        }
        let d = CacheConfig::default();
        accel.cache = CacheConfig {
            sets: cfg.pick(self.cache_sets, "cache-sets")?.unwrap_or(d.sets),
            ways: cfg.pick(self.cache_ways, "cache-ways")?.unwrap_or(d.ways),
            hit_cycles: cfg.pick(self.hit_cycles, "hit-cycles")?.unwrap_or(d.hit_cycles),
            miss_penalty_cycles: cfg.pick(self.miss_penalty, "miss-penalty")?.unwrap_or(d.miss_penalty_cycles),
            dram_cycles: cfg.pick(self.dram_cycles, "dram-cycles")?.unwrap_or(d.dram_cycles),
        };
        if accel.cache.sets == 0 || accel.cache.ways == 0 {
            bail!(Usage("cache needs at least one set and one way".into()));
        }
        Ok(accel)
    }
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_report(r: &SimReport, json: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    write_output(json, |w| Ok(w.write_all(r.to_json().as_bytes())?))?;
    if let Some(p) = csv {
        write_output(Some(p), |w| Ok(w.write_all(r.to_csv().as_bytes())?))?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, cfg: &Config) -> Result<()> {
    let accel = a.accel.resolve(cfg)?;
    let (ma, mb) = (load(&a.a)?, load(&a.b)?);
    let plan = make_plan_with(&ma, &mb, &accel.plan)?;
    plan.validate()?;
    if let Some(p) = &a.plan_dump {
        let summary = plan.summary();
        write_output(Some(p), |w| {
            serde_json::to_writer_pretty(&mut *w, &summary)?;
            Ok(writeln!(w)?)
        })?;
    }
    let mut mem = MemorySystem::new(accel.cache)?;
    let mut trace: Vec<TraceEvent> = Vec::new();
    let run = simulate_plan(&plan, &accel.sim, &mut mem, a.trace.as_ref().map(|_| &mut trace))?;
    if let Some(p) = &a.trace {
        write_output(Some(p), |w| {
            for e in &trace {
                serde_json::to_writer(&mut *w, e)?;
                writeln!(w)?;
            }
            Ok(())
        })?;
    }

    let reference = diag_matmul(&ma, &mb)?;
    let diff = run.c.to_dense().rel_frobenius_diff(&reference.to_dense());
    if diff.is_nan() || diff > CHECK_TOL {
        bail!(Verify(format!("simulator disagrees with the functional kernel: relative difference {diff:.3e}")));
    }

    let grid = GridDims {
        rows: run.jobs.iter().map(|j| j.rows).max().unwrap_or(0),
        cols: run.jobs.iter().map(|j| j.cols).max().unwrap_or(0),
    };
    let workload = format!("simulate {} x {}", file_label(&a.a), file_label(&a.b));
    let report = SimReport::build(
        &workload,
        grid,
        run.cycles,
        &run.events,
        &run.mem,
        run.peak_active_dpes,
        &EnergyModel::default(),
        Vec::new(),
    );
    if let Some(p) = &a.product {
        write_matrix(&run.c, Some(p), Format::from_path(p))?;
    }
    write_report(&report, a.output.as_deref(), a.csv.as_deref())?;
    if a.output.is_some() {
        println!(
            "{} jobs, {} cycles ({} memory stall cycles), hit rate {:.3}",
            run.jobs.len(),
            report.cycles.total,
            report.mem_stall_cycles,
            report.hit_rate
        );
    }
    Ok(())
}

/// NNZD of the fourth power of the 10-qubit Heisenberg chain.
const HEISENBERG10_H4_NNZD: usize = 783;

fn expm(a: ExpmArgs, cfg: &Config) -> Result<()> {
    let accel = a.accel.resolve(cfg)?;
    let (h, workload, reference) = match (&a.input, &a.model) {
        (Some(p), _) => (load(p)?, format!("expm {}", file_label(p)), None),
        (None, Some(name)) => {
            let model: Model = name.parse()?;
            let qubits = a.qubits.ok_or_else(|| Usage("--model needs --qubits".into()))?;
            let params = model_params(&a.params)?;
            let reference = (model == Model::Heisenberg && qubits == 10 && params == ModelParams::default())
                .then_some(HEISENBERG10_H4_NNZD);
            (gen_benchmark(model, qubits, &params)?, format!("expm {model} qubits={qubits}"), reference)
        }
        (None, None) => bail!(Usage("give a Hamiltonian file or --model with --qubits".into())),
    };
    let iters: Option<usize> = cfg.pick(a.iters, "iters")?;
    let taylor = TaylorConfig {
        t: cfg.pick(a.t, "t")?.unwrap_or(DEFAULT_T),
        terms: iters.map(|k| k + 1),
        eps: cfg.pick(a.eps, "eps")?.unwrap_or(TaylorConfig::default().eps),
        use_simulator: !a.functional_only,
        segments: cfg.pick(a.segments, "segments")?.unwrap_or(1),
    };
    let run = taylor_expm(&h, &taylor, Some(&accel))?;

    let workload = format!("{workload} t={} terms={} segments={}", taylor.t, run.terms, taylor.segments);
    let report = SimReport::build(
        &workload,
        GridDims { rows: run.grid_rows, cols: run.grid_cols },
        run.cycles,
        &run.events,
        &run.mem,
        run.peak_active_dpes,
        &EnergyModel::default(),
        run.records.clone(),
    );
    if let Some(p) = &a.product {
        write_matrix(&run.u, Some(p), Format::from_path(p))?;
    }
    write_report(&report, a.output.as_deref(), a.csv.as_deref())?;

    let mut log = String::new();
    log.push_str(&format!("one-norm {:.4}, {} terms\n", run.norm, run.terms));
    log.push_str("  k  power   nnzd     nnze  savings     cycles  hit_rate\n");
    for r in &run.records {
        log.push_str(&format!(
            "{:>3} {:>6} {:>6} {:>8} {:>8.4} {:>10} {:>9.3}\n",
            r.k, r.power, r.nnzd, r.nnze, r.savings, r.stage_cycles.total, r.hit_rate
        ));
    }
    if let Some(expected) = reference {
        if let Some(r) = run.records.iter().find(|r| r.k == 3) {
            let verdict = if r.nnzd == expected { "matches" } else { "differs from" };
            log.push_str(&format!("iteration 3 NNZD {} {verdict} reference {expected}\n", r.nnzd));
        }
    }
    if a.output.is_some() {
        print!("{log}");
    } else {
        eprint!("{log}");
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let r: SimReport = serde_json::from_str(&text).map_err(diagsim_core::Error::from)?;
    let csv = if a.summary { r.summary_csv() } else { r.to_csv() };
    write_output(a.output.as_deref(), |w| Ok(w.write_all(csv.as_bytes())?))
}

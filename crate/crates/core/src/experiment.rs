//! Frame-count sweeps over several algorithms and seeds, written to disk.
//!
//! A scenario named `s` run with output root `out` produces:
//!
//! ```text
//! out/s/manifest.json                  scenario, input hashes, output hashes
//! out/s/runs.csv                       one row per (algorithm, n, seed)
//! out/s/summary.csv                    mean and sample stddev per (algorithm, n)
//! out/s/timing.csv                     scheduling wall-clock time per run
//! out/s/workloads/<n>/<seed>.json      generated flow sets
//! out/s/<algo>/<n>/<seed>/schedule.json
//! out/s/<algo>/<n>/<seed>/metrics.csv
//! out/s/<algo>/<n>/<seed>/gcl.csv
//! ```
//!
//! Wall-clock time is the only output that changes between identical runs,
//! so it is kept out of every hashed file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::AggregationOptions;
use crate::error::{Error, Result};
use crate::gcl::{emit_gcl, write_gcl_csv};
use crate::metrics::{compute_metrics, RunMetrics};
use crate::model::{hyperperiod, Flow, Topology};
use crate::scheduler::SchedulerConfig;
use crate::verify::{replay_verify, schedule_cycle};
use crate::workload::{generate, load_flows, load_topology, WorkloadParams};
use crate::Algorithm;

/// Environment variable bounding the worker thread count.
pub const THREADS_ENV: &str = "MCFS_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    /// `n_frames` and `rng_seed` are overridden per run.
    pub workload: WorkloadParams,
    /// `rng_seed` is overridden by the run seed.
    pub scheduler: SchedulerConfig,
    pub aggregation: AggregationOptions,
    /// Report bandwidth per link instead of summed over links.
    pub normalize_per_link: bool,
    /// Topology file; the built-in star when absent.
    pub topology: Option<PathBuf>,
    /// Fixed flow set; replaces generation, and `n_values` is ignored.
    pub flows: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "default".into(),
            n_values: (50..=500).step_by(50).collect(),
            seeds: (1..=10).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            workload: WorkloadParams::default(),
            scheduler: SchedulerConfig::default(),
            aggregation: AggregationOptions::default(),
            normalize_per_link: false,
            topology: None,
            flows: None,
        }
    }
}

impl Scenario {
    /// Reads a scenario file, or the scenario embedded in a manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        };
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
        if value.get("files").is_some() {
            if let Some(inner) = value.get_mut("scenario") {
                value = inner.take();
            }
        }
        serde_json::from_value(value).map_err(parse_err)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::InvalidParameter(format!("scenario has no {what}")));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(Error::InvalidParameter(format!("bad scenario name `{}`", self.name)));
        }
        if self.n_values.is_empty() && self.flows.is_none() {
            return empty("frame counts");
        }
        if self.seeds.is_empty() {
            return empty("seeds");
        }
        if self.algorithms.is_empty() {
            return empty("algorithms");
        }
        self.scheduler.validate()
    }
}

/// One row of `runs.csv` and of each `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm: String,
    pub n_frames: usize,
    pub seed: u64,
    pub critical_accepted: usize,
    pub critical_total: usize,
    pub noncritical_accepted: usize,
    pub noncritical_total: usize,
    pub critical_acceptance: f64,
    pub noncritical_acceptance: f64,
    pub bandwidth_utilization: f64,
    pub bandwidth_per_link: f64,
}

impl From<&RunMetrics> for RunRow {
    fn from(m: &RunMetrics) -> Self {
        RunRow {
            algorithm: m.algorithm.clone(),
            n_frames: m.n_frames,
            seed: m.seed,
            critical_accepted: m.critical_accepted,
            critical_total: m.critical_total,
            noncritical_accepted: m.noncritical_accepted,
            noncritical_total: m.noncritical_total,
            critical_acceptance: m.critical_acceptance,
            noncritical_acceptance: m.noncritical_acceptance,
            bandwidth_utilization: m.bandwidth_utilization,
            bandwidth_per_link: m.bandwidth_per_link,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub algorithm: String,
    pub n_frames: usize,
    pub seed: u64,
    pub execution_time: f64,
}

/// Mean and sample standard deviation per `(algorithm, n)`. `bandwidth_*`
/// is per link when the scenario says so.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub n_frames: usize,
    pub runs: usize,
    pub critical_acceptance_mean: f64,
    pub critical_acceptance_std: f64,
    pub noncritical_acceptance_mean: f64,
    pub noncritical_acceptance_std: f64,
    pub bandwidth_mean: f64,
    pub bandwidth_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub scenario: Scenario,
    /// sha256 of the topology and flow files the scenario names.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every deterministic output, keyed by path relative to the
    /// scenario directory.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub dir: PathBuf,
    pub metrics: Vec<RunMetrics>,
    pub summary: Vec<SummaryRow>,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_hashed(root: &Path, rel: &str, bytes: &[u8], hashes: &mut Vec<(String, String)>) -> Result<()> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(&path, bytes).map_err(Error::io(&path))?;
    hashes.push((rel.to_owned(), sha256_hex(bytes)));
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(Error::io(path))?;
    Ok(csv::Reader::from_reader(file).deserialize().collect::<Result<_, _>>()?)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups runs by `(algorithm, n)` in the scenario's algorithm order.
pub fn summarize(metrics: &[RunMetrics], algorithms: &[Algorithm], per_link: bool) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for algo in algorithms {
        let ns: BTreeSet<usize> = metrics.iter().filter(|m| m.algorithm == algo.name()).map(|m| m.n_frames).collect();
        for n in ns {
            let runs: Vec<&RunMetrics> = metrics.iter().filter(|m| m.algorithm == algo.name() && m.n_frames == n).collect();
            let col = |f: fn(&RunMetrics) -> f64| mean_std(&runs.iter().map(|m| f(m)).collect::<Vec<_>>());
            let (cm, cs) = col(|m| m.critical_acceptance);
            let (nm, ns) = col(|m| m.noncritical_acceptance);
            let (bm, bs) = if per_link {
                col(|m| m.bandwidth_per_link)
            } else {
                col(|m| m.bandwidth_utilization)
            };
            out.push(SummaryRow {
                algorithm: algo.name().into(),
                n_frames: n,
                runs: runs.len(),
                critical_acceptance_mean: cm,
                critical_acceptance_std: cs,
                noncritical_acceptance_mean: nm,
                noncritical_acceptance_std: ns,
                bandwidth_mean: bm,
                bandwidth_std: bs,
            });
        }
    }
    out
}

/// Thread pool honouring [`THREADS_ENV`]; unset or 0 means one per core.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV}=`{v}` is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

struct Cell {
    n: usize,
    seed: u64,
    flows: std::sync::Arc<Vec<Flow>>,
}

/// Runs one algorithm on one flow set, verifies the result and writes the
/// per-run files. Returns metrics and the hashes of what was written.
fn run_cell(
    algo: Algorithm,
    cell: &Cell,
    topo: &Topology,
    sc: &Scenario,
    root: &Path,
) -> Result<(RunMetrics, Vec<(String, String)>)> {
    let cfg = SchedulerConfig {
        rng_seed: cell.seed,
        ..sc.scheduler.clone()
    };
    let (schedule, elapsed) = algo.run(&cell.flows, topo, &cfg, &sc.aggregation);
    replay_verify(&schedule, topo).map_err(|violations| Error::Verification {
        run: format!("{algo} n={} seed={}", cell.n, cell.seed),
        violations,
    })?;
    let metrics = compute_metrics(&schedule, &cell.flows, topo, cell.seed, elapsed);
    let cycle = schedule_cycle(&schedule)
        .or_else(|| hyperperiod(cell.flows.iter().map(|f| f.period)).ok())
        .unwrap_or(0);
    let gcl = emit_gcl(&schedule, topo, cycle);

    let dir = format!("{}/{}/{}", algo.name(), cell.n, cell.seed);
    let mut hashes = Vec::new();
    write_hashed(root, &format!("{dir}/schedule.json"), &json_bytes(&schedule)?, &mut hashes)?;
    write_hashed(root, &format!("{dir}/metrics.csv"), &csv_bytes(&[RunRow::from(&metrics)])?, &mut hashes)?;
    let mut gcl_bytes = Vec::new();
    write_gcl_csv(&gcl, &mut gcl_bytes)?;
    write_hashed(root, &format!("{dir}/gcl.csv"), &gcl_bytes, &mut hashes)?;
    Ok((metrics, hashes))
}

/// Clears a previous result directory; refuses to touch anything else.
fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let ours = dir.join("manifest.json").is_file();
        let empty = fs::read_dir(dir).map_err(Error::io(dir))?.next().is_none();
        if !ours && !empty {
            return Err(Error::InvalidParameter(format!(
                "{} exists and is not a previous result directory",
                dir.display()
            )));
        }
        fs::remove_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::create_dir_all(dir).map_err(Error::io(dir))
}

/// Runs every `(algorithm, n, seed)` cell of `sc` under `out/<name>/`.
/// Any verification failure aborts the whole scenario.
pub fn run_scenario(sc: &Scenario, out: impl AsRef<Path>) -> Result<ScenarioResult> {
    sc.validate()?;
    let mut inputs = BTreeMap::new();
    let topo = match &sc.topology {
        Some(p) => {
            let bytes = fs::read(p).map_err(Error::io(p))?;
            inputs.insert(p.display().to_string(), sha256_hex(&bytes));
            load_topology(p)?
        }
        None => Topology::automotive_star(),
    };
    let fixed = match &sc.flows {
        Some(p) => {
            let bytes = fs::read(p).map_err(Error::io(p))?;
            inputs.insert(p.display().to_string(), sha256_hex(&bytes));
            let flows = load_flows(p)?;
            for f in &flows {
                f.validate_in(&topo)?;
            }
            Some(std::sync::Arc::new(flows))
        }
        None => None,
    };

    let root = out.as_ref().join(&sc.name);
    prepare_dir(&root)?;
    let mut hashes = Vec::new();

    let mut cells = Vec::new();
    match &fixed {
        Some(flows) => {
            for &seed in &sc.seeds {
                cells.push(Cell {
                    n: flows.len(),
                    seed,
                    flows: flows.clone(),
                });
            }
        }
        None => {
            for &n in &sc.n_values {
                for &seed in &sc.seeds {
                    let params = WorkloadParams {
                        n_frames: n,
                        rng_seed: seed,
                        ..sc.workload.clone()
                    };
                    let flows = generate(&params, &topo)?;
                    write_hashed(&root, &format!("workloads/{n}/{seed}.json"), &json_bytes(&flows)?, &mut hashes)?;
                    cells.push(Cell {
                        n,
                        seed,
                        flows: std::sync::Arc::new(flows),
                    });
                }
            }
        }
    }

    let jobs: Vec<(Algorithm, &Cell)> = sc.algorithms.iter().flat_map(|&a| cells.iter().map(move |c| (a, c))).collect();
    let results: Vec<(RunMetrics, Vec<(String, String)>)> =
        thread_pool()?.install(|| jobs.par_iter().map(|(a, c)| run_cell(*a, c, &topo, sc, &root)).collect::<Result<_>>())?;

    let mut metrics = Vec::with_capacity(results.len());
    for (m, h) in results {
        metrics.push(m);
        hashes.extend(h);
    }
    let rows: Vec<RunRow> = metrics.iter().map(RunRow::from).collect();
    write_hashed(&root, "runs.csv", &csv_bytes(&rows)?, &mut hashes)?;
    let summary = summarize(&metrics, &sc.algorithms, sc.normalize_per_link);
    write_hashed(&root, "summary.csv", &csv_bytes(&summary)?, &mut hashes)?;

    let timing: Vec<TimingRow> = metrics
        .iter()
        .map(|m| TimingRow {
            algorithm: m.algorithm.clone(),
            n_frames: m.n_frames,
            seed: m.seed,
            execution_time: m.execution_time,
        })
        .collect();
    fs::write(root.join("timing.csv"), csv_bytes(&timing)?).map_err(Error::io(root.join("timing.csv")))?;

    let manifest = Manifest {
        tool: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
        scenario: sc.clone(),
        inputs,
        files: hashes.into_iter().collect(),
    };
    let path = root.join("manifest.json");
    fs::write(&path, json_bytes(&manifest)?).map_err(Error::io(&path))?;

    Ok(ScenarioResult {
        dir: root,
        metrics,
        summary,
        manifest,
    })
}

/// `MCFS-2L − baseline` for one metric at one frame count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub n_frames: usize,
    pub baseline: String,
    pub metric: String,
    pub mcfs2l: f64,
    pub baseline_value: f64,
    pub delta: f64,
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_owned(), other.to_string());
        }
    }
}

/// Settings that must agree for two result directories to be comparable:
/// everything except the name and the algorithm list.
fn comparable(sc: &Scenario) -> Result<BTreeMap<String, String>> {
    let mut v = serde_json::to_value(sc)?;
    if let Some(m) = v.as_object_mut() {
        m.remove("name");
        m.remove("algorithms");
    }
    let mut out = BTreeMap::new();
    flatten("", &v, &mut out);
    Ok(out)
}

fn manifest_diff(a: &Scenario, b: &Scenario) -> Result<Vec<String>> {
    let (a, b) = (comparable(a)?, comparable(b)?);
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let none = "(absent)".to_owned();
    Ok(keys
        .into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| format!("  {k}: {} vs {}", a.get(k).unwrap_or(&none), b.get(k).unwrap_or(&none)))
        .collect())
}

/// Joins the summaries of one or more result directories and reports
/// MCFS-2L minus each baseline, per metric and frame count. Directories
/// whose scenarios differ in anything but name and algorithm list are
/// refused.
pub fn compare(dirs: &[PathBuf]) -> Result<Vec<DeltaRow>> {
    let mut reference: Option<(PathBuf, Scenario)> = None;
    let mut rows: BTreeMap<(String, usize), SummaryRow> = BTreeMap::new();
    for dir in dirs {
        let manifest = Manifest::load(dir.join("manifest.json"))?;
        match &reference {
            None => reference = Some((dir.clone(), manifest.scenario.clone())),
            Some((first, sc)) => {
                let diff = manifest_diff(sc, &manifest.scenario)?;
                if !diff.is_empty() {
                    return Err(Error::ManifestMismatch(format!(
                        "{} vs {}:\n{}",
                        first.display(),
                        dir.display(),
                        diff.join("\n")
                    )));
                }
            }
        }
        for r in read_csv::<SummaryRow>(dir.join("summary.csv"))? {
            rows.entry((r.algorithm.clone(), r.n_frames)).or_insert(r);
        }
    }

    let mut out = Vec::new();
    let mcfs = Algorithm::Mcfs2l.name();
    for ((algo, n), base) in &rows {
        if algo == mcfs {
            continue;
        }
        let Some(m) = rows.get(&(mcfs.to_owned(), *n)) else { continue };
        let metrics = [
            ("critical_acceptance", m.critical_acceptance_mean, base.critical_acceptance_mean),
            ("noncritical_acceptance", m.noncritical_acceptance_mean, base.noncritical_acceptance_mean),
            ("bandwidth", m.bandwidth_mean, base.bandwidth_mean),
        ];
        for (metric, a, b) in metrics {
            out.push(DeltaRow {
                n_frames: *n,
                baseline: algo.clone(),
                metric: metric.into(),
                mcfs2l: a,
                baseline_value: b,
                delta: a - b,
            });
        }
    }
    out.sort_by(|a, b| (a.n_frames, &a.baseline).cmp(&(b.n_frames, &b.baseline)));
    Ok(out)
}

pub fn write_deltas(rows: &[DeltaRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses `"50,100"`, `"1..10"` (inclusive) and `"50..500:50"`, or any
/// comma-separated mix of them.
pub fn parse_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("cannot read `{s}` as a list or range"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        match part.split_once("..") {
            None => out.push(num(part)?),
            Some((a, rest)) => {
                let (b, step) = match rest.split_once(':') {
                    Some((b, st)) => (num(b)?, num(st)?),
                    None => (num(rest)?, 1),
                };
                let a = num(a)?;
                if step == 0 || b < a {
                    return Err(bad());
                }
                out.extend((a..=b).step_by(step as usize));
            }
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

//! Synthetic automotive workloads and flow-set files.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Criticality, Flow, FlowId, Nanos, NodeId, Topology, MAX_PAYLOAD, NS_PER_MS, NS_PER_US};

/// Deadline bounds of the published parameter envelope.
pub const ENVELOPE_DEADLINES: (Nanos, Nanos) = (200 * NS_PER_US, 800 * NS_PER_US);

/// Default deadline bounds: the envelope's 1:4 spread scaled so the upper
/// bound meets the shortest period (25x). With every flow released at the
/// same instant, envelope deadlines overload the shared egress port well
/// below 100 flows.
pub const CALIBRATED_DEADLINES: (Nanos, Nanos) = (5 * NS_PER_MS, 20 * NS_PER_MS);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadParams {
    pub n_frames: usize,
    pub critical_fraction: f64,
    /// Candidate periods, ns.
    pub period_menu: Vec<Nanos>,
    /// Inclusive deadline bounds, ns.
    pub deadline_range: (Nanos, Nanos),
    /// Inclusive payload bounds, bytes.
    pub payload_range: (u32, u32),
    /// Deadlines are drawn on this grid, ns.
    pub deadline_grid: Nanos,
    pub sources: Vec<NodeId>,
    pub destinations: Vec<NodeId>,
    pub rng_seed: u64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            n_frames: 100,
            critical_fraction: 0.5,
            period_menu: [20, 25, 40, 50, 100].map(|ms| ms * NS_PER_MS).to_vec(),
            deadline_range: CALIBRATED_DEADLINES,
            payload_range: (100, 1500),
            deadline_grid: NS_PER_US,
            sources: vec!["dcu1".into(), "dcu3".into()],
            destinations: vec!["dcu2".into()],
            rng_seed: 0,
        }
    }
}

impl WorkloadParams {
    pub fn with(n_frames: usize, rng_seed: u64) -> Self {
        WorkloadParams {
            n_frames,
            rng_seed,
            ..Default::default()
        }
    }

    /// Same as [`WorkloadParams::with`] but with the envelope deadlines.
    pub fn envelope(n_frames: usize, rng_seed: u64) -> Self {
        WorkloadParams {
            deadline_range: ENVELOPE_DEADLINES,
            ..Self::with(n_frames, rng_seed)
        }
    }

    /// Collects every violated bound instead of stopping at the first.
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.critical_fraction) {
            errs.push(format!("critical_fraction {} outside [0, 1]", self.critical_fraction));
        }
        if self.period_menu.is_empty() || self.period_menu.contains(&0) {
            errs.push("period_menu must be non-empty and positive".into());
        }
        let (dlo, dhi) = self.deadline_range;
        if dlo == 0 || dlo > dhi {
            errs.push(format!("deadline_range [{dlo}, {dhi}] is empty or starts at 0"));
        }
        if let Some(&min_p) = self.period_menu.iter().min() {
            if dhi > min_p {
                errs.push(format!("deadline_range max {dhi} exceeds smallest period {min_p}"));
            }
        }
        if self.deadline_grid == 0 {
            errs.push("deadline_grid must be positive".into());
        } else if dlo.div_ceil(self.deadline_grid) * self.deadline_grid > dhi {
            errs.push("deadline_range holds no grid point".into());
        }
        let (plo, phi) = self.payload_range;
        if plo < 1 || phi > MAX_PAYLOAD || plo > phi {
            errs.push(format!("payload_range [{plo}, {phi}] not within [1, {MAX_PAYLOAD}]"));
        }
        if self.sources.is_empty() || self.destinations.is_empty() {
            errs.push("sources and destinations must be non-empty".into());
        }
        for s in &self.sources {
            for d in &self.destinations {
                if topo.shortest_route(s, d).is_none() {
                    errs.push(format!("no route from `{s}` to `{d}`"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidWorkload(errs))
        }
    }

    pub fn critical_count(&self) -> usize {
        (self.n_frames as f64 * self.critical_fraction).round() as usize
    }
}

/// Draws `n_frames` flows; identical params give identical output.
pub fn generate(params: &WorkloadParams, topo: &Topology) -> Result<Vec<Flow>> {
    params.validate(topo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (dlo, dhi) = params.deadline_range;
    let grid = params.deadline_grid;
    let (glo, ghi) = (dlo.div_ceil(grid), dhi / grid);

    let mut flows = Vec::with_capacity(params.n_frames);
    for i in 0..params.n_frames {
        let src = params.sources.choose(&mut rng).unwrap().clone();
        let dst = params.destinations.choose(&mut rng).unwrap().clone();
        let route = topo.shortest_route(&src, &dst).expect("validated");
        flows.push(Flow {
            id: FlowId(i as u32),
            criticality: Criticality::NonCritical,
            period: *params.period_menu.choose(&mut rng).unwrap(),
            deadline: rng.gen_range(glo..=ghi) * grid,
            payload: rng.gen_range(params.payload_range.0..=params.payload_range.1),
            src,
            dst,
            route,
        });
    }
    let mut idx: Vec<usize> = (0..flows.len()).collect();
    idx.shuffle(&mut rng);
    for &i in &idx[..params.critical_count()] {
        flows[i].criticality = Criticality::Critical;
    }
    Ok(flows)
}

pub fn save_flows(flows: &[Flow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(flows)?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

/// Reads a flow-set file. Syntax errors carry line and column; invariant
/// violations carry the record index and field.
pub fn load_flows(path: impl AsRef<Path>) -> Result<Vec<Flow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let flows: Vec<Flow> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    for (index, f) in flows.iter().enumerate() {
        f.validate().map_err(|e| Error::Record {
            path: path.to_owned(),
            index,
            source: Box::new(e),
        })?;
    }
    Ok(flows)
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })
}

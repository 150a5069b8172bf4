//! Graph-based partition of detections into independent groups.
//!
//! Two detections can be of the same call only if they sit on different
//! detectors and their time difference is below the sound travel time between
//! the detectors plus a slack of three partition sigmas. Connected components
//! of that feasibility graph factorize the likelihood: no matching ever links
//! detections across groups.

use serde::{Deserialize, Serialize};

use crate::data::DetectionData;
use crate::survey::SurveyConfig;

/// Default prior scale (seconds) for recording-time error; the partition
/// slack defaults to three times this.
pub const DEFAULT_SIGMA_T_PRIOR: f64 = 0.005;

pub fn default_sigma_slack() -> f64 {
    3.0 * DEFAULT_SIGMA_T_PRIOR
}

/// Feasibility graph over individual detections.
#[derive(Debug, Clone)]
pub struct DetectionGraph {
    /// Vertices as (detector, detection index) pairs.
    pub vertices: Vec<(usize, usize)>,
    /// Edges as index pairs into `vertices`.
    pub edges: Vec<(usize, usize)>,
    pub sigma_slack: f64,
}

/// One connected component: a self-contained matching subproblem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionGroup {
    pub id: usize,
    /// Group-local detection data (per-detector, time-sorted).
    pub data: DetectionData,
    /// For each detector, the original detection indices backing the
    /// group-local ones.
    pub source_indices: Vec<Vec<usize>>,
    pub sigma_slack: f64,
}

impl DetectionGroup {
    pub fn n_detections(&self) -> usize {
        self.data.total()
    }
}

/// Edge rule: |t_a - t_b| < d(m_a, m_b)/v + 3 sigma, different detectors only.
pub fn build_graph(
    data: &DetectionData,
    config: &SurveyConfig,
    sigma_slack: f64,
) -> DetectionGraph {
    let mut vertices = Vec::with_capacity(data.total());
    for m in 0..data.n_detectors() {
        for j in 0..data.detector(m).len() {
            vertices.push((m, j));
        }
    }
    // Sweep over time-sorted detections; only pairs within the largest
    // feasible window can share an edge.
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| {
        let ta = data.time(vertices[a].0, vertices[a].1);
        let tb = data.time(vertices[b].0, vertices[b].1);
        ta.partial_cmp(&tb).unwrap()
    });
    let window = config.max_detector_spacing() / config.sound_speed + 3.0 * sigma_slack;
    let mut edges = Vec::new();
    for (rank, &a) in order.iter().enumerate() {
        let (ma, ja) = vertices[a];
        let ta = data.time(ma, ja);
        for &b in &order[rank + 1..] {
            let (mb, jb) = vertices[b];
            let tb = data.time(mb, jb);
            if tb - ta >= window {
                break;
            }
            if ma == mb {
                continue;
            }
            let max_dt = config.position(ma).dist(config.position(mb)) / config.sound_speed
                + 3.0 * sigma_slack;
            if (tb - ta).abs() < max_dt {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    DetectionGraph { vertices, edges, sigma_slack }
}

/// Disjoint-set union with path halving and union by size.
struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Connected components of the feasibility graph, ordered by each group's
/// earliest detection time.
pub fn connected_components(graph: &DetectionGraph, data: &DetectionData) -> Vec<DetectionGroup> {
    let n = graph.vertices.len();
    let mut dsu = Dsu::new(n);
    for &(a, b) in &graph.edges {
        dsu.union(a, b);
    }
    let mut members: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for v in 0..n {
        members.entry(dsu.find(v)).or_default().push(v);
    }
    let m = data.n_detectors();
    let mut groups: Vec<(f64, Vec<usize>)> = members
        .into_values()
        .map(|vs| {
            let t0 = vs
                .iter()
                .map(|&v| data.time(graph.vertices[v].0, graph.vertices[v].1))
                .fold(f64::INFINITY, f64::min);
            (t0, vs)
        })
        .collect();
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    groups
        .into_iter()
        .enumerate()
        .map(|(id, (_, vs))| {
            let mut per_detector: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
            let mut source_indices: Vec<Vec<usize>> = vec![Vec::new(); m];
            let mut sorted = vs;
            sorted.sort_by(|&a, &b| {
                let va = graph.vertices[a];
                let vb = graph.vertices[b];
                va.cmp(&vb)
            });
            for v in sorted {
                let (det, j) = graph.vertices[v];
                per_detector[det].push((data.time(det, j), data.strength(det, j)));
                source_indices[det].push(j);
            }
            DetectionGroup {
                id,
                data: DetectionData::from_parts(per_detector),
                source_indices,
                sigma_slack: graph.sigma_slack,
            }
        })
        .collect()
}

/// Convenience: build the graph and split into groups in one step.
pub fn partition_detections(
    data: &DetectionData,
    config: &SurveyConfig,
    sigma_slack: f64,
) -> Vec<DetectionGroup> {
    let graph = build_graph(data, config, sigma_slack);
    connected_components(&graph, data)
}

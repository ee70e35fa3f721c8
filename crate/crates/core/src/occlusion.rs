// SPDX-License-Identifier: MIT OR Apache-2.0

//! Depth-ordered occlusion graph and the scene validation gates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scene::{Mask, Scene, SceneError, SceneRaster};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    /// IoU threshold for declaring an occlusion edge.
    pub tau_occ: f64,
    /// Minimum front-to-back depth spread of an occlusion chain, meters.
    pub min_depth_gradient: f64,
    /// Minimum depth difference between silhouette-overlapping objects, meters.
    pub depth_band: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            tau_occ: 0.05,
            min_depth_gradient: 0.5,
            depth_band: 0.2,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), OcclusionError> {
        let ok = [self.tau_occ, self.min_depth_gradient, self.depth_band]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(OcclusionError::InvalidConfig)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OcclusionError {
    #[error("objects {0} and {1} overlap at equal depth")]
    DepthTie(usize, usize),
    #[error("gate thresholds must be positive and finite")]
    InvalidConfig,
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// `|a ∩ bbox(b)| / |a ∪ bbox(b)|`.
pub fn mask_box_iou(a: &Mask, b: &Mask) -> f64 {
    let Some(rect) = b.bbox() else {
        return 0.0;
    };
    let inter = a
        .iter_set()
        .filter(|&(r, c)| rect.contains(r, c))
        .count();
    let union = a.count() + rect.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn occludes_masks(mi: &Mask, di: f64, mj: &Mask, dj: f64, tau: f64) -> bool {
    di < dj && mask_box_iou(mi, mj) > tau
}

/// Whether `i` occludes `j` under the asymmetric mask-vs-box IoU rule.
pub fn occludes(raster: &SceneRaster<'_>, i: usize, j: usize, cfg: &GateConfig) -> bool {
    let objs = &raster.scene().objects;
    occludes_masks(
        raster.mask(i),
        objs[i].z_front,
        raster.mask(j),
        objs[j].z_front,
        cfg.tau_occ,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub label: String,
    pub depth: f64,
}

/// Directed graph with an edge `i -> j` when `i` occludes `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionGraph {
    nodes: Vec<GraphNode>,
    successors: Vec<Vec<usize>>,
}

/// One adjacency-list row for debugging exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyEntry {
    pub id: usize,
    pub label: String,
    pub depth: f64,
    pub successors: Vec<String>,
}

impl OcclusionGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.successors[i]
    }

    pub fn predecessors(&self, j: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.successors[i].binary_search(&j).is_ok())
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.successors[i].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.successors
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
            .collect()
    }

    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        for s in &self.successors {
            for &j in s {
                indegree[j] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &j in &self.successors[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Weakly connected components with at least one edge.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, j) in self.edges() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let root = find(&mut parent, i);
            groups[root].push(i);
        }
        groups.retain(|g| g.len() >= 2);
        groups
    }

    pub fn adjacency(&self) -> Vec<AdjacencyEntry> {
        self.nodes
            .iter()
            .zip(&self.successors)
            .map(|(node, succ)| AdjacencyEntry {
                id: node.id,
                label: node.label.clone(),
                depth: node.depth,
                successors: succ.iter().map(|&j| self.nodes[j].label.clone()).collect(),
            })
            .collect()
    }
}

pub fn build_graph(
    raster: &SceneRaster<'_>,
    cfg: &GateConfig,
) -> Result<OcclusionGraph, OcclusionError> {
    let objs = &raster.scene().objects;
    let n = objs.len();
    for i in 0..n {
        for j in i + 1..n {
            if objs[i].z_front == objs[j].z_front && raster.overlaps(i, j) {
                return Err(OcclusionError::DepthTie(i, j));
            }
        }
    }
    let mut successors = vec![Vec::new(); n];
    for (i, succ) in successors.iter_mut().enumerate() {
        for j in 0..n {
            if i != j && occludes(raster, i, j, cfg) {
                succ.push(j);
            }
        }
    }
    let nodes = objs
        .iter()
        .map(|o| GraphNode {
            id: o.id,
            label: o.label.clone(),
            depth: o.z_front,
        })
        .collect();
    Ok(OcclusionGraph { nodes, successors })
}

/// Pixel-exact: no shallower silhouette shares a pixel with `x`.
pub fn fully_visible(raster: &SceneRaster<'_>, x: usize) -> bool {
    raster.occluders_of(x).is_empty()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    TooFewNodes,
    FlatGradient,
    DepthBand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateOutcome {
    Pass,
    Reject(GateReason),
}

pub fn validate(raster: &SceneRaster<'_>, graph: &OcclusionGraph, cfg: &GateConfig) -> GateOutcome {
    if graph.node_count() < 3 {
        return GateOutcome::Reject(GateReason::TooFewNodes);
    }
    for chain in graph.chains() {
        let depths = chain.iter().map(|&i| graph.nodes[i].depth);
        let lo = depths.clone().fold(f64::INFINITY, f64::min);
        let hi = depths.fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < cfg.min_depth_gradient {
            return GateOutcome::Reject(GateReason::FlatGradient);
        }
    }
    let objs = &raster.scene().objects;
    for i in 0..objs.len() {
        for j in i + 1..objs.len() {
            if raster.overlaps(i, j) && (objs[i].z_front - objs[j].z_front).abs() < cfg.depth_band {
                return GateOutcome::Reject(GateReason::DepthBand);
            }
        }
    }
    GateOutcome::Pass
}

/// Convenience wrapper: rasterize, build and gate in one call.
pub fn check_scene(scene: &Scene, cfg: &GateConfig) -> Result<GateOutcome, OcclusionError> {
    let raster = SceneRaster::new(scene)?;
    let graph = build_graph(&raster, cfg)?;
    Ok(validate(&raster, &graph, cfg))
}

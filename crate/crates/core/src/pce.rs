//! Path computation element: constrained path selection over the routing
//! graph, residual link bandwidth, and the path allocation table that
//! serves previously computed paths.
//!
//! Selection rule: among simple paths whose links all have residual
//! bandwidth at or above the requested floor and which respect the optional
//! latency and hop bounds, pick the one with the lowest total latency, then
//! the fewest hops, then the lexicographically smallest sequence of link ids.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecMode};
use crate::topo::{LinkId, NodeId, RoutingGraph};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathConstraints {
    pub min_residual_bandwidth: u64,
    pub max_latency: Option<u64>,
    pub max_hops: Option<usize>,
}

impl PathConstraints {
    pub fn bandwidth(min_residual_bandwidth: u64) -> Self {
        Self { min_residual_bandwidth, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("no feasible path from `{origin}` to `{destination}`")]
    NoFeasiblePath { origin: NodeId, destination: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReservationError {
    #[error("link `{link}` has {residual} residual bandwidth, {requested} requested")]
    InsufficientBandwidth { link: LinkId, residual: u64, requested: u64 },
    #[error("releasing {requested} on link `{link}` would exceed its capacity {capacity} (residual {residual})")]
    OverRelease { link: LinkId, residual: u64, capacity: u64, requested: u64 },
}

/// A simple path through the routing graph.
///
/// Link indices refer to the [`RoutingGraph`] the path was computed on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub links: Vec<LinkId>,
    pub source: NodeId,
    pub destination: NodeId,
    pub total_latency: u64,
    pub hop_count: usize,
    /// Minimum residual bandwidth along the path; `None` for the empty path.
    pub bottleneck_bandwidth: Option<u64>,
    link_indices: Vec<usize>,
}

impl Path {
    /// Builds a path from a walk given as link indices starting at `source`.
    /// Returns `None` unless the links form a simple path.
    pub fn from_link_indices(
        graph: &RoutingGraph,
        residuals: &ResidualState,
        source: usize,
        link_indices: &[usize],
    ) -> Option<Path> {
        let mut visited = vec![false; graph.node_count()];
        let mut at = source;
        visited[at] = true;
        let mut total_latency = 0u64;
        for &l in link_indices {
            let link = graph.links().get(l)?;
            if link.endpoints.0 != at && link.endpoints.1 != at {
                return None;
            }
            at = link.other_end(at);
            if std::mem::replace(&mut visited[at], true) {
                return None;
            }
            total_latency = total_latency.checked_add(link.latency)?;
        }
        Some(Path {
            links: link_indices.iter().map(|&l| graph.links()[l].id.clone()).collect(),
            source: graph.nodes()[source].clone(),
            destination: graph.nodes()[at].clone(),
            total_latency,
            hop_count: link_indices.len(),
            bottleneck_bandwidth: residuals.bottleneck(link_indices),
            link_indices: link_indices.to_vec(),
        })
    }

    pub fn link_indices(&self) -> &[usize] {
        &self.link_indices
    }

    pub fn is_empty(&self) -> bool {
        self.link_indices.is_empty()
    }

    /// Whether the path satisfies `constraints` under `residuals`.
    pub fn is_feasible(&self, residuals: &ResidualState, constraints: &PathConstraints) -> bool {
        self.link_indices.iter().all(|&l| residuals.residual(l) >= constraints.min_residual_bandwidth)
            && constraints.max_latency.is_none_or(|m| self.total_latency <= m)
            && constraints.max_hops.is_none_or(|m| self.hop_count <= m)
    }
}

/// Residual bandwidth of every link in a routing graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResidualState {
    residual: Vec<u64>,
    capacity: Vec<u64>,
    ids: Vec<LinkId>,
}

impl ResidualState {
    /// All links at full capacity.
    pub fn new(graph: &RoutingGraph) -> Self {
        let capacity: Vec<u64> = graph.links().iter().map(|l| l.capacity).collect();
        Self { residual: capacity.clone(), capacity, ids: graph.links().iter().map(|l| l.id.clone()).collect() }
    }

    pub fn residual(&self, link: usize) -> u64 {
        self.residual[link]
    }

    pub fn capacity(&self, link: usize) -> u64 {
        self.capacity[link]
    }

    pub fn reserved(&self, link: usize) -> u64 {
        self.capacity[link] - self.residual[link]
    }

    pub fn len(&self) -> usize {
        self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual.is_empty()
    }

    /// `(link id, residual)` pairs in link-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&LinkId, u64)> {
        self.ids.iter().zip(self.residual.iter().copied())
    }

    /// Overrides one link's residual, clamped to its capacity.
    pub fn set_residual(&mut self, link: usize, residual: u64) {
        self.residual[link] = residual.min(self.capacity[link]);
    }

    fn bottleneck(&self, links: &[usize]) -> Option<u64> {
        links.iter().map(|&l| self.residual[l]).min()
    }

    /// Takes `bandwidth` from every link on `path`. All-or-nothing.
    pub fn reserve(&mut self, path: &Path, bandwidth: u64) -> Result<(), ReservationError> {
        if let Some(&l) = path.link_indices.iter().find(|&&l| self.residual[l] < bandwidth) {
            return Err(ReservationError::InsufficientBandwidth {
                link: self.ids[l].clone(),
                residual: self.residual[l],
                requested: bandwidth,
            });
        }
        for &l in &path.link_indices {
            self.residual[l] -= bandwidth;
        }
        Ok(())
    }

    /// Returns `bandwidth` to every link on `path`. All-or-nothing.
    pub fn release(&mut self, path: &Path, bandwidth: u64) -> Result<(), ReservationError> {
        if let Some(&l) = path.link_indices.iter().find(|&&l| self.reserved(l) < bandwidth) {
            return Err(ReservationError::OverRelease {
                link: self.ids[l].clone(),
                residual: self.residual[l],
                capacity: self.capacity[l],
                requested: bandwidth,
            });
        }
        for &l in &path.link_indices {
            self.residual[l] += bandwidth;
        }
        Ok(())
    }
}

struct Label {
    latency: u64,
    links: Vec<usize>,
}

impl Label {
    /// Orders `self + link` (with `latency` already summed) against `other`.
    /// Both walks have the same number of hops.
    fn extended_cmp(&self, latency: u64, link: usize, other: &Label) -> Ordering {
        latency.cmp(&other.latency).then_with(|| {
            let (last, prefix) = other.links.split_last().expect("extended labels are non-empty");
            self.links.as_slice().cmp(prefix).then(link.cmp(last))
        })
    }
}

/// Computes the best feasible path from `source` to `destination`.
///
/// Hop-layered label setting: layer `h` keeps, per node, the best walk with
/// exactly `h` links under (latency, link-id sequence). Any walk that
/// repeats a node can be shortened into a path that is no slower and has
/// fewer hops, so the best label found across layers is always a simple path.
pub fn compute_path(
    graph: &RoutingGraph,
    residuals: &ResidualState,
    source: &NodeId,
    destination: &NodeId,
    constraints: &PathConstraints,
) -> Result<Path, PathError> {
    let src = graph.node_index(source).ok_or_else(|| PathError::UnknownNode(source.clone()))?;
    let dst = graph.node_index(destination).ok_or_else(|| PathError::UnknownNode(destination.clone()))?;

    let no_path = || PathError::NoFeasiblePath { origin: source.clone(), destination: destination.clone() };

    if src == dst {
        return Path::from_link_indices(graph, residuals, src, &[]).ok_or_else(no_path);
    }

    let n = graph.node_count();
    let max_hops = constraints.max_hops.unwrap_or(n - 1).min(n - 1);
    let mut layer: Vec<Option<Label>> = (0..n).map(|_| None).collect();
    layer[src] = Some(Label { latency: 0, links: Vec::new() });
    let mut best: Option<Label> = None;

    for _ in 0..max_hops {
        let mut next: Vec<Option<Label>> = (0..n).map(|_| None).collect();
        for (u, label) in layer.iter().enumerate() {
            let Some(label) = label else { continue };
            for &(l, v) in graph.neighbors(u) {
                if v == src || residuals.residual(l) < constraints.min_residual_bandwidth {
                    continue;
                }
                let Some(latency) = label.latency.checked_add(graph.links()[l].latency) else {
                    continue;
                };
                if constraints.max_latency.is_some_and(|m| latency > m) {
                    continue;
                }
                let better = match &next[v] {
                    None => true,
                    Some(current) => label.extended_cmp(latency, l, current) == Ordering::Less,
                };
                if better {
                    let mut links = Vec::with_capacity(label.links.len() + 1);
                    links.extend_from_slice(&label.links);
                    links.push(l);
                    next[v] = Some(Label { latency, links });
                }
            }
        }

        if let Some(found) = next[dst].take() {
            // Later layers only win on strictly lower latency.
            if best.as_ref().is_none_or(|b| found.latency < b.latency) {
                best = Some(found);
            }
        }
        if next.iter().all(Option::is_none) {
            break;
        }
        layer = next;
    }

    best.and_then(|b| Path::from_link_indices(graph, residuals, src, &b.links)).ok_or_else(no_path)
}

/// Computes a batch of independent queries against one residual snapshot.
pub fn compute_paths(
    mode: ExecMode,
    graph: &RoutingGraph,
    residuals: &ResidualState,
    queries: &[(NodeId, NodeId, PathConstraints)],
) -> Vec<Result<Path, PathError>> {
    exec::map(mode, queries, |(s, d, c)| compute_path(graph, residuals, s, d, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheOutcome {
    Hit,
    Miss,
    StaleRecompute,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheCounters {
    pub hits: u64,
    pub misses: u64,
    pub stale_recomputes: u64,
    pub computations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableLookup {
    pub outcome: CacheOutcome,
    /// `None` when no feasible path exists.
    pub path: Option<Path>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PathKey {
    source: NodeId,
    destination: NodeId,
    constraints: PathConstraints,
}

/// Cache of previously computed paths keyed by endpoints and constraints.
///
/// A cached path is served as long as it stays feasible, even if a better
/// path has since become available. Infeasible entries are recomputed and
/// replaced; failed computations are never cached.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathAllocationTable {
    entries: BTreeMap<PathKey, Path>,
    counters: CacheCounters,
}

impl PathAllocationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn counters(&self) -> CacheCounters {
        self.counters
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup_or_compute(
        &mut self,
        graph: &RoutingGraph,
        residuals: &ResidualState,
        source: &NodeId,
        destination: &NodeId,
        constraints: &PathConstraints,
    ) -> Result<TableLookup, PathError> {
        for node in [source, destination] {
            if graph.node_index(node).is_none() {
                return Err(PathError::UnknownNode(node.clone()));
            }
        }
        let key = PathKey { source: source.clone(), destination: destination.clone(), constraints: *constraints };

        let outcome = match self.entries.get_mut(&key) {
            Some(cached) if cached.is_feasible(residuals, constraints) => {
                cached.bottleneck_bandwidth = residuals.bottleneck(&cached.link_indices);
                self.counters.hits += 1;
                return Ok(TableLookup { outcome: CacheOutcome::Hit, path: Some(cached.clone()) });
            }
            Some(_) => {
                self.counters.stale_recomputes += 1;
                CacheOutcome::StaleRecompute
            }
            None => {
                self.counters.misses += 1;
                CacheOutcome::Miss
            }
        };

        self.counters.computations += 1;
        match compute_path(graph, residuals, source, destination, constraints) {
            Ok(path) => {
                self.entries.insert(key, path.clone());
                Ok(TableLookup { outcome, path: Some(path) })
            }
            Err(PathError::NoFeasiblePath { .. }) => {
                self.entries.remove(&key);
                Ok(TableLookup { outcome, path: None })
            }
            Err(e) => Err(e),
        }
    }
}

//! The admission pipeline.
//!
//! A request passes three gates in a fixed order:
//!
//! 1. the application handler registers it and checks its SLA,
//! 2. the target host must have enough free CPU, memory and I/O,
//! 3. the PCE must find a path with enough residual bandwidth (and within
//!    the SLA latency bound), consulting the path allocation table first.
//!
//! A request that fails a gate is rejected on the spot and later gates never
//! run. Only admission changes compute or link state; a rejection leaves both
//! untouched apart from the handler's record of the request id.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, Scheme, SchemeParams};
use crate::pce::{CacheOutcome, Path, PathAllocationTable, PathConstraints, PathError, ResidualState};
use crate::resources::{Dimension, Resources};
use crate::sla::{self, SlaPolicy, SlaViolation};
use crate::topo::{NodeId, RoutingGraph, Topology};

id_type!(
    /// Identifier of a request, and of the lease it turns into.
    RequestId
);

/// A demand for compute resources on a target host plus a bandwidth
/// reservation between two routing nodes. Field names follow the workload
/// trace file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub id: RequestId,
    #[serde(rename = "arrival")]
    pub arrival_time: u64,
    #[serde(rename = "src")]
    pub source: NodeId,
    #[serde(rename = "dst")]
    pub destination: NodeId,
    pub target: NodeId,
    #[serde(default)]
    pub cpu: u64,
    #[serde(default)]
    pub mem: u64,
    #[serde(default)]
    pub io: u64,
    #[serde(rename = "bw", default)]
    pub bandwidth: u64,
    pub duration: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_fraction: Option<f64>,
}

impl Request {
    pub fn builder(
        id: impl Into<RequestId>,
        source: impl Into<NodeId>,
        destination: impl Into<NodeId>,
        target: impl Into<NodeId>,
    ) -> RequestBuilder {
        RequestBuilder(Request {
            id: id.into(),
            arrival_time: 0,
            source: source.into(),
            destination: destination.into(),
            target: target.into(),
            cpu: 0,
            mem: 0,
            io: 0,
            bandwidth: 0,
            duration: 1,
            usage_fraction: None,
        })
    }

    pub fn demand(&self) -> Resources {
        Resources::new(self.cpu, self.mem, self.io)
    }

    /// Fraction of its CPU share the job actually uses; 1 when unspecified.
    pub fn usage_fraction(&self) -> f64 {
        self.usage_fraction.unwrap_or(1.0)
    }

    /// Checks the request against its own invariants and the topology.
    pub fn validate(&self, topology: &Topology) -> Result<(), AdmissionError> {
        if self.duration == 0 {
            return Err(AdmissionError::InvalidRequest {
                id: self.id.clone(),
                reason: "duration must be positive".into(),
            });
        }
        if let Some(f) = self.usage_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(AdmissionError::InvalidRequest {
                    id: self.id.clone(),
                    reason: format!("usage_fraction {f} outside [0, 1]"),
                });
            }
        }
        for node in [&self.source, &self.destination] {
            match topology.node(node) {
                None => return Err(AdmissionError::UnknownNode(node.clone())),
                Some(n) if !n.kind.is_routable() => {
                    return Err(AdmissionError::InvalidRequest {
                        id: self.id.clone(),
                        reason: format!("endpoint `{node}` is a {} node", n.kind),
                    })
                }
                Some(_) => {}
            }
        }
        target_capacity(topology, &self.target).map(|_| ())
    }
}

pub struct RequestBuilder(Request);

impl RequestBuilder {
    pub fn arrival(mut self, t: u64) -> Self {
        self.0.arrival_time = t;
        self
    }

    pub fn demand(mut self, demand: Resources) -> Self {
        self.0.cpu = demand.cpu;
        self.0.mem = demand.mem;
        self.0.io = demand.io;
        self
    }

    pub fn bandwidth(mut self, bw: u64) -> Self {
        self.0.bandwidth = bw;
        self
    }

    pub fn duration(mut self, d: u64) -> Self {
        self.0.duration = d;
        self
    }

    pub fn usage_fraction(mut self, f: f64) -> Self {
        self.0.usage_fraction = Some(f);
        self
    }

    pub fn build(self) -> Request {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdmissionError {
    #[error("request id `{0}` was already registered")]
    DuplicateRequestId(RequestId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("target `{node}` is not a compute host")]
    InvalidTarget { node: NodeId },
    #[error("invalid request `{id}`: {reason}")]
    InvalidRequest { id: RequestId, reason: String },
    #[error("request `{id}` attempted at {now}, before its arrival at {arrival}")]
    BeforeArrival { id: RequestId, now: u64, arrival: u64 },
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Allocated CPU/memory/I/O per compute host.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ComputeState {
    allocated: BTreeMap<NodeId, Resources>,
}

impl ComputeState {
    /// Every compute host of `topology` with nothing allocated.
    pub fn new(topology: &Topology) -> Self {
        Self { allocated: topology.compute_nodes().map(|n| (n.id.clone(), Resources::ZERO)).collect() }
    }

    pub fn allocated(&self, node: &NodeId) -> Resources {
        self.allocated.get(node).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Resources)> {
        self.allocated.iter()
    }

    pub fn total(&self) -> Resources {
        self.allocated.values().copied().sum()
    }

    /// Records an allocation without checking capacity.
    pub fn allocate(&mut self, node: &NodeId, amount: &Resources) {
        let slot = self.allocated.entry(node.clone()).or_default();
        *slot = slot.checked_add(amount).expect("allocation overflow");
    }

    pub fn free(&mut self, node: &NodeId, amount: &Resources) {
        let slot = self.allocated.entry(node.clone()).or_default();
        *slot = slot.checked_sub(amount).expect("freed more than allocated");
    }

    /// Hosts whose allocation exceeds capacity in some dimension.
    pub fn overcommitted<'a>(&'a self, topology: &'a Topology) -> impl Iterator<Item = (&'a NodeId, Dimension)> + 'a {
        self.allocated.iter().flat_map(move |(id, alloc)| {
            let cap = topology.node(id).map(|n| n.capacity).unwrap_or_default();
            Dimension::ALL.into_iter().filter(move |&d| alloc.get(d) > cap.get(d)).map(move |d| (id, d))
        })
    }
}

/// An admitted request's hold on compute and bandwidth for `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lease {
    pub request: RequestId,
    pub target: NodeId,
    pub path: Path,
    pub reserved: Resources,
    pub bandwidth: u64,
    pub usage_fraction: f64,
    pub start: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rejection {
    Sla {
        violations: Vec<SlaViolation>,
    },
    InsufficientResources {
        dimension: Dimension,
    },
    /// Product-logic admission score below threshold (Realistic scheme).
    LowAdmissionScore {
        score: f64,
    },
    NoFeasiblePath,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::Sla { violations } => {
                let dims: Vec<&str> = violations.iter().map(|v| v.dimension.name()).collect();
                write!(f, "sla:{}", dims.join("+"))
            }
            Rejection::InsufficientResources { dimension } => write!(f, "insufficient:{dimension}"),
            Rejection::LowAdmissionScore { score } => write!(f, "score:{score}"),
            Rejection::NoFeasiblePath => f.write_str("no_feasible_path"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationDecision {
    Admitted { lease: Lease, cache: CacheOutcome },
    Rejected { request: RequestId, reason: Rejection },
}

impl AllocationDecision {
    pub fn request(&self) -> &RequestId {
        match self {
            AllocationDecision::Admitted { lease, .. } => &lease.request,
            AllocationDecision::Rejected { request, .. } => request,
        }
    }

    pub fn is_admitted(&self) -> bool {
        matches!(self, AllocationDecision::Admitted { .. })
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            AllocationDecision::Admitted { lease, .. } => Some(&lease.path),
            AllocationDecision::Rejected { .. } => None,
        }
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            AllocationDecision::Rejected { reason, .. } => Some(reason),
            AllocationDecision::Admitted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResourceCheck {
    Sufficient,
    Insufficient(Dimension),
}

pub(crate) fn target_capacity(topology: &Topology, target: &NodeId) -> Result<Resources, AdmissionError> {
    let node = topology.node(target).ok_or_else(|| AdmissionError::UnknownNode(target.clone()))?;
    if !node.kind.is_compute() {
        return Err(AdmissionError::InvalidTarget { node: target.clone() });
    }
    Ok(node.capacity)
}

/// Free capacity on the target must cover every demand; the first short
/// dimension is reported in cpu, mem, io order. Equality admits.
pub fn check_resources(
    request: &Request,
    state: &ComputeState,
    topology: &Topology,
) -> Result<ResourceCheck, AdmissionError> {
    let capacity = target_capacity(topology, &request.target)?;
    let allocated = state.allocated(&request.target);
    let demand = request.demand();
    Ok(Dimension::ALL
        .into_iter()
        .find(|&d| allocated.get(d).saturating_add(demand.get(d)) > capacity.get(d))
        .map_or(ResourceCheck::Sufficient, ResourceCheck::Insufficient))
}

/// Run-local admission state: registered ids, compute allocations, link
/// residuals, the path allocation table and live leases.
#[derive(Debug, Clone)]
pub struct AdmissionController<'t> {
    topology: &'t Topology,
    graph: RoutingGraph,
    registered: BTreeSet<RequestId>,
    compute: ComputeState,
    residuals: ResidualState,
    table: PathAllocationTable,
    leases: BTreeMap<RequestId, Lease>,
}

impl<'t> AdmissionController<'t> {
    pub fn new(topology: &'t Topology) -> Self {
        let graph = topology.routing_graph();
        let residuals = ResidualState::new(&graph);
        Self {
            topology,
            graph,
            registered: BTreeSet::new(),
            compute: ComputeState::new(topology),
            residuals,
            table: PathAllocationTable::new(),
            leases: BTreeMap::new(),
        }
    }

    pub fn topology(&self) -> &'t Topology {
        self.topology
    }

    pub fn graph(&self) -> &RoutingGraph {
        &self.graph
    }

    pub fn compute_state(&self) -> &ComputeState {
        &self.compute
    }

    pub fn residuals(&self) -> &ResidualState {
        &self.residuals
    }

    /// Direct access for seeding background load outside the pipeline.
    pub fn compute_state_mut(&mut self) -> &mut ComputeState {
        &mut self.compute
    }

    pub fn residuals_mut(&mut self) -> &mut ResidualState {
        &mut self.residuals
    }

    pub fn path_table(&self) -> &PathAllocationTable {
        &self.table
    }

    pub fn leases(&self) -> &BTreeMap<RequestId, Lease> {
        &self.leases
    }

    /// Registers the request and returns its SLA violations.
    pub fn handle_application(
        &mut self,
        request: &Request,
        policy: &SlaPolicy,
    ) -> Result<Vec<SlaViolation>, AdmissionError> {
        if !self.registered.insert(request.id.clone()) {
            return Err(AdmissionError::DuplicateRequestId(request.id.clone()));
        }
        Ok(sla::check_sla(request, policy))
    }

    /// Runs the pipeline with the plain capacity gate.
    pub fn admit(
        &mut self,
        request: &Request,
        policy: &SlaPolicy,
        now: u64,
    ) -> Result<AllocationDecision, AdmissionError> {
        self.admit_with(request, policy, now, Scheme::Proposed, &SchemeParams::default())
    }

    /// Runs the pipeline with `scheme` deciding the resource gate. The SLA
    /// and path gates are shared by all schemes.
    pub fn admit_with(
        &mut self,
        request: &Request,
        policy: &SlaPolicy,
        now: u64,
        scheme: Scheme,
        params: &SchemeParams,
    ) -> Result<AllocationDecision, AdmissionError> {
        if now < request.arrival_time {
            return Err(AdmissionError::BeforeArrival { id: request.id.clone(), now, arrival: request.arrival_time });
        }
        request.validate(self.topology)?;
        let reject = |reason| Ok(AllocationDecision::Rejected { request: request.id.clone(), reason });

        let violations = self.handle_application(request, policy)?;
        if !violations.is_empty() {
            return reject(Rejection::Sla { violations });
        }

        if let Some(reason) = baselines::resource_gate(scheme, params, request, &self.compute, self.topology)? {
            return reject(reason);
        }

        let constraints = PathConstraints {
            min_residual_bandwidth: request.bandwidth,
            max_latency: policy.max_path_latency,
            max_hops: None,
        };
        let lookup = self.table.lookup_or_compute(
            &self.graph,
            &self.residuals,
            &request.source,
            &request.destination,
            &constraints,
        )?;
        let Some(path) = lookup.path else {
            return reject(Rejection::NoFeasiblePath);
        };

        self.residuals.reserve(&path, request.bandwidth).expect("path feasibility guarantees the reservation");
        let reserved = request.demand();
        self.compute.allocate(&request.target, &reserved);
        let lease = Lease {
            request: request.id.clone(),
            target: request.target.clone(),
            path,
            reserved,
            bandwidth: request.bandwidth,
            usage_fraction: request.usage_fraction(),
            start: now,
            end: now + request.duration,
        };
        self.leases.insert(lease.request.clone(), lease.clone());
        Ok(AllocationDecision::Admitted { lease, cache: lookup.outcome })
    }

    /// Ends one lease early or on schedule, returning what it held.
    pub fn release_lease(&mut self, id: &RequestId) -> Option<Lease> {
        let lease = self.leases.remove(id)?;
        self.compute.free(&lease.target, &lease.reserved);
        self.residuals.release(&lease.path, lease.bandwidth).expect("lease bandwidth was reserved on this path");
        Some(lease)
    }

    /// Releases every lease with `end <= now`; ids come back sorted.
    pub fn expire_leases(&mut self, now: u64) -> Vec<RequestId> {
        let due: Vec<RequestId> = self.leases.values().filter(|l| l.end <= now).map(|l| l.request.clone()).collect();
        for id in &due {
            self.release_lease(id);
        }
        due
    }

    /// Describes every broken capacity bound; empty when the state conserves
    /// resources.
    pub fn conservation_violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .compute
            .overcommitted(self.topology)
            .map(|(node, dim)| format!("node {node} over {dim} capacity"))
            .collect();
        for (ix, link) in self.graph.links().iter().enumerate() {
            if self.residuals.residual(ix) > self.residuals.capacity(ix) {
                out.push(format!("link {} over capacity", link.id));
            }
        }
        out
    }
}

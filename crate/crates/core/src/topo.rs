//! Hierarchical data-center topology and the routing view derived from it.
//!
//! A topology is loaded from a JSON document ([`TopologyDoc`]) and validated
//! once; the resulting [`Topology`] is immutable and can be shared read-only
//! between concurrent simulation runs.
//!
//! Nodes are organized as zones, blocks, servers and compute nodes. Zones and
//! blocks only group other nodes. Switches, servers and compute nodes take
//! part in routing, and only servers and compute nodes carry capacity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resources::{Dimension, Resources};

id_type!(
    /// Identifier of a topology node.
    NodeId
);
id_type!(
    /// Identifier of a topology link.
    LinkId
);
id_type!(
    /// Identifier of a resource pool.
    PoolId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Zone,
    Block,
    Server,
    ComputeNode,
    Switch,
}

impl NodeKind {
    /// Zones and blocks group other nodes and never route or compute.
    pub fn is_grouping(self) -> bool {
        matches!(self, NodeKind::Zone | NodeKind::Block)
    }

    /// Servers and compute nodes host work.
    pub fn is_compute(self) -> bool {
        matches!(self, NodeKind::Server | NodeKind::ComputeNode)
    }

    pub fn is_routable(self) -> bool {
        !self.is_grouping()
    }

    fn may_have_parent(self, parent: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            Zone => false,
            Block => parent == Zone,
            Server => matches!(parent, Zone | Block),
            ComputeNode => matches!(parent, Zone | Block | Server),
            Switch => matches!(parent, Zone | Block | Server),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Zone => "zone",
            NodeKind::Block => "block",
            NodeKind::Server => "server",
            NodeKind::ComputeNode => "compute_node",
            NodeKind::Switch => "switch",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub capacity: Resources,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth: u64,
    pub latency: u64,
}

impl Link {
    pub fn connects(&self, node: &NodeId) -> bool {
        &self.a == node || &self.b == node
    }
}

/// A named set of compute hosts. Aggregate capacity is always derived from
/// the member nodes, never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourcePool {
    pub id: PoolId,
    members: BTreeSet<NodeId>,
}

impl ResourcePool {
    pub fn new(id: PoolId) -> Self {
        Self { id, members: BTreeSet::new() }
    }

    pub fn members(&self) -> impl Iterator<Item = &NodeId> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Adds a compute host of `topology`. Returns false if already present.
    pub fn add_member(&mut self, topology: &Topology, node: &NodeId) -> Result<bool, TopologyError> {
        let kind = topology.node(node).ok_or_else(|| TopologyError::UnknownNode(node.clone()))?.kind;
        if !kind.is_compute() {
            return Err(TopologyError::Validation(vec![Violation::InvalidPoolMember {
                pool: self.id.to_string(),
                node: node.to_string(),
                kind,
            }]));
        }
        Ok(self.members.insert(node.clone()))
    }

    pub fn remove_member(&mut self, node: &NodeId) -> bool {
        self.members.remove(node)
    }

    /// Sum of member capacities in `topology`.
    pub fn aggregate(&self, topology: &Topology) -> Resources {
        self.members.iter().filter_map(|id| topology.node(id)).map(|n| n.capacity).sum()
    }
}

/// One broken rule found by [`validate`], naming the offending element.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("duplicate {element} id `{id}`")]
    DuplicateId { element: &'static str, id: String },
    #[error("node `{node}` references unknown parent `{parent}`")]
    UnknownParent { node: String, parent: String },
    #[error("node `{node}` is part of a parent cycle")]
    ParentCycle { node: String },
    #[error("node `{node}` ({kind}) cannot be placed under `{parent}` ({parent_kind})")]
    InvalidParent { node: String, kind: NodeKind, parent: String, parent_kind: NodeKind },
    #[error("node `{node}` has negative {dimension} capacity")]
    NegativeCapacity { node: String, dimension: Dimension },
    #[error("node `{node}` ({kind}) must not carry capacity")]
    UnexpectedCapacity { node: String, kind: NodeKind },
    #[error("node `{node}` ({kind}) carries no capacity")]
    MissingCapacity { node: String, kind: NodeKind },
    #[error("link `{link}` references unknown node `{node}`")]
    UnknownEndpoint { link: String, node: String },
    #[error("link `{link}` attaches to `{node}`, a {kind} node")]
    InvalidEndpoint { link: String, node: String, kind: NodeKind },
    #[error("link `{link}` is a self-loop on `{node}`")]
    SelfLoop { link: String, node: String },
    #[error("link `{link}` has non-positive bandwidth {bandwidth}")]
    NonPositiveBandwidth { link: String, bandwidth: i64 },
    #[error("link `{link}` has negative latency {latency}")]
    NegativeLatency { link: String, latency: i64 },
    #[error("pool `{pool}` references unknown node `{node}`")]
    UnknownPoolMember { pool: String, node: String },
    #[error("pool `{pool}` contains `{node}`, a {kind} node")]
    InvalidPoolMember { pool: String, node: String, kind: NodeKind },
}

impl Violation {
    /// Id of the element that broke the rule.
    pub fn element(&self) -> &str {
        match self {
            Violation::DuplicateId { id, .. } => id,
            Violation::UnknownParent { node, .. }
            | Violation::ParentCycle { node }
            | Violation::InvalidParent { node, .. }
            | Violation::NegativeCapacity { node, .. }
            | Violation::UnexpectedCapacity { node, .. }
            | Violation::MissingCapacity { node, .. } => node,
            Violation::UnknownEndpoint { link, .. }
            | Violation::InvalidEndpoint { link, .. }
            | Violation::SelfLoop { link, .. }
            | Violation::NonPositiveBandwidth { link, .. }
            | Violation::NegativeLatency { link, .. } => link,
            Violation::UnknownPoolMember { pool, .. } | Violation::InvalidPoolMember { pool, .. } => pool,
        }
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("malformed topology document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid topology: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("cannot read topology: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Node entry of the topology file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default)]
    pub cpu: i64,
    #[serde(default)]
    pub mem: i64,
    #[serde(default)]
    pub io: i64,
}

/// Link entry of the topology file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub id: String,
    pub a: String,
    pub b: String,
    pub bw: i64,
    #[serde(default)]
    pub latency: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolDoc {
    pub id: String,
    #[serde(default)]
    pub members: Vec<String>,
}

/// The on-disk topology document, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub pools: Vec<PoolDoc>,
}

/// Checks every topology invariant; an empty result means the document is
/// valid. Violations are reported nodes first, then links, then pools.
pub fn validate(doc: &TopologyDoc) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut kinds: BTreeMap<&str, NodeKind> = BTreeMap::new();
    let mut parents: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    for n in &doc.nodes {
        if kinds.insert(&n.id, n.kind).is_some() {
            out.push(Violation::DuplicateId { element: "node", id: n.id.clone() });
        }
        parents.insert(&n.id, n.parent.as_deref());
    }

    let mut on_cycle = BTreeSet::new();
    for &start in parents.keys() {
        let mut cur = start;
        for _ in 0..parents.len() {
            match parents.get(cur).copied().flatten() {
                Some(p) if p == start => {
                    on_cycle.insert(start);
                    break;
                }
                Some(p) if parents.contains_key(p) => cur = p,
                _ => break,
            }
        }
    }

    for n in &doc.nodes {
        if let Some(parent) = n.parent.as_deref() {
            match kinds.get(parent) {
                None => out.push(Violation::UnknownParent { node: n.id.clone(), parent: parent.to_owned() }),
                Some(_) if on_cycle.contains(n.id.as_str()) => out.push(Violation::ParentCycle { node: n.id.clone() }),
                Some(&pk) if !n.kind.may_have_parent(pk) => out.push(Violation::InvalidParent {
                    node: n.id.clone(),
                    kind: n.kind,
                    parent: parent.to_owned(),
                    parent_kind: pk,
                }),
                Some(_) => {}
            }
        }

        let caps = [(Dimension::Cpu, n.cpu), (Dimension::Mem, n.mem), (Dimension::Io, n.io)];
        let mut negative = false;
        for (dimension, value) in caps {
            if value < 0 {
                negative = true;
                out.push(Violation::NegativeCapacity { node: n.id.clone(), dimension });
            }
        }
        if !negative {
            let any = caps.iter().any(|&(_, v)| v > 0);
            if n.kind.is_compute() && !any {
                out.push(Violation::MissingCapacity { node: n.id.clone(), kind: n.kind });
            } else if !n.kind.is_compute() && any {
                out.push(Violation::UnexpectedCapacity { node: n.id.clone(), kind: n.kind });
            }
        }
    }

    let mut link_ids = BTreeSet::new();
    for l in &doc.links {
        if !link_ids.insert(l.id.as_str()) {
            out.push(Violation::DuplicateId { element: "link", id: l.id.clone() });
        }
        for end in [&l.a, &l.b] {
            match kinds.get(end.as_str()) {
                None => out.push(Violation::UnknownEndpoint { link: l.id.clone(), node: end.clone() }),
                Some(&kind) if !kind.is_routable() => {
                    out.push(Violation::InvalidEndpoint { link: l.id.clone(), node: end.clone(), kind })
                }
                Some(_) => {}
            }
        }
        if l.a == l.b {
            out.push(Violation::SelfLoop { link: l.id.clone(), node: l.a.clone() });
        }
        if l.bw <= 0 {
            out.push(Violation::NonPositiveBandwidth { link: l.id.clone(), bandwidth: l.bw });
        }
        if l.latency < 0 {
            out.push(Violation::NegativeLatency { link: l.id.clone(), latency: l.latency });
        }
    }

    let mut pool_ids = BTreeSet::new();
    for p in &doc.pools {
        if !pool_ids.insert(p.id.as_str()) {
            out.push(Violation::DuplicateId { element: "pool", id: p.id.clone() });
        }
        for m in &p.members {
            match kinds.get(m.as_str()) {
                None => out.push(Violation::UnknownPoolMember { pool: p.id.clone(), node: m.clone() }),
                Some(&kind) if !kind.is_compute() => {
                    out.push(Violation::InvalidPoolMember { pool: p.id.clone(), node: m.clone(), kind })
                }
                Some(_) => {}
            }
        }
    }

    out
}

/// The validated directory of nodes, links and pools.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    nodes: BTreeMap<NodeId, Node>,
    links: BTreeMap<LinkId, Link>,
    pools: BTreeMap<PoolId, ResourcePool>,
}

impl Topology {
    pub fn from_doc(doc: &TopologyDoc) -> Result<Self, TopologyError> {
        let violations = validate(doc);
        if !violations.is_empty() {
            return Err(TopologyError::Validation(violations));
        }

        let nodes = doc
            .nodes
            .iter()
            .map(|n| {
                let node = Node {
                    id: NodeId::new(&n.id),
                    kind: n.kind,
                    parent: n.parent.as_deref().map(NodeId::from),
                    capacity: Resources::new(n.cpu as u64, n.mem as u64, n.io as u64),
                };
                (node.id.clone(), node)
            })
            .collect();
        let links = doc
            .links
            .iter()
            .map(|l| {
                let link = Link {
                    id: LinkId::new(&l.id),
                    a: NodeId::new(&l.a),
                    b: NodeId::new(&l.b),
                    bandwidth: l.bw as u64,
                    latency: l.latency as u64,
                };
                (link.id.clone(), link)
            })
            .collect();
        let pools = doc
            .pools
            .iter()
            .map(|p| {
                let pool =
                    ResourcePool { id: PoolId::new(&p.id), members: p.members.iter().map(NodeId::new).collect() };
                (pool.id.clone(), pool)
            })
            .collect();
        Ok(Self { nodes, links, pools })
    }

    pub fn from_json(json: &str) -> Result<Self, TopologyError> {
        Self::from_doc(&serde_json::from_str(json)?)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, TopologyError> {
        Self::from_doc(&serde_json::from_reader(reader)?)
    }

    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDoc {
                    id: n.id.to_string(),
                    kind: n.kind,
                    parent: n.parent.as_ref().map(ToString::to_string),
                    cpu: n.capacity.cpu as i64,
                    mem: n.capacity.mem as i64,
                    io: n.capacity.io as i64,
                })
                .collect(),
            links: self
                .links
                .values()
                .map(|l| LinkDoc {
                    id: l.id.to_string(),
                    a: l.a.to_string(),
                    b: l.b.to_string(),
                    bw: l.bandwidth as i64,
                    latency: l.latency as i64,
                })
                .collect(),
            pools: self
                .pools
                .values()
                .map(|p| PoolDoc { id: p.id.to_string(), members: p.members.iter().map(ToString::to_string).collect() })
                .collect(),
        }
    }

    /// Re-checks the invariants. Always empty for a constructed topology.
    pub fn validate(&self) -> Vec<Violation> {
        validate(&self.to_doc())
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn pool(&self, id: &PoolId) -> Option<&ResourcePool> {
        self.pools.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn pools(&self) -> impl Iterator<Item = &ResourcePool> {
        self.pools.values()
    }

    /// Servers and compute nodes, sorted by id.
    pub fn compute_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind.is_compute())
    }

    pub fn total_capacity(&self) -> Resources {
        self.compute_nodes().map(|n| n.capacity).sum()
    }

    /// Walks the parent chain of `id`, nearest ancestor first.
    pub fn ancestors<'a>(&'a self, id: &NodeId) -> impl Iterator<Item = &'a Node> + 'a {
        let mut cur = self.nodes.get(id).and_then(|n| n.parent.clone());
        std::iter::from_fn(move || {
            let node = self.nodes.get(cur.as_ref()?)?;
            cur = node.parent.clone();
            Some(node)
        })
    }

    pub fn routing_graph(&self) -> RoutingGraph {
        RoutingGraph::new(self)
    }
}

/// A link as seen by path computation: endpoints are indices into
/// [`RoutingGraph::nodes`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutedLink {
    pub id: LinkId,
    pub endpoints: (usize, usize),
    pub capacity: u64,
    pub latency: u64,
}

impl RoutedLink {
    pub fn other_end(&self, node: usize) -> usize {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// Adjacency view over switches, servers and compute nodes. Nodes and links
/// are indexed in id order, and each adjacency list is sorted by link index,
/// so iteration is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingGraph {
    nodes: Vec<NodeId>,
    node_index: BTreeMap<NodeId, usize>,
    links: Vec<RoutedLink>,
    link_index: BTreeMap<LinkId, usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl RoutingGraph {
    pub fn new(topology: &Topology) -> Self {
        let nodes: Vec<NodeId> = topology.nodes().filter(|n| n.kind.is_routable()).map(|n| n.id.clone()).collect();
        let node_index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();

        let mut links = Vec::new();
        let mut link_index = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for l in topology.links() {
            let (Some(&a), Some(&b)) = (node_index.get(&l.a), node_index.get(&l.b)) else {
                continue;
            };
            let ix = links.len();
            link_index.insert(l.id.clone(), ix);
            links.push(RoutedLink { id: l.id.clone(), endpoints: (a, b), capacity: l.bandwidth, latency: l.latency });
            adjacency[a].push((ix, b));
            adjacency[b].push((ix, a));
        }

        Self { nodes, node_index, links, link_index, adjacency }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[RoutedLink] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link_index(&self, id: &LinkId) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    /// `(link index, neighbor index)` pairs incident to `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, kind: NodeKind, parent: Option<&str>, cpu: i64) -> NodeDoc {
        NodeDoc {
            id: id.into(),
            kind,
            parent: parent.map(Into::into),
            cpu,
            mem: if kind.is_compute() { 8 } else { 0 },
            io: 0,
        }
    }

    fn link(id: &str, a: &str, b: &str) -> LinkDoc {
        LinkDoc { id: id.into(), a: a.into(), b: b.into(), bw: 10, latency: 1 }
    }

    #[test]
    fn empty_document_loads() {
        let topo = Topology::from_json(r#"{"nodes": [], "links": [], "pools": []}"#).unwrap();
        assert_eq!(topo.nodes().count(), 0);
        assert_eq!(topo.links().count(), 0);
        let g = topo.routing_graph();
        assert_eq!((g.node_count(), g.link_count()), (0, 0));
    }

    #[test]
    fn two_compute_nodes_and_a_link() {
        let doc = TopologyDoc {
            nodes: vec![node("c1", NodeKind::ComputeNode, None, 8), node("c2", NodeKind::ComputeNode, None, 8)],
            links: vec![link("l1", "c1", "c2")],
            pools: vec![],
        };
        assert!(validate(&doc).is_empty());
        let topo = Topology::from_doc(&doc).unwrap();
        assert_eq!(topo.nodes().count(), 2);
        assert_eq!(topo.links().count(), 1);
        assert_eq!(topo.node(&"c1".into()).unwrap().capacity.cpu, 8);
        assert!(topo.validate().is_empty());
    }

    #[test]
    fn dangling_link_endpoint_is_named() {
        let doc = TopologyDoc {
            nodes: vec![node("c1", NodeKind::ComputeNode, None, 8)],
            links: vec![link("l1", "c1", "n9")],
            pools: vec![],
        };
        let err = Topology::from_doc(&doc).unwrap_err();
        assert!(err.to_string().contains("n9"), "{err}");
        match err {
            TopologyError::Validation(v) => {
                assert_eq!(v, vec![Violation::UnknownEndpoint { link: "l1".into(), node: "n9".into() }])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_parent_is_one_cycle_violation() {
        let doc = TopologyDoc { nodes: vec![node("z", NodeKind::Zone, Some("z"), 0)], ..Default::default() };
        assert_eq!(validate(&doc), vec![Violation::ParentCycle { node: "z".into() }]);
    }

    #[test]
    fn pool_with_switch_is_one_membership_violation() {
        let doc = TopologyDoc {
            nodes: vec![node("s1", NodeKind::Switch, None, 0), node("c1", NodeKind::ComputeNode, None, 4)],
            links: vec![],
            pools: vec![PoolDoc { id: "p".into(), members: vec!["c1".into(), "s1".into()] }],
        };
        let v = validate(&doc);
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::InvalidPoolMember { node, .. } if node == "s1"));
    }

    #[test]
    fn rule_checks() {
        let doc = TopologyDoc {
            nodes: vec![
                node("z", NodeKind::Zone, None, 0),
                node("b", NodeKind::Block, Some("z"), 0),
                node("c", NodeKind::ComputeNode, Some("b"), 4),
                node("s", NodeKind::Server, Some("c"), 4),
                NodeDoc { cpu: -1, ..node("neg", NodeKind::Server, None, 0) },
                NodeDoc { mem: 0, ..node("empty", NodeKind::Server, None, 0) },
                node("sw", NodeKind::Switch, Some("ghost"), 3),
            ],
            links: vec![
                link("l1", "c", "c"),
                LinkDoc { bw: 0, latency: -2, ..link("l2", "c", "z") },
                link("l2", "c", "s"),
            ],
            pools: vec![],
        };
        let v = validate(&doc);
        let elements: Vec<&str> = v.iter().map(Violation::element).collect();
        assert_eq!(elements, ["s", "neg", "empty", "sw", "sw", "l1", "l2", "l2", "l2", "l2"], "{v:#?}");
        assert!(matches!(v[0], Violation::InvalidParent { .. }));
        assert!(matches!(v[1], Violation::NegativeCapacity { dimension: Dimension::Cpu, .. }));
        assert!(matches!(v[2], Violation::MissingCapacity { .. }));
        assert!(matches!(v[3], Violation::UnknownParent { .. }));
        assert!(matches!(v[4], Violation::UnexpectedCapacity { .. }));
        assert!(matches!(v[5], Violation::SelfLoop { .. }));
        assert!(matches!(v[6], Violation::InvalidEndpoint { .. }));
        assert!(matches!(v[7], Violation::NonPositiveBandwidth { .. }));
        assert!(matches!(v[8], Violation::NegativeLatency { .. }));
        assert!(matches!(v[9], Violation::DuplicateId { element: "link", .. }));
    }

    #[test]
    fn two_cycle_flags_both_members() {
        let doc = TopologyDoc {
            nodes: vec![
                node("a", NodeKind::Block, Some("b"), 0),
                node("b", NodeKind::Block, Some("a"), 0),
                node("c", NodeKind::Server, Some("a"), 2),
            ],
            ..Default::default()
        };
        assert_eq!(
            validate(&doc),
            vec![Violation::ParentCycle { node: "a".into() }, Violation::ParentCycle { node: "b".into() },]
        );
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(Topology::from_json("{\"nodes\": 3"), Err(TopologyError::Parse(_))));
        assert!(matches!(
            Topology::from_json(r#"{"nodes": [{"id": "x", "kind": "router"}]}"#),
            Err(TopologyError::Parse(_))
        ));
    }

    #[test]
    fn routing_graph_skips_grouping_levels() {
        let doc = TopologyDoc {
            nodes: vec![
                node("z", NodeKind::Zone, None, 0),
                node("b", NodeKind::Block, Some("z"), 0),
                node("c1", NodeKind::ComputeNode, Some("b"), 4),
                node("c2", NodeKind::ComputeNode, Some("b"), 4),
            ],
            links: vec![link("l", "c1", "c2")],
            pools: vec![],
        };
        let topo = Topology::from_doc(&doc).unwrap();
        let g = topo.routing_graph();
        assert_eq!(g.nodes(), &[NodeId::from("c1"), NodeId::from("c2")]);
        assert_eq!(g.link_count(), 1);
        let ancestors: Vec<&str> = topo.ancestors(&"c1".into()).map(|n| n.id.as_str()).collect();
        assert_eq!(ancestors, ["b", "z"]);
    }

    #[test]
    fn triangle_has_degree_two_everywhere() {
        let doc = TopologyDoc {
            nodes: ["s1", "s2", "s3"].iter().map(|s| node(s, NodeKind::Switch, None, 0)).collect(),
            links: vec![link("a", "s1", "s2"), link("b", "s2", "s3"), link("c", "s3", "s1")],
            pools: vec![],
        };
        let g = Topology::from_doc(&doc).unwrap().routing_graph();
        assert_eq!((g.node_count(), g.link_count()), (3, 3));
        assert!((0..3).all(|i| g.degree(i) == 2));
        assert_eq!(g, Topology::from_doc(&doc).unwrap().routing_graph());
    }

    #[test]
    fn pool_aggregate_follows_members() {
        let doc = TopologyDoc {
            nodes: vec![
                node("c1", NodeKind::ComputeNode, None, 4),
                node("c2", NodeKind::Server, None, 6),
                node("sw", NodeKind::Switch, None, 0),
            ],
            links: vec![],
            pools: vec![PoolDoc { id: "p".into(), members: vec!["c1".into()] }],
        };
        let topo = Topology::from_doc(&doc).unwrap();
        let mut pool = topo.pool(&"p".into()).unwrap().clone();
        assert_eq!(pool.aggregate(&topo), Resources::new(4, 8, 0));
        assert!(pool.add_member(&topo, &"c2".into()).unwrap());
        assert_eq!(pool.aggregate(&topo), Resources::new(10, 16, 0));
        assert!(pool.add_member(&topo, &"sw".into()).is_err());
        assert!(pool.remove_member(&"c1".into()));
        assert_eq!(pool.aggregate(&topo), Resources::new(6, 8, 0));
    }
}

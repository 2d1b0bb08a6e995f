//! Open WPL–ZX diagrams: weighted Z/X spiders, Hadamard nodes, wires and
//! ordered boundaries.
//!
//! Every node owns numbered ports `0..degree`. Ports below `inputs` are
//! input-side, the rest output-side. The split only matters for arity
//! bookkeeping and circuit extraction; tensor semantics ignore it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::{GridOrder, RationalAngle, SpiderLabel};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiagramError {
    #[error("wire {wire} references missing {what}")]
    DanglingWire { wire: usize, what: String },
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("boundary slot {side:?}[{pos}] is used by {uses} wires (expected exactly 1)")]
    BoundarySlotConflict { side: Side, pos: usize, uses: usize },
    #[error("node {node}: {reason}")]
    PortConflict { node: NodeId, reason: String },
    #[error("Hadamard node {0} must have exactly one input and one output port")]
    HadamardArity(NodeId),
    #[error("Hadamard node {0} cannot carry a self-loop")]
    HadamardSelfLoop(NodeId),
    #[error("spider {0} has no (a, alpha, k) label")]
    MissingLabel(NodeId),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "X")]
    X,
    #[serde(rename = "H")]
    Hadamard,
}

impl NodeKind {
    pub fn is_spider(self) -> bool {
        !matches!(self, NodeKind::Hadamard)
    }

    pub fn flipped(self) -> NodeKind {
        match self {
            NodeKind::Z => NodeKind::X,
            NodeKind::X => NodeKind::Z,
            NodeKind::Hadamard => NodeKind::Hadamard,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: Option<SpiderLabel>,
    /// Number of input-side ports; ports `0..inputs` are inputs.
    pub inputs: usize,
}

impl Node {
    pub fn spider(id: NodeId, kind: NodeKind, label: SpiderLabel, inputs: usize) -> Node {
        debug_assert!(kind.is_spider());
        Node {
            id,
            kind,
            label: Some(label),
            inputs,
        }
    }

    pub fn hadamard(id: NodeId) -> Node {
        Node {
            id,
            kind: NodeKind::Hadamard,
            label: None,
            inputs: 1,
        }
    }

    pub fn is_spider(&self) -> bool {
        self.kind.is_spider()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "in")]
    In,
    #[serde(rename = "out")]
    Out,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Node { node: NodeId, port: usize },
    Boundary {
        #[serde(rename = "boundary")]
        side: Side,
        pos: usize,
    },
}

impl Endpoint {
    pub fn node(node: NodeId, port: usize) -> Endpoint {
        Endpoint::Node { node, port }
    }

    pub fn input(pos: usize) -> Endpoint {
        Endpoint::Boundary { side: Side::In, pos }
    }

    pub fn output(pos: usize) -> Endpoint {
        Endpoint::Boundary { side: Side::Out, pos }
    }

    pub fn node_id(&self) -> Option<NodeId> {
        match self {
            Endpoint::Node { node, .. } => Some(*node),
            Endpoint::Boundary { .. } => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Wire(pub Endpoint, pub Endpoint);

impl Wire {
    pub fn ends(&self) -> [Endpoint; 2] {
        [self.0, self.1]
    }

    pub fn is_self_loop(&self) -> bool {
        matches!((self.0.node_id(), self.1.node_id()), (Some(a), Some(b)) if a == b)
    }

    /// The endpoint opposite to `(node, port)`.
    pub fn other(&self, node: NodeId, port: usize) -> Endpoint {
        if self.0 == Endpoint::node(node, port) {
            self.1
        } else {
            self.0
        }
    }
}

/// A validated open diagram. Construction goes through [`Diagram::build`];
/// rewrites produce new values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagram {
    nodes: BTreeMap<NodeId, Node>,
    wires: Vec<Wire>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

/// One connected piece of a diagram. Boundary-to-boundary wires form
/// components with no nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub nodes: Vec<NodeId>,
    pub wires: Vec<usize>,
}

impl Diagram {
    pub fn build(
        nodes: impl IntoIterator<Item = Node>,
        wires: Vec<Wire>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<Diagram, DiagramError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            if map.contains_key(&n.id) {
                return Err(DiagramError::DuplicateId(n.id));
            }
            map.insert(n.id, n);
        }
        let d = Diagram {
            nodes: map,
            wires,
            inputs,
            outputs,
        };
        d.validate()?;
        Ok(d)
    }

    /// Identity on `n` wires.
    pub fn identity(n: usize) -> Diagram {
        let wires = (0..n).map(|i| Wire(Endpoint::input(i), Endpoint::output(i))).collect();
        Diagram {
            nodes: BTreeMap::new(),
            wires,
            inputs: default_names(n),
            outputs: default_names(n),
        }
    }

    pub(crate) fn from_parts(
        nodes: BTreeMap<NodeId, Node>,
        wires: Vec<Wire>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Diagram {
        let d = Diagram {
            nodes,
            wires,
            inputs,
            outputs,
        };
        debug_assert_eq!(d.validate(), Ok(()));
        d
    }

    pub(crate) fn into_parts(self) -> (BTreeMap<NodeId, Node>, Vec<Wire>, Vec<String>, Vec<String>) {
        (self.nodes, self.wires, self.inputs, self.outputs)
    }

    pub fn validate(&self) -> Result<(), DiagramError> {
        let mut ports: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        let mut in_uses = vec![0usize; self.inputs.len()];
        let mut out_uses = vec![0usize; self.outputs.len()];
        for (i, w) in self.wires.iter().enumerate() {
            for e in w.ends() {
                match e {
                    Endpoint::Node { node, port } => {
                        if !self.nodes.contains_key(&node) {
                            return Err(DiagramError::DanglingWire {
                                wire: i,
                                what: format!("node {node}"),
                            });
                        }
                        ports.entry(node).or_default().push(port);
                    }
                    Endpoint::Boundary { side, pos } => {
                        let uses = match side {
                            Side::In => in_uses.get_mut(pos),
                            Side::Out => out_uses.get_mut(pos),
                        };
                        match uses {
                            Some(u) => *u += 1,
                            None => {
                                return Err(DiagramError::DanglingWire {
                                    wire: i,
                                    what: format!("boundary slot {side:?}[{pos}]"),
                                })
                            }
                        }
                    }
                }
            }
            if w.is_self_loop() {
                let id = w.0.node_id().unwrap();
                if !self.nodes[&id].is_spider() {
                    return Err(DiagramError::HadamardSelfLoop(id));
                }
            }
        }
        for (side, uses) in [(Side::In, &in_uses), (Side::Out, &out_uses)] {
            if let Some((pos, &u)) = uses.iter().enumerate().find(|(_, &u)| u != 1) {
                return Err(DiagramError::BoundarySlotConflict { side, pos, uses: u });
            }
        }
        for node in self.nodes.values() {
            let mut used = ports.remove(&node.id).unwrap_or_default();
            used.sort_unstable();
            let degree = used.len();
            if used.iter().enumerate().any(|(i, &p)| i != p) {
                return Err(DiagramError::PortConflict {
                    node: node.id,
                    reason: format!("ports {used:?} are not exactly 0..{degree}"),
                });
            }
            if node.inputs > degree {
                return Err(DiagramError::PortConflict {
                    node: node.id,
                    reason: format!("{} input ports declared but degree is {degree}", node.inputs),
                });
            }
            match node.kind {
                NodeKind::Hadamard => {
                    if degree != 2 || node.inputs != 1 {
                        return Err(DiagramError::HadamardArity(node.id));
                    }
                }
                _ => {
                    if node.label.is_none() {
                        return Err(DiagramError::MissingLabel(node.id));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn spiders(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.is_spider())
    }

    pub fn spider_count(&self) -> usize {
        self.spiders().count()
    }

    pub fn hadamard_count(&self) -> usize {
        self.nodes.len() - self.spider_count()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn open_wires(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }

    /// Smallest id strictly greater than every id in use.
    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.wires
            .iter()
            .flat_map(|w| w.ends())
            .filter(|e| e.node_id() == Some(id))
            .count()
    }

    /// `(wire index, port)` for every wire end attached to `id`, sorted by port.
    pub fn incident(&self, id: NodeId) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, w) in self.wires.iter().enumerate() {
            for e in w.ends() {
                if let Endpoint::Node { node, port } = e {
                    if node == id {
                        out.push((i, port));
                    }
                }
            }
        }
        out.sort_by_key(|&(_, p)| p);
        out
    }

    /// `(input arity, output arity)` derived from incidence and the port split.
    pub fn arity(&self, id: NodeId) -> (usize, usize) {
        let deg = self.degree(id);
        let inputs = self.nodes.get(&id).map_or(0, |n| n.inputs);
        (inputs, deg - inputs)
    }

    /// Node-to-node adjacency, one entry per wire (parallel wires repeat,
    /// self-loops are skipped).
    pub fn adjacency(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> = self.nodes.keys().map(|&k| (k, Vec::new())).collect();
        for w in &self.wires {
            if let (Some(a), Some(b)) = (w.0.node_id(), w.1.node_id()) {
                if a != b {
                    adj.get_mut(&a).unwrap().push(b);
                    adj.get_mut(&b).unwrap().push(a);
                }
            }
        }
        adj
    }

    /// Number of wires joining two distinct nodes.
    pub fn wires_between(&self, u: NodeId, v: NodeId) -> usize {
        self.wires
            .iter()
            .filter(|w| {
                matches!((w.0.node_id(), w.1.node_id()),
                    (Some(a), Some(b)) if (a == u && b == v) || (a == v && b == u))
            })
            .count()
    }

    pub fn connected_components(&self) -> Vec<Component> {
        let mut uf = UnionFind::new(self.nodes.keys().copied());
        for w in &self.wires {
            if let (Some(a), Some(b)) = (w.0.node_id(), w.1.node_id()) {
                uf.union(a, b);
            }
        }
        let mut by_root: BTreeMap<NodeId, Component> = BTreeMap::new();
        for &id in self.nodes.keys() {
            by_root
                .entry(uf.find(id))
                .or_insert_with(|| Component {
                    nodes: Vec::new(),
                    wires: Vec::new(),
                })
                .nodes
                .push(id);
        }
        let mut loose = Vec::new();
        for (i, w) in self.wires.iter().enumerate() {
            match w.0.node_id().or(w.1.node_id()) {
                Some(id) => by_root.get_mut(&uf.find(id)).unwrap().wires.push(i),
                None => loose.push(Component {
                    nodes: Vec::new(),
                    wires: vec![i],
                }),
            }
        }
        let mut comps: Vec<Component> = by_root.into_values().collect();
        comps.sort_by_key(|c| c.nodes[0]);
        comps.extend(loose);
        comps
    }

    /// Maximal sets of same-colour spiders joined by direct wires.
    pub fn monochrome_regions(&self) -> Vec<Vec<NodeId>> {
        let adj = self.adjacency();
        let mut seen = BTreeSet::new();
        let mut regions = Vec::new();
        for node in self.spiders() {
            if !seen.insert(node.id) {
                continue;
            }
            let mut region = vec![node.id];
            let mut queue = VecDeque::from([node.id]);
            while let Some(cur) = queue.pop_front() {
                for &nb in &adj[&cur] {
                    if self.nodes[&nb].kind == node.kind && seen.insert(nb) {
                        region.push(nb);
                        queue.push_back(nb);
                    }
                }
            }
            region.sort();
            regions.push(region);
        }
        regions
    }

    /// Same diagram with every node id mapped through `f` (must be injective).
    pub fn relabel(&self, f: impl Fn(NodeId) -> NodeId) -> Diagram {
        let nodes = self
            .nodes
            .values()
            .map(|n| {
                let id = f(n.id);
                (id, Node { id, ..n.clone() })
            })
            .collect();
        let map_end = |e: Endpoint| match e {
            Endpoint::Node { node, port } => Endpoint::node(f(node), port),
            b => b,
        };
        let wires = self.wires.iter().map(|w| Wire(map_end(w.0), map_end(w.1))).collect();
        Diagram::from_parts(nodes, wires, self.inputs.clone(), self.outputs.clone())
    }

    /// Side-by-side composition; `other`'s ids are shifted past ours.
    pub fn tensor(&self, other: &Diagram) -> Diagram {
        let shift = self.next_id().0;
        let other = other.relabel(|id| NodeId(id.0 + shift));
        let (ni, no) = (self.inputs.len(), self.outputs.len());
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes.clone());
        let mut wires = self.wires.clone();
        wires.extend(other.wires.iter().map(|w| {
            let f = |e: Endpoint| match e {
                Endpoint::Boundary { side: Side::In, pos } => Endpoint::input(pos + ni),
                Endpoint::Boundary { side: Side::Out, pos } => Endpoint::output(pos + no),
                e => e,
            };
            Wire(f(w.0), f(w.1))
        }));
        let mut inputs = self.inputs.clone();
        inputs.extend(other.inputs.iter().cloned());
        let mut outputs = self.outputs.clone();
        outputs.extend(other.outputs.iter().cloned());
        Diagram::from_parts(nodes, wires, inputs, outputs)
    }

    /// Sequential composition: `then` is applied after `self`.
    pub fn compose(&self, then: &Diagram) -> Result<Diagram, DiagramError> {
        if self.outputs.len() != then.inputs.len() {
            return Err(DiagramError::BoundarySlotConflict {
                side: Side::Out,
                pos: self.outputs.len().min(then.inputs.len()),
                uses: 0,
            });
        }
        let shift = self.next_id().0;
        let then = then.relabel(|id| NodeId(id.0 + shift));
        // Middle slots become temporary ends that are spliced away.
        #[derive(Copy, Clone, PartialEq)]
        enum End {
            Real(Endpoint),
            Mid(usize),
        }
        let mut pending: Vec<[End; 2]> = Vec::new();
        for w in &self.wires {
            let f = |e: Endpoint| match e {
                Endpoint::Boundary { side: Side::Out, pos } => End::Mid(pos),
                e => End::Real(e),
            };
            pending.push([f(w.0), f(w.1)]);
        }
        for w in &then.wires {
            let f = |e: Endpoint| match e {
                Endpoint::Boundary { side: Side::In, pos } => End::Mid(pos),
                e => End::Real(e),
            };
            pending.push([f(w.0), f(w.1)]);
        }
        for pos in 0..self.outputs.len() {
            let hits: Vec<usize> = (0..pending.len())
                .filter(|&i| pending[i].contains(&End::Mid(pos)))
                .collect();
            match hits.as_slice() {
                [i] => {
                    // Closed loop through this slot only: a scalar, dropped.
                    pending.remove(*i);
                }
                [i, j] => {
                    let other = |w: [End; 2]| if w[0] == End::Mid(pos) { w[1] } else { w[0] };
                    let merged = [other(pending[*i]), other(pending[*j])];
                    pending.remove(*j);
                    pending[*i] = merged;
                }
                _ => unreachable!("validated diagrams use each slot once"),
            }
        }
        let wires: Vec<Wire> = pending
            .into_iter()
            .map(|[a, b]| match (a, b) {
                (End::Real(a), End::Real(b)) => Wire(a, b),
                _ => unreachable!("all middle slots spliced"),
            })
            .collect();
        let mut nodes = self.nodes.clone();
        nodes.extend(then.nodes.clone());
        Diagram::build(nodes.into_values(), wires, self.inputs.clone(), then.outputs.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DiagramRepr::from(self)).expect("diagram serializes")
    }

    pub fn from_json(text: &str) -> Result<Diagram, DiagramError> {
        let repr: DiagramRepr = serde_json::from_str(text).map_err(|e| DiagramError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        repr.into_diagram()
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

/// Incremental construction with automatic port numbering: each
/// `connect` takes the next free port of a node.
#[derive(Debug, Default)]
pub struct DiagramBuilder {
    nodes: BTreeMap<NodeId, Node>,
    next_port: BTreeMap<NodeId, usize>,
    wires: Vec<Wire>,
    inputs: usize,
    outputs: usize,
    next_id: u64,
}

/// One end of a wire handed to [`DiagramBuilder::connect`].
#[derive(Copy, Clone, Debug)]
pub enum Pin {
    In(usize),
    Out(usize),
    Node(NodeId),
}

impl DiagramBuilder {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        DiagramBuilder {
            inputs,
            outputs,
            ..Default::default()
        }
    }

    pub fn spider(&mut self, kind: NodeKind, label: SpiderLabel, inputs: usize) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(id, Node::spider(id, kind, label, inputs));
        id
    }

    pub fn z(&mut self, a: u64, alpha: RationalAngle, inputs: usize) -> NodeId {
        let a = GridOrder::new(a).expect("positive grid order");
        self.spider(NodeKind::Z, SpiderLabel::new(a, alpha, RationalAngle::ZERO), inputs)
    }

    pub fn x(&mut self, a: u64, alpha: RationalAngle, inputs: usize) -> NodeId {
        let a = GridOrder::new(a).expect("positive grid order");
        self.spider(NodeKind::X, SpiderLabel::new(a, alpha, RationalAngle::ZERO), inputs)
    }

    pub fn hadamard(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(id, Node::hadamard(id));
        id
    }

    fn endpoint(&mut self, p: Pin) -> Endpoint {
        match p {
            Pin::In(i) => Endpoint::input(i),
            Pin::Out(i) => Endpoint::output(i),
            Pin::Node(id) => {
                let port = self.next_port.entry(id).or_insert(0);
                *port += 1;
                Endpoint::node(id, *port - 1)
            }
        }
    }

    pub fn connect(&mut self, a: Pin, b: Pin) -> &mut Self {
        let ea = self.endpoint(a);
        let eb = self.endpoint(b);
        self.wires.push(Wire(ea, eb));
        self
    }

    pub fn build(self) -> Result<Diagram, DiagramError> {
        Diagram::build(
            self.nodes.into_values(),
            self.wires,
            default_names(self.inputs),
            default_names(self.outputs),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct DiagramRepr {
    inputs: Vec<String>,
    outputs: Vec<String>,
    nodes: Vec<NodeRepr>,
    wires: Vec<[Endpoint; 2]>,
}

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    id: NodeId,
    kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<GridOrder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<RationalAngle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<RationalAngle>,
    #[serde(default, rename = "in", skip_serializing_if = "Option::is_none")]
    inputs: Option<usize>,
}

impl From<&Diagram> for DiagramRepr {
    fn from(d: &Diagram) -> Self {
        DiagramRepr {
            inputs: d.inputs.clone(),
            outputs: d.outputs.clone(),
            nodes: d
                .nodes
                .values()
                .map(|n| NodeRepr {
                    id: n.id,
                    kind: n.kind,
                    a: n.label.map(|l| l.grid),
                    alpha: n.label.map(|l| l.alpha),
                    k: n.label.map(|l| l.winding),
                    inputs: Some(n.inputs),
                })
                .collect(),
            wires: d.wires.iter().map(|w| [w.0, w.1]).collect(),
        }
    }
}

impl DiagramRepr {
    fn into_diagram(self) -> Result<Diagram, DiagramError> {
        let wires: Vec<Wire> = self.wires.iter().map(|[a, b]| Wire(*a, *b)).collect();
        let mut degree: BTreeMap<NodeId, usize> = BTreeMap::new();
        for w in &wires {
            for e in w.ends() {
                if let Some(id) = e.node_id() {
                    *degree.entry(id).or_default() += 1;
                }
            }
        }
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| {
                let deg = degree.get(&n.id).copied().unwrap_or(0);
                match n.kind {
                    NodeKind::Hadamard => Ok(Node {
                        id: n.id,
                        kind: n.kind,
                        label: None,
                        inputs: n.inputs.unwrap_or(1),
                    }),
                    kind => {
                        let a = n.a.ok_or(DiagramError::MissingLabel(n.id))?;
                        let label = SpiderLabel::new(a, n.alpha.unwrap_or_default(), n.k.unwrap_or_default());
                        Ok(Node::spider(n.id, kind, label, n.inputs.unwrap_or(deg / 2)))
                    }
                }
            })
            .collect::<Result<Vec<_>, DiagramError>>()?;
        Diagram::build(nodes, wires, self.inputs, self.outputs)
    }
}

/// Union-find over node ids.
pub(crate) struct UnionFind {
    parent: BTreeMap<NodeId, NodeId>,
}

impl UnionFind {
    pub(crate) fn new(ids: impl IntoIterator<Item = NodeId>) -> Self {
        UnionFind {
            parent: ids.into_iter().map(|i| (i, i)).collect(),
        }
    }

    pub(crate) fn find(&mut self, x: NodeId) -> NodeId {
        let p = self.parent[&x];
        if p == x {
            return x;
        }
        let root = self.find(p);
        self.parent.insert(x, root);
        root
    }

    pub(crate) fn union(&mut self, a: NodeId, b: NodeId) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(hi, lo);
        }
    }
}

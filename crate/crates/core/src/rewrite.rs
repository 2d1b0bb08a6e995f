//! WZCC normalization: LCM fusion of same-colour spiders, identity and
//! self-loop removal, colour change, the termination potential and the
//! curvature-guided strategy. Every rewrite is a pure function returning a
//! new diagram; normalizers also emit a replayable trace.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Diagram, DiagramError, Endpoint, Node, NodeId, NodeKind, Wire};
use crate::phase::{
    checked_lcm_order, snap_to_grid, winding_turns, GridOrder, PhaseError, RationalAngle, SpiderLabel,
    TotalAngle, DEFAULT_GRID_CAP,
};

/// Weight of the spider-count term in the potential.
pub const POTENTIAL_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewriteError {
    #[error("nodes {0} and {1} have different colours")]
    ColorMismatch(NodeId, NodeId),
    #[error("nodes {0} and {1} are not joined by a wire")]
    NotConnected(NodeId, NodeId),
    #[error("node {0} is not an identity spider")]
    NotIdentity(NodeId),
    #[error("node {0} is not a spider")]
    NotSpider(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("empty region")]
    EmptyRegion,
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("trace step {step}: {reason}")]
    Replay { step: usize, reason: String },
    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },
}

#[derive(Copy, Clone, Debug)]
pub struct RewriteConfig {
    /// Largest grid order a fusion may produce.
    pub grid_cap: u64,
    /// Snap every canonical angle to the nearest point of its grid. Lossy.
    pub snap: bool,
    /// Warn when a fused total angle is off the LCM grid.
    pub check_fusion_consistency: bool,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig {
            grid_cap: DEFAULT_GRID_CAP,
            snap: false,
            check_fusion_consistency: true,
        }
    }
}

/// Normal form of one monochrome region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalLabel {
    pub kind: NodeKind,
    #[serde(rename = "L")]
    pub grid: GridOrder,
    /// Total angle in turns, in `[0, 1)`.
    pub theta: RationalAngle,
    pub in_arity: usize,
    pub out_arity: usize,
    /// `theta` lies on `G_L`.
    pub grid_compliant: bool,
    /// `Σ k_i / a_i` of the spiders that were fused into this one.
    pub winding_turns: RationalAngle,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Fuse,
    RemoveSelfLoops,
    RemoveIdentity,
    /// Fold the winding into the base phase: `(a, α, k) ↦ (a, θ_tot, 0)`.
    Absorb,
    Snap,
    ColorChange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: Rule,
    pub consumed: Vec<NodeId>,
    pub produced: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SpiderLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewriteTrace {
    pub steps: Vec<TraceStep>,
}

impl RewriteTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn fusions(&self) -> usize {
        self.steps.iter().filter(|s| s.rule == Rule::Fuse).count()
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("trace step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<RewriteTrace, RewriteError> {
        let mut steps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let step = serde_json::from_str(line).map_err(|e| RewriteError::TraceParse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            steps.push(step);
        }
        Ok(RewriteTrace { steps })
    }
}

/// Output of a normalizer.
#[derive(Clone, Debug)]
pub struct Normalized {
    pub diagram: Diagram,
    /// One label per remaining spider, ordered by node id.
    pub labels: Vec<CanonicalLabel>,
    pub trace: RewriteTrace,
}

fn spider(d: &Diagram, id: NodeId) -> Result<&Node, RewriteError> {
    let n = d.node(id).ok_or(RewriteError::UnknownNode(id))?;
    if !n.is_spider() {
        return Err(RewriteError::NotSpider(id));
    }
    Ok(n)
}

fn label_of(n: &Node) -> SpiderLabel {
    n.label.expect("validated spider has a label")
}

/// Label of the spider obtained by fusing `u` and `v`:
/// `(lcm(a_u, a_v), θ_u + θ_v mod 1, 0)`.
pub fn fused_label(u: &SpiderLabel, v: &SpiderLabel, grid_cap: u64) -> Result<SpiderLabel, PhaseError> {
    let grid = checked_lcm_order(u.grid, v.grid, grid_cap)?;
    let theta = u.total_angle() + v.total_angle();
    Ok(SpiderLabel::new(grid, theta.turns(), RationalAngle::ZERO))
}

/// Fuses two same-coloured spiders joined by at least one wire.
pub fn fuse_pair(d: &Diagram, u: NodeId, v: NodeId) -> Result<Diagram, RewriteError> {
    fuse_pair_with(d, u, v, &RewriteConfig::default()).map(|(d, _)| d)
}

/// As [`fuse_pair`], also returning the id of the fused spider.
pub fn fuse_pair_with(d: &Diagram, u: NodeId, v: NodeId, cfg: &RewriteConfig) -> Result<(Diagram, NodeId), RewriteError> {
    let (lu, lv) = check_fusable(d, u, v)?;
    let label = fused_label(&lu, &lv, cfg.grid_cap)?;
    let id = d.next_id();
    Ok((fuse_into(d, u, v, id, label)?, id))
}

fn check_fusable(d: &Diagram, u: NodeId, v: NodeId) -> Result<(SpiderLabel, SpiderLabel), RewriteError> {
    let (nu, nv) = (spider(d, u)?, spider(d, v)?);
    if nu.kind != nv.kind {
        return Err(RewriteError::ColorMismatch(u, v));
    }
    if u == v || d.wires_between(u, v) == 0 {
        return Err(RewriteError::NotConnected(u, v));
    }
    Ok((label_of(nu), label_of(nv)))
}

/// Structural fusion with a caller-chosen id and label.
fn fuse_into(d: &Diagram, u: NodeId, v: NodeId, id: NodeId, label: SpiderLabel) -> Result<Diagram, RewriteError> {
    let kind = spider(d, u)?.kind;
    let connecting = |w: &Wire| {
        matches!((w.0.node_id(), w.1.node_id()), (Some(a), Some(b)) if (a == u && b == v) || (a == v && b == u))
    };
    let mut dropped: BTreeSet<(NodeId, usize)> = BTreeSet::new();
    for w in d.wires().iter().filter(|w| connecting(w)) {
        for e in w.ends() {
            if let Endpoint::Node { node, port } = e {
                dropped.insert((node, port));
            }
        }
    }
    let keep = |n: NodeId, input_side: bool| -> Vec<usize> {
        let node = d.node(n).unwrap();
        (0..d.degree(n))
            .filter(|&p| (p < node.inputs) == input_side && !dropped.contains(&(n, p)))
            .collect()
    };
    let mut remap: BTreeMap<(NodeId, usize), usize> = BTreeMap::new();
    let mut next = 0;
    for (n, side) in [(u, true), (v, true), (u, false), (v, false)] {
        for p in keep(n, side) {
            remap.insert((n, p), next);
            next += 1;
        }
    }
    let inputs = keep(u, true).len() + keep(v, true).len();
    let (mut nodes, wires, ins, outs) = d.clone().into_parts();
    nodes.remove(&u);
    nodes.remove(&v);
    if nodes.contains_key(&id) {
        return Err(RewriteError::Diagram(DiagramError::DuplicateId(id)));
    }
    nodes.insert(id, Node::spider(id, kind, label, inputs));
    let map_end = |e: Endpoint| match e {
        Endpoint::Node { node, port } if node == u || node == v => Endpoint::node(id, remap[&(node, port)]),
        other => other,
    };
    let wires = wires
        .into_iter()
        .filter(|w| !connecting(w))
        .map(|w| Wire(map_end(w.0), map_end(w.1)))
        .collect();
    Ok(Diagram::build(nodes.into_values(), wires, ins, outs)?)
}

/// A spider is an identity when `θ_tot ≡ 0`, it has one input-side and one
/// output-side leg on two distinct wires, and splicing them would not close
/// a loop through a Hadamard node.
pub fn is_identity(d: &Diagram, id: NodeId) -> bool {
    identity_splice(d, id).is_some()
}

fn identity_splice(d: &Diagram, id: NodeId) -> Option<(usize, usize, Endpoint, Endpoint)> {
    let n = d.node(id)?;
    if !n.is_spider() || !label_of(n).total_angle().is_zero() || n.inputs != 1 {
        return None;
    }
    let inc = d.incident(id);
    let [(wa, 0), (wb, 1)] = inc.as_slice() else {
        return None;
    };
    if wa == wb {
        return None;
    }
    let ea = d.wires()[*wa].other(id, 0);
    let eb = d.wires()[*wb].other(id, 1);
    if let (Some(x), Some(y)) = (ea.node_id(), eb.node_id()) {
        if x == y && !d.node(x)?.is_spider() {
            return None;
        }
    }
    Some((*wa, *wb, ea, eb))
}

/// Deletes an identity spider and splices its two wires.
pub fn identity_removal(d: &Diagram, id: NodeId) -> Result<Diagram, RewriteError> {
    spider(d, id)?;
    let (wa, wb, ea, eb) = identity_splice(d, id).ok_or(RewriteError::NotIdentity(id))?;
    let (mut nodes, mut wires, ins, outs) = d.clone().into_parts();
    nodes.remove(&id);
    wires[wa.min(wb)] = Wire(ea, eb);
    wires.remove(wa.max(wb));
    Ok(Diagram::build(nodes.into_values(), wires, ins, outs)?)
}

/// Removes every self-loop on a spider. Exact for both colours.
pub fn remove_self_loops(d: &Diagram, id: NodeId) -> Result<Diagram, RewriteError> {
    let n = spider(d, id)?.clone();
    let loops: BTreeSet<usize> = d
        .incident(id)
        .iter()
        .map(|&(w, _)| w)
        .filter(|&w| d.wires()[w].is_self_loop())
        .collect();
    let mut gone = BTreeSet::new();
    for &w in &loops {
        for e in d.wires()[w].ends() {
            if let Endpoint::Node { port, .. } = e {
                gone.insert(port);
            }
        }
    }
    let remap: BTreeMap<usize, usize> = (0..d.degree(id))
        .filter(|p| !gone.contains(p))
        .enumerate()
        .map(|(new, old)| (old, new))
        .collect();
    let inputs = remap.keys().filter(|&&p| p < n.inputs).count();
    let (mut nodes, wires, ins, outs) = d.clone().into_parts();
    nodes.insert(id, Node { inputs, ..n });
    let wires = wires
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !loops.contains(i))
        .map(|(_, w)| {
            let f = |e: Endpoint| match e {
                Endpoint::Node { node, port } if node == id => Endpoint::node(id, remap[&port]),
                other => other,
            };
            Wire(f(w.0), f(w.1))
        })
        .collect();
    Ok(Diagram::build(nodes.into_values(), wires, ins, outs)?)
}

fn has_self_loop(d: &Diagram, id: NodeId) -> bool {
    d.wires().iter().any(|w| w.is_self_loop() && w.0.node_id() == Some(id))
}

fn relabel(d: &Diagram, id: NodeId, label: SpiderLabel) -> Result<Diagram, RewriteError> {
    let n = spider(d, id)?.clone();
    let (mut nodes, wires, ins, outs) = d.clone().into_parts();
    nodes.insert(id, Node { label: Some(label), ..n });
    Ok(Diagram::build(nodes.into_values(), wires, ins, outs)?)
}

/// Flips a spider's colour and puts a Hadamard node on every leg.
/// With `negate`, `(α, k)` are negated as well; that variant is not sound in
/// general and exists only to reproduce a published example.
pub fn color_change(d: &Diagram, id: NodeId) -> Result<Diagram, RewriteError> {
    color_change_with(d, id, false)
}

pub fn color_change_with(d: &Diagram, id: NodeId, negate: bool) -> Result<Diagram, RewriteError> {
    let n = spider(d, id)?.clone();
    let mut label = label_of(&n);
    if negate {
        label.alpha = -label.alpha;
        label.winding = -label.winding;
    }
    let (mut nodes, wires, ins, outs) = d.clone().into_parts();
    nodes.insert(
        id,
        Node {
            kind: n.kind.flipped(),
            label: Some(label),
            ..n.clone()
        },
    );
    let mut next = d.next_id().0;
    let mut out = Vec::with_capacity(wires.len() * 2);
    for w in wires {
        let mut ends = w.ends();
        for e in ends.iter_mut() {
            if let Endpoint::Node { node, port } = *e {
                if node == id {
                    let h = NodeId(next);
                    next += 1;
                    nodes.insert(h, Node::hadamard(h));
                    // Hadamard output faces an input-side leg and vice versa.
                    let (near, far) = if port < n.inputs { (1, 0) } else { (0, 1) };
                    out.push(Wire(Endpoint::node(id, port), Endpoint::node(h, near)));
                    *e = Endpoint::node(h, far);
                }
            }
        }
        out.push(Wire(ends[0], ends[1]));
    }
    Ok(Diagram::build(nodes.into_values(), out, ins, outs)?)
}

/// Canonical label of a non-empty same-colour region of `d`.
pub fn canonical_label(d: &Diagram, region: &[NodeId]) -> Result<CanonicalLabel, RewriteError> {
    canonical_label_capped(d, region, DEFAULT_GRID_CAP)
}

pub fn canonical_label_capped(d: &Diagram, region: &[NodeId], grid_cap: u64) -> Result<CanonicalLabel, RewriteError> {
    let first = *region.first().ok_or(RewriteError::EmptyRegion)?;
    let kind = spider(d, first)?.kind;
    let members: BTreeSet<NodeId> = region.iter().copied().collect();
    let mut grid = GridOrder::ONE;
    let mut theta = TotalAngle::zero();
    let mut winding = RationalAngle::ZERO;
    for &id in &members {
        let n = spider(d, id)?;
        if n.kind != kind {
            return Err(RewriteError::ColorMismatch(first, id));
        }
        let l = label_of(n);
        grid = checked_lcm_order(grid, l.grid, grid_cap)?;
        theta = theta + l.total_angle();
        winding = winding + winding_turns(&l);
    }
    let (mut ins, mut outs) = (0, 0);
    for &id in &members {
        let n = d.node(id).unwrap();
        for (w, port) in d.incident(id) {
            let other = d.wires()[w].other(id, port);
            if other.node_id().is_some_and(|o| members.contains(&o)) {
                continue;
            }
            if port < n.inputs {
                ins += 1;
            } else {
                outs += 1;
            }
        }
    }
    Ok(CanonicalLabel {
        kind,
        grid,
        theta: theta.turns(),
        in_arity: ins,
        out_arity: outs,
        grid_compliant: theta.turns().on_grid(grid),
        winding_turns: winding,
    })
}

/// `Φ = Σ |2/a_u² − 2/a_v²|` over distinct adjacent same-colour spider
/// pairs, plus `ε` per spider.
pub fn potential(d: &Diagram) -> f64 {
    let curv = |id: NodeId| {
        let a = label_of(d.node(id).unwrap()).grid.get() as f64;
        2.0 / (a * a)
    };
    let mut pairs = BTreeSet::new();
    for w in d.wires() {
        if let (Some(x), Some(y)) = (w.0.node_id(), w.1.node_id()) {
            let (nx, ny) = (d.node(x).unwrap(), d.node(y).unwrap());
            if x != y && nx.is_spider() && nx.kind == ny.kind {
                pairs.insert((x.min(y), x.max(y)));
            }
        }
    }
    let curvature: f64 = pairs.iter().map(|&(x, y)| (curv(x) - curv(y)).abs()).sum();
    curvature + POTENTIAL_EPSILON * d.spider_count() as f64
}

/// Adjacent same-colour spider pairs `(u, v)`, `u < v`, ascending.
pub fn fusion_candidates(d: &Diagram) -> Vec<(NodeId, NodeId)> {
    let mut pairs = BTreeSet::new();
    for w in d.wires() {
        if let (Some(x), Some(y)) = (w.0.node_id(), w.1.node_id()) {
            let (nx, ny) = (d.node(x).unwrap(), d.node(y).unwrap());
            if x != y && nx.is_spider() && nx.kind == ny.kind {
                pairs.insert((x.min(y), x.max(y)));
            }
        }
    }
    pairs.into_iter().collect()
}

struct Engine {
    d: Diagram,
    cfg: RewriteConfig,
    winding: BTreeMap<NodeId, RationalAngle>,
    trace: RewriteTrace,
}

impl Engine {
    fn new(d: &Diagram, cfg: RewriteConfig) -> Engine {
        let winding = d.spiders().map(|n| (n.id, winding_turns(&label_of(n)))).collect();
        Engine {
            d: d.clone(),
            cfg,
            winding,
            trace: RewriteTrace::default(),
        }
    }

    fn fuse(&mut self, u: NodeId, v: NodeId) -> Result<(), RewriteError> {
        let (lu, lv) = check_fusable(&self.d, u, v)?;
        let label = fused_label(&lu, &lv, self.cfg.grid_cap)?;
        let mut note = None;
        if self.cfg.check_fusion_consistency {
            let on_grid = |l: &SpiderLabel| l.total_angle().turns().on_grid(label.grid);
            if !on_grid(&lu) || !on_grid(&lv) {
                let msg = format!("total angles of {u} and {v} are off the fused grid G_{}", label.grid);
                log::debug!("fusion consistency: {msg}");
                note = Some(msg);
            }
        }
        let id = self.d.next_id();
        self.d = fuse_into(&self.d, u, v, id, label)?;
        let w = self.winding.remove(&u).unwrap_or_default() + self.winding.remove(&v).unwrap_or_default();
        self.winding.insert(id, w);
        self.trace.steps.push(TraceStep {
            rule: Rule::Fuse,
            consumed: vec![u, v],
            produced: vec![id],
            label: Some(label),
            note,
        });
        Ok(())
    }

    fn cleanup(&mut self) -> Result<bool, RewriteError> {
        let mut changed = false;
        let ids: Vec<NodeId> = self.d.spiders().map(|n| n.id).collect();
        for id in ids {
            if has_self_loop(&self.d, id) {
                self.d = remove_self_loops(&self.d, id)?;
                self.push(Rule::RemoveSelfLoops, id, Some(id), None);
                changed = true;
            }
            let l = label_of(self.d.node(id).unwrap());
            let theta = l.total_angle().turns();
            let canonical = SpiderLabel::new(l.grid, theta, RationalAngle::ZERO);
            if canonical != l {
                self.d = relabel(&self.d, id, canonical)?;
                self.push(Rule::Absorb, id, Some(id), Some(canonical));
                changed = true;
            }
            if self.cfg.snap && !theta.on_grid(l.grid) {
                let snapped = SpiderLabel::new(l.grid, snap_to_grid(theta.radians(), l.grid), RationalAngle::ZERO);
                self.d = relabel(&self.d, id, snapped)?;
                self.push(Rule::Snap, id, Some(id), Some(snapped));
                changed = true;
            }
            if is_identity(&self.d, id) {
                self.d = identity_removal(&self.d, id)?;
                self.winding.remove(&id);
                self.push(Rule::RemoveIdentity, id, None, None);
                changed = true;
            }
        }
        Ok(changed)
    }

    fn push(&mut self, rule: Rule, consumed: NodeId, produced: Option<NodeId>, label: Option<SpiderLabel>) {
        self.trace.steps.push(TraceStep {
            rule,
            consumed: vec![consumed],
            produced: produced.into_iter().collect(),
            label,
            note: None,
        });
    }

    fn finish(self) -> Normalized {
        let labels = self
            .d
            .spiders()
            .map(|n| {
                let l = label_of(n);
                let (ins, outs) = self.d.arity(n.id);
                let theta = l.total_angle().turns();
                CanonicalLabel {
                    kind: n.kind,
                    grid: l.grid,
                    theta,
                    in_arity: ins,
                    out_arity: outs,
                    grid_compliant: theta.on_grid(l.grid),
                    winding_turns: self.winding.get(&n.id).copied().unwrap_or_default(),
                }
            })
            .collect();
        Normalized {
            diagram: self.d,
            labels,
            trace: self.trace,
        }
    }
}

/// Collapses every maximal monochrome region to one spider labelled
/// `(L, θ, 0)`, removes self-loops and identities, and repeats to fixpoint.
pub fn wzcc_normalize(d: &Diagram) -> Result<Normalized, RewriteError> {
    wzcc_normalize_with(d, &RewriteConfig::default())
}

pub fn wzcc_normalize_with(d: &Diagram, cfg: &RewriteConfig) -> Result<Normalized, RewriteError> {
    let mut e = Engine::new(d, *cfg);
    loop {
        let mut changed = false;
        while let Some(&(u, v)) = fusion_candidates(&e.d).first() {
            e.fuse(u, v)?;
            changed = true;
        }
        changed |= e.cleanup()?;
        if !changed {
            return Ok(e.finish());
        }
    }
}

/// Accepts a candidate fusion only when it strictly lowers [`potential`].
/// Candidates are scanned in ascending `(id, id)` order; the scan restarts
/// after each accepted fusion and stops after a pass with no acceptance.
pub fn curvature_guided_normalize(d: &Diagram) -> Result<Normalized, RewriteError> {
    curvature_guided_normalize_with(d, &RewriteConfig::default())
}

pub fn curvature_guided_normalize_with(d: &Diagram, cfg: &RewriteConfig) -> Result<Normalized, RewriteError> {
    let mut e = Engine::new(d, *cfg);
    'pass: loop {
        let before = potential(&e.d);
        for (u, v) in fusion_candidates(&e.d) {
            let (lu, lv) = check_fusable(&e.d, u, v)?;
            let label = fused_label(&lu, &lv, cfg.grid_cap)?;
            let trial = fuse_into(&e.d, u, v, e.d.next_id(), label)?;
            if potential(&trial) < before {
                e.fuse(u, v)?;
                continue 'pass;
            }
        }
        return Ok(e.finish());
    }
}

/// Re-applies a trace to `original`, trusting the recorded ids and labels.
pub fn replay(original: &Diagram, trace: &RewriteTrace) -> Result<Diagram, RewriteError> {
    let mut d = original.clone();
    for (step, s) in trace.steps.iter().enumerate() {
        let bad = |reason: &str| RewriteError::Replay {
            step,
            reason: reason.to_string(),
        };
        let one = |v: &[NodeId]| match v {
            [x] => Ok(*x),
            _ => Err(bad("expected exactly one node")),
        };
        d = match s.rule {
            Rule::Fuse => {
                let ([u, v], [w]) = (s.consumed.as_slice(), s.produced.as_slice()) else {
                    return Err(bad("fusion consumes two nodes and produces one"));
                };
                let label = s.label.ok_or_else(|| bad("fusion without a label"))?;
                check_fusable(&d, *u, *v).map_err(|e| bad(&e.to_string()))?;
                fuse_into(&d, *u, *v, *w, label)?
            }
            Rule::RemoveSelfLoops => remove_self_loops(&d, one(&s.consumed)?)?,
            Rule::RemoveIdentity => identity_removal(&d, one(&s.consumed)?)?,
            Rule::Absorb | Rule::Snap => {
                let label = s.label.ok_or_else(|| bad("relabel without a label"))?;
                relabel(&d, one(&s.consumed)?, label)?
            }
            Rule::ColorChange => color_change(&d, one(&s.consumed)?)?,
        };
    }
    Ok(d)
}

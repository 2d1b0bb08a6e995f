#![allow(dead_code)]

use num_rational::Rational64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use wplzx::datasets::gen_random_wplzx_instance;
use wplzx::masd::{winding_difference, DefectGraph, DefectVertex, GraphMode};
use wplzx::{Diagram, DiagramBuilder, Endpoint, GenConfig, GridOrder, Node, NodeId, NodeKind, Pin, RationalAngle, SpiderLabel, Wire};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn g(a: u64) -> GridOrder {
    GridOrder::new(a).unwrap()
}

pub fn t(n: i64, d: i64) -> RationalAngle {
    RationalAngle::new(n, d).unwrap()
}

pub fn random_label(r: &mut ChaCha8Rng) -> SpiderLabel {
    let a = r.gen_range(1..=12u64);
    let alpha = RationalAngle::grid_point(r.gen_range(0..a as i64), g(a));
    let k = RationalAngle::from_integer(r.gen_range(-3..=3));
    SpiderLabel::new(g(a), alpha, k)
}

/// Connected Z region of `n` spiders: a random tree plus up to two extra
/// edges, with one or two boundary legs per spider.
pub fn random_region(r: &mut ChaCha8Rng, n: usize) -> Diagram {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (r.gen_range(0..i), i)).collect();
    for _ in 0..r.gen_range(0..=2) {
        let (x, y) = (r.gen_range(0..n), r.gen_range(0..n));
        if x != y {
            edges.push((x.min(y), x.max(y)));
        }
    }
    let legs: Vec<(usize, usize)> = (0..n).map(|_| (r.gen_range(0..=1), r.gen_range(0..=1))).collect();
    let ins: usize = legs.iter().map(|l| l.0).sum();
    let outs: usize = legs.iter().map(|l| l.1).sum();
    let mut b = DiagramBuilder::new(ins, outs);
    let ids: Vec<NodeId> = legs.iter().map(|l| b.spider(NodeKind::Z, random_label(r), l.0)).collect();
    let (mut i, mut o) = (0, 0);
    for (s, l) in legs.iter().enumerate() {
        if l.0 == 1 {
            b.connect(Pin::In(i), Pin::Node(ids[s]));
            i += 1;
        }
    }
    for &(x, y) in &edges {
        b.connect(Pin::Node(ids[x]), Pin::Node(ids[y]));
    }
    for (s, l) in legs.iter().enumerate() {
        if l.1 == 1 {
            b.connect(Pin::Node(ids[s]), Pin::Out(o));
            o += 1;
        }
    }
    b.build().unwrap()
}

/// Small mixed diagram: a layered random diagram with random windings and
/// Hadamard nodes spliced into some wires.
pub fn random_diagram(seed: u64, max_open: usize, max_spiders: usize) -> Diagram {
    let mut r = rng(seed);
    let qubits = r.gen_range(1..=max_open / 2);
    let cfg = GenConfig {
        seed,
        spiders: (2, max_spiders),
        grid_orders: vec![1, 2, 3, 4, 6, 8, 12],
        density: r.gen_range(0.2..=1.0),
        qubits,
        layers: 1,
        rotations: Default::default(),
    };
    let d = gen_random_wplzx_instance(&cfg, seed).unwrap();
    let mut nodes: Vec<Node> = d
        .nodes()
        .cloned()
        .map(|mut n| {
            if let Some(l) = n.label.as_mut() {
                l.winding = RationalAngle::from_integer(r.gen_range(-2..=2));
            }
            n
        })
        .collect();
    let mut next = d.next_id().0;
    let mut wires = Vec::new();
    for w in d.wires() {
        if r.gen_bool(0.15) {
            let h = NodeId(next);
            next += 1;
            nodes.push(Node::hadamard(h));
            wires.push(Wire(w.0, Endpoint::node(h, 0)));
            wires.push(Wire(Endpoint::node(h, 1), w.1));
        } else {
            wires.push(*w);
        }
    }
    Diagram::build(nodes, wires, d.inputs().to_vec(), d.outputs().to_vec()).unwrap()
}

/// Random complete defect graph on `n` real vertices at distinct cells of
/// an 8×8 lattice.
pub fn random_defect_graph(r: &mut ChaCha8Rng, n: usize) -> DefectGraph {
    let cells = rand::seq::index::sample(r, 64, n).into_vec();
    let vs = (0..n)
        .map(|i| {
            let a = [1, 2, 3, 4, 6, 8, 12][r.gen_range(0..7)];
            let pos = [(cells[i] / 8) as i64, (cells[i] % 8) as i64];
            DefectVertex::real(i, pos, g(a), r.gen_range(0..a as i64))
        })
        .collect();
    DefectGraph::new(vs, vec![], GraphMode::Complete).unwrap()
}

/// Exact pair weight with rational `λ`, raw or normalized penalty.
pub fn exact_weight(u: &DefectVertex, v: &DefectVertex, lambda: Rational64, normalized: bool) -> Rational64 {
    let d = (u.pos[0] - v.pos[0]).abs() + (u.pos[1] - v.pos[1]).abs();
    let mut dk = winding_difference(u, v);
    if normalized {
        dk /= wplzx::lcm_order(u.a, v.a).get() as i64;
    }
    Rational64::from_integer(d) + lambda * dk
}

/// Minimum perfect-matching cost by exhaustive enumeration.
pub fn brute_force(w: &dyn Fn(usize, usize) -> Rational64, free: &[usize]) -> Rational64 {
    if free.is_empty() {
        return Rational64::from_integer(0);
    }
    let i = free[0];
    let mut best: Option<Rational64> = None;
    for k in 1..free.len() {
        let j = free[k];
        let rest: Vec<usize> = free.iter().copied().filter(|&x| x != i && x != j).collect();
        let c = w(i, j) + brute_force(w, &rest);
        best = Some(best.map_or(c, |b| b.min(c)));
    }
    best.unwrap()
}

/// Fuses `d` down to one spider along every possible order, calling
/// `visit` on each intermediate diagram and `leaf` on each final one.
pub fn every_fusion_order(d: &Diagram, visit: &mut dyn FnMut(&Diagram), leaf: &mut dyn FnMut(&Diagram)) {
    visit(d);
    let cands = wplzx::rewrite::fusion_candidates(d);
    if cands.is_empty() {
        leaf(d);
        return;
    }
    for (u, v) in cands {
        let (next, _) = wplzx::rewrite::fuse_pair_with(d, u, v, &Default::default()).unwrap();
        every_fusion_order(&next, visit, leaf);
    }
}

/// Canonical label of the whole diagram treated as one region.
pub fn whole_label(d: &Diagram) -> wplzx::CanonicalLabel {
    let ids: Vec<NodeId> = d.node_ids().collect();
    wplzx::canonical_label(d, &ids).unwrap()
}

//! Winding-aware minimum-weight matching on defect graphs, decoder-risk
//! metrics, and a Monte-Carlo harness on rotated surface codes.

use std::collections::{BTreeMap, VecDeque};

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::{lcm_order, GridOrder};

/// Largest real-vertex (or total vertex) count solved exactly.
pub const EXACT_LIMIT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasdError {
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("odd vertex count {0}")]
    OddVertexCount(usize),
    #[error("{0} vertices exceed the exact matching limit of {EXACT_LIMIT}")]
    TooLargeForExact(usize),
    #[error("graph has no perfect matching")]
    NoPerfectMatching,
    #[error("pair with zero distance")]
    ZeroDistance,
    #[error("unsupported code distance {0} (expected 3, 5 or 7)")]
    InvalidDistance(usize),
    #[error("physical error rate {0} outside [0, 0.5)")]
    InvalidProbability(f64),
    #[error("invalid defect graph: {0}")]
    InvalidGraph(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `d + λ·Δk/L`.
    #[default]
    Normalized,
    /// `d + λ·Δk`.
    Raw,
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::Normalized => "normalized",
            WeightMode::Raw => "raw",
        })
    }
}

impl std::str::FromStr for WeightMode {
    type Err = MasdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normalized" => Ok(WeightMode::Normalized),
            "raw" => Ok(WeightMode::Raw),
            other => Err(MasdError::Parse(format!("unknown weight mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectVertex {
    pub id: usize,
    pub pos: [i64; 2],
    pub a: GridOrder,
    pub k: i64,
    #[serde(rename = "virtual", default)]
    pub is_virtual: bool,
}

impl DefectVertex {
    pub fn real(id: usize, pos: [i64; 2], a: GridOrder, k: i64) -> Self {
        DefectVertex {
            id,
            pos,
            a,
            k,
            is_virtual: false,
        }
    }

    pub fn boundary(id: usize, pos: [i64; 2]) -> Self {
        DefectVertex {
            id,
            pos,
            a: GridOrder::ONE,
            k: 0,
            is_virtual: true,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectEdge {
    pub u: usize,
    pub v: usize,
    pub d: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    /// Missing pairs fall back to the Manhattan distance of positions.
    #[default]
    Complete,
    /// Only listed edges exist (plus free virtual–virtual pairs).
    Sparse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectGraph {
    pub vertices: Vec<DefectVertex>,
    pub edges: Vec<DefectEdge>,
    #[serde(default)]
    pub mode: GraphMode,
}

impl DefectGraph {
    pub fn new(vertices: Vec<DefectVertex>, edges: Vec<DefectEdge>, mode: GraphMode) -> Result<Self, MasdError> {
        let g = DefectGraph { vertices, edges, mode };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), MasdError> {
        let mut ids = std::collections::BTreeSet::new();
        for v in &self.vertices {
            if !ids.insert(v.id) {
                return Err(MasdError::InvalidGraph(format!("duplicate vertex id {}", v.id)));
            }
            if v.is_virtual && v.k != 0 {
                return Err(MasdError::InvalidGraph(format!("virtual vertex {} has k = {}", v.id, v.k)));
            }
        }
        for e in &self.edges {
            if !ids.contains(&e.u) || !ids.contains(&e.v) {
                return Err(MasdError::InvalidGraph(format!("edge ({}, {}) references a missing vertex", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(MasdError::InvalidGraph(format!("self-edge on {}", e.u)));
            }
            if !(e.d >= 0.0) || !e.d.is_finite() {
                return Err(MasdError::InvalidGraph(format!("edge ({}, {}) has distance {}", e.u, e.v, e.d)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MasdError> {
        let g: DefectGraph = serde_json::from_str(text).map_err(|e| MasdError::Parse(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn index(&self) -> BTreeMap<usize, usize> {
        self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect()
    }

    /// Lattice distance between vertices at indices `i`, `j`, if the pair is
    /// an edge of the graph.
    fn distances(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.len();
        let idx = self.index();
        let mut d = vec![vec![None; n]; n];
        for e in &self.edges {
            let (i, j) = (idx[&e.u], idx[&e.v]);
            let best = d[i][j].map_or(e.d, |x: f64| x.min(e.d));
            d[i][j] = Some(best);
            d[j][i] = Some(best);
        }
        for i in 0..n {
            for j in 0..n {
                if i == j || d[i][j].is_some() {
                    continue;
                }
                let (a, b) = (&self.vertices[i], &self.vertices[j]);
                if a.is_virtual && b.is_virtual {
                    d[i][j] = Some(0.0);
                } else if self.mode == GraphMode::Complete {
                    d[i][j] = Some(((a.pos[0] - b.pos[0]).abs() + (a.pos[1] - b.pos[1]).abs()) as f64);
                }
            }
        }
        d
    }
}

/// `L·|k_u/a_u − k_v/a_v|` with `L = lcm(a_u, a_v)`; zero if either end is
/// a virtual boundary vertex.
pub fn winding_difference(u: &DefectVertex, v: &DefectVertex) -> Rational64 {
    if u.is_virtual || v.is_virtual {
        return Rational64::zero();
    }
    let l = lcm_order(u.a, v.a).get() as i64;
    let diff = Rational64::new(u.k, u.a.get() as i64) - Rational64::new(v.k, v.a.get() as i64);
    diff.abs() * l
}

/// Penalty per unit λ for a pair: `Δk/L` or `Δk`.
pub fn penalty_unit(u: &DefectVertex, v: &DefectVertex, mode: WeightMode) -> f64 {
    let dk = winding_difference(u, v);
    let unit = match mode {
        WeightMode::Raw => dk,
        WeightMode::Normalized => dk / lcm_order(u.a, v.a).get() as i64,
    };
    unit.to_f64().expect("finite rational")
}

fn check_lambda(lambda: f64) -> Result<(), MasdError> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(MasdError::NegativeLambda(lambda))
    }
}

/// `d + λ·unit` for an edge between `u` and `v`.
pub fn edge_weight(d: f64, u: &DefectVertex, v: &DefectVertex, lambda: f64, mode: WeightMode) -> Result<f64, MasdError> {
    check_lambda(lambda)?;
    Ok(d + lambda * penalty_unit(u, v, mode))
}

/// Weight of a listed edge of `g`.
pub fn graph_edge_weight(g: &DefectGraph, e: &DefectEdge, lambda: f64, mode: WeightMode) -> Result<f64, MasdError> {
    let idx = g.index();
    let (u, v) = (&g.vertices[idx[&e.u]], &g.vertices[idx[&e.v]]);
    edge_weight(e.d, u, v, lambda, mode)
}

fn weight_matrix(g: &DefectGraph, lambda: f64, mode: WeightMode) -> Vec<Vec<Option<f64>>> {
    let dist = g.distances();
    let n = g.len();
    let mut w = dist.clone();
    for i in 0..n {
        for j in 0..n {
            if let Some(d) = dist[i][j] {
                w[i][j] = Some(d + lambda * penalty_unit(&g.vertices[i], &g.vertices[j], mode));
            }
        }
    }
    w
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    /// Exact when small enough, otherwise greedy.
    #[default]
    Auto,
    Exact,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Vertex-id pairs, smaller id first, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
    pub approximate: bool,
}

impl Matching {
    /// Every vertex of `g` appears in exactly one pair.
    pub fn is_perfect_for(&self, g: &DefectGraph) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b) in &self.pairs {
            if !seen.insert(a) || !seen.insert(b) {
                return false;
            }
        }
        seen.len() == g.len() && g.vertices.iter().all(|v| seen.contains(&v.id))
    }
}

/// Minimum-weight perfect matching under `edge_weight(·, λ, mode)`.
pub fn min_weight_perfect_matching(
    g: &DefectGraph,
    lambda: f64,
    mode: WeightMode,
    exactness: Exactness,
) -> Result<Matching, MasdError> {
    check_lambda(lambda)?;
    let n = g.len();
    if n % 2 == 1 {
        return Err(MasdError::OddVertexCount(n));
    }
    let w = weight_matrix(g, lambda, mode);
    let reals = g.vertices.iter().filter(|v| !v.is_virtual).count();
    let boundary = boundary_structure(g, &w);
    let pairs = match exactness {
        Exactness::Greedy => None,
        _ if boundary.is_some() && reals <= EXACT_LIMIT => Some(boundary_dp(g, &w, &boundary.unwrap())?),
        _ if n <= EXACT_LIMIT => Some(subset_dp(&w)?),
        Exactness::Exact => return Err(MasdError::TooLargeForExact(if boundary.is_some() { reals } else { n })),
        Exactness::Auto => None,
    };
    let (pairs, approximate) = match pairs {
        Some(p) => (p, false),
        None => (greedy(&w)?, true),
    };
    let cost = pairs.iter().map(|&(i, j)| w[i][j].unwrap()).sum();
    let mut pairs: Vec<(usize, usize)> = pairs
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (g.vertices[i].id, g.vertices[j].id);
            (a.min(b), a.max(b))
        })
        .collect();
    pairs.sort_unstable();
    Ok(Matching {
        pairs,
        cost,
        approximate,
    })
}

/// For each real vertex, its cheapest exclusive virtual partner. `Some`
/// only if every virtual vertex touches at most one real vertex and all
/// virtual–virtual pairs are free.
fn boundary_structure(g: &DefectGraph, w: &[Vec<Option<f64>>]) -> Option<Vec<Option<usize>>> {
    let n = g.len();
    let virt = |i: usize| g.vertices[i].is_virtual;
    let mut partner: Vec<Option<usize>> = vec![None; n];
    for b in (0..n).filter(|&b| virt(b)) {
        let mut real_nbrs = (0..n).filter(|&r| !virt(r) && w[b][r].is_some());
        let first = real_nbrs.next();
        if real_nbrs.next().is_some() {
            return None;
        }
        if (0..n).any(|o| o != b && virt(o) && w[b][o] != Some(0.0)) {
            return None;
        }
        if let Some(r) = first {
            if partner[r].is_none_or(|p| w[r][b].unwrap() < w[r][p].unwrap()) {
                partner[r] = Some(b);
            }
        }
    }
    Some(partner)
}

fn boundary_dp(g: &DefectGraph, w: &[Vec<Option<f64>>], partner: &[Option<usize>]) -> Result<Vec<(usize, usize)>, MasdError> {
    let n = g.len();
    let reals: Vec<usize> = (0..n).filter(|&i| !g.vertices[i].is_virtual).collect();
    let r = reals.len();
    // choice[mask]: partner slot of the lowest real (usize::MAX = boundary).
    let mut dp = vec![f64::INFINITY; 1 << r];
    let mut choice = vec![usize::MAX; 1 << r];
    dp[0] = 0.0;
    for mask in 1usize..1 << r {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        if let Some(b) = partner[reals[i]] {
            let c = w[reals[i]][b].unwrap() + dp[rest];
            if c < dp[mask] {
                dp[mask] = c;
                choice[mask] = usize::MAX;
            }
        }
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            if let Some(x) = w[reals[i]][reals[j]] {
                let c = x + dp[rest & !(1 << j)];
                if c < dp[mask] {
                    dp[mask] = c;
                    choice[mask] = j;
                }
            }
        }
    }
    let full = (1usize << r) - 1;
    if !dp[full].is_finite() {
        return Err(MasdError::NoPerfectMatching);
    }
    let mut pairs = Vec::new();
    let mut used_virtual = vec![false; n];
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        match choice[mask] {
            usize::MAX => {
                let b = partner[reals[i]].unwrap();
                used_virtual[b] = true;
                pairs.push((reals[i], b));
                mask &= !(1 << i);
            }
            j => {
                pairs.push((reals[i], reals[j]));
                mask &= !(1 << i) & !(1 << j);
            }
        }
    }
    let spare: Vec<usize> = (0..n).filter(|&b| g.vertices[b].is_virtual && !used_virtual[b]).collect();
    for p in spare.chunks(2) {
        pairs.push((p[0], p[1]));
    }
    Ok(pairs)
}

fn subset_dp(w: &[Vec<Option<f64>>]) -> Result<Vec<(usize, usize)>, MasdError> {
    let n = w.len();
    let mut dp = vec![f64::INFINITY; 1 << n];
    let mut choice = vec![0usize; 1 << n];
    dp[0] = 0.0;
    for mask in 1usize..1 << n {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut m = rest;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            if let Some(x) = w[i][j] {
                let c = x + dp[rest & !(1 << j)];
                if c < dp[mask] {
                    dp[mask] = c;
                    choice[mask] = j;
                }
            }
        }
    }
    let full = (1usize << n) - 1;
    if !dp[full].is_finite() {
        return Err(MasdError::NoPerfectMatching);
    }
    let mut pairs = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask];
        pairs.push((i, j));
        mask &= !(1 << i) & !(1 << j);
    }
    Ok(pairs)
}

fn greedy(w: &[Vec<Option<f64>>]) -> Result<Vec<(usize, usize)>, MasdError> {
    let n = w.len();
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let Some(x) = w[i][j] {
                cand.push((x, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used = vec![false; n];
    let mut pairs = Vec::new();
    for (_, i, j) in cand {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            pairs.push((i, j));
        }
    }
    if used.iter().all(|&u| u) {
        Ok(pairs)
    } else {
        Err(MasdError::NoPerfectMatching)
    }
}

/// A matched pair for the toy risk metric: distance and winding difference.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskPair {
    pub d: f64,
    pub delta_k: f64,
}

/// `(1/N) Σ (w^λ − w⁰)/w⁰` with `w^λ = d + λ|Δk|`; zero for no pairs.
pub fn drg_toy(pairs: &[RiskPair], lambda: f64) -> Result<f64, MasdError> {
    check_lambda(lambda)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for p in pairs {
        if !(p.d > 0.0) {
            return Err(MasdError::ZeroDistance);
        }
        sum += lambda * p.delta_k.abs() / p.d;
    }
    Ok(sum / pairs.len() as f64)
}

/// An edge for the Boltzmann risk metric: distance and penalty per unit λ.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEdge {
    pub d: f64,
    pub unit: f64,
}

/// `Σ p(e)·w^λ_e/w⁰_e − 1` with `p(e) ∝ e^{−βd_e}`; zero for no edges.
pub fn drg_pm(edges: &[RiskEdge], lambda: f64, beta: f64) -> Result<f64, MasdError> {
    check_lambda(lambda)?;
    if !(beta > 0.0) {
        return Err(MasdError::NonPositiveBeta(beta));
    }
    if edges.is_empty() {
        return Ok(0.0);
    }
    if edges.iter().any(|e| !(e.d > 0.0)) {
        return Err(MasdError::ZeroDistance);
    }
    let dmin = edges.iter().map(|e| e.d).fold(f64::INFINITY, f64::min);
    let z: f64 = edges.iter().map(|e| (-beta * (e.d - dmin)).exp()).sum();
    let s: f64 = edges
        .iter()
        .map(|e| (-beta * (e.d - dmin)).exp() / z * (lambda * e.unit / e.d))
        .sum();
    Ok(s)
}

/// Every pair of `g` except virtual–virtual ones, in the given mode.
pub fn risk_edges(g: &DefectGraph, mode: WeightMode) -> Vec<RiskEdge> {
    let d = g.distances();
    let mut out = Vec::new();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let (u, v) = (&g.vertices[i], &g.vertices[j]);
            if u.is_virtual && v.is_virtual {
                continue;
            }
            if let Some(dist) = d[i][j] {
                out.push(RiskEdge {
                    d: dist,
                    unit: penalty_unit(u, v, mode),
                });
            }
        }
    }
    out
}

/// Distance and raw winding difference of each matched pair, skipping
/// virtual–virtual pairs.
pub fn risk_pairs(g: &DefectGraph, m: &Matching) -> Vec<RiskPair> {
    let idx = g.index();
    let d = g.distances();
    m.pairs
        .iter()
        .filter_map(|&(a, b)| {
            let (i, j) = (idx[&a], idx[&b]);
            let (u, v) = (&g.vertices[i], &g.vertices[j]);
            if u.is_virtual && v.is_virtual {
                return None;
            }
            Some(RiskPair {
                d: d[i][j].unwrap_or(f64::INFINITY),
                delta_k: winding_difference(u, v).to_f64().unwrap(),
            })
        })
        .collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub mode: WeightMode,
    pub beta: f64,
    pub exactness: Exactness,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            mode: WeightMode::Normalized,
            beta: 1.0,
            exactness: Exactness::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub lambda: f64,
    pub mode: WeightMode,
    pub beta: f64,
    /// Toy risk over the pairs of the λ = 0 matching (monotone in λ).
    pub drg_toy: f64,
    /// Toy risk over the pairs actually matched at this λ.
    pub drg_toy_matched: f64,
    pub drg_pm: f64,
    pub total_cost: f64,
    pub matching_size: usize,
    pub approximate: bool,
}

/// Matches `g` under λ-penalized weights and reports decoder risk.
pub fn masd_decode(g: &DefectGraph, lambda: f64, opts: &DecodeOptions) -> Result<(Matching, RiskReport), MasdError> {
    let m = min_weight_perfect_matching(g, lambda, opts.mode, opts.exactness)?;
    let baseline = if lambda == 0.0 {
        m.clone()
    } else {
        min_weight_perfect_matching(g, 0.0, opts.mode, opts.exactness)?
    };
    let report = RiskReport {
        lambda,
        mode: opts.mode,
        beta: opts.beta,
        drg_toy: drg_toy(&risk_pairs(g, &baseline), lambda)?,
        drg_toy_matched: drg_toy(&risk_pairs(g, &m), lambda)?,
        drg_pm: drg_pm(&risk_edges(g, opts.mode), lambda, opts.beta)?,
        total_cost: m.cost,
        matching_size: m.pairs.len(),
        approximate: m.approximate,
    };
    Ok((m, report))
}

// ---------------------------------------------------------------------------
// Rotated surface code
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilizer {
    pub kind: Pauli,
    /// Plaquette corner `(i, j)`, `0 ≤ i, j ≤ d`.
    pub corner: [i64; 2],
    pub qubits: Vec<usize>,
}

/// Check graph of one stabilizer type: BFS tables over stabilizers plus a
/// boundary node, edges labelled by data qubits.
#[derive(Clone, Debug)]
struct CheckGraph {
    stabs: Vec<usize>,
    /// `dist[s][t]`, `t == stabs.len()` is the boundary.
    dist: Vec<Vec<usize>>,
    /// `parent[s][t]`: (previous node, qubit) on a shortest path from `s`.
    parent: Vec<Vec<Option<(usize, usize)>>>,
}

impl CheckGraph {
    fn new(stabilizers: &[Stabilizer], kind: Pauli, n_qubits: usize) -> CheckGraph {
        let stabs: Vec<usize> = (0..stabilizers.len()).filter(|&s| stabilizers[s].kind == kind).collect();
        let boundary = stabs.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); boundary + 1];
        for q in 0..n_qubits {
            let touching: Vec<usize> = stabs
                .iter()
                .enumerate()
                .filter(|(_, &s)| stabilizers[s].qubits.contains(&q))
                .map(|(i, _)| i)
                .collect();
            let (a, b) = match touching.as_slice() {
                [a, b] => (*a, *b),
                [a] => (*a, boundary),
                _ => continue,
            };
            adj[a].push((b, q));
            adj[b].push((a, q));
        }
        let mut dist = Vec::new();
        let mut parent = Vec::new();
        for s in 0..=boundary {
            let mut d = vec![usize::MAX; boundary + 1];
            let mut p = vec![None; boundary + 1];
            d[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &(y, q) in &adj[x] {
                    if d[y] == usize::MAX {
                        d[y] = d[x] + 1;
                        p[y] = Some((x, q));
                        queue.push_back(y);
                    }
                }
            }
            dist.push(d);
            parent.push(p);
        }
        CheckGraph { stabs, dist, parent }
    }

    fn boundary(&self) -> usize {
        self.stabs.len()
    }

    /// Data qubits on the stored shortest path between local nodes.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut x = to;
        while x != from {
            let (prev, q) = self.parent[from][x].expect("connected check graph");
            out.push(q);
            x = prev;
        }
        out
    }
}

/// Where defect windings come from in simulation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum WindingModel {
    /// `k` uniform in `0..a`.
    Uniform { a: u64 },
    /// Left and right halves of the lattice carry constant labels.
    TwoSector { left: (u64, i64), right: (u64, i64) },
    Constant { a: u64, k: i64 },
}

impl Default for WindingModel {
    fn default() -> Self {
        WindingModel::TwoSector {
            left: (8, 2),
            right: (12, 5),
        }
    }
}

impl WindingModel {
    fn label(&self, corner: [i64; 2], distance: usize, rng: &mut ChaCha8Rng) -> Result<(GridOrder, i64), MasdError> {
        let grid = |a: u64| GridOrder::new(a).map_err(|e| MasdError::InvalidGraph(e.to_string()));
        match *self {
            WindingModel::Uniform { a } => {
                let g = grid(a)?;
                Ok((g, rng.gen_range(0..a) as i64))
            }
            WindingModel::TwoSector { left, right } => {
                let (a, k) = if 2 * corner[1] < distance as i64 { left } else { right };
                Ok((grid(a)?, k))
            }
            WindingModel::Constant { a, k } => Ok((grid(a)?, k)),
        }
    }
}

/// Rotated distance-`d` surface code with data qubit `(r, c)` at index
/// `r·d + c`.
#[derive(Clone, Debug)]
pub struct SurfaceCode {
    distance: usize,
    stabilizers: Vec<Stabilizer>,
    /// Z checks (detect X errors), X checks (detect Z errors).
    checks: [CheckGraph; 2],
}

impl SurfaceCode {
    pub fn new(distance: usize) -> Result<SurfaceCode, MasdError> {
        if ![3, 5, 7].contains(&distance) {
            return Err(MasdError::InvalidDistance(distance));
        }
        let d = distance as i64;
        let mut stabilizers = Vec::new();
        for i in 0..=d {
            for j in 0..=d {
                let kind = if (i + j) % 2 == 1 { Pauli::Z } else { Pauli::X };
                let on_row_edge = i == 0 || i == d;
                let on_col_edge = j == 0 || j == d;
                if on_row_edge && on_col_edge {
                    continue;
                }
                if on_row_edge && kind != Pauli::X || on_col_edge && kind != Pauli::Z {
                    continue;
                }
                let qubits = [(i - 1, j - 1), (i - 1, j), (i, j - 1), (i, j)]
                    .into_iter()
                    .filter(|&(r, c)| (0..d).contains(&r) && (0..d).contains(&c))
                    .map(|(r, c)| (r * d + c) as usize)
                    .collect();
                stabilizers.push(Stabilizer {
                    kind,
                    corner: [i, j],
                    qubits,
                });
            }
        }
        let nq = distance * distance;
        let checks = [
            CheckGraph::new(&stabilizers, Pauli::Z, nq),
            CheckGraph::new(&stabilizers, Pauli::X, nq),
        ];
        Ok(SurfaceCode {
            distance,
            stabilizers,
            checks,
        })
    }

    pub fn distance(&self) -> usize {
        self.distance
    }

    pub fn n_qubits(&self) -> usize {
        self.distance * self.distance
    }

    pub fn stabilizers(&self) -> &[Stabilizer] {
        &self.stabilizers
    }

    /// Indices of violated stabilizers of type `kind` for a data-qubit
    /// error pattern of the opposite Pauli type.
    pub fn syndrome(&self, kind: Pauli, errors: &[bool]) -> Vec<usize> {
        (0..self.stabilizers.len())
            .filter(|&s| {
                let st = &self.stabilizers[s];
                st.kind == kind && st.qubits.iter().filter(|&&q| errors[q]).count() % 2 == 1
            })
            .collect()
    }

    fn check(&self, kind: Pauli) -> &CheckGraph {
        match kind {
            Pauli::Z => &self.checks[0],
            Pauli::X => &self.checks[1],
        }
    }

    /// Defect graph for the violated checks of type `kind`: real vertex `i`
    /// for the `i`-th defect, virtual vertex `n + i` as its private boundary.
    fn defect_graph(
        &self,
        kind: Pauli,
        errors: &[bool],
        winding: &WindingModel,
        rng: &mut ChaCha8Rng,
    ) -> Result<(DefectGraph, Vec<usize>), MasdError> {
        let check = self.check(kind);
        let local: BTreeMap<usize, usize> = check.stabs.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let defects: Vec<usize> = self.syndrome(kind, errors).iter().map(|s| local[s]).collect();
        let n = defects.len();
        let mut vertices = Vec::with_capacity(2 * n);
        for (i, &s) in defects.iter().enumerate() {
            let corner = self.stabilizers[check.stabs[s]].corner;
            let (a, k) = winding.label(corner, self.distance, rng)?;
            vertices.push(DefectVertex::real(i, corner, a, k));
        }
        for (i, &s) in defects.iter().enumerate() {
            vertices.push(DefectVertex::boundary(n + i, self.stabilizers[check.stabs[s]].corner));
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push(DefectEdge {
                    u: i,
                    v: j,
                    d: check.dist[defects[i]][defects[j]] as f64,
                });
            }
            edges.push(DefectEdge {
                u: i,
                v: n + i,
                d: check.dist[defects[i]][check.boundary()] as f64,
            });
        }
        Ok((DefectGraph::new(vertices, edges, GraphMode::Sparse)?, defects))
    }

    /// Flips the data qubits along each matched pair's shortest path.
    fn correction(&self, kind: Pauli, defects: &[usize], m: &Matching) -> Vec<bool> {
        let check = self.check(kind);
        let n = defects.len();
        let mut corr = vec![false; self.n_qubits()];
        for &(a, b) in &m.pairs {
            let path = match (a < n, b < n) {
                (true, true) => check.path(defects[a], defects[b]),
                (true, false) => check.path(defects[a], check.boundary()),
                (false, true) => check.path(defects[b], check.boundary()),
                (false, false) => continue,
            };
            for q in path {
                corr[q] ^= true;
            }
        }
        corr
    }

    /// Residual X errors flip logical Z on row 0; residual Z errors flip
    /// logical X on column 0.
    fn logical_flip(&self, kind: Pauli, residual: &[bool]) -> bool {
        let d = self.distance;
        let parity = match kind {
            Pauli::Z => (0..d).filter(|&c| residual[c]).count(),
            Pauli::X => (0..d).filter(|&r| residual[r * d]).count(),
        };
        parity % 2 == 1
    }
}

/// One Monte-Carlo draw: error patterns and the two defect graphs.
#[derive(Clone, Debug)]
pub struct SurfaceCodeSample {
    pub x_errors: Vec<bool>,
    pub z_errors: Vec<bool>,
    /// Defects of Z checks (caused by X errors).
    pub x_graph: DefectGraph,
    /// Defects of X checks (caused by Z errors).
    pub z_graph: DefectGraph,
    x_defects: Vec<usize>,
    z_defects: Vec<usize>,
}

/// Per-trial generator: master seed with the trial index as stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

impl SurfaceCode {
    pub fn sample(&self, p_phys: f64, winding: &WindingModel, rng: &mut ChaCha8Rng) -> Result<SurfaceCodeSample, MasdError> {
        if !(0.0..0.5).contains(&p_phys) {
            return Err(MasdError::InvalidProbability(p_phys));
        }
        let nq = self.n_qubits();
        let mut x_errors = vec![false; nq];
        let mut z_errors = vec![false; nq];
        for q in 0..nq {
            x_errors[q] = rng.gen::<f64>() < p_phys;
            z_errors[q] = rng.gen::<f64>() < p_phys;
        }
        let (x_graph, x_defects) = self.defect_graph(Pauli::Z, &x_errors, winding, rng)?;
        let (z_graph, z_defects) = self.defect_graph(Pauli::X, &z_errors, winding, rng)?;
        Ok(SurfaceCodeSample {
            x_errors,
            z_errors,
            x_graph,
            z_graph,
            x_defects,
            z_defects,
        })
    }

    /// Decodes both error types and reports whether either logical flipped.
    pub fn decode(&self, s: &SurfaceCodeSample, lambda: f64, opts: &DecodeOptions) -> Result<TrialOutcome, MasdError> {
        let mut failure = false;
        let mut cost = 0.0;
        let mut baseline_pairs = Vec::new();
        let mut edges = Vec::new();
        for (kind, errors, g, defects) in [
            (Pauli::Z, &s.x_errors, &s.x_graph, &s.x_defects),
            (Pauli::X, &s.z_errors, &s.z_graph, &s.z_defects),
        ] {
            let m = min_weight_perfect_matching(g, lambda, opts.mode, opts.exactness)?;
            let base = if lambda == 0.0 {
                m.clone()
            } else {
                min_weight_perfect_matching(g, 0.0, opts.mode, opts.exactness)?
            };
            let corr = self.correction(kind, defects, &m);
            let residual: Vec<bool> = errors.iter().zip(&corr).map(|(a, b)| a ^ b).collect();
            debug_assert!(self.syndrome(kind, &residual).is_empty());
            failure |= self.logical_flip(kind, &residual);
            cost += m.cost;
            baseline_pairs.extend(risk_pairs(g, &base));
            edges.extend(risk_edges(g, opts.mode));
        }
        Ok(TrialOutcome {
            logical_failure: failure,
            cost,
            drg_toy: drg_toy(&baseline_pairs, lambda)?,
            drg_pm: drg_pm(&edges, lambda, opts.beta)?,
        })
    }
}

/// Convenience wrapper: sample trial 0 of `seed`.
pub fn sample_surface_code(distance: usize, p_phys: f64, seed: u64, winding: &WindingModel) -> Result<(SurfaceCode, SurfaceCodeSample), MasdError> {
    let code = SurfaceCode::new(distance)?;
    let s = code.sample(p_phys, winding, &mut trial_rng(seed, 0))?;
    Ok((code, s))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub logical_failure: bool,
    pub cost: f64,
    pub drg_toy: f64,
    pub drg_pm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub distance: usize,
    pub p_phys: f64,
    pub trials: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub options: DecodeOptions,
    pub winding: WindingModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub p_phys: f64,
    pub distance: usize,
    pub trials: usize,
    pub logical_error_rate: f64,
    pub drg_toy_mean: f64,
    pub drg_pm_mean: f64,
    pub mean_cost: f64,
    pub mode: WeightMode,
}

/// Logical error rate and mean risk per λ. Every λ sees the same samples.
pub fn lambda_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, MasdError> {
    if cfg.lambdas.is_empty() || cfg.trials == 0 {
        return Err(MasdError::InvalidGraph("sweep needs at least one lambda and one trial".into()));
    }
    for &l in &cfg.lambdas {
        check_lambda(l)?;
    }
    let code = SurfaceCode::new(cfg.distance)?;
    let outcomes: Vec<Vec<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let s = code.sample(cfg.p_phys, &cfg.winding, &mut trial_rng(cfg.seed, t as u64))?;
            cfg.lambdas.iter().map(|&l| code.decode(&s, l, &cfg.options)).collect()
        })
        .collect::<Result<_, MasdError>>()?;
    let n = cfg.trials as f64;
    Ok(cfg
        .lambdas
        .iter()
        .enumerate()
        .map(|(li, &lambda)| {
            let col = outcomes.iter().map(|o| o[li]);
            let fails = col.clone().filter(|o| o.logical_failure).count() as f64;
            SweepRow {
                lambda,
                p_phys: cfg.p_phys,
                distance: cfg.distance,
                trials: cfg.trials,
                logical_error_rate: fails / n,
                drg_toy_mean: col.clone().map(|o| o.drg_toy).sum::<f64>() / n,
                drg_pm_mean: col.clone().map(|o| o.drg_pm).sum::<f64>() / n,
                mean_cost: col.map(|o| o.cost).sum::<f64>() / n,
                mode: cfg.options.mode,
            }
        })
        .collect())
}

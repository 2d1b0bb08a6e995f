//! Seeded dataset generators (random weighted diagrams and layered
//! hardware-efficient circuits), a small circuit model with a text format,
//! and restricted conversion between circuits and diagrams.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Diagram, DiagramError, Endpoint, Node, NodeId, NodeKind, Side, Wire};
use crate::metrics::GateCounts;
use crate::phase::{snap_to_grid, GridOrder, RationalAngle, SpiderLabel};
use crate::semantics::{
    amplitude_damping, apply_channel, depolarizing, hadamard, phase_damping, ComplexMatrix, DensityMatrix,
    KrausChannel, SemanticsError, StateVector,
};

/// Turn resolution of generated circuit angles.
pub const HEA_RESOLUTION: i64 = 1 << 16;
/// Resolution used when a radian angle has to become an exact phase.
pub const RADIAN_RESOLUTION: i64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("diagram is not circuit-like: {0}")]
    NotCircuitLike(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// A rotation angle, either exact in turns or a floating value in radians.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Angle {
    Turns(RationalAngle),
    Radians(f64),
}

impl Angle {
    pub fn radians(self) -> f64 {
        match self {
            Angle::Turns(t) => t.radians(),
            Angle::Radians(r) => r,
        }
    }

    /// Exact turns; radians are rounded to `1/RADIAN_RESOLUTION`.
    pub fn turns(self) -> RationalAngle {
        match self {
            Angle::Turns(t) => t,
            Angle::Radians(r) => {
                let n = (r / TAU * RADIAN_RESOLUTION as f64).round() as i64;
                RationalAngle::new(n, RADIAN_RESOLUTION).expect("nonzero resolution")
            }
        }
    }
}

impl std::fmt::Display for Angle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Angle::Turns(t) => write!(f, "{}/{}", t.numer(), t.denom()),
            Angle::Radians(r) => write!(f, "{r:?}"),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Gate {
    Rz(usize, Angle),
    Rx(usize, Angle),
    Ry(usize, Angle),
    H(usize),
    Cx(usize, usize),
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rz(q, _) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::H(q) => vec![q],
            Gate::Cx(c, t) => vec![c, t],
        }
    }

    /// 2×2 matrix of a single-qubit gate.
    pub fn matrix(&self) -> Option<ComplexMatrix> {
        let rot = |t: f64| (Complex64::new((t / 2.0).cos(), 0.0), (t / 2.0).sin());
        match *self {
            Gate::Rz(_, a) => {
                let t = a.radians() / 2.0;
                Some(ComplexMatrix::from_rows(
                    2,
                    2,
                    vec![Complex64::from_polar(1.0, -t), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, t)],
                ))
            }
            Gate::Rx(_, a) => {
                let (c, s) = rot(a.radians());
                let ms = Complex64::new(0.0, -s);
                Some(ComplexMatrix::from_rows(2, 2, vec![c, ms, ms, c]))
            }
            Gate::Ry(_, a) => {
                let (c, s) = rot(a.radians());
                Some(ComplexMatrix::from_rows(2, 2, vec![c, Complex64::new(-s, 0.0), Complex64::new(s, 0.0), c]))
            }
            Gate::H(_) => Some(hadamard()),
            Gate::Cx(..) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) -> Result<(), DatasetError> {
        check_gate(&g, self.n_qubits)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        self.gates.iter().try_for_each(|g| check_gate(g, self.n_qubits))
    }

    /// Counts in the native `{RZ, RX, H, CX}` basis, where `RY` costs three
    /// gates.
    pub fn counts(&self) -> GateCounts {
        let mut c = GateCounts::default();
        for g in &self.gates {
            match g {
                Gate::Ry(..) => c.gates += 3,
                Gate::Cx(..) => {
                    c.gates += 1;
                    c.cnots += 1;
                }
                _ => c.gates += 1,
            }
        }
        c
    }

    /// Rotation angles in radians, paired with their qubit.
    pub fn rotation_angles(&self) -> Vec<(usize, f64)> {
        self.gates
            .iter()
            .filter_map(|g| match *g {
                Gate::Rz(q, a) | Gate::Rx(q, a) | Gate::Ry(q, a) => Some((q, a.radians())),
                _ => None,
            })
            .collect()
    }

    fn apply(&self, s: &mut StateVector) {
        for g in &self.gates {
            match *g {
                Gate::Cx(c, t) => s.apply_cx(c, t),
                _ => s.apply_1q(&g.matrix().unwrap(), g.qubits()[0]),
            }
        }
    }

    /// Final state from `|0…0⟩`.
    pub fn simulate(&self) -> StateVector {
        let mut s = StateVector::zero_state(self.n_qubits);
        self.apply(&mut s);
        s
    }

    /// Full unitary, qubit 0 most significant.
    pub fn unitary(&self) -> ComplexMatrix {
        let dim = 1 << self.n_qubits;
        let mut u = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut s = StateVector::basis(self.n_qubits, col);
            self.apply(&mut s);
            for (row, a) in s.amplitudes.iter().enumerate() {
                u.set(row, col, *a);
            }
        }
        u
    }

    /// Density-matrix evolution from `|0…0⟩` with the channel applied to
    /// every qubit a gate touches, right after that gate.
    pub fn simulate_noisy(&self, noise: &NoiseConfig) -> Result<DensityMatrix, DatasetError> {
        let ch = noise.channel()?;
        let mut rho = DensityMatrix::zero_state(self.n_qubits);
        for g in &self.gates {
            match *g {
                Gate::Cx(c, t) => rho.apply_cx(c, t),
                _ => rho.apply_1q(&g.matrix().unwrap(), g.qubits()[0]),
            }
            for q in g.qubits() {
                rho = apply_channel(&rho, &ch, q)?;
            }
        }
        Ok(rho)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            let _ = match *g {
                Gate::Rz(q, a) => writeln!(out, "RZ q{q} {a}"),
                Gate::Rx(q, a) => writeln!(out, "RX q{q} {a}"),
                Gate::Ry(q, a) => writeln!(out, "RY q{q} {a}"),
                Gate::H(q) => writeln!(out, "H q{q}"),
                Gate::Cx(c, t) => writeln!(out, "CX q{c} q{t}"),
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Circuit, DatasetError> {
        let mut circuit: Option<Circuit> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let err = |reason: String| DatasetError::Parse { line, reason };
            let tokens: Vec<&str> = body.split_whitespace().collect();
            let Some(c) = circuit.as_mut() else {
                match tokens.as_slice() {
                    ["qubits", n] => {
                        let n = n.parse().map_err(|_| err(format!("bad qubit count {n:?}")))?;
                        circuit = Some(Circuit::new(n));
                        continue;
                    }
                    _ => return Err(err("expected header `qubits N`".into())),
                }
            };
            let qubit = |t: &str| -> Result<usize, DatasetError> {
                t.strip_prefix('q')
                    .and_then(|n| n.parse().ok())
                    .ok_or_else(|| err(format!("bad qubit {t:?}")))
            };
            let angle = |t: &str| -> Result<Angle, DatasetError> {
                if t.contains('/') {
                    t.parse().map(Angle::Turns).map_err(|_| err(format!("bad angle {t:?}")))
                } else {
                    t.parse().map(Angle::Radians).map_err(|_| err(format!("bad angle {t:?}")))
                }
            };
            let gate = match tokens.as_slice() {
                ["RZ", q, a] => Gate::Rz(qubit(q)?, angle(a)?),
                ["RX", q, a] => Gate::Rx(qubit(q)?, angle(a)?),
                ["RY", q, a] => Gate::Ry(qubit(q)?, angle(a)?),
                ["H", q] => Gate::H(qubit(q)?),
                ["CX", c, t] => Gate::Cx(qubit(c)?, qubit(t)?),
                _ => return Err(err(format!("unrecognized gate line {body:?}"))),
            };
            c.push(gate).map_err(|e| err(e.to_string()))?;
        }
        circuit.ok_or(DatasetError::Parse {
            line: 0,
            reason: "missing header".into(),
        })
    }
}

fn check_gate(g: &Gate, n: usize) -> Result<(), DatasetError> {
    let qs = g.qubits();
    if let Some(&q) = qs.iter().find(|&&q| q >= n) {
        return Err(DatasetError::ConfigInvalid(format!("qubit {q} out of range for {n} qubits")));
    }
    if qs.len() == 2 && qs[0] == qs[1] {
        return Err(DatasetError::ConfigInvalid(format!("CX with control = target = {}", qs[0])));
    }
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Depolarizing,
    AmplitudeDamping,
    PhaseDamping,
}

impl NoiseKind {
    /// Parameter range swept in the robustness experiments.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            NoiseKind::Depolarizing => (0.001, 0.03),
            NoiseKind::AmplitudeDamping => (0.005, 0.05),
            NoiseKind::PhaseDamping => (0.002, 0.04),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub strength: f64,
}

impl NoiseConfig {
    pub fn channel(&self) -> Result<KrausChannel, DatasetError> {
        Ok(match self.kind {
            NoiseKind::Depolarizing => depolarizing(self.strength)?,
            NoiseKind::AmplitudeDamping => amplitude_damping(self.strength)?,
            NoiseKind::PhaseDamping => phase_damping(self.strength)?,
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationSet {
    /// `RY` then `RZ` on each qubit.
    #[default]
    Yz,
    /// `RX` then `RZ` on each qubit.
    Xz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    /// Inclusive spider-count range.
    pub spiders: (usize, usize),
    pub grid_orders: Vec<u64>,
    /// Probability that a placement is a two-wire rung.
    pub density: f64,
    pub qubits: usize,
    pub layers: usize,
    #[serde(default)]
    pub rotations: RotationSet,
}

impl GenConfig {
    fn validate(&self) -> Result<Vec<GridOrder>, DatasetError> {
        let bad = |m: &str| Err(DatasetError::ConfigInvalid(m.into()));
        if self.spiders.0 > self.spiders.1 {
            return bad("empty spider range");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        if self.grid_orders.is_empty() {
            return bad("no grid orders");
        }
        if self.qubits == 0 {
            return bad("need at least one qubit");
        }
        self.grid_orders
            .iter()
            .map(|&a| GridOrder::new(a).map_err(|e| DatasetError::ConfigInvalid(e.to_string())))
            .collect()
    }

    /// Per-qubit grid assignment used when snapping circuits.
    pub fn grid_map(&self) -> Result<Vec<GridOrder>, DatasetError> {
        let grids = self.validate()?;
        Ok((0..self.qubits).map(|q| grids[q % grids.len()]).collect())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "d1-main")]
    D1Main,
    #[serde(rename = "d1-appendix")]
    D1Appendix,
    #[serde(rename = "d2-main")]
    D2Main,
    #[serde(rename = "d2-appendix")]
    D2Appendix,
    #[serde(rename = "d3")]
    D3,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::D1Main, Preset::D1Appendix, Preset::D2Main, Preset::D2Appendix, Preset::D3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::D1Main => "d1-main",
            Preset::D1Appendix => "d1-appendix",
            Preset::D2Main => "d2-main",
            Preset::D2Appendix => "d2-appendix",
            Preset::D3 => "d3",
        }
    }

    pub fn is_diagram_family(self) -> bool {
        matches!(self, Preset::D1Main | Preset::D1Appendix)
    }

    pub fn config(self, seed: u64) -> Result<GenConfig, DatasetError> {
        let base = GenConfig {
            seed,
            spiders: (30, 300),
            grid_orders: vec![1, 2, 3, 4, 6, 8],
            density: 0.5,
            qubits: 4,
            layers: 4,
            rotations: RotationSet::Yz,
        };
        Ok(match self {
            Preset::D1Main => base,
            Preset::D1Appendix => GenConfig {
                spiders: (30, 120),
                grid_orders: vec![4, 6, 8, 12],
                ..base
            },
            Preset::D2Main => GenConfig {
                grid_orders: vec![4, 6, 8, 12],
                ..base
            },
            Preset::D2Appendix => GenConfig {
                grid_orders: vec![4, 6, 8, 12],
                rotations: RotationSet::Xz,
                ..base
            },
            Preset::D3 => {
                return Err(DatasetError::Unsupported(
                    "d3 needs hardware calibration data and is not generated".into(),
                ))
            }
        })
    }
}

impl std::str::FromStr for Preset {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| DatasetError::ConfigInvalid(format!("unknown preset {s:?}")))
    }
}

/// Generator for instance `index` of a seeded batch.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

/// Random weighted diagram on `cfg.qubits` wires, built left to right from
/// single-wire spiders and rungs joining neighbouring wires, so it is
/// planar by construction.
pub fn gen_random_wplzx(cfg: &GenConfig) -> Result<Diagram, DatasetError> {
    gen_random_wplzx_instance(cfg, 0)
}

pub fn gen_random_wplzx_instance(cfg: &GenConfig, index: u64) -> Result<Diagram, DatasetError> {
    let grids = cfg.validate()?;
    let mut rng = instance_rng(cfg.seed, index);
    let n = cfg.qubits;
    let total = rng.gen_range(cfg.spiders.0..=cfg.spiders.1);
    let mut nodes = Vec::with_capacity(total);
    let mut wires = Vec::new();
    let mut cur: Vec<Endpoint> = (0..n).map(Endpoint::input).collect();
    let mut spider = |rng: &mut ChaCha8Rng, inputs: usize| {
        let kind = if rng.gen_bool(0.5) { NodeKind::Z } else { NodeKind::X };
        let a = grids[rng.gen_range(0..grids.len())];
        let alpha = RationalAngle::grid_point(rng.gen_range(0..a.get() as i64), a);
        let id = NodeId(nodes.len() as u64);
        nodes.push(Node::spider(id, kind, SpiderLabel::new(a, alpha, RationalAngle::ZERO), inputs));
        id
    };
    let mut placed = 0;
    while placed < total {
        let q = rng.gen_range(0..n);
        if n >= 2 && total - placed >= 2 && rng.gen_bool(cfg.density) {
            let (top, bottom) = if q + 1 < n { (q, q + 1) } else { (q - 1, q) };
            let u = spider(&mut rng, 1);
            let v = spider(&mut rng, 2);
            wires.push(Wire(cur[top], Endpoint::node(u, 0)));
            wires.push(Wire(cur[bottom], Endpoint::node(v, 0)));
            wires.push(Wire(Endpoint::node(u, 2), Endpoint::node(v, 1)));
            cur[top] = Endpoint::node(u, 1);
            cur[bottom] = Endpoint::node(v, 2);
            placed += 2;
        } else {
            let u = spider(&mut rng, 1);
            wires.push(Wire(cur[q], Endpoint::node(u, 0)));
            cur[q] = Endpoint::node(u, 1);
            placed += 1;
        }
    }
    for (q, e) in cur.into_iter().enumerate() {
        wires.push(Wire(e, Endpoint::output(q)));
    }
    Ok(Diagram::build(nodes, wires, names(n), names(n))?)
}

/// Layered circuit: each layer puts two rotations on every qubit, then a
/// CX chain `(i, i+1)`. Angles are uniform on a `1/HEA_RESOLUTION` turn grid.
pub fn gen_hea(cfg: &GenConfig) -> Result<Circuit, DatasetError> {
    gen_hea_instance(cfg, 0)
}

pub fn gen_hea_instance(cfg: &GenConfig, index: u64) -> Result<Circuit, DatasetError> {
    cfg.validate()?;
    if cfg.layers == 0 || cfg.qubits < 2 {
        return Err(DatasetError::ConfigInvalid("need layers >= 1 and qubits >= 2".into()));
    }
    let mut rng = instance_rng(cfg.seed, index);
    let mut angle = || Angle::Turns(RationalAngle::new(rng.gen_range(0..HEA_RESOLUTION), HEA_RESOLUTION).unwrap());
    let mut c = Circuit::new(cfg.qubits);
    for _ in 0..cfg.layers {
        for q in 0..cfg.qubits {
            let first = match cfg.rotations {
                RotationSet::Yz => Gate::Ry(q, angle()),
                RotationSet::Xz => Gate::Rx(q, angle()),
            };
            c.gates.push(first);
            c.gates.push(Gate::Rz(q, angle()));
        }
        for q in 0..cfg.qubits - 1 {
            c.gates.push(Gate::Cx(q, q + 1));
        }
    }
    Ok(c)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// Keep the exact angle; the label's grid order is still the qubit's.
    #[default]
    Raw,
    /// Round each angle to the nearest point of the qubit's grid.
    Snapped,
}

/// Translates `c` gate by gate. `RY(θ)` becomes `RZ(−π/2)·RX(θ)·RZ(π/2)`
/// and `CX` a Z(1→2)/X(2→1) pair.
pub fn circuit_to_diagram(c: &Circuit, grid_map: &[GridOrder], mode: PhaseMode) -> Result<Diagram, DatasetError> {
    c.validate()?;
    if grid_map.len() != c.n_qubits {
        return Err(DatasetError::ConfigInvalid(format!(
            "grid map has {} entries for {} qubits",
            grid_map.len(),
            c.n_qubits
        )));
    }
    let quarter = GridOrder::new(4).unwrap();
    let mut nodes: Vec<Node> = Vec::new();
    let mut wires = Vec::new();
    let mut cur: Vec<Endpoint> = (0..c.n_qubits).map(Endpoint::input).collect();
    let rotation = |nodes: &mut Vec<Node>, wires: &mut Vec<Wire>, cur: &mut [Endpoint], kind, q: usize, label| {
        let id = NodeId(nodes.len() as u64);
        nodes.push(Node::spider(id, kind, label, 1));
        wires.push(Wire(cur[q], Endpoint::node(id, 0)));
        cur[q] = Endpoint::node(id, 1);
    };
    let label = |q: usize, a: Angle| {
        let grid = grid_map[q];
        let alpha = match mode {
            PhaseMode::Raw => a.turns().mod_turn(),
            PhaseMode::Snapped => snap_to_grid(a.radians(), grid),
        };
        SpiderLabel::new(grid, alpha, RationalAngle::ZERO)
    };
    for g in &c.gates {
        match *g {
            Gate::Rz(q, a) => rotation(&mut nodes, &mut wires, &mut cur, NodeKind::Z, q, label(q, a)),
            Gate::Rx(q, a) => rotation(&mut nodes, &mut wires, &mut cur, NodeKind::X, q, label(q, a)),
            Gate::Ry(q, a) => {
                let side = |n| SpiderLabel::new(quarter, RationalAngle::grid_point(n, quarter), RationalAngle::ZERO);
                rotation(&mut nodes, &mut wires, &mut cur, NodeKind::Z, q, side(3));
                rotation(&mut nodes, &mut wires, &mut cur, NodeKind::X, q, label(q, a));
                rotation(&mut nodes, &mut wires, &mut cur, NodeKind::Z, q, side(1));
            }
            Gate::H(q) => {
                let id = NodeId(nodes.len() as u64);
                nodes.push(Node::hadamard(id));
                wires.push(Wire(cur[q], Endpoint::node(id, 0)));
                cur[q] = Endpoint::node(id, 1);
            }
            Gate::Cx(ctl, tgt) => {
                let z = NodeId(nodes.len() as u64);
                nodes.push(Node::spider(z, NodeKind::Z, SpiderLabel::plain(RationalAngle::ZERO), 1));
                let x = NodeId(nodes.len() as u64);
                nodes.push(Node::spider(x, NodeKind::X, SpiderLabel::plain(RationalAngle::ZERO), 2));
                wires.push(Wire(cur[ctl], Endpoint::node(z, 0)));
                wires.push(Wire(cur[tgt], Endpoint::node(x, 0)));
                wires.push(Wire(Endpoint::node(z, 2), Endpoint::node(x, 1)));
                cur[ctl] = Endpoint::node(z, 1);
                cur[tgt] = Endpoint::node(x, 2);
            }
        }
    }
    for (q, e) in cur.into_iter().enumerate() {
        wires.push(Wire(e, Endpoint::output(q)));
    }
    Ok(Diagram::build(nodes, wires, names(c.n_qubits), names(c.n_qubits))?)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum WireRole {
    Line,
    Rung,
    Open,
}

/// Reads a circuit back off a diagram whose spiders sit on qubit lines and
/// whose only cross-line wires are CX rungs (Z output side to X input
/// side). Spider phases become `RZ`/`RX` gates.
pub fn diagram_to_circuit(d: &Diagram) -> Result<Circuit, DatasetError> {
    let bad = |m: String| Err(DatasetError::NotCircuitLike(m));
    let n = d.inputs().len();
    if d.outputs().len() != n {
        return bad(format!("{} inputs but {} outputs", n, d.outputs().len()));
    }
    let wires = d.wires();
    // (node, is_input_side) of a wire end, or None for a boundary.
    let side = |e: &Endpoint| -> Option<(NodeId, bool)> {
        e.node_id().map(|id| {
            let Endpoint::Node { port, .. } = *e else { unreachable!() };
            (id, port < d.node(id).unwrap().inputs)
        })
    };
    let kind = |id: NodeId| d.node(id).unwrap().kind;
    let mut role = vec![WireRole::Open; wires.len()];
    for (i, w) in wires.iter().enumerate() {
        if w.is_self_loop() {
            return bad(format!("self-loop on wire {i}"));
        }
        let ambiguous = match (side(&w.0), side(&w.1)) {
            (Some((a, a_in)), Some((b, b_in))) => {
                let zx = |z: NodeId, z_in: bool, x: NodeId, x_in: bool| {
                    kind(z) == NodeKind::Z && !z_in && kind(x) == NodeKind::X && x_in
                };
                zx(a, a_in, b, b_in) || zx(b, b_in, a, a_in)
            }
            _ => false,
        };
        if !ambiguous {
            role[i] = WireRole::Line;
        }
    }
    for id in d.node_ids() {
        let node = d.node(id).unwrap();
        let (ins, outs) = d.arity(id);
        match node.kind {
            NodeKind::Hadamard if (ins, outs) != (1, 1) => return bad(format!("Hadamard {id} is not 1→1")),
            NodeKind::Z if ins != 1 => return bad(format!("Z spider {id} has {ins} inputs")),
            NodeKind::X if outs != 1 => return bad(format!("X spider {id} has {outs} outputs")),
            _ => {}
        }
    }
    // Unit propagation over the undecided Z→X wires: every spider has
    // exactly one line wire on each side.
    let legs = |id: NodeId, input_side: bool| -> Vec<usize> {
        d.incident(id)
            .into_iter()
            .filter(|&(_, port)| (port < d.node(id).unwrap().inputs) == input_side)
            .map(|(w, _)| w)
            .collect()
    };
    let mut changed = true;
    while changed {
        changed = false;
        for id in d.node_ids() {
            for input_side in [true, false] {
                let ls = legs(id, input_side);
                let lines = ls.iter().filter(|&&w| role[w] == WireRole::Line).count();
                let open: Vec<usize> = ls.iter().copied().filter(|&w| role[w] == WireRole::Open).collect();
                if lines > 1 {
                    return bad(format!("node {id} has {lines} line wires on one side"));
                }
                if lines == 1 && !open.is_empty() {
                    open.iter().for_each(|&w| role[w] = WireRole::Rung);
                    changed = true;
                } else if lines == 0 && open.len() == 1 {
                    role[open[0]] = WireRole::Line;
                    changed = true;
                } else if lines == 0 && open.is_empty() {
                    return bad(format!("node {id} has no line wire on one side"));
                }
            }
        }
    }
    if role.contains(&WireRole::Open) {
        return bad("ambiguous qubit lines".into());
    }
    // Walk each line from its input.
    let mut line_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut lines: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (q, line) in lines.iter_mut().enumerate() {
        let mut at = Endpoint::input(q);
        let mut steps = 0;
        loop {
            let next = wires
                .iter()
                .enumerate()
                .find(|(i, w)| role[*i] == WireRole::Line && (w.0 == at || w.1 == at))
                .map(|(_, w)| if w.0 == at { w.1 } else { w.0 });
            let Some(next) = next else {
                return bad(format!("line {q} is broken"));
            };
            match next {
                Endpoint::Boundary { side: Side::Out, pos } if pos == q => break,
                Endpoint::Node { node, .. } => {
                    if line_of.insert(node, q).is_some() {
                        return bad(format!("node {node} sits on two lines"));
                    }
                    line.push(node);
                    let out = legs(node, false).into_iter().find(|&w| role[w] == WireRole::Line).unwrap();
                    let w = &wires[out];
                    at = if w.0.node_id() == Some(node) && side(&w.0).map(|s| !s.1).unwrap_or(false) {
                        w.0
                    } else {
                        w.1
                    };
                }
                _ => return bad(format!("line {q} does not end at output {q}")),
            }
            steps += 1;
            if steps > wires.len() {
                return bad(format!("line {q} loops"));
            }
        }
    }
    if line_of.len() != d.node_count() {
        return bad("some nodes are not on any qubit line".into());
    }
    // Rungs per Z spider, as (wire, X spider).
    let mut rungs: BTreeMap<NodeId, Vec<(usize, NodeId)>> = BTreeMap::new();
    let mut pending_x: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (i, w) in wires.iter().enumerate() {
        if role[i] != WireRole::Rung {
            continue;
        }
        let (a, b) = (w.0.node_id().unwrap(), w.1.node_id().unwrap());
        let (z, x) = if kind(a) == NodeKind::Z { (a, b) } else { (b, a) };
        if line_of[&z] == line_of[&x] {
            return bad(format!("rung {i} joins a line to itself"));
        }
        rungs.entry(z).or_default().push((i, x));
        *pending_x.entry(x).or_default() += 1;
    }
    let theta = |id: NodeId| d.node(id).unwrap().label.unwrap().total_angle().turns();
    let mut c = Circuit::new(n);
    let mut pos = vec![0usize; n];
    let mut arrived = vec![false; n];
    let mut done_rungs = vec![false; wires.len()];
    loop {
        let mut progress = false;
        for q in 0..n {
            while pos[q] < lines[q].len() {
                let id = lines[q][pos[q]];
                let node = d.node(id).unwrap();
                match node.kind {
                    NodeKind::Hadamard => c.gates.push(Gate::H(q)),
                    NodeKind::Z => {
                        if !arrived[q] {
                            arrived[q] = true;
                            if !theta(id).is_zero() {
                                c.gates.push(Gate::Rz(q, Angle::Turns(theta(id))));
                            }
                        }
                        let mut all = true;
                        for &(w, x) in rungs.get(&id).map(|v| v.as_slice()).unwrap_or(&[]) {
                            if done_rungs[w] {
                                continue;
                            }
                            let t = line_of[&x];
                            if lines[t].get(pos[t]) == Some(&x) {
                                c.gates.push(Gate::Cx(q, t));
                                done_rungs[w] = true;
                                *pending_x.get_mut(&x).unwrap() -= 1;
                                progress = true;
                            } else {
                                all = false;
                            }
                        }
                        if !all {
                            break;
                        }
                    }
                    NodeKind::X => {
                        if pending_x.get(&id).copied().unwrap_or(0) > 0 {
                            break;
                        }
                        if !theta(id).is_zero() {
                            c.gates.push(Gate::Rx(q, Angle::Turns(theta(id))));
                        }
                    }
                }
                pos[q] += 1;
                arrived[q] = false;
                progress = true;
            }
        }
        if (0..n).all(|q| pos[q] == lines[q].len()) {
            break;
        }
        if !progress {
            return bad("cyclic CX dependencies".into());
        }
    }
    Ok(c)
}

/// Raw rotation angles and their snapped counterparts on the qubit grids,
/// both in radians.
pub fn snapped_angles(c: &Circuit, grid_map: &[GridOrder]) -> (Vec<f64>, Vec<f64>) {
    c.rotation_angles()
        .into_iter()
        .map(|(q, a)| (a, snap_to_grid(a, grid_map[q]).radians()))
        .unzip()
}

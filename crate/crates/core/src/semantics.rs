//! Dense linear-algebra semantics for diagrams, plus the small state and
//! density-matrix simulator used to measure fidelity under noise.
//!
//! Qubit 0 is the most significant bit of every basis index. A diagram with
//! `m` inputs and `n` outputs evaluates to a `2^n × 2^m` matrix.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::diagram::{Diagram, Endpoint, NodeKind, Side};
use crate::phase::TotalAngle;

/// Comparison tolerance shared by every equality check.
pub const TOL: f64 = 1e-9;
/// Tolerance for constructions such as Kraus completeness.
pub const CONSTRUCTION_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter {name} = {value} outside [0, 1]")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("qubit index {index} out of range for {qubits} qubits")]
    IndexOutOfRange { index: usize, qubits: usize },
}

/// Resource caps for dense evaluation.
#[derive(Copy, Clone, Debug)]
pub struct EvalConfig {
    pub max_open_wires: usize,
    pub max_spider_legs: usize,
    pub max_intermediate_entries: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_open_wires: 12,
            max_spider_legs: 20,
            max_intermediate_entries: 1 << 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        ComplexMatrix { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::from_rows(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    pub fn kron(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = Self::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out.set(i * rhs.rows + k, j * rhs.cols + l, a * rhs.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Debug export as nested `[re, im]` pairs.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Repr(Vec<Vec<[f64; 2]>>);
        let rows = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| [self.get(r, c).re, self.get(r, c).im]).collect())
            .collect();
        serde_json::to_string(&Repr(rows)).expect("matrix serializes")
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

pub fn hadamard() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2])
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(2, 2, vec![ZERO, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

fn kron_power(m: &ComplexMatrix, n: usize) -> ComplexMatrix {
    (0..n).fold(ComplexMatrix::identity(1), |acc, _| acc.kron(m))
}

/// Matrix of a single spider with `m` inputs and `n` outputs.
pub fn spider_matrix(kind: NodeKind, m: usize, n: usize, theta: TotalAngle) -> Result<ComplexMatrix, SemanticsError> {
    spider_matrix_capped(kind, m, n, theta, EvalConfig::default().max_spider_legs)
}

pub fn spider_matrix_capped(
    kind: NodeKind,
    m: usize,
    n: usize,
    theta: TotalAngle,
    max_legs: usize,
) -> Result<ComplexMatrix, SemanticsError> {
    if m + n > max_legs {
        return Err(SemanticsError::DimensionOverflow(format!(
            "spider with {} legs exceeds cap {max_legs}",
            m + n
        )));
    }
    let phase = Complex64::from_polar(1.0, theta.radians());
    let (rows, cols) = (1usize << n, 1usize << m);
    let mut z = ComplexMatrix::zeros(rows, cols);
    z.data[0] += ONE;
    z.data[rows * cols - 1] += phase;
    match kind {
        NodeKind::Z => Ok(z),
        NodeKind::X => {
            let h = hadamard();
            Ok(kron_power(&h, n).matmul(&z).matmul(&kron_power(&h, m)))
        }
        NodeKind::Hadamard => {
            if (m, n) == (1, 1) {
                Ok(hadamard())
            } else {
                Err(SemanticsError::DimensionMismatch("Hadamard node is 1 -> 1".into()))
            }
        }
    }
}

/// True iff some unit complex `c` has `max|A − cB| ≤ tol`; `c` is read off
/// the largest-magnitude entry of `B`.
pub fn equal_up_to_global_phase(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<bool, SemanticsError> {
    Ok(global_phase_deviation(a, b)? <= tol)
}

/// `max|A − cB|` for the unit `c` fitted from the largest entry of `B`.
pub fn global_phase_deviation(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64, SemanticsError> {
    check_same_shape(a, b)?;
    let (idx, big) = b
        .data
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, ZERO));
    if big.norm() == 0.0 {
        return Ok(a.max_norm());
    }
    let ratio = a.data[idx] / big;
    let c = if ratio.norm() == 0.0 { ONE } else { ratio / ratio.norm() };
    Ok(a.max_abs_diff(&b.scale(c)))
}

/// Equality up to an arbitrary non-zero scalar: both sides are rescaled to
/// unit max-norm and then compared up to global phase.
pub fn equal_up_to_scalar(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> Result<bool, SemanticsError> {
    check_same_shape(a, b)?;
    let (na, nb) = (a.max_norm(), b.max_norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(na <= tol && nb <= tol);
    }
    equal_up_to_global_phase(
        &a.scale(Complex64::new(1.0 / na, 0.0)),
        &b.scale(Complex64::new(1.0 / nb, 0.0)),
        tol,
    )
}

fn check_same_shape(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<(), SemanticsError> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(SemanticsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tensor-network evaluation
// ---------------------------------------------------------------------------

type Label = usize;

/// Dense tensor over qubit legs; leg 0 is the most significant index bit.
#[derive(Clone, Debug)]
struct Tensor {
    legs: Vec<Label>,
    data: Vec<Complex64>,
}

impl Tensor {
    fn scalar(v: Complex64) -> Tensor {
        Tensor {
            legs: Vec::new(),
            data: vec![v],
        }
    }

    fn rank(&self) -> usize {
        self.legs.len()
    }

    /// Offsets of every assignment to the legs at `positions` (first position
    /// is the most significant bit of the assignment).
    fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let r = self.rank();
        let mut out = vec![0usize; 1 << positions.len()];
        for (v, slot) in out.iter_mut().enumerate() {
            let mut off = 0;
            for (j, &p) in positions.iter().enumerate() {
                if (v >> (positions.len() - 1 - j)) & 1 == 1 {
                    off |= 1 << (r - 1 - p);
                }
            }
            *slot = off;
        }
        out
    }

    /// Contracts legs that appear twice on this tensor.
    fn trace_repeated(self) -> Tensor {
        let mut pairs = Vec::new();
        for i in 0..self.legs.len() {
            for j in i + 1..self.legs.len() {
                if self.legs[i] == self.legs[j] && !pairs.iter().any(|&(a, b)| a == i || b == i || a == j || b == j) {
                    pairs.push((i, j));
                }
            }
        }
        if pairs.is_empty() {
            return self;
        }
        let traced: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        let free: Vec<usize> = (0..self.rank()).filter(|p| !traced.contains(p)).collect();
        let free_off = self.offsets(&free);
        let firsts: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let seconds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let diag: Vec<usize> = self
            .offsets(&firsts)
            .iter()
            .zip(self.offsets(&seconds))
            .map(|(a, b)| a | b)
            .collect();
        let data = free_off
            .iter()
            .map(|&f| diag.iter().map(|&d| self.data[f | d]).sum())
            .collect();
        Tensor {
            legs: free.iter().map(|&p| self.legs[p]).collect(),
            data,
        }
    }

    fn contract(&self, other: &Tensor, cap: usize) -> Result<Tensor, SemanticsError> {
        let shared: Vec<Label> = self.legs.iter().copied().filter(|l| other.legs.contains(l)).collect();
        let a_shared: Vec<usize> = shared.iter().map(|l| self.legs.iter().position(|x| x == l).unwrap()).collect();
        let b_shared: Vec<usize> = shared.iter().map(|l| other.legs.iter().position(|x| x == l).unwrap()).collect();
        let a_free: Vec<usize> = (0..self.rank()).filter(|p| !a_shared.contains(p)).collect();
        let b_free: Vec<usize> = (0..other.rank()).filter(|p| !b_shared.contains(p)).collect();
        let out_rank = a_free.len() + b_free.len();
        if out_rank >= usize::BITS as usize || (1usize << out_rank) > cap {
            return Err(SemanticsError::DimensionOverflow(format!(
                "intermediate tensor of rank {out_rank} exceeds {cap} entries"
            )));
        }
        let (af, as_) = (self.offsets(&a_free), self.offsets(&a_shared));
        let (bf, bs) = (other.offsets(&b_free), other.offsets(&b_shared));
        let mut data = vec![ZERO; 1 << out_rank];
        let nb = bf.len();
        for (i, &ao) in af.iter().enumerate() {
            for (j, &bo) in bf.iter().enumerate() {
                let mut acc = ZERO;
                for (&sa, &sb) in as_.iter().zip(&bs) {
                    acc += self.data[ao | sa] * other.data[bo | sb];
                }
                data[i * nb + j] = acc;
            }
        }
        let mut legs: Vec<Label> = a_free.iter().map(|&p| self.legs[p]).collect();
        legs.extend(b_free.iter().map(|&p| other.legs[p]));
        Ok(Tensor { legs, data })
    }

    /// Reorders legs to `order` (a permutation of `self.legs`).
    fn permuted(&self, order: &[Label]) -> Tensor {
        let positions: Vec<usize> = order.iter().map(|l| self.legs.iter().position(|x| x == l).unwrap()).collect();
        let off = self.offsets(&positions);
        Tensor {
            legs: order.to_vec(),
            data: off.iter().map(|&o| self.data[o]).collect(),
        }
    }
}

fn spider_tensor(kind: NodeKind, theta: TotalAngle, legs: Vec<Label>) -> Tensor {
    let r = legs.len();
    let mut data = vec![ZERO; 1 << r];
    data[0] += ONE;
    let last = (1 << r) - 1;
    data[last] += Complex64::from_polar(1.0, theta.radians());
    let mut t = Tensor { legs, data };
    if kind == NodeKind::X {
        // Hadamard on every leg.
        for p in 0..r {
            let bit = 1 << (r - 1 - p);
            for idx in 0..t.data.len() {
                if idx & bit == 0 {
                    let (x0, x1) = (t.data[idx], t.data[idx | bit]);
                    t.data[idx] = (x0 + x1) * FRAC_1_SQRT_2;
                    t.data[idx | bit] = (x0 - x1) * FRAC_1_SQRT_2;
                }
            }
        }
    }
    t
}

/// Order in which the network is contracted.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ContractionOrder {
    /// Repeatedly contract the connected pair with the smallest result.
    Greedy,
    /// Fold tensors into an accumulator in node-id order.
    Sequential,
}

struct Network {
    tensors: Vec<Tensor>,
    inputs: Vec<Label>,
    outputs: Vec<Label>,
}

fn build_network(d: &Diagram) -> Network {
    let nw = d.wires().len();
    let mut ports: BTreeMap<(u64, usize), Label> = BTreeMap::new();
    let mut inputs = vec![usize::MAX; d.inputs().len()];
    let mut outputs = vec![usize::MAX; d.outputs().len()];
    let mut tensors = Vec::new();
    for (i, w) in d.wires().iter().enumerate() {
        let both_boundary = w.0.node_id().is_none() && w.1.node_id().is_none();
        for (k, e) in w.ends().into_iter().enumerate() {
            let label = if both_boundary && k == 1 { nw + i } else { i };
            match e {
                Endpoint::Node { node, port } => {
                    ports.insert((node.0, port), label);
                }
                Endpoint::Boundary { side: Side::In, pos } => inputs[pos] = label,
                Endpoint::Boundary { side: Side::Out, pos } => outputs[pos] = label,
            }
        }
        if both_boundary {
            tensors.push(Tensor {
                legs: vec![i, nw + i],
                data: vec![ONE, ZERO, ZERO, ONE],
            });
        }
    }
    let mut node_tensors = Vec::new();
    for node in d.nodes() {
        let legs: Vec<Label> = ports.range((node.id.0, 0)..(node.id.0 + 1, 0)).map(|(_, &l)| l).collect();
        let t = match node.kind {
            NodeKind::Hadamard => Tensor {
                legs,
                data: vec![
                    Complex64::new(FRAC_1_SQRT_2, 0.0),
                    Complex64::new(FRAC_1_SQRT_2, 0.0),
                    Complex64::new(FRAC_1_SQRT_2, 0.0),
                    Complex64::new(-FRAC_1_SQRT_2, 0.0),
                ],
            },
            kind => spider_tensor(kind, node.label.expect("spider label").total_angle(), legs),
        };
        node_tensors.push(t.trace_repeated());
    }
    tensors.splice(0..0, node_tensors);
    Network {
        tensors,
        inputs,
        outputs,
    }
}

fn contract_all(mut tensors: Vec<Tensor>, order: ContractionOrder, cap: usize) -> Result<Tensor, SemanticsError> {
    if tensors.is_empty() {
        return Ok(Tensor::scalar(ONE));
    }
    match order {
        ContractionOrder::Sequential => {
            let mut acc = tensors.remove(0);
            for t in tensors {
                acc = acc.contract(&t, cap)?;
            }
            Ok(acc)
        }
        ContractionOrder::Greedy => {
            while tensors.len() > 1 {
                let mut owners: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
                for (i, t) in tensors.iter().enumerate() {
                    for &l in &t.legs {
                        owners.entry(l).or_default().push(i);
                    }
                }
                let mut best: Option<(usize, usize, usize)> = None;
                for owner in owners.values() {
                    if let [i, j] = owner.as_slice() {
                        let (i, j) = (*i.min(j), *i.max(j));
                        let shared = tensors[i].legs.iter().filter(|l| tensors[j].legs.contains(l)).count();
                        let rank = tensors[i].rank() + tensors[j].rank() - 2 * shared;
                        if best.is_none_or(|b| (rank, i, j) < b) {
                            best = Some((rank, i, j));
                        }
                    }
                }
                let (i, j) = match best {
                    Some((_, i, j)) => (i, j),
                    None => {
                        // Disconnected pieces: outer product of the two smallest.
                        let mut idx: Vec<usize> = (0..tensors.len()).collect();
                        idx.sort_by_key(|&k| (tensors[k].rank(), k));
                        (idx[0].min(idx[1]), idx[0].max(idx[1]))
                    }
                };
                let b = tensors.remove(j);
                let a = tensors.remove(i);
                tensors.push(a.contract(&b, cap)?.trace_repeated());
            }
            Ok(tensors.pop().unwrap())
        }
    }
}

/// Matrix of a diagram (`2^outputs × 2^inputs`).
pub fn evaluate(d: &Diagram) -> Result<ComplexMatrix, SemanticsError> {
    evaluate_with(d, ContractionOrder::Greedy, &EvalConfig::default())
}

pub fn evaluate_with(d: &Diagram, order: ContractionOrder, cfg: &EvalConfig) -> Result<ComplexMatrix, SemanticsError> {
    check_caps(d, cfg, d.open_wires())?;
    let net = build_network(d);
    let t = contract_all(net.tensors, order, cfg.max_intermediate_entries)?;
    let mut order_legs = net.outputs.clone();
    order_legs.extend(&net.inputs);
    let t = t.permuted(&order_legs);
    Ok(ComplexMatrix::from_rows(1 << net.outputs.len(), 1 << net.inputs.len(), t.data))
}

/// Output vector of a diagram fed the computational basis state `basis`
/// (one bit per input, qubit 0 most significant). Unnormalized.
pub fn evaluate_state(d: &Diagram, basis: usize) -> Result<Vec<Complex64>, SemanticsError> {
    let cfg = EvalConfig::default();
    check_caps(d, &cfg, d.outputs().len())?;
    let mut net = build_network(d);
    let n_in = net.inputs.len();
    for (q, &label) in net.inputs.iter().enumerate() {
        let bit = (basis >> (n_in - 1 - q)) & 1;
        let data = if bit == 0 { vec![ONE, ZERO] } else { vec![ZERO, ONE] };
        net.tensors.push(Tensor { legs: vec![label], data });
    }
    let t = contract_all(net.tensors, ContractionOrder::Greedy, cfg.max_intermediate_entries)?;
    Ok(t.permuted(&net.outputs).data)
}

fn check_caps(d: &Diagram, cfg: &EvalConfig, open: usize) -> Result<(), SemanticsError> {
    if open > cfg.max_open_wires {
        return Err(SemanticsError::DimensionOverflow(format!(
            "{open} open wires exceed the cap of {}",
            cfg.max_open_wires
        )));
    }
    for n in d.nodes() {
        let deg = d.degree(n.id);
        if deg > cfg.max_spider_legs {
            return Err(SemanticsError::DimensionOverflow(format!(
                "node {} has {deg} legs (cap {})",
                n.id, cfg.max_spider_legs
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// States, density matrices and channels
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[0] = ONE;
        StateVector { amplitudes }
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[index] = ONE;
        StateVector { amplitudes }
    }

    /// Rescales to unit norm; the zero vector is left untouched.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return StateVector { amplitudes };
        }
        StateVector {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        }
    }

    pub fn qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-10
    }

    /// Applies a 2×2 matrix to qubit `q`.
    pub fn apply_1q(&mut self, u: &ComplexMatrix, q: usize) {
        let n = self.qubits();
        let bit = 1 << (n - 1 - q);
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | bit]);
                self.amplitudes[i] = u.get(0, 0) * a0 + u.get(0, 1) * a1;
                self.amplitudes[i | bit] = u.get(1, 0) * a0 + u.get(1, 1) * a1;
            }
        }
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let n = self.qubits();
        let (cb, tb) = (1 << (n - 1 - control), 1 << (n - 1 - target));
        for i in 0..self.amplitudes.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amplitudes.swap(i, i | tb);
            }
        }
    }

    pub fn density(&self) -> DensityMatrix {
        let d = self.amplitudes.len();
        let mut m = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, self.amplitudes[i] * self.amplitudes[j].conj());
            }
        }
        DensityMatrix(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub ComplexMatrix);

impl DensityMatrix {
    pub fn zero_state(n: usize) -> Self {
        StateVector::zero_state(n).density()
    }

    pub fn qubits(&self) -> usize {
        self.0.rows().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.0.max_abs_diff(&self.0.dagger()) <= tol
    }

    /// `ρ ↦ K ρ K†` with `K` acting on qubit `q`.
    fn conjugate_1q(&self, k: &ComplexMatrix, q: usize) -> ComplexMatrix {
        let n = self.qubits();
        let dim = 1 << n;
        let bit = 1 << (n - 1 - q);
        let mut left = self.0.clone();
        for c in 0..dim {
            for r in 0..dim {
                if r & bit == 0 {
                    let (a0, a1) = (left.get(r, c), left.get(r | bit, c));
                    left.set(r, c, k.get(0, 0) * a0 + k.get(0, 1) * a1);
                    left.set(r | bit, c, k.get(1, 0) * a0 + k.get(1, 1) * a1);
                }
            }
        }
        for r in 0..dim {
            for c in 0..dim {
                if c & bit == 0 {
                    let (a0, a1) = (left.get(r, c), left.get(r, c | bit));
                    left.set(r, c, a0 * k.get(0, 0).conj() + a1 * k.get(0, 1).conj());
                    left.set(r, c | bit, a0 * k.get(1, 0).conj() + a1 * k.get(1, 1).conj());
                }
            }
        }
        left
    }

    pub fn apply_1q(&mut self, u: &ComplexMatrix, q: usize) {
        self.0 = self.conjugate_1q(u, q);
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) {
        let n = self.qubits();
        let (cb, tb) = (1 << (n - 1 - control), 1 << (n - 1 - target));
        let perm = |i: usize| if i & cb != 0 { i ^ tb } else { i };
        let dim = 1 << n;
        let mut out = ComplexMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                out.set(perm(r), perm(c), self.0.get(r, c));
            }
        }
        self.0 = out;
    }
}

/// Single-qubit channel in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    pub operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn identity() -> Self {
        KrausChannel {
            operators: vec![ComplexMatrix::identity(2)],
        }
    }

    /// `max|Σ K†K − I|`.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.operators[0].rows();
        let sum = self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, k| acc.add(&k.dagger().matmul(k)));
        sum.max_abs_diff(&ComplexMatrix::identity(dim))
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), SemanticsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SemanticsError::ParameterOutOfRange { name, value })
    }
}

/// `ρ ↦ (1 − p)ρ + (p/3)(XρX + YρY + ZρZ)`; `p = 3/4` is fully mixing.
pub fn depolarizing(p: f64) -> Result<KrausChannel, SemanticsError> {
    check_unit("p", p)?;
    let c0 = Complex64::new((1.0 - p).sqrt(), 0.0);
    let c1 = Complex64::new((p / 3.0).sqrt(), 0.0);
    Ok(KrausChannel {
        operators: vec![
            ComplexMatrix::identity(2).scale(c0),
            pauli_x().scale(c1),
            pauli_y().scale(c1),
            pauli_z().scale(c1),
        ],
    })
}

pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel, SemanticsError> {
    check_unit("gamma", gamma)?;
    Ok(KrausChannel {
        operators: vec![
            ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]),
            ComplexMatrix::from_real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]),
        ],
    })
}

pub fn phase_damping(lambda: f64) -> Result<KrausChannel, SemanticsError> {
    check_unit("lambda", lambda)?;
    Ok(KrausChannel {
        operators: vec![
            ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - lambda).sqrt()]),
            ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, lambda.sqrt()]),
        ],
    })
}

/// `ρ ↦ Σ K ρ K†` on one qubit.
pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel, qubit: usize) -> Result<DensityMatrix, SemanticsError> {
    let n = rho.qubits();
    if qubit >= n {
        return Err(SemanticsError::IndexOutOfRange { index: qubit, qubits: n });
    }
    let dim = 1 << n;
    let out = ch
        .operators
        .iter()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, k| acc.add(&rho.conjugate_1q(k, qubit)));
    Ok(DensityMatrix(out))
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]` against rounding.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, SemanticsError> {
    if a.amplitudes.len() != b.amplitudes.len() {
        return Err(SemanticsError::DimensionMismatch(format!(
            "states of length {} and {}",
            a.amplitudes.len(),
            b.amplitudes.len()
        )));
    }
    let overlap: Complex64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum();
    Ok(overlap.norm_sqr().min(1.0))
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn uhlmann(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, SemanticsError> {
    if rho.0.rows() != sigma.0.rows() {
        return Err(SemanticsError::DimensionMismatch(format!(
            "density matrices of size {} and {}",
            rho.0.rows(),
            sigma.0.rows()
        )));
    }
    let sqrt_rho = psd_sqrt(&rho.0.to_nalgebra());
    let inner = &sqrt_rho * sigma.0.to_nalgebra() * &sqrt_rho;
    let inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = inner.symmetric_eigen();
    let s: f64 = clipped(eig.eigenvalues.as_slice()).iter().map(|l| l.sqrt()).sum();
    Ok((s * s).min(1.0))
}

/// Eigenvalues at rounding-noise level are treated as exact zeros.
fn clipped(vals: &[f64]) -> Vec<f64> {
    let top = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    vals.iter()
        .map(|&v| if v <= 1e-12 * top.max(1e-300) { 0.0 } else { v })
        .collect()
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let n = m.nrows();
    let vals = clipped(eig.eigenvalues.as_slice());
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(vals[i].sqrt(), 0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

//! Evaluation metrics: phase-quantization variance ratio (PQVR),
//! circuit-size compression (CSC) and fidelity preservation (FP).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagram::{Diagram, NodeKind};
use crate::semantics::{fidelity, SemanticsError, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("raw phases have zero variance")]
    DegenerateVariance,
    #[error("need at least two phases, got {0}")]
    TooFewSamples(usize),
    #[error("length mismatch: {0} raw vs {1} snapped")]
    LengthMismatch(usize, usize),
    #[error("baseline gate count is zero")]
    EmptyBaseline,
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Wraps an angle in radians to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// `1 − Var(wrap(θ − θ̂)) / Var(θ)` with population variances.
pub fn pqvr(raw: &[f64], snapped: &[f64]) -> Result<f64, MetricsError> {
    if raw.len() != snapped.len() {
        return Err(MetricsError::LengthMismatch(raw.len(), snapped.len()));
    }
    if raw.len() < 2 {
        return Err(MetricsError::TooFewSamples(raw.len()));
    }
    let var_raw = population_variance(raw);
    if var_raw == 0.0 {
        return Err(MetricsError::DegenerateVariance);
    }
    let residuals: Vec<f64> = raw.iter().zip(snapped).map(|(a, b)| wrap_angle(a - b)).collect();
    Ok(1.0 - population_variance(&residuals) / var_raw)
}

/// `1 − opt/raw`; negative when optimization grew the circuit.
pub fn csc(raw_count: usize, opt_count: usize) -> Result<f64, MetricsError> {
    if raw_count == 0 {
        return Err(MetricsError::EmptyBaseline);
    }
    Ok(1.0 - opt_count as f64 / raw_count as f64)
}

/// CNOT compression; defined as 0 when the raw circuit has no CNOTs.
pub fn csc_cnot(raw_cnots: usize, opt_cnots: usize) -> f64 {
    csc(raw_cnots, opt_cnots).unwrap_or(0.0)
}

/// `|⟨a|b⟩|²`.
pub fn fp(raw: &StateVector, opt: &StateVector) -> Result<f64, MetricsError> {
    Ok(fidelity(raw, opt)?)
}

/// Gate and CNOT tallies.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub gates: usize,
    pub cnots: usize,
}

/// Gates are spiders plus Hadamard nodes; each Z–X wire counts as one CNOT.
pub fn diagram_counts(d: &Diagram) -> GateCounts {
    let cnots = d
        .wires()
        .iter()
        .filter(|w| {
            let kinds = (
                w.0.node_id().and_then(|n| d.node(n)).map(|n| n.kind),
                w.1.node_id().and_then(|n| d.node(n)).map(|n| n.kind),
            );
            matches!(
                kinds,
                (Some(NodeKind::Z), Some(NodeKind::X)) | (Some(NodeKind::X), Some(NodeKind::Z))
            )
        })
        .count();
    GateCounts {
        gates: d.node_count(),
        cnots,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pqvr: f64,
    pub csc_total: f64,
    pub csc_cnot: f64,
    pub fp: f64,
    pub raw_gates: usize,
    pub opt_gates: usize,
    pub raw_cnots: usize,
    pub opt_cnots: usize,
}

impl MetricReport {
    pub fn new(pqvr: f64, raw: GateCounts, opt: GateCounts, fp: f64) -> Result<Self, MetricsError> {
        Ok(MetricReport {
            pqvr,
            csc_total: csc(raw.gates, opt.gates)?,
            csc_cnot: csc_cnot(raw.cnots, opt.cnots),
            fp,
            raw_gates: raw.gates,
            opt_gates: opt.gates,
            raw_cnots: raw.cnots,
            opt_cnots: opt.cnots,
        })
    }
}

/// Mean and population standard deviation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stddev: f64,
}

pub fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    Some(Summary {
        mean,
        stddev: population_variance(xs).sqrt(),
    })
}

//! Curvature diagnostics on weighted projective lines: `R = 2/b²`, its
//! gradient over Bloch-ball anisotropy parameters, and the orbifold Euler
//! characteristic.

use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::GridOrder;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("anisotropy parameters must lie in (0, 1], got ({lambda_perp}, {lambda_par})")]
    InvalidParams { lambda_perp: f64, lambda_par: f64 },
    #[error("step {step} does not fit inside the domain around ({lambda_perp}, {lambda_par})")]
    StepTooLarge { step: f64, lambda_perp: f64, lambda_par: f64 },
}

/// Bloch-ball contraction factors.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyParams {
    pub lambda_perp: f64,
    pub lambda_par: f64,
}

impl AnisotropyParams {
    pub fn new(lambda_perp: f64, lambda_par: f64) -> Result<Self, GeometryError> {
        let ok = |x: f64| x > 0.0 && x <= 1.0;
        if !ok(lambda_perp) || !ok(lambda_par) {
            return Err(GeometryError::InvalidParams { lambda_perp, lambda_par });
        }
        Ok(AnisotropyParams { lambda_perp, lambda_par })
    }
}

/// Grid orders of the two cone points of `P(a, b)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightPair {
    pub a: GridOrder,
    pub b: GridOrder,
}

/// Map from anisotropy parameters to an effective weight.
pub trait WeightMap: Sync {
    fn b_eff(&self, p: AnisotropyParams) -> f64;
}

impl<F: Fn(AnisotropyParams) -> f64 + Sync> WeightMap for F {
    fn b_eff(&self, p: AnisotropyParams) -> f64 {
        self(p)
    }
}

/// `b_eff = λ∥ / λ⊥`.
#[derive(Copy, Clone, Debug, Default)]
pub struct RatioMap;

impl WeightMap for RatioMap {
    fn b_eff(&self, p: AnisotropyParams) -> f64 {
        p.lambda_par / p.lambda_perp
    }
}

pub fn scalar_curvature(b_eff: f64) -> Result<f64, GeometryError> {
    if !(b_eff > 0.0) {
        return Err(GeometryError::NonPositiveWeight(b_eff));
    }
    Ok(2.0 / (b_eff * b_eff))
}

pub fn effective_weight(p: AnisotropyParams) -> f64 {
    RatioMap.b_eff(p)
}

/// `R` as a function of the anisotropy parameters under `map`.
pub fn curvature_at(map: &dyn WeightMap, p: AnisotropyParams) -> Result<f64, GeometryError> {
    scalar_curvature(map.b_eff(p))
}

/// Gradient `(∂R/∂λ⊥, ∂R/∂λ∥)` by the five-point central stencil, which
/// needs `2h < min(λ⊥, λ∥)`.
pub fn curvature_gradient(map: &dyn WeightMap, p: AnisotropyParams, h: f64) -> Result<[f64; 2], GeometryError> {
    let p = AnisotropyParams::new(p.lambda_perp, p.lambda_par)?;
    if !(h > 0.0) || 2.0 * h >= p.lambda_perp.min(p.lambda_par) {
        return Err(GeometryError::StepTooLarge {
            step: h,
            lambda_perp: p.lambda_perp,
            lambda_par: p.lambda_par,
        });
    }
    let r = |lp: f64, ll: f64| {
        curvature_at(
            map,
            AnisotropyParams {
                lambda_perp: lp,
                lambda_par: ll,
            },
        )
    };
    let stencil = |f: &dyn Fn(f64) -> Result<f64, GeometryError>| -> Result<f64, GeometryError> {
        Ok((8.0 * (f(h)? - f(-h)?) - (f(2.0 * h)? - f(-2.0 * h)?)) / (12.0 * h))
    };
    let d_perp = stencil(&|dx| r(p.lambda_perp + dx, p.lambda_par))?;
    let d_par = stencil(&|dx| r(p.lambda_perp, p.lambda_par + dx))?;
    Ok([d_perp, d_par])
}

pub fn curvature_gradient_norm(map: &dyn WeightMap, p: AnisotropyParams, h: f64) -> Result<f64, GeometryError> {
    let [a, b] = curvature_gradient(map, p, h)?;
    Ok(a.hypot(b))
}

/// Closed-form gradient of `R = 2λ⊥²/λ∥²` under [`RatioMap`].
pub fn ratio_map_gradient(p: AnisotropyParams) -> [f64; 2] {
    let (lp, ll) = (p.lambda_perp, p.lambda_par);
    [4.0 * lp / (ll * ll), -4.0 * lp * lp / (ll * ll * ll)]
}

/// `χ = 2 − (1 − 1/a) − (1 − 1/b) = 1/a + 1/b`.
pub fn orbifold_euler_characteristic(w: WeightPair) -> Rational64 {
    Rational64::new(1, w.a.get() as i64) + Rational64::new(1, w.b.get() as i64)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub lambda_perp: f64,
    pub lambda_par: f64,
    pub b_eff: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub grad_norm: f64,
}

/// `R` and `‖∇R‖` on an `n × n` grid spanning `[lo, hi]²`, row-major in
/// `λ⊥` then `λ∥`.
pub fn landscape(map: &dyn WeightMap, lo: f64, hi: f64, n: usize, h: f64) -> Result<Vec<LandscapeRow>, GeometryError> {
    let at = |i: usize| match i {
        0 => lo,
        i if i + 1 == n => hi,
        i => lo + (hi - lo) * i as f64 / (n - 1) as f64,
    };
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let p = AnisotropyParams::new(at(idx / n), at(idx % n))?;
            let b = map.b_eff(p);
            Ok(LandscapeRow {
                lambda_perp: p.lambda_perp,
                lambda_par: p.lambda_par,
                b_eff: b,
                r: scalar_curvature(b)?,
                grad_norm: curvature_gradient_norm(map, p, h)?,
            })
        })
        .collect()
}

//! Exact arithmetic on quantized phase grids.
//!
//! Every phase is a rational number of turns (fractions of 2π). A phase is
//! on the grid `G_a` when its reduced denominator divides `a`. Windings are
//! rationals too; they contribute `k / a` turns to the total angle of a
//! spider.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on grid orders produced by LCM refinement.
pub const DEFAULT_GRID_CAP: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PhaseError {
    #[error("grid order must be at least 1")]
    ZeroGridOrder,
    #[error("grid order {order} exceeds the configured cap {cap}")]
    GridOverflow { order: u64, cap: u64 },
    #[error("rational angle with zero denominator")]
    ZeroDenominator,
    #[error("grid {from} is not a refinement source for grid {to}")]
    NotARefinement { from: u64, to: u64 },
    #[error("phase {phase} is not on grid G_{grid}")]
    OffGrid { phase: RationalAngle, grid: u64 },
    #[error("cannot parse rational angle from {0:?}")]
    Parse(String),
}

/// Order `a` of a quantized phase grid `G_a = {2πn/a}`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct GridOrder(u64);

impl GridOrder {
    pub const ONE: GridOrder = GridOrder(1);

    pub fn new(value: u64) -> Result<Self, PhaseError> {
        if value == 0 {
            Err(PhaseError::ZeroGridOrder)
        } else {
            Ok(GridOrder(value))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// Rejects orders above `cap`.
    pub fn capped(self, cap: u64) -> Result<Self, PhaseError> {
        if self.0 > cap {
            Err(PhaseError::GridOverflow { order: self.0, cap })
        } else {
            Ok(self)
        }
    }

    pub fn divides(self, other: GridOrder) -> bool {
        other.0 % self.0 == 0
    }
}

impl TryFrom<u64> for GridOrder {
    type Error = PhaseError;
    fn try_from(value: u64) -> Result<Self, Self::Error> {
        GridOrder::new(value)
    }
}

impl From<GridOrder> for u64 {
    fn from(a: GridOrder) -> u64 {
        a.0
    }
}

impl fmt::Display for GridOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Least common multiple of two grid orders: the coarsest grid on which
/// phases from both add exactly.
pub fn lcm_order(a: GridOrder, b: GridOrder) -> GridOrder {
    GridOrder(a.0.lcm(&b.0))
}

/// `lcm_order` with an overflow cap.
pub fn checked_lcm_order(a: GridOrder, b: GridOrder, cap: u64) -> Result<GridOrder, PhaseError> {
    lcm_order(a, b).capped(cap)
}

/// An exact rational number of turns; `num/den` stands for `2π·num/den`
/// radians. Always stored reduced with a positive denominator, so equality
/// is structural.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "AngleRepr", into = "AngleRepr")]
pub struct RationalAngle(Rational64);

#[derive(Serialize, Deserialize)]
struct AngleRepr {
    num: i64,
    den: i64,
}

impl TryFrom<AngleRepr> for RationalAngle {
    type Error = PhaseError;
    fn try_from(r: AngleRepr) -> Result<Self, Self::Error> {
        RationalAngle::new(r.num, r.den)
    }
}

impl From<RationalAngle> for AngleRepr {
    fn from(r: RationalAngle) -> Self {
        AngleRepr {
            num: r.numer(),
            den: r.denom(),
        }
    }
}

impl RationalAngle {
    pub const ZERO: RationalAngle = RationalAngle(Rational64::new_raw(0, 1));

    pub fn new(num: i64, den: i64) -> Result<Self, PhaseError> {
        if den == 0 {
            return Err(PhaseError::ZeroDenominator);
        }
        Ok(RationalAngle(Rational64::new(num, den)))
    }

    pub fn from_integer(n: i64) -> Self {
        RationalAngle(Rational64::from_integer(n))
    }

    /// The grid point `index · 2π/a`.
    pub fn grid_point(index: i64, a: GridOrder) -> Self {
        RationalAngle(Rational64::new(index, a.0 as i64))
    }

    pub fn from_ratio(r: Rational64) -> Self {
        RationalAngle(r)
    }

    pub fn ratio(self) -> Rational64 {
        self.0
    }

    pub fn numer(self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(self) -> bool {
        self.0.is_integer()
    }

    /// Representative in `[0, 1)` turns.
    pub fn mod_turn(self) -> Self {
        let fl = self.0.floor();
        RationalAngle(self.0 - fl)
    }

    pub fn abs(self) -> Self {
        RationalAngle(self.0.abs())
    }

    pub fn scale(self, factor: i64) -> Self {
        RationalAngle(self.0 * Rational64::from_integer(factor))
    }

    pub fn div_int(self, divisor: i64) -> Self {
        RationalAngle(self.0 / Rational64::from_integer(divisor))
    }

    /// True when the angle lies on `G_a`, i.e. the reduced denominator
    /// divides `a`.
    pub fn on_grid(self, a: GridOrder) -> bool {
        (a.0 as i64) % self.denom() == 0
    }

    /// Index `n` with `self = n/a` turns, when on the grid.
    pub fn grid_index(self, a: GridOrder) -> Option<i64> {
        if self.on_grid(a) {
            Some(self.numer() * (a.0 as i64 / self.denom()))
        } else {
            None
        }
    }

    pub fn turns_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn radians(self) -> f64 {
        TAU * self.turns_f64()
    }
}

impl Add for RationalAngle {
    type Output = RationalAngle;
    fn add(self, rhs: Self) -> Self {
        RationalAngle(self.0 + rhs.0)
    }
}

impl Sub for RationalAngle {
    type Output = RationalAngle;
    fn sub(self, rhs: Self) -> Self {
        RationalAngle(self.0 - rhs.0)
    }
}

impl Neg for RationalAngle {
    type Output = RationalAngle;
    fn neg(self) -> Self {
        RationalAngle(-self.0)
    }
}

impl std::iter::Sum for RationalAngle {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(RationalAngle::ZERO, |acc, x| acc + x)
    }
}

impl Default for RationalAngle {
    fn default() -> Self {
        RationalAngle::ZERO
    }
}

impl fmt::Debug for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl std::str::FromStr for RationalAngle {
    type Err = PhaseError;

    /// Parses `num/den` or a bare integer.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PhaseError::Parse(s.to_string());
        match s.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| bad())?;
                let d: i64 = d.trim().parse().map_err(|_| bad())?;
                RationalAngle::new(n, d)
            }
            None => Ok(RationalAngle::from_integer(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

/// Total angle of a spider, reduced into `[0, 1)` turns.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RationalAngle", into = "RationalAngle")]
pub struct TotalAngle(RationalAngle);

impl TotalAngle {
    pub fn new(turns: RationalAngle) -> Self {
        TotalAngle(turns.mod_turn())
    }

    pub fn zero() -> Self {
        TotalAngle(RationalAngle::ZERO)
    }

    pub fn turns(self) -> RationalAngle {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.radians()
    }

    pub fn is_zero(self) -> bool {
        self.0.is_zero()
    }
}

impl From<RationalAngle> for TotalAngle {
    fn from(r: RationalAngle) -> Self {
        TotalAngle::new(r)
    }
}

impl From<TotalAngle> for RationalAngle {
    fn from(t: TotalAngle) -> Self {
        t.0
    }
}

impl Add for TotalAngle {
    type Output = TotalAngle;
    fn add(self, rhs: Self) -> Self {
        TotalAngle::new(self.0 + rhs.0)
    }
}

impl fmt::Display for TotalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The `(a, α, k)` label of a weighted spider: grid order, base phase in
/// turns, and winding index.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpiderLabel {
    pub grid: GridOrder,
    pub alpha: RationalAngle,
    pub winding: RationalAngle,
}

impl SpiderLabel {
    pub fn new(grid: GridOrder, alpha: RationalAngle, winding: RationalAngle) -> Self {
        SpiderLabel { grid, alpha, winding }
    }

    /// Plain ZX phase: `a = 1`, `k = 0`.
    pub fn plain(alpha: RationalAngle) -> Self {
        SpiderLabel::new(GridOrder::ONE, alpha, RationalAngle::ZERO)
    }

    /// Both `α` and `k` have denominators dividing `a`.
    pub fn is_grid_compliant(&self) -> bool {
        self.alpha.on_grid(self.grid) && self.winding.on_grid(self.grid)
    }

    pub fn has_integer_winding(&self) -> bool {
        self.winding.is_integer()
    }

    pub fn total_angle(&self) -> TotalAngle {
        total_angle(self)
    }
}

/// `θ_tot = α + k/a` turns, reduced modulo one turn.
pub fn total_angle(label: &SpiderLabel) -> TotalAngle {
    TotalAngle::new(label.alpha + label.winding.div_int(label.grid.get() as i64))
}

/// Re-expresses a phase on `G_a` as the identical angle on the refinement
/// `G_target`. Fails unless `a | target`.
pub fn lift_to_grid(
    phase: RationalAngle,
    from: GridOrder,
    target: GridOrder,
) -> Result<RationalAngle, PhaseError> {
    if !from.divides(target) {
        return Err(PhaseError::NotARefinement {
            from: from.get(),
            to: target.get(),
        });
    }
    let index = phase.grid_index(from).ok_or(PhaseError::OffGrid {
        phase,
        grid: from.get(),
    })?;
    let factor = (target.get() / from.get()) as i64;
    Ok(RationalAngle::grid_point(index * factor, target))
}

/// Adds two grid phases on their LCM grid, reduced modulo one turn.
pub fn add_on_lcm(
    alpha: RationalAngle,
    a: GridOrder,
    beta: RationalAngle,
    b: GridOrder,
) -> Result<(RationalAngle, GridOrder), PhaseError> {
    let l = lcm_order(a, b);
    let x = lift_to_grid(alpha, a, l)?;
    let y = lift_to_grid(beta, b, l)?;
    Ok(((x + y).mod_turn(), l))
}

/// Nearest point of `G_a` to `theta` radians. Exact ties go to the even
/// grid index; the result is reduced into `[0, 1)` turns.
pub fn snap_to_grid(theta: f64, a: GridOrder) -> RationalAngle {
    let scaled = theta / TAU * a.get() as f64;
    let index = scaled.round_ties_even() as i64;
    RationalAngle::grid_point(index.rem_euclid(a.get() as i64), a)
}

/// Splits an accumulated phase into `theta = residual + 2πk` with
/// `residual ∈ [0, 2π)` and integer `k`.
pub fn winding_decompose(theta: f64) -> (f64, i64) {
    let k = (theta / TAU).floor();
    let mut residual = theta - TAU * k;
    let mut k = k as i64;
    if residual >= TAU {
        residual -= TAU;
        k += 1;
    }
    if residual < 0.0 {
        residual += TAU;
        k -= 1;
    }
    (residual, k)
}

/// `e^{2πi·w}`: the monodromy of a loop with winding class `w`.
pub fn monodromy_phase(w: RationalAngle) -> Complex64 {
    Complex64::from_polar(1.0, w.mod_turn().radians())
}

/// Sum of windings in turns (`Σ k_i / a_i`) without reduction.
pub fn winding_turns(label: &SpiderLabel) -> RationalAngle {
    label.winding.div_int(label.grid.get() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn g(a: u64) -> GridOrder {
        GridOrder::new(a).unwrap()
    }

    fn t(n: i64, d: i64) -> RationalAngle {
        RationalAngle::new(n, d).unwrap()
    }

    #[test]
    fn lcm_examples() {
        assert_eq!(lcm_order(g(4), g(6)), g(12));
        assert_eq!(lcm_order(g(1), g(17)), g(17));
        assert_eq!(lcm_order(g(256), g(192)), g(768));
    }

    #[test]
    fn lcm_is_commutative_associative_idempotent() {
        for a in 1..=12 {
            for b in 1..=12 {
                assert_eq!(lcm_order(g(a), g(b)), lcm_order(g(b), g(a)));
                assert_eq!(lcm_order(g(a), g(a)), g(a));
                for c in 1..=6 {
                    assert_eq!(
                        lcm_order(lcm_order(g(a), g(b)), g(c)),
                        lcm_order(g(a), lcm_order(g(b), g(c)))
                    );
                }
            }
        }
    }

    #[test]
    fn lcm_cap_is_reported() {
        let big = g(1 << 19);
        let odd = g(3);
        assert!(matches!(
            checked_lcm_order(big, odd, DEFAULT_GRID_CAP),
            Err(PhaseError::GridOverflow { .. })
        ));
        assert!(g(1).capped(1).is_ok());
        assert_eq!(GridOrder::new(0), Err(PhaseError::ZeroGridOrder));
    }

    #[test]
    fn rational_angle_is_reduced() {
        let x = t(6, 8);
        assert_eq!((x.numer(), x.denom()), (3, 4));
        let y = t(3, -4);
        assert_eq!((y.numer(), y.denom()), (-3, 4));
        assert_eq!(RationalAngle::new(1, 0), Err(PhaseError::ZeroDenominator));
        assert_eq!(t(-1, 4).mod_turn(), t(3, 4));
        assert_eq!(t(9, 4).mod_turn(), t(1, 4));
    }

    #[test]
    fn total_angle_examples() {
        // plain ZX: θ_tot = α
        let plain = SpiderLabel::plain(t(1, 8));
        assert_eq!(total_angle(&plain).turns(), t(1, 8));
        // π/3 + (2π/2)(1/2) = 5π/6
        let l = SpiderLabel::new(g(2), t(1, 6), t(1, 2));
        assert_eq!(total_angle(&l).turns(), t(5, 12));
        // π/3 + (2π/2)(1) = 4π/3
        let l = SpiderLabel::new(g(2), t(1, 6), t(1, 1));
        assert_eq!(total_angle(&l).turns(), t(2, 3));
        // 3π/2 + (2π/6)(2) = 13π/6 ≡ π/6
        let l = SpiderLabel::new(g(6), t(3, 4), t(2, 1));
        assert_eq!(total_angle(&l).turns(), t(1, 12));
    }

    #[test]
    fn lift_examples() {
        assert_eq!(lift_to_grid(t(1, 4), g(4), g(12)).unwrap(), t(3, 12));
        assert_eq!(lift_to_grid(t(1, 6), g(6), g(12)).unwrap(), t(2, 12));
        assert_eq!(lift_to_grid(RationalAngle::ZERO, g(5), g(35)).unwrap(), RationalAngle::ZERO);
        assert_eq!(
            lift_to_grid(t(1, 4), g(4), g(6)),
            Err(PhaseError::NotARefinement { from: 4, to: 6 })
        );
        assert_eq!(lift_to_grid(t(3, 12), g(4), g(12)).unwrap().grid_index(g(12)), Some(3));
    }

    #[test]
    fn add_on_lcm_examples() {
        let (sum, l) = add_on_lcm(t(1, 4), g(4), t(1, 6), g(6)).unwrap();
        assert_eq!(l, g(12));
        assert_eq!(sum, t(5, 12));
        let (sum, _) = add_on_lcm(t(3, 7), g(7), RationalAngle::ZERO, g(3)).unwrap();
        assert_eq!(sum, t(3, 7));
        let (sum, l) = add_on_lcm(t(1, 2), g(2), t(1, 2), g(2)).unwrap();
        assert_eq!((sum, l), (RationalAngle::ZERO, g(2)));
    }

    /// Independent oracle: brute-force nearest point of G_a on the circle.
    fn nearest_grid_point(theta: f64, a: u64) -> i64 {
        let mut best = (f64::INFINITY, 0i64);
        for n in 0..a as i64 {
            let p = TAU * n as f64 / a as f64;
            let mut d = (theta - p).rem_euclid(TAU);
            if d > PI {
                d = TAU - d;
            }
            if d < best.0 - 1e-15 {
                best = (d, n);
            }
        }
        best.1
    }

    #[test]
    fn snap_examples() {
        assert_eq!(snap_to_grid(0.0, g(4)), RationalAngle::ZERO);
        assert_eq!(nearest_grid_point(0.8, 4), 1);
        assert_eq!(snap_to_grid(0.8, g(4)), t(1, 4));
        for a in [2u64, 3, 5, 8] {
            let eps = 0.3 * PI / a as f64;
            assert_eq!(nearest_grid_point(TAU - eps, a), 0);
            assert_eq!(snap_to_grid(TAU - eps, g(a)), RationalAngle::ZERO);
        }
    }

    #[test]
    fn snap_ties_round_to_even_index() {
        // π/4 is halfway between 0 and π/2 on G_4: even index 0 wins.
        assert_eq!(snap_to_grid(PI / 4.0, g(4)), RationalAngle::ZERO);
        // 3π/4 is halfway between indices 1 and 2: index 2.
        assert_eq!(snap_to_grid(3.0 * PI / 4.0, g(4)), t(1, 2));
    }

    #[test]
    fn snap_matches_oracle_on_sweep() {
        for a in 1..=16u64 {
            for i in 0..500 {
                let theta = -7.0 + 14.0 * (i as f64 + 0.37) / 500.0;
                let snapped = snap_to_grid(theta, g(a));
                assert!(snapped.on_grid(g(a)));
                let idx = snapped.grid_index(g(a)).unwrap();
                assert_eq!(idx, nearest_grid_point(theta, a), "a={a} theta={theta}");
                let mut r = (theta - snapped.radians()).rem_euclid(TAU);
                if r > PI {
                    r = TAU - r;
                }
                assert!(r <= PI / a as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_decompose(0.0), (0.0, 0));
        let (r, k) = winding_decompose(5.0 * PI);
        assert_eq!(k, 2);
        assert!((r - PI).abs() < 1e-12);
        let (r, k) = winding_decompose(-PI / 2.0);
        assert_eq!(k, -1);
        assert!((r - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn monodromy_examples() {
        assert!((monodromy_phase(RationalAngle::ZERO) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((monodromy_phase(t(1, 2)) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let w = monodromy_phase(t(5, 6));
        assert!((w - Complex64::from_polar(1.0, 5.0 * PI / 3.0)).norm() < 1e-12);
        assert!((w.powu(6) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn serde_shape() {
        let s = serde_json::to_string(&t(3, 12)).unwrap();
        assert_eq!(s, r#"{"num":1,"den":4}"#);
        let back: RationalAngle = serde_json::from_str(r#"{"num":2,"den":-8}"#).unwrap();
        assert_eq!(back, t(-1, 4));
        assert!(serde_json::from_str::<RationalAngle>(r#"{"num":1,"den":0}"#).is_err());
        assert!(serde_json::from_str::<GridOrder>("0").is_err());
    }

    #[test]
    fn parse_rational() {
        assert_eq!("3/8".parse::<RationalAngle>().unwrap(), t(3, 8));
        assert_eq!("-2".parse::<RationalAngle>().unwrap(), t(-2, 1));
        assert!("x/2".parse::<RationalAngle>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gauge_moves_preserve_total_angle(a in 1u64..40, n in -50i64..50, k in -50i64..50, c in -20i64..20) {
                let a = g(a);
                let label = SpiderLabel::new(a, RationalAngle::grid_point(n, a), RationalAngle::from_integer(k));
                let moved = SpiderLabel::new(
                    a,
                    label.alpha + RationalAngle::grid_point(c, a),
                    label.winding - RationalAngle::from_integer(c),
                );
                prop_assert_eq!(total_angle(&label), total_angle(&moved));
            }

            #[test]
            fn snap_is_idempotent(a in 1u64..64, n in 0i64..64) {
                let a = g(a);
                let p = RationalAngle::grid_point(n, a).mod_turn();
                prop_assert_eq!(snap_to_grid(p.radians(), a), p);
            }

            #[test]
            fn lift_preserves_value(a in 1u64..30, m in 1u64..8, n in -40i64..40) {
                let a = g(a);
                let target = g(a.get() * m);
                let p = RationalAngle::grid_point(n, a);
                let lifted = lift_to_grid(p, a, target).unwrap();
                prop_assert_eq!(lifted, p);
                prop_assert!(lifted.on_grid(target));
                prop_assert!((lifted.radians() - p.radians()).abs() < 1e-12);
            }
        }
    }
}

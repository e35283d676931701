//! Piecewise-linear unimodal birth functions.
//!
//! `g(x) = k₁x` on `[0, θ]`, `k₂x + q₂` on `[θ, θ₁]` and `k₃x + q₃` beyond,
//! with the positive equilibrium `κ = g(κ)` on the third segment. Past `g(θ)`
//! the third segment is simply continued and clamped at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::maps::IntervalMap;

const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiecewiseLinearBirth {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub theta: f64,
    pub theta1: f64,
    pub kappa: f64,
    pub q2: f64,
    pub q3: f64,
    pub g_theta: f64,
    pub g2_theta: f64,
}

/// Model block as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthSpec {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub theta: f64,
    pub kappa: f64,
}

impl BirthSpec {
    pub fn build(&self) -> Result<PiecewiseLinearBirth> {
        PiecewiseLinearBirth::new(self.k1, self.k2, self.k3, self.theta, self.kappa)
    }
}

impl From<&PiecewiseLinearBirth> for BirthSpec {
    fn from(g: &PiecewiseLinearBirth) -> Self {
        BirthSpec {
            k1: g.k1,
            k2: g.k2,
            k3: g.k3,
            theta: g.theta,
            kappa: g.kappa,
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * (1.0 + a.abs().max(b.abs()))
}

impl PiecewiseLinearBirth {
    /// Solves `q₂`, `q₃`, `θ₁` from continuity and `g(κ) = κ`.
    ///
    /// `k₂ = k₃` describes a two-segment function; then `θ₁ = θ` and `κ` must
    /// already lie on the common decreasing line.
    pub fn new(k1: f64, k2: f64, k3: f64, theta: f64, kappa: f64) -> Result<Self> {
        let bad = |msg: String| Err(WaveError::InvalidGeometry(msg));
        if [k1, k2, k3, theta, kappa].iter().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if k1 <= 1.0 {
            return bad(format!("k1 = {k1} must exceed 1"));
        }
        if !(k2 <= k3 && k3 < 0.0) {
            return bad(format!("need k2 <= k3 < 0, got k2 = {k2}, k3 = {k3}"));
        }
        if !(0.0 < theta && theta < kappa) {
            return bad(format!("need 0 < theta < kappa, got theta = {theta}, kappa = {kappa}"));
        }
        let g = Self::new_unchecked(k1, k2, k3, theta, kappa);
        if k2 == k3 {
            if !close(g.q2, g.q3) {
                return bad(format!(
                    "two-segment g: kappa = {kappa} is not on the decreasing line (q2 = {}, q3 = {})",
                    g.q2, g.q3
                ));
            }
        } else if !(theta < g.theta1 && g.theta1 < kappa) {
            return bad(format!(
                "solved theta1 = {} is not inside (theta, kappa) = ({theta}, {kappa})",
                g.theta1
            ));
        }
        if g.g2_theta < 0.0 {
            return bad(format!("g(g(theta)) = {} is negative", g.g2_theta));
        }
        Ok(g)
    }

    /// Two-segment function with `k₂ = k₃`; `κ` follows from the geometry.
    pub fn two_segment(k1: f64, k2: f64, theta: f64) -> Result<Self> {
        let kappa = (k1 - k2) * theta / (1.0 - k2);
        Self::new(k1, k2, k2, theta, kappa)
    }

    /// Derives the constants without validating the geometry.
    ///
    /// Useful for negative controls; the hypothesis checks still work on the
    /// resulting value.
    pub fn new_unchecked(k1: f64, k2: f64, k3: f64, theta: f64, kappa: f64) -> Self {
        let q2 = (k1 - k2) * theta;
        let q3 = kappa * (1.0 - k3);
        let theta1 = if k2 == k3 { theta } else { (q3 - q2) / (k2 - k3) };
        let mut g = PiecewiseLinearBirth {
            k1,
            k2,
            k3,
            theta,
            theta1,
            kappa,
            q2,
            q3,
            g_theta: k1 * theta,
            g2_theta: 0.0,
        };
        g.g2_theta = g.value(g.g_theta);
        g
    }

    /// `k₁ = 3, k₂ = −3, k₃ = −0.25, θ = 1/3, κ = 0.53`.
    pub fn reference() -> Self {
        Self::new(3.0, -3.0, -0.25, 1.0 / 3.0, 0.53).expect("reference parameters are valid")
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn g_theta(&self) -> f64 {
        self.g_theta
    }

    pub fn g2_theta(&self) -> f64 {
        self.g2_theta
    }

    pub fn is_two_segment(&self) -> bool {
        self.k2 == self.k3
    }

    /// Where the continued third segment reaches zero.
    pub fn zero_of_tail(&self) -> f64 {
        -self.q3 / self.k3
    }

    /// `(slope, intercept)` of the affine piece active at `x`, clamp included.
    #[inline]
    pub fn piece(&self, x: f64) -> (f64, f64) {
        if x <= self.theta {
            (self.k1, 0.0)
        } else if x <= self.theta1 {
            (self.k2, self.q2)
        } else if x < self.zero_of_tail() {
            (self.k3, self.q3)
        } else {
            (0.0, 0.0)
        }
    }

    /// Total evaluation; negative arguments use the first segment.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let (a, b) = self.piece(x);
        a * x + b
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(WaveError::NegativeInput(x));
        }
        Ok(self.value(x))
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.k1
    }

    pub fn slope_at_kappa(&self) -> f64 {
        self.k3
    }

    /// Kinks of `g` on `[0, ∞)` in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![self.theta];
        if self.theta1 > self.theta {
            v.push(self.theta1);
        }
        v.push(self.zero_of_tail());
        v
    }

    /// `g` on `[0, g(θ)]` as an interval map.
    pub fn as_interval_map(&self) -> Result<IntervalMap> {
        self.as_interval_map_on(self.g_theta)
    }

    /// `g` on `[0, hi]` as an interval map.
    pub fn as_interval_map_on(&self, hi: f64) -> Result<IntervalMap> {
        let mut xs = vec![0.0];
        xs.extend(self.breakpoints().into_iter().filter(|&b| b < hi));
        xs.push(hi);
        let ys: Vec<f64> = xs.iter().map(|&x| self.value(x)).collect();
        Ok(IntervalMap::from_knots(&xs, &ys)?.simplified())
    }

    pub fn spec(&self) -> BirthSpec {
        BirthSpec::from(self)
    }
}

/// Outcome of a single hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// A point where the condition fails; `None` when it holds.
    pub witness: Option<f64>,
    pub details: Vec<String>,
}

impl ConditionCheck {
    fn new() -> Self {
        ConditionCheck {
            holds: true,
            witness: None,
            details: Vec::new(),
        }
    }

    fn fail(&mut self, x: f64, detail: String) {
        if self.holds {
            self.witness = Some(x);
        }
        self.holds = false;
        self.details.push(detail);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub um: ConditionCheck,
    pub fc: ConditionCheck,
    /// Interval on which feedback is checked.
    pub fc_interval: (f64, f64),
    pub subtangency: ConditionCheck,
}

pub fn check_hypotheses(g: &PiecewiseLinearBirth) -> HypothesisReport {
    HypothesisReport {
        um: check_um(g),
        fc: check_fc(g),
        fc_interval: (g.g2_theta, g.g_theta),
        subtangency: check_subtangency(g),
    }
}

/// Unimodality: one hump at θ, `g > id` on `(0, κ)`, `g < id` on `(κ, g(θ)]`.
///
/// `g − id` is affine between kinks, so its sign is decided at the kinks.
pub fn check_um(g: &PiecewiseLinearBirth) -> ConditionCheck {
    let mut check = ConditionCheck::new();
    if g.k1 <= 1.0 {
        check.fail(0.0, format!("g'(0) = {} <= 1", g.k1));
    }
    if g.k3 >= 1.0 {
        check.fail(g.kappa, format!("g'(kappa) = {} >= 1", g.k3));
    }
    if !(g.k1 > 0.0 && g.k2 < 0.0 && g.k3 < 0.0) {
        check.fail(g.theta, "g does not have a single maximum at theta".into());
    }
    if g.kappa >= g.g_theta {
        check.fail(
            g.kappa,
            format!("kappa = {} is not below the maximum g(theta) = {}", g.kappa, g.g_theta),
        );
    }
    for x in [g.theta, g.theta1] {
        if x > 0.0 && x < g.kappa && g.value(x) <= x {
            check.fail(x, format!("g({x}) = {} <= x inside (0, kappa)", g.value(x)));
        }
    }
    let mut right: Vec<f64> = g
        .breakpoints()
        .into_iter()
        .filter(|&x| x > g.kappa && x < g.g_theta)
        .collect();
    right.push(g.g_theta);
    for x in right {
        if x > g.kappa && g.value(x) >= x {
            check.fail(x, format!("g({x}) = {} >= x inside (kappa, g(theta)]", g.value(x)));
        }
    }
    check
}

/// Feedback `(g(x) − κ)(x − κ) < 0` on `[g²(θ), g(θ)]`, checked at the kinks.
pub fn check_fc(g: &PiecewiseLinearBirth) -> ConditionCheck {
    match g.as_interval_map_on(g.g_theta.max(g.kappa)) {
        Ok(map) => {
            let lo = g.g2_theta.min(g.kappa);
            match map.restrict(lo.max(0.0), map.domain().1) {
                Ok(m) => check_fc_map(&m, g.kappa),
                Err(e) => {
                    let mut c = ConditionCheck::new();
                    c.fail(lo, e.to_string());
                    c
                }
            }
        }
        Err(e) => {
            let mut c = ConditionCheck::new();
            c.fail(g.g_theta, e.to_string());
            c
        }
    }
}

/// Feedback check for any interval map around its fixed point `kappa`.
pub fn check_fc_map(map: &IntervalMap, kappa: f64) -> ConditionCheck {
    let mut check = ConditionCheck::new();
    let tol = REL_TOL * (1.0 + kappa.abs());
    for x in map.breakpoints() {
        if (x - kappa).abs() <= tol {
            continue;
        }
        let prod = (map.eval(x) - kappa) * (x - kappa);
        if prod >= 0.0 {
            check.fail(x, format!("(g(x) - kappa)(x - kappa) = {prod:e} >= 0 at x = {x}"));
        }
    }
    check
}

/// Sub-tangency `g(x) ≤ κ + g'(κ)(x − κ)` on `[0, κ]`.
///
/// The witness is the kink with the largest violation.
pub fn check_subtangency(g: &PiecewiseLinearBirth) -> ConditionCheck {
    let mut check = ConditionCheck::new();
    let tangent = |x: f64| g.kappa + g.k3 * (x - g.kappa);
    let tol = REL_TOL * (1.0 + g.g_theta);
    let mut worst: Option<(f64, f64)> = None;
    for x in [0.0, g.theta, g.theta1, g.kappa] {
        if x > g.kappa {
            continue;
        }
        let excess = g.value(x) - tangent(x);
        if excess > tol && worst.is_none_or(|(_, e)| excess > e) {
            worst = Some((x, excess));
        }
    }
    if let Some((x, excess)) = worst {
        check.fail(
            x,
            format!(
                "g({x}) = {} exceeds the tangent value {} by {excess}",
                g.value(x),
                tangent(x)
            ),
        );
    }
    check
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecantSlope {
    pub value: f64,
    pub argmin: f64,
}

/// `inf_{x ∈ (0, κ)} (g(x) − g(κ))/(x − κ)`.
///
/// On each affine piece the secant is a Möbius function of `x`, hence monotone,
/// so the infimum is attained at a kink or as a limit at an end point.
pub fn critical_secant_slope(g: &PiecewiseLinearBirth) -> SecantSlope {
    let secant = |x: f64| (g.value(x) - g.kappa) / (x - g.kappa);
    let mut best = SecantSlope {
        value: 1.0, // limit at 0: (0 − κ)/(0 − κ)
        argmin: 0.0,
    };
    for x in [g.theta, g.theta1] {
        if x > 0.0 && x < g.kappa {
            let s = secant(x);
            if s < best.value {
                best = SecantSlope { value: s, argmin: x };
            }
        }
    }
    if g.k3 < best.value {
        best = SecantSlope {
            value: g.k3,
            argmin: g.kappa,
        };
    }
    best
}

/// Exact `g ∘ g` on an invariant interval.
pub fn compose(g: &PiecewiseLinearBirth, a: f64, b: f64) -> Result<IntervalMap> {
    if !(0.0 <= a && a < b) {
        return Err(WaveError::InvalidGeometry(format!("bad interval [{a}, {b}]")));
    }
    let map = g.as_interval_map_on(b)?.restrict(a, b)?;
    map.check_invariant()?;
    map.compose(&map)
}

/// Largest |slope| of `g` over segments meeting `(a, b)`.
pub fn lipschitz_constant(g: &PiecewiseLinearBirth, a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a < b) {
        return Err(WaveError::InvalidGeometry(format!("bad interval [{a}, {b}]")));
    }
    Ok(g.as_interval_map_on(b)?.lipschitz_on(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> PiecewiseLinearBirth {
        PiecewiseLinearBirth::reference()
    }

    #[test]
    fn derived_constants() {
        let g = reference();
        assert!((g.q2 - 2.0).abs() < 1e-14);
        assert!((g.q3 - 0.6625).abs() < 1e-14);
        assert!((g.theta1 - 0.486_363_636_363_636_4).abs() < 1e-12);
        assert!((g.g_theta - 1.0).abs() < 1e-14);
        assert!((g.g2_theta - 0.4125).abs() < 1e-14);
    }

    #[test]
    fn kappa_below_theta1_is_rejected() {
        let err = PiecewiseLinearBirth::new(2.0, -1.0, -0.5, 0.4, 0.7).unwrap_err();
        assert!(matches!(err, WaveError::InvalidGeometry(_)));
    }

    #[test]
    fn eval_values() {
        let g = reference();
        assert!((g.eval(1.0 / 3.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((g.eval(0.53).unwrap() - 0.53).abs() < 1e-14);
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        assert_eq!(g.eval(-0.1), Err(WaveError::NegativeInput(-0.1)));
    }

    #[test]
    fn eval_is_continuous_at_kinks() {
        let g = reference();
        for b in g.breakpoints() {
            let jump = (g.value(b - 1e-9) - g.value(b + 1e-9)).abs();
            assert!(jump < 1e-7, "jump {jump} at {b}");
        }
    }

    #[test]
    fn extension_is_clamped() {
        let g = reference();
        assert_eq!(g.value(10.0), 0.0);
        assert!((g.value(2.0) - (0.6625 - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn reference_hypotheses() {
        let r = check_hypotheses(&reference());
        assert!(r.um.holds, "{:?}", r.um);
        assert!(r.fc.holds, "{:?}", r.fc);
        assert!(!r.subtangency.holds);
        assert!((r.subtangency.witness.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.fc_interval.0 - 0.4125).abs() < 1e-14 && r.fc_interval.1 == 1.0);
    }

    #[test]
    fn um_fails_for_flat_start() {
        let g = PiecewiseLinearBirth::new_unchecked(0.5, -3.0, -0.25, 1.0 / 3.0, 0.53);
        let c = check_um(&g);
        assert!(!c.holds);
        assert_eq!(c.witness, Some(0.0));
    }

    #[test]
    fn um_fails_when_kappa_exceeds_maximum() {
        let g = PiecewiseLinearBirth::new_unchecked(3.0, -3.0, -0.25, 1.0 / 3.0, 1.2);
        assert!(!check_um(&g).holds);
    }

    #[test]
    fn fc_fails_for_identity() {
        let id = IntervalMap::identity(0.2, 0.9).unwrap();
        assert!(!check_fc_map(&id, 0.5).holds);
    }

    #[test]
    fn fc_value_at_left_end() {
        let g = reference();
        assert!((g.value(0.4125) - 0.7625).abs() < 1e-14);
    }

    #[test]
    fn two_segment_is_subtangent() {
        let g = PiecewiseLinearBirth::two_segment(2.0, -0.5, 0.4).unwrap();
        assert!((g.kappa - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(g.theta1, g.theta);
        assert!(check_subtangency(&g).holds);
        assert!(check_um(&g).holds);
        assert!(check_fc(&g).holds);
    }

    #[test]
    fn steeper_middle_segment_breaks_subtangency() {
        let g = PiecewiseLinearBirth::new(1.2, -1.0, -0.5, 0.5, 0.56).unwrap();
        let c = check_subtangency(&g);
        assert!(!c.holds);
        assert_eq!(c.witness, Some(0.5));
        let flat = PiecewiseLinearBirth::two_segment(1.5, -2.0, 0.3).unwrap();
        assert!(check_subtangency(&flat).holds);
    }

    #[test]
    fn secant_slope_reference() {
        let s = critical_secant_slope(&reference());
        assert!((s.value - (0.47 / (1.0 / 3.0 - 0.53))).abs() < 1e-14);
        assert!((s.value + 2.389_830_508_474_576).abs() < 1e-9);
        assert!((s.argmin - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn secant_slope_matches_dense_grid() {
        let g = reference();
        let n = 1_000_000;
        let mut inf = f64::INFINITY;
        for i in 1..n {
            let x = g.kappa * i as f64 / n as f64;
            inf = inf.min((g.value(x) - g.kappa) / (x - g.kappa));
        }
        assert!((inf - critical_secant_slope(&g).value).abs() < 1e-6);
    }

    #[test]
    fn second_iterate_slope_bound() {
        let g = reference();
        let g2 = compose(&g, 0.4125, 1.0).unwrap();
        assert!((g2.max_abs_slope() - 0.75).abs() < 1e-12);
        for p in g2.pieces() {
            let ok = [g.k1, g.k2, g.k3]
                .iter()
                .flat_map(|a| [g.k1, g.k2, g.k3].map(|b| a * b))
                .any(|s| (s - p.slope).abs() < 1e-12);
            assert!(ok, "slope {} is not a product of two slopes", p.slope);
        }
    }

    #[test]
    fn compose_matches_finite_differences() {
        let g = reference();
        let g2 = compose(&g, 0.4125, 1.0).unwrap();
        let h = 1e-7;
        for p in g2.pieces() {
            let m = 0.5 * (p.start + p.end);
            if p.end - p.start < 4.0 * h {
                continue;
            }
            let fd = (g.value(g.value(m + h)) - g.value(g.value(m - h))) / (2.0 * h);
            assert!((fd - p.slope).abs() < 1e-6);
        }
    }

    #[test]
    fn compose_requires_invariance() {
        let g = reference();
        assert!(matches!(
            compose(&g, 0.6, 0.9),
            Err(WaveError::NotInvariant { .. })
        ));
    }

    #[test]
    fn lipschitz_values() {
        let g = reference();
        assert_eq!(lipschitz_constant(&g, 0.0, 1.0).unwrap(), 3.0);
        assert_eq!(lipschitz_constant(&g, g.theta1, 1.0).unwrap(), 0.25);
    }

    #[test]
    fn spec_round_trip() {
        let g = reference();
        let json = serde_json::to_string(&g.spec()).unwrap();
        let back: BirthSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), g);
    }
}

//! One-dimensional piecewise-linear interval maps.
//!
//! The birth function restricted to `[g²(θ), g(θ)]` and the auxiliary map
//! `σ(x) = ζ⁻¹((1 − ξ) g(x))` are both continuous and piecewise linear, so
//! everything here works on exact affine pieces: composition pulls back
//! breakpoints, inversion swaps knots, and global attractivity of the
//! fixed point is certified from the slopes of the second iterate.

use serde::Serialize;

use crate::birth::PiecewiseLinearBirth;
use crate::error::{Result, WaveError};
use crate::spectrum;

const CONTINUITY_TOL: f64 = 1e-12;

/// `slope * x + intercept` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffinePiece {
    pub start: f64,
    pub end: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl AffinePiece {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        AffinePiece {
            start: x0,
            end: x1,
            slope,
            intercept: y0 - slope * x0,
        }
    }
}

/// Continuous piecewise-linear map on a closed interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalMap {
    domain: (f64, f64),
    pieces: Vec<AffinePiece>,
    fixed_point: Option<f64>,
}

impl IntervalMap {
    /// Interpolates the knots `(xs[i], ys[i])`; `xs` must be strictly increasing.
    pub fn from_knots(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(WaveError::InvalidGeometry(
                "an interval map needs at least two knots with matching values".into(),
            ));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(WaveError::InvalidGeometry("non-finite knot".into()));
        }
        let mut pieces = Vec::with_capacity(xs.len() - 1);
        for i in 0..xs.len() - 1 {
            if xs[i + 1] <= xs[i] {
                return Err(WaveError::InvalidGeometry(format!(
                    "knots not strictly increasing at index {i}: {} >= {}",
                    xs[i],
                    xs[i + 1]
                )));
            }
            pieces.push(AffinePiece::through(xs[i], ys[i], xs[i + 1], ys[i + 1]));
        }
        Ok(IntervalMap {
            domain: (xs[0], xs[xs.len() - 1]),
            pieces,
        fixed_point: None,
        })
    }

    /// Builds a map from contiguous pieces, checking continuity at every junction.
    pub fn from_pieces(pieces: Vec<AffinePiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(WaveError::InvalidGeometry("no pieces".into()));
        }
        for w in pieces.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let gap = (a.end - b.start).abs();
            let jump = (a.eval(a.end) - b.eval(b.start)).abs();
            let scale = 1.0 + a.eval(a.end).abs();
            if gap > CONTINUITY_TOL * (1.0 + a.end.abs()) || jump > CONTINUITY_TOL * scale {
                return Err(WaveError::InvalidGeometry(format!(
                    "discontinuity at x = {}: jump {jump:e}",
                    a.end
                )));
            }
        }
        let domain = (pieces[0].start, pieces[pieces.len() - 1].end);
        Ok(IntervalMap {
            domain,
            pieces,
            fixed_point: None,
        })
    }

    pub fn identity(a: f64, b: f64) -> Result<Self> {
        Self::from_knots(&[a, b], &[a, b])
    }

    pub fn constant(a: f64, b: f64, value: f64) -> Result<Self> {
        Self::from_knots(&[a, b], &[value, value])
    }

    pub fn with_fixed_point(mut self, fixed_point: f64) -> Self {
        self.fixed_point = Some(fixed_point);
        self
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn fixed_point(&self) -> Option<f64> {
        self.fixed_point
    }

    fn piece_index(&self, x: f64) -> usize {
        // first piece whose end is >= x; points outside the domain use the end pieces
        let idx = self.pieces.partition_point(|p| p.end < x);
        idx.min(self.pieces.len() - 1)
    }

    /// Evaluates the map; outside the domain the end pieces are extended.
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Knot abscissae: piece starts plus the right end of the domain.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.pieces.iter().map(|p| p.start).collect();
        xs.push(self.domain.1);
        xs
    }

    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.breakpoints()
            .into_iter()
            .map(|x| (x, self.eval(x)))
            .collect()
    }

    /// Exact image `[min, max]` (attained at knots).
    pub fn image(&self) -> (f64, f64) {
        self.knots()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
                (lo.min(y), hi.max(y))
            })
    }

    /// Checks `map(domain) ⊆ domain` on the knots, which is exact for affine pieces.
    pub fn check_invariant(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        let tol = CONTINUITY_TOL * (1.0 + lo.abs().max(hi.abs()));
        for (x, y) in self.knots() {
            if y < lo - tol || y > hi + tol {
                return Err(WaveError::NotInvariant { x, image: y, lo, hi });
            }
        }
        Ok(())
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.pieces.iter().map(|p| p.slope.abs()).fold(0.0, f64::max)
    }

    /// Largest |slope| over pieces that overlap `(a, b)` with positive length.
    pub fn lipschitz_on(&self, a: f64, b: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.end.min(b) - p.start.max(a) > 0.0)
            .map(|p| p.slope.abs())
            .fold(0.0, f64::max)
    }

    /// Restriction to a sub-interval of the domain.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        let (lo, hi) = self.domain;
        if a < lo - CONTINUITY_TOL || b > hi + CONTINUITY_TOL || a >= b {
            return Err(WaveError::OutOfRange {
                context: "restriction interval".into(),
                value: if a < lo { a } else { b },
                lo,
                hi,
            });
        }
        let mut xs = vec![a];
        xs.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
        xs.push(b);
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let mut map = Self::from_knots(&xs, &ys)?;
        map.fixed_point = self.fixed_point.filter(|&k| k >= a && k <= b);
        Ok(map.simplified())
    }

    /// Merges neighbouring pieces with equal slopes.
    pub fn simplified(mut self) -> Self {
        let mut merged: Vec<AffinePiece> = Vec::with_capacity(self.pieces.len());
        for p in self.pieces.drain(..) {
            if let Some(last) = merged.last_mut() {
                let scale = 1.0 + last.slope.abs().max(p.slope.abs());
                if (last.slope - p.slope).abs() <= 1e-13 * scale {
                    last.end = p.end;
                    continue;
                }
            }
            merged.push(p);
        }
        self.pieces = merged;
        self
    }

    /// Multiplies the output by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| AffinePiece {
                slope: p.slope * factor,
                intercept: p.intercept * factor,
                ..*p
            })
            .collect();
        IntervalMap {
            domain: self.domain,
            pieces,
            fixed_point: None,
        }
    }

    /// Pointwise `self(x) - other(x)` on the common domain.
    pub fn minus(&self, other: &IntervalMap) -> Result<Self> {
        let lo = self.domain.0.max(other.domain.0);
        let hi = self.domain.1.min(other.domain.1);
        if lo >= hi {
            return Err(WaveError::InvalidGeometry("domains do not overlap".into()));
        }
        let mut xs: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .chain(other.breakpoints())
            .filter(|&x| x > lo && x < hi)
            .collect();
        xs.push(lo);
        xs.push(hi);
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= CONTINUITY_TOL * (1.0 + b.abs()));
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x) - other.eval(x)).collect();
        Ok(Self::from_knots(&xs, &ys)?.simplified())
    }

    /// Inverse of a strictly monotone map, defined on its image.
    pub fn inverse(&self) -> Result<Self> {
        let increasing = self.pieces.iter().all(|p| p.slope > 0.0);
        let decreasing = self.pieces.iter().all(|p| p.slope < 0.0);
        if !increasing && !decreasing {
            return Err(WaveError::InvalidGeometry(
                "only strictly monotone maps can be inverted".into(),
            ));
        }
        let mut knots = self.knots();
        if decreasing {
            knots.reverse();
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.0).collect();
        Self::from_knots(&xs, &ys)
    }

    /// Exact `self ∘ inner` on the domain of `inner`.
    ///
    /// Each affine piece of `inner` is split where it crosses an interior
    /// breakpoint of `self`; the composite on each sub-piece is affine.
    pub fn compose(&self, inner: &IntervalMap) -> Result<Self> {
        let (lo, hi) = self.domain;
        let tol = CONTINUITY_TOL * (1.0 + lo.abs().max(hi.abs()));
        for (x, y) in inner.knots() {
            if y < lo - tol || y > hi + tol {
                return Err(WaveError::NotInvariant { x, image: y, lo, hi });
            }
        }
        let interior: Vec<f64> = self.pieces.iter().skip(1).map(|p| p.start).collect();
        let mut out = Vec::new();
        for piece in &inner.pieces {
            let mut cuts = vec![piece.start, piece.end];
            if piece.slope != 0.0 {
                for &beta in &interior {
                    let x = (beta - piece.intercept) / piece.slope;
                    if x > piece.start && x < piece.end {
                        cuts.push(x);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let outer = &self.pieces[self.piece_index(piece.eval(mid))];
                out.push(AffinePiece {
                    start: w[0],
                    end: w[1],
                    slope: outer.slope * piece.slope,
                    intercept: outer.slope * piece.intercept + outer.intercept,
                });
            }
        }
        let mut map = Self::from_pieces(out)?.simplified();
        map.fixed_point = inner.fixed_point.or(self.fixed_point);
        Ok(map)
    }

    /// All fixed points; a piece lying on the diagonal contributes its end points.
    pub fn fixed_points(&self) -> Vec<f64> {
        let mut fps = Vec::new();
        for p in &self.pieces {
            let d = p.slope - 1.0;
            if d.abs() < 1e-14 {
                if p.intercept.abs() < 1e-14 {
                    fps.push(p.start);
                    fps.push(p.end);
                }
                continue;
            }
            let x = -p.intercept / d;
            let tol = 1e-12 * (1.0 + x.abs());
            if x >= p.start - tol && x <= p.end + tol {
                fps.push(x.clamp(p.start, p.end));
            }
        }
        fps.sort_by(f64::total_cmp);
        fps.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * (1.0 + b.abs()));
        fps
    }

    /// `n` equally spaced samples `(x, map(x))`, end points included.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.domain;
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let x = a + (b - a) * i as f64 / (n - 1) as f64;
                (x, self.eval(x))
            })
            .collect()
    }
}

/// `g` restricted to `[g²(θ), g(θ)]`, with invariance verified on the knots.
pub fn restrict_g(g: &PiecewiseLinearBirth) -> Result<IntervalMap> {
    let (lo, hi) = (g.g2_theta(), g.g_theta());
    if !(lo <= g.kappa() && g.kappa() <= hi) {
        return Err(WaveError::InvalidGeometry(format!(
            "κ = {} outside [g²(θ), g(θ)] = [{lo}, {hi}]",
            g.kappa()
        )));
    }
    let map = g.as_interval_map()?.restrict(lo, hi)?;
    map.check_invariant()?;
    Ok(map.with_fixed_point(g.kappa()))
}

/// The auxiliary map `σ` together with the pieces it is assembled from.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaMap {
    pub xi: f64,
    /// Inverse of the decreasing branch of `g`.
    pub psi: IntervalMap,
    /// `ζ(x) = x − ψ(x)`.
    pub zeta: IntervalMap,
    pub sigma: IntervalMap,
    pub fixed_points: Vec<f64>,
    pub invariant: bool,
}

/// Builds `σ(x) = ζ⁻¹((1 − ξ(h, c)) g(x))` on `[g²(θ), g(θ)]` exactly.
pub fn build_sigma(g: &PiecewiseLinearBirth, h: f64, c: f64) -> Result<SigmaMap> {
    let xi = spectrum::xi(h, c);
    let (lo, hi) = (g.g2_theta(), g.g_theta());
    let branch = g.as_interval_map()?.restrict(g.theta(), hi)?;
    let psi = branch.inverse()?.restrict(lo, hi)?;
    let zeta = IntervalMap::identity(lo, hi)?.minus(&psi)?;
    let zeta_inv = zeta.inverse()?;
    let (zlo, zhi) = zeta_inv.domain();
    let target = g.as_interval_map()?.restrict(lo, hi)?.scaled(1.0 - xi);
    let tol = 1e-12 * (1.0 + zlo.abs().max(zhi.abs()));
    for (x, y) in target.knots() {
        if y < zlo - tol || y > zhi + tol {
            return Err(WaveError::OutOfRange {
                context: format!("(1 − ξ) g(x) at x = {x} leaves the range of ζ"),
                value: y,
                lo: zlo,
                hi: zhi,
            });
        }
    }
    let sigma = zeta_inv.compose(&target)?;
    let fixed_points = sigma.fixed_points();
    let invariant = sigma.check_invariant().is_ok();
    Ok(SigmaMap {
        xi,
        psi,
        zeta,
        sigma,
        fixed_points,
        invariant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum GaVerdict {
    Proved,
    SampledOnly,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct GaReport {
    pub verdict: GaVerdict,
    pub max_slope_second_iterate: f64,
    pub fixed_point: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

pub const GA_SAMPLE_STARTS: usize = 10_000;
pub const GA_ORBIT_LENGTH: usize = 1_000;
pub const GA_EPS: f64 = 1e-9;

/// Global attractivity of the fixed point.
///
/// PROVED when the map is invariant and its second iterate is a contraction
/// (max |slope| < 1): then the second iterate has a unique fixed point and
/// no 2-cycle exists. Otherwise 10⁴ evenly spaced starts are iterated 10³
/// times; SAMPLED-ONLY if all of them end within 1e-9 of the fixed point.
pub fn check_ga(map: &IntervalMap) -> GaReport {
    if let Err(WaveError::NotInvariant { x, image, .. }) = map.check_invariant() {
        return GaReport {
            verdict: GaVerdict::Failed,
            max_slope_second_iterate: f64::NAN,
            fixed_point: map.fixed_point(),
            witness: Some(vec![x, image]),
        };
    }
    let kappa = map.fixed_point().or_else(|| {
        let fps = map.fixed_points();
        (fps.len() == 1).then(|| fps[0])
    });
    let slope2 = map
        .compose(map)
        .map(|m| m.max_abs_slope())
        .unwrap_or(f64::INFINITY);
    let Some(kappa) = kappa else {
        return GaReport {
            verdict: GaVerdict::Failed,
            max_slope_second_iterate: slope2,
            fixed_point: None,
            witness: Some(map.fixed_points()),
        };
    };
    if slope2 < 1.0 {
        return GaReport {
            verdict: GaVerdict::Proved,
            max_slope_second_iterate: slope2,
            fixed_point: Some(kappa),
            witness: None,
        };
    }
    let (a, b) = map.domain();
    for i in 0..GA_SAMPLE_STARTS {
        let x0 = a + (b - a) * i as f64 / (GA_SAMPLE_STARTS - 1) as f64;
        let orbit = iterate_orbit(map, x0, GA_ORBIT_LENGTH);
        let last = *orbit.last().unwrap_or(&x0);
        if !((last - kappa).abs() < GA_EPS) {
            return GaReport {
                verdict: GaVerdict::Failed,
                max_slope_second_iterate: slope2,
                fixed_point: Some(kappa),
                witness: Some(orbit.into_iter().take(20).collect()),
            };
        }
    }
    GaReport {
        verdict: GaVerdict::SampledOnly,
        max_slope_second_iterate: slope2,
        fixed_point: Some(kappa),
        witness: None,
    }
}

/// `x0, f(x0), …, fⁿ(x0)`.
pub fn iterate_orbit(map: &IntervalMap, x0: f64, n: usize) -> Vec<f64> {
    let mut orbit = Vec::with_capacity(n + 1);
    let mut x = x0;
    orbit.push(x);
    for _ in 0..n {
        x = map.eval(x);
        orbit.push(x);
    }
    orbit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reflection() -> IntervalMap {
        IntervalMap::from_knots(&[0.0, 1.0], &[1.0, 0.0])
            .unwrap()
            .with_fixed_point(0.5)
    }

    /// Steep outer branches, contracting middle branch around 0.5.
    fn steep_but_attracting() -> IntervalMap {
        IntervalMap::from_knots(&[0.0, 0.1, 0.9, 1.0], &[0.82, 0.62, 0.38, 0.05])
            .unwrap()
            .with_fixed_point(0.5)
    }

    #[test]
    fn compose_identity_is_identity() {
        let id = IntervalMap::identity(0.2, 0.9).unwrap();
        let c = id.compose(&id).unwrap();
        assert_eq!(c.pieces().len(), 1);
        assert!((c.pieces()[0].slope - 1.0).abs() < 1e-15);
        assert!(c.pieces()[0].intercept.abs() < 1e-15);
    }

    #[test]
    fn compose_rejects_escaping_inner_map() {
        let outer = IntervalMap::identity(0.0, 1.0).unwrap();
        let inner = IntervalMap::from_knots(&[0.0, 1.0], &[0.0, 2.0]).unwrap();
        assert!(matches!(
            outer.compose(&inner),
            Err(WaveError::NotInvariant { .. })
        ));
    }

    #[test]
    fn inverse_of_decreasing_map() {
        let m = IntervalMap::from_knots(&[0.0, 0.5, 1.0], &[2.0, 1.0, 0.5]).unwrap();
        let inv = m.inverse().unwrap();
        assert_eq!(inv.domain(), (0.5, 2.0));
        for x in [0.0, 0.2, 0.5, 0.7, 1.0] {
            assert!((inv.eval(m.eval(x)) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn lipschitz_of_constant_is_zero() {
        let m = IntervalMap::constant(0.0, 1.0, 0.3).unwrap();
        assert_eq!(m.lipschitz_on(0.0, 1.0), 0.0);
    }

    #[test]
    fn reflection_map_fails_with_two_cycle() {
        let report = check_ga(&reflection());
        assert_eq!(report.verdict, GaVerdict::Failed);
        assert!((report.max_slope_second_iterate - 1.0).abs() < 1e-12);
        let w = report.witness.unwrap();
        assert!((w[0] - w[2]).abs() < 1e-12 && (w[0] - w[1]).abs() > 0.1);
    }

    #[test]
    fn steep_map_is_sampled_only() {
        let m = steep_but_attracting();
        let report = check_ga(&m);
        assert!(report.max_slope_second_iterate > 1.0);
        assert_eq!(report.verdict, GaVerdict::SampledOnly);
    }

    #[test]
    fn orbit_of_fixed_point_is_constant() {
        let m = steep_but_attracting();
        assert!(iterate_orbit(&m, 0.5, 50).iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn restrict_g_reference_domain() {
        let g = PiecewiseLinearBirth::reference();
        let m = restrict_g(&g).unwrap();
        let (a, b) = m.domain();
        assert!((a - 0.4125).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert!((m.eval(a) - 0.7625).abs() < 1e-12);
        assert!((m.eval(b) - 0.4125).abs() < 1e-12);
    }

    #[test]
    fn reference_ga_is_proved() {
        let g = PiecewiseLinearBirth::reference();
        let report = check_ga(&restrict_g(&g).unwrap());
        assert_eq!(report.verdict, GaVerdict::Proved);
        assert!((report.max_slope_second_iterate - 0.75).abs() < 1e-9);
    }

    #[test]
    fn reference_orbit_converges() {
        let g = PiecewiseLinearBirth::reference();
        let m = restrict_g(&g).unwrap();
        let orbit = iterate_orbit(&m, 1.0, 100);
        assert!((orbit[100] - 0.53).abs() < 1e-9);
    }

    #[test]
    fn sigma_with_zero_delay_is_constant() {
        let g = PiecewiseLinearBirth::reference();
        let s = build_sigma(&g, 0.0, 0.73).unwrap();
        assert!((s.xi - 1.0).abs() < 1e-15);
        let z0 = s.zeta.inverse().unwrap().eval(0.0);
        for (_, y) in s.sigma.sample(17) {
            assert!((y - z0).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_fixes_kappa() {
        let g = PiecewiseLinearBirth::reference();
        let s = build_sigma(&g, 2.0, 0.73).unwrap();
        assert!((s.psi.eval(0.53) - 0.53).abs() < 1e-12);
    }

    #[test]
    fn sigma_matches_pointwise_bracketing() {
        let g = PiecewiseLinearBirth::reference();
        let s = build_sigma(&g, 2.0, 0.73).unwrap();
        let (lo, hi) = s.sigma.domain();
        // oracle: invert ζ(y) = y − ψ(y) by bisection, ψ by bisection on g
        let psi = |x: f64| {
            let (mut a, mut b) = (g.theta(), g.g_theta());
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if g.value(m) > x {
                    a = m
                } else {
                    b = m
                }
            }
            0.5 * (a + b)
        };
        for i in 0..100 {
            let x = lo + (hi - lo) * i as f64 / 99.0;
            let target = (1.0 - s.xi) * g.value(x);
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m - psi(m) < target {
                    a = m
                } else {
                    b = m
                }
            }
            assert!((s.sigma.eval(x) - 0.5 * (a + b)).abs() < 1e-10, "x = {x}");
        }
    }
}

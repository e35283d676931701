//! Shape of a computed profile: sign changes about `κ`, extrema and the
//! monotone / eventually monotone / oscillating verdict.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::profile::{first_maximum, WaveProfile};
use crate::spectrum::WaveContext;

/// Deviations from `κ` below `ZERO_REL·κ` count as zero.
pub const ZERO_REL: f64 = 1e-12;
/// Deviations must exceed `RESOLVED_REL·κ` to enter the tail fit and the sc checks.
pub const RESOLVED_REL: f64 = 1e-9;
/// Derivative tolerance of the monotone verdict.
pub const MONOTONE_TOL: f64 = 1e-9;
/// Required length of the final one-signed stretch, in delays.
pub const FINAL_SEGMENT_DELAYS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Monotone,
    EventuallyMonotone,
    SlowlyOscillating,
    RapidlyOscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub t: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScSample {
    pub t: f64,
    pub sc: usize,
}

/// Largest `|φ − κ|` between a crossing of `κ` and the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lobe {
    pub crossing: f64,
    pub t: f64,
    pub amplitude: f64,
}

/// Dominant mode `re ± i·im` of a two-term exponential fit of `φ − κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailMode {
    pub re: f64,
    pub im: f64,
    pub samples: usize,
    pub step: f64,
}

impl TailMode {
    pub fn is_oscillatory(&self) -> bool {
        self.im > 0.0
    }

    /// Amplitude ratio between consecutive lobes.
    pub fn ratio_per_crossing(&self) -> Option<f64> {
        self.is_oscillatory()
            .then(|| (self.re * std::f64::consts::PI / self.im).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LobeAmplitude {
    pub crossing: usize,
    pub amplitude: f64,
    /// `false` when the lobe sits below resolution and the value comes from
    /// the fitted decay ratio.
    pub measured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub tau0: Option<f64>,
    /// First maximum; `None` stands for `+∞`.
    pub tau1: Option<f64>,
    pub extrema: Vec<Extremum>,
    pub sc_sequence: Vec<ScSample>,
    pub classification: Shape,
    pub crossings_of_kappa: usize,
    pub crossings: Vec<f64>,
    pub lobes: Vec<Lobe>,
    pub tail_mode: Option<TailMode>,
    /// Last time where `|φ − κ|` is above the resolution floor.
    pub resolved_until: f64,
    /// Where sc checks start: the later of the first `κ`-crossing and `τ₁`.
    pub sc_from: Option<f64>,
    pub sc_values: Vec<usize>,
}

impl ShapeReport {
    /// Local maxima among the extrema.
    pub fn maxima(&self) -> usize {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Max).count()
    }

    /// Lobe amplitude after the `n`-th crossing of `κ` (1-based).
    pub fn amplitude_after_crossing(&self, n: usize) -> Option<LobeAmplitude> {
        if n == 0 {
            return None;
        }
        if let Some(l) = self.lobes.get(n - 1) {
            return Some(LobeAmplitude {
                crossing: n,
                amplitude: l.amplitude,
                measured: true,
            });
        }
        let ratio = self.tail_mode?.ratio_per_crossing()?;
        let last = self.lobes.last()?;
        let k = (n - self.lobes.len()) as i32;
        Some(LobeAmplitude {
            crossing: n,
            amplitude: last.amplitude * ratio.powi(k),
            measured: false,
        })
    }
}

/// Sign alternations of `values`, skipping entries with `|v| ≤ zero_tol`.
pub fn count_sign_changes(values: &[f64], zero_tol: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v.abs() <= zero_tol || v.is_nan() {
            continue;
        }
        if last != 0.0 && (last > 0.0) != (v > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

fn derivative_at(phi: &WaveProfile, t: f64) -> f64 {
    (phi.eval(t + phi.dt) - phi.eval(t - phi.dt)) / (2.0 * phi.dt)
}

/// Samples of `φ̄_t`: `φ − κ` on `[t − ch, t]` at grid spacing, then `φ′(t)`.
pub fn window_samples(ctx: &WaveContext, phi: &WaveProfile, t: f64) -> Result<Vec<f64>> {
    let tau = phi.tau();
    let lo = phi.t_start - tau;
    let hi = phi.t_end();
    if !(t - tau >= lo - 1e-9 * phi.dt && t <= hi + 1e-9 * phi.dt) {
        return Err(WaveError::OutOfRange {
            context: format!("sign-change window [t - ch, t] for t = {t}"),
            value: t,
            lo: lo + tau,
            hi,
        });
    }
    let kappa = ctx.g.kappa();
    let m = phi.delay_steps;
    let mut out: Vec<f64> = (0..=m)
        .map(|k| phi.eval(t - tau + k as f64 * phi.dt) - kappa)
        .collect();
    out.push(derivative_at(phi, t));
    Ok(out)
}

/// `sc(φ̄_t)`.
pub fn sign_changes(ctx: &WaveContext, phi: &WaveProfile, t: f64) -> Result<usize> {
    let samples = window_samples(ctx, phi, t)?;
    Ok(count_sign_changes(&samples, ZERO_REL * ctx.g.kappa()))
}

/// Crossings of `κ` by linear interpolation, ignoring sub-floor deviations.
fn kappa_crossings(phi: &WaveProfile, kappa: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in phi.values.iter().enumerate() {
        let x = v - kappa;
        if x.abs() <= floor {
            continue;
        }
        if let Some((j, y)) = last {
            if (y > 0.0) != (x > 0.0) {
                // zero between nodes j and i, located on the last sign change
                let mut k = j;
                while k + 1 < i && (phi.values[k + 1] - kappa > 0.0) == (y > 0.0) {
                    k += 1;
                }
                let (a, b) = (phi.values[k] - kappa, phi.values[k + 1] - kappa);
                let frac = if a != b { a / (a - b) } else { 0.5 };
                out.push(phi.t(k) + frac.clamp(0.0, 1.0) * phi.dt);
            }
        }
        last = Some((i, x));
    }
    out
}

/// Extrema from sign changes of `φ′`, with `|φ′| ≤ slope_floor` ignored.
fn extrema(phi: &WaveProfile, slope_floor: f64) -> Vec<Extremum> {
    let d = phi.derivatives();
    let mut out = Vec::new();
    let mut last: Option<(usize, bool)> = None;
    for (i, &s) in d.iter().enumerate() {
        if s.abs() <= slope_floor {
            continue;
        }
        let up = s > 0.0;
        if let Some((j, was_up)) = last {
            if was_up != up {
                let range = j..=i;
                let k = if was_up {
                    range.max_by(|&a, &b| phi.values[a].total_cmp(&phi.values[b]))
                } else {
                    range.min_by(|&a, &b| phi.values[a].total_cmp(&phi.values[b]))
                }
                .unwrap_or(i);
                out.push(refine(phi, k, if was_up { ExtremumKind::Max } else { ExtremumKind::Min }));
            }
        }
        last = Some((i, up));
    }
    out
}

fn refine(phi: &WaveProfile, k: usize, kind: ExtremumKind) -> Extremum {
    let v = &phi.values;
    if k == 0 || k + 1 >= v.len() {
        return Extremum {
            t: phi.t(k),
            value: v[k],
            kind,
        };
    }
    let (a, b, c) = (v[k - 1], v[k], v[k + 1]);
    let denom = a - 2.0 * b + c;
    let off = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-1.0, 1.0) } else { 0.0 };
    Extremum {
        t: phi.t(k) + off * phi.dt,
        value: b - 0.25 * (a - c) * off,
        kind,
    }
}

fn lobes(phi: &WaveProfile, kappa: f64, crossings: &[f64]) -> Vec<Lobe> {
    let mut out = Vec::with_capacity(crossings.len());
    for (n, &t0) in crossings.iter().enumerate() {
        let t1 = crossings.get(n + 1).copied().unwrap_or(phi.t_end());
        let mut best = (t0, 0.0f64);
        for i in 0..phi.len() {
            let t = phi.t(i);
            if t > t0 && t < t1 {
                let x = (phi.values[i] - kappa).abs();
                if x > best.1 {
                    best = (t, x);
                }
            }
        }
        out.push(Lobe {
            crossing: t0,
            t: best.0,
            amplitude: best.1,
        });
    }
    out
}

/// Two-term linear-prediction fit `x(t + 2s) = a₁x(t + s) + a₀x(t)` of
/// `x = φ − κ` on `[lo, hi]`, each equation scaled by its largest sample.
pub fn fit_tail_mode(phi: &WaveProfile, kappa: f64, lo: f64, hi: f64) -> Option<TailMode> {
    if !(hi > lo) {
        return None;
    }
    let i0 = ((lo - phi.t_start) / phi.dt).ceil().max(0.0) as usize;
    let i1 = (((hi - phi.t_start) / phi.dt).floor() as usize).min(phi.len() - 1);
    if i1 <= i0 {
        return None;
    }
    let stride = ((i1 - i0) / 40).max(1);
    let xs: Vec<f64> = (i0..=i1).step_by(stride).map(|i| phi.values[i] - kappa).collect();
    if xs.len() < 6 {
        return None;
    }
    let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in xs.windows(3) {
        let scale = w[0].abs().max(w[1].abs()).max(w[2].abs());
        if scale == 0.0 {
            continue;
        }
        let (p, q, y) = (w[0] / scale, w[1] / scale, w[2] / scale);
        s00 += p * p;
        s01 += p * q;
        s11 += q * q;
        r0 += p * y;
        r1 += q * y;
    }
    let det = s00 * s11 - s01 * s01;
    if det.abs() < 1e-300 {
        return None;
    }
    let a0 = (r0 * s11 - r1 * s01) / det;
    let a1 = (s00 * r1 - s01 * r0) / det;
    // r² − a₁r − a₀ = 0
    let disc = Complex64::new(a1 * a1 + 4.0 * a0, 0.0).sqrt();
    let roots = [0.5 * (a1 + disc), 0.5 * (a1 - disc)];
    let dominant = if roots[0].norm() >= roots[1].norm() { roots[0] } else { roots[1] };
    if dominant.norm() == 0.0 {
        return None;
    }
    let step = stride as f64 * phi.dt;
    let lam = dominant.ln() / step;
    Some(TailMode {
        re: lam.re,
        im: lam.im.abs(),
        samples: xs.len(),
        step,
    })
}

pub fn classify(ctx: &WaveContext, phi: &WaveProfile) -> Result<ShapeReport> {
    let kappa = ctx.g.kappa();
    let tau = phi.tau();
    let floor = ZERO_REL * kappa;
    let resolved = RESOLVED_REL * kappa;
    let tau0 = phi.first_crossing(ctx.g.theta());
    let tau1 = first_maximum(phi).map(|(t, _)| t);
    let crossings = kappa_crossings(phi, kappa, floor);
    let ext = extrema(phi, floor);
    let lobe_list = lobes(phi, kappa, &crossings);

    let resolved_until = (0..phi.len())
        .rev()
        .find(|&i| (phi.values[i] - kappa).abs() > resolved)
        .map(|i| phi.t(i))
        .unwrap_or(phi.t_start);

    for w in crossings.windows(2) {
        if w[1] - w[0] < 2.0 * phi.dt {
            return Err(WaveError::Inconclusive(format!(
                "crossings of kappa at {} and {} are closer than two grid steps",
                w[0], w[1]
            )));
        }
    }

    let stride = (phi.delay_steps / 8).max(1);
    let first_node = phi.delay_steps;
    let mut sc_sequence = Vec::new();
    for i in (first_node..phi.len()).step_by(stride) {
        let t = phi.t(i);
        sc_sequence.push(ScSample {
            t,
            sc: sign_changes(ctx, phi, t)?,
        });
    }
    let sc_from = match (crossings.first(), tau1) {
        (Some(&a), Some(b)) => Some(a.max(b)),
        (Some(&a), None) => Some(a),
        _ => None,
    };
    let sc_values: Vec<usize> = match sc_from {
        Some(from) => sc_sequence
            .iter()
            .filter(|s| s.t >= from && s.t <= resolved_until)
            .map(|s| s.sc)
            .collect(),
        None => Vec::new(),
    };

    let min_slope = phi.derivatives().into_iter().fold(f64::INFINITY, f64::min);
    let tail_mode = tau1.and_then(|t1| fit_tail_mode(phi, kappa, t1 + tau, resolved_until));

    let classification = if min_slope >= -MONOTONE_TOL && crossings.is_empty() {
        Shape::Monotone
    } else {
        let span = resolved_until - tau1.unwrap_or(phi.t_start);
        let observable_oscillation = tail_mode
            .filter(|m| m.is_oscillatory() && std::f64::consts::PI / m.im <= span)
            .is_some();
        let final_segment = phi.t_end() - crossings.last().copied().unwrap_or(phi.t_start);
        if observable_oscillation {
            if crossings.len() < 2 {
                return Err(WaveError::Inconclusive(format!(
                    "tail fit has an oscillatory mode {:?} but only {} resolved crossing(s) of kappa",
                    tail_mode,
                    crossings.len()
                )));
            }
            if !sc_values.is_empty() && sc_values.iter().all(|&s| s == 1 || s == 2) {
                Shape::SlowlyOscillating
            } else {
                Shape::RapidlyOscillating
            }
        } else if final_segment >= FINAL_SEGMENT_DELAYS * tau {
            Shape::EventuallyMonotone
        } else {
            return Err(WaveError::Inconclusive(format!(
                "final one-signed stretch {final_segment} is shorter than {FINAL_SEGMENT_DELAYS} delays"
            )));
        }
    };

    Ok(ShapeReport {
        tau0,
        tau1,
        extrema: ext,
        sc_sequence,
        classification,
        crossings_of_kappa: crossings.len(),
        crossings,
        lobes: lobe_list,
        tail_mode,
        resolved_until,
        sc_from,
        sc_values,
    })
}

/// Structure of the leading part of a front.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadingEdgeReport {
    pub tau0: Option<f64>,
    pub tau1: Option<f64>,
    pub value_at_tau1: Option<f64>,
    /// `φ′ > 0` on `(−∞, τ₁)`.
    pub increasing_before_tau1: bool,
    /// `τ₁ < ∞` exactly when `φ(τ₁) > κ`; for `τ₁ = ∞`, `φ ≤ κ` throughout.
    pub finite_iff_above_kappa: bool,
    pub gap: Option<f64>,
    pub gap_holds: bool,
    pub holds: bool,
    pub details: Vec<String>,
}

/// `τ₀`, `τ₁` and the three leading-edge properties. The gap `τ₁ − τ₀ ≥ ch`
/// is tested with one grid step of slack.
pub fn check_leading_edge(ctx: &WaveContext, phi: &WaveProfile) -> LeadingEdgeReport {
    let kappa = ctx.g.kappa();
    let tau = phi.tau();
    let tau0 = phi.first_crossing(ctx.g.theta());
    let max = first_maximum(phi);
    let tau1 = max.map(|(t, _)| t);
    let value_at_tau1 = max.map(|(_, v)| v);
    let mut details = Vec::new();

    // skip the rounding-flat stretches at both ends
    let floor = ZERO_REL * ctx.g.g_theta();
    let cut = tau1.unwrap_or(f64::INFINITY) - phi.dt;
    let d = phi.derivatives();
    let bad = (0..phi.len()).find(|&i| {
        let v = phi.values[i];
        phi.t(i) < cut && v > floor && (v - kappa).abs() > ZERO_REL * kappa && d[i] <= 0.0
    });
    if let Some(i) = bad {
        details.push(format!("phi' = {:e} <= 0 at t = {} before tau1", d[i], phi.t(i)));
    }
    let increasing_before_tau1 = bad.is_none();

    let finite_iff_above_kappa = match value_at_tau1 {
        Some(v) => {
            let ok = v > kappa;
            if !ok {
                details.push(format!("phi(tau1) = {v} does not exceed kappa"));
            }
            ok
        }
        None => {
            let top = phi.max_value();
            let ok = top <= kappa + ZERO_REL * kappa;
            if !ok {
                details.push(format!("monotone profile exceeds kappa: max = {top}"));
            }
            ok
        }
    };

    let gap = match (tau0, tau1) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let gap_holds = match gap {
        Some(g) => {
            let ok = g >= tau - phi.dt;
            if !ok {
                details.push(format!("tau1 - tau0 = {g} is below ch = {tau}"));
            }
            ok
        }
        None => tau0.is_some(),
    };
    if tau0.is_none() {
        details.push("no crossing of theta".into());
    }

    LeadingEdgeReport {
        tau0,
        tau1,
        value_at_tau1,
        increasing_before_tau1,
        finite_iff_above_kappa,
        gap,
        gap_holds,
        holds: increasing_before_tau1 && finite_iff_above_kappa && gap_holds,
        details,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth::PiecewiseLinearBirth;
    use crate::spectrum::make_context;

    fn ctx(c: f64) -> WaveContext {
        make_context(&PiecewiseLinearBirth::reference(), 2.0, c).unwrap()
    }

    #[test]
    fn one_signed_window_has_no_changes() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::constant(0.73, 2.0, 0.53 + 1.0, -5.0, 5.0, 0.01).unwrap();
        assert_eq!(sign_changes(&ctx, &phi, 2.0).unwrap(), 0);
    }

    #[test]
    fn single_crossing_with_rising_slope() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::from_fn(0.73, 2.0, -5.0, 5.0, 0.01, |t| 0.53 + 0.1 * t).unwrap();
        assert_eq!(sign_changes(&ctx, &phi, 0.5).unwrap(), 1);
    }

    #[test]
    fn window_outside_domain() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::constant(0.73, 2.0, 0.5, -5.0, 5.0, 0.01).unwrap();
        assert!(matches!(sign_changes(&ctx, &phi, 6.0), Err(WaveError::OutOfRange { .. })));
        assert!(matches!(sign_changes(&ctx, &phi, -9.0), Err(WaveError::OutOfRange { .. })));
    }

    #[test]
    fn zeros_are_skipped() {
        assert_eq!(count_sign_changes(&[1.0, 0.0, -1.0, 1e-20, 2.0], 1e-15), 2);
        assert_eq!(count_sign_changes(&[0.0, 0.0], 1e-15), 0);
    }

    #[test]
    fn tail_mode_recovers_damped_cosine() {
        let (re, im) = (-0.4, 1.1);
        let phi = WaveProfile::from_fn(0.73, 2.0, 0.0, 20.0, 0.01, |t| {
            0.53 + (re * t).exp() * (im * t + 0.3).cos()
        })
        .unwrap();
        let m = fit_tail_mode(&phi, 0.53, 0.0, 20.0).unwrap();
        assert!((m.re - re).abs() < 1e-8 && (m.im - im).abs() < 1e-8, "{m:?}");
    }

    #[test]
    fn tail_mode_of_two_real_exponentials() {
        let phi = WaveProfile::from_fn(0.73, 2.0, 0.0, 15.0, 0.01, |t| {
            0.53 + 0.1 * (-1.3 * t).exp() - 0.05 * (-2.1 * t).exp()
        })
        .unwrap();
        let m = fit_tail_mode(&phi, 0.53, 0.0, 15.0).unwrap();
        assert!(!m.is_oscillatory());
        assert!((m.re + 1.3).abs() < 1e-6, "{m:?}");
    }

    #[test]
    fn synthetic_overshoot_is_eventually_monotone() {
        let ctx = ctx(0.73);
        // logistic rise plus a decaying bump, one maximum above kappa
        let phi = WaveProfile::from_fn(0.73, 2.0, -30.0, 40.0, 0.01, |t| {
            let base = 0.53 / (1.0 + (-(t - 1.0)).exp());
            base + 0.2 * (t / 2.0).tanh().max(0.0) * (-(t - 2.0).abs()).exp()
        })
        .unwrap();
        let r = classify(&ctx, &phi).unwrap();
        assert_eq!(r.classification, Shape::EventuallyMonotone);
        assert_eq!(r.maxima(), 1);
    }

    #[test]
    fn logistic_is_monotone() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::from_fn(0.73, 2.0, -30.0, 40.0, 0.01, |t| 0.53 / (1.0 + (-t).exp())).unwrap();
        let r = classify(&ctx, &phi).unwrap();
        assert_eq!(r.classification, Shape::Monotone);
        assert!(r.tau1.is_none());
        let p = check_leading_edge(&ctx, &phi);
        assert!(p.holds, "{p:?}");
    }

    #[test]
    fn short_gap_is_reported() {
        let ctx = ctx(0.73);
        // peak right after the theta crossing
        let phi = WaveProfile::from_fn(0.73, 2.0, -20.0, 30.0, 0.01, |t| {
            0.53 / (1.0 + (-4.0 * t).exp()) + 0.1 * (-(t - 0.4).powi(2) * 4.0).exp()
        })
        .unwrap();
        let p = check_leading_edge(&ctx, &phi);
        assert!(!p.gap_holds);
        assert!(!p.holds);
        assert!(p.gap.unwrap() < ctx.tau);
    }
}

//! Wavefront profiles as fixed points of the integral operator
//!
//! ```text
//! A(φ)(t) = (z₂ − z₁)⁻¹ [ ∫_{−∞}^t e^{z₁(t−s)} g(φ(s−τ)) ds + ∫_t^∞ e^{z₂(t−s)} g(φ(s−τ)) ds ]
//! ```
//!
//! with `τ = ch`. Profiles live on a uniform grid whose step divides `τ`, so
//! the delayed argument lands on grid nodes and `g(φ(s − τ))` is linear
//! between nodes except where `φ` crosses a kink of `g`. Every sub-integral is
//! therefore evaluated in closed form, and both integrals are accumulated by
//! one-pass recurrences. Outside the grid the profile follows analytic tails.

use serde::Serialize;

use crate::birth::PiecewiseLinearBirth;
use crate::error::{Result, WaveError};
use crate::expquad::{backward_weighted, forward_weighted, p0, p1};
use crate::spectrum::{self, Quasipolynomial, Rect, Regime, WaveContext};

/// `e`-folds separating the two left-tail modes between the fit nodes.
const FIT_DECADES: f64 = 10.0;

/// `(e^{Δu} − 1)/Δ`, tending to `u` as `Δ → 0`.
#[inline]
fn em1_over(delta: f64, u: f64) -> f64 {
    let x = delta * u;
    if x.abs() < 1e-8 {
        u * (1.0 + 0.5 * x)
    } else {
        x.exp_m1() / delta
    }
}

/// Model of `φ` for `t` left of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LeftTail {
    /// `a·e^{μ₂u} + b·(e^{μ₁u} − e^{μ₂u})/(μ₁ − μ₂)` with `u = t − origin`; the
    /// second basis function becomes `u·e^{μu}` when the rates coincide.
    Modes { mu_slow: f64, mu_fast: f64, origin: f64, a: f64, b: f64 },
    Constant { value: f64 },
}

impl LeftTail {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            LeftTail::Modes {
                mu_slow,
                mu_fast,
                origin,
                a,
                b,
            } => {
                let u = t - origin;
                (mu_slow * u).exp() * (a + b * em1_over(mu_fast - mu_slow, u))
            }
            LeftTail::Constant { value } => value,
        }
    }

    /// `∫_{−∞}^U e^{z(U−u)} φ(u) du` for `z < 0 < μ₂`.
    fn exp_integral(&self, z: f64, upper: f64) -> f64 {
        match *self {
            LeftTail::Modes {
                mu_slow,
                mu_fast,
                origin,
                a,
                b,
            } => {
                let d = mu_fast - mu_slow;
                let upper = upper - origin;
                let e = (mu_slow * upper).exp();
                let r2 = 1.0 / (mu_slow - z);
                let r1 = 1.0 / (mu_fast - z);
                e * (a * r2 + b * (em1_over(d, upper) * r1 - r1 * r2))
            }
            LeftTail::Constant { value } => value / (-z),
        }
    }

    /// Matches `v0` at `t0` (the origin) and `vj` at `tj`; drops the fast mode
    /// when the fit would make the tail negative far to the left.
    fn fit(mu_slow: f64, mu_fast: f64, t0: f64, v0: f64, tj: f64, vj: f64) -> LeftTail {
        let d = mu_fast - mu_slow;
        let s = tj - t0;
        let one = LeftTail::Modes {
            mu_slow,
            mu_fast,
            origin: t0,
            a: v0,
            b: 0.0,
        };
        if s <= 0.0 {
            return one;
        }
        let b = (vj * (-mu_slow * s).exp() - v0) / em1_over(d, s);
        // Asymptotic slow amplitude; at a double root the linear factor must not turn negative.
        let positive = if d > 0.0 { v0 - b / d > 0.0 } else { b <= 0.0 };
        if !b.is_finite() || !positive {
            return one;
        }
        LeftTail::Modes {
            mu_slow,
            mu_fast,
            origin: t0,
            a: v0,
            b,
        }
    }
}

/// `φ(t) = target + offset·e^{rate(t − R)}` for `t > R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RightTail {
    pub r: f64,
    pub target: f64,
    pub offset: f64,
    pub rate: f64,
}

impl RightTail {
    pub fn eval(&self, t: f64) -> f64 {
        if self.rate == 0.0 {
            self.target + self.offset
        } else {
            self.target + self.offset * (self.rate * (t - self.r)).exp()
        }
    }
}

/// Grid representation of a profile with analytic tails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveProfile {
    pub c: f64,
    pub h: f64,
    pub t_start: f64,
    pub dt: f64,
    /// Grid steps per delay: `τ = delay_steps·dt`.
    pub delay_steps: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub left_tail: LeftTail,
    pub right_tail: RightTail,
    pub iterations: usize,
    pub last_step: f64,
    pub residual: f64,
}

/// Step that divides `τ` exactly, not larger than `requested`.
pub fn aligned_step(tau: f64, requested: f64) -> (f64, usize) {
    if tau <= 0.0 {
        return (requested, 0);
    }
    let m = (tau / requested).ceil().max(1.0) as usize;
    (tau / m as f64, m)
}

impl WaveProfile {
    /// Profile on `[t_start, t_start + (n − 1)dt]` sampled from `f`, with the
    /// tails taken as constants at the end values.
    pub fn from_fn(c: f64, h: f64, t_start: f64, t_end: f64, dt_req: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(t_end > t_start && dt_req > 0.0 && c > 0.0 && h >= 0.0) {
            return Err(WaveError::InvalidConfig(format!(
                "bad grid [{t_start}, {t_end}] with step {dt_req}"
            )));
        }
        let (dt, m) = aligned_step(c * h, dt_req);
        let n = ((t_end - t_start) / dt).round() as usize + 1;
        let values: Vec<f64> = (0..n).map(|i| f(t_start + dt * i as f64)).collect();
        let (first, last) = (values[0], values[n - 1]);
        Ok(WaveProfile {
            c,
            h,
            t_start,
            dt,
            delay_steps: m,
            values,
            left_tail: LeftTail::Constant { value: first },
            right_tail: RightTail {
                r: t_start + dt * (n - 1) as f64,
                target: last,
                offset: 0.0,
                rate: 0.0,
            },
            iterations: 0,
            last_step: f64::NAN,
            residual: f64::NAN,
        })
    }

    pub fn constant(c: f64, h: f64, value: f64, t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        Self::from_fn(c, h, t_start, t_end, dt, |_| value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.c * self.h
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.t_start + self.dt * i as f64
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.t(i))
    }

    /// Linear interpolation on the grid, tails outside.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.t_start {
            return self.left_tail.eval(t);
        }
        let x = (t - self.t_start) / self.dt;
        let i = x.floor() as usize;
        if i + 1 >= self.len() {
            if i + 1 == self.len() && x - i as f64 == 0.0 {
                return self.values[i];
            }
            return self.right_tail.eval(t);
        }
        let w = x - i as f64;
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Central difference at node `i` (tails used beyond the ends).
    pub fn derivative(&self, i: usize) -> f64 {
        let t = self.t(i);
        let left = if i == 0 { self.eval(t - self.dt) } else { self.values[i - 1] };
        let right = if i + 1 == self.len() { self.eval(t + self.dt) } else { self.values[i + 1] };
        (right - left) / (2.0 * self.dt)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.derivative(i)).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Left-most time where the profile reaches `level` from below.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        let v = &self.values;
        if v[0] >= level {
            return None;
        }
        let i = v.iter().position(|&x| x >= level)?;
        let frac = (level - v[i - 1]) / (v[i] - v[i - 1]);
        Some(self.t(i - 1) + frac * self.dt)
    }

    fn refit_tails(&mut self, ctx: &WaveContext) {
        let n = self.len();
        self.left_tail = match self.left_tail {
            LeftTail::Constant { .. } => LeftTail::Constant { value: self.values[0] },
            LeftTail::Modes { mu_slow, mu_fast, .. } => {
                // Keep the fast mode resolvable at the second node.
                let gap = mu_fast - mu_slow;
                let mut span = if self.t_start < 0.0 { -0.5 * self.t_start } else { 0.25 * (n as f64) * self.dt };
                if gap > 0.0 {
                    span = span.min(FIT_DECADES / gap);
                }
                let j = ((span / self.dt).round() as usize).clamp(1, n - 1);
                LeftTail::fit(mu_slow, mu_fast, self.t_start, self.values[0], self.t(j), self.values[j])
            }
        };
        let _ = ctx;
        self.right_tail.r = self.t_end();
        self.right_tail.offset = self.values[n - 1] - self.right_tail.target;
    }

    /// Re-samples the profile so that its first θ-crossing sits at `t = 0`.
    fn normalized(&self, ctx: &WaveContext) -> Result<(WaveProfile, f64)> {
        let theta = ctx.g.theta();
        let shift = self.first_crossing(theta).ok_or_else(|| WaveError::NoConvergence {
            what: "profile iteration (front fell below theta)".into(),
            iterations: self.iterations,
            last_change: f64::NAN,
        })?;
        let mut out = self.clone();
        for i in 0..out.len() {
            out.values[i] = self.eval(self.t(i) + shift);
        }
        out.refit_tails(ctx);
        Ok((out, shift))
    }

    /// Rows `(t, φ, φ′)`.
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        (0..self.len())
            .map(|i| (self.t(i), self.values[i], self.derivative(i)))
            .collect()
    }
}

/// Affine piece of `g` containing `x` (0, 1, 2 or 3 for the zero clamp).
#[inline]
fn piece_index(g: &PiecewiseLinearBirth, x: f64) -> u8 {
    if x <= g.theta {
        0
    } else if x <= g.theta1 {
        1
    } else if x < g.zero_of_tail() {
        2
    } else {
        3
    }
}

/// Sub-pieces of a step on which `g(u)` is linear: `(start, end, g(u_start), g(u_end))`
/// with positions as fractions of the step.
fn split_step(g: &PiecewiseLinearBirth, ua: f64, ub: f64) -> ([(f64, f64, f64, f64); 4], usize) {
    let mut cuts = [0.0f64; 5];
    let mut nc = 1;
    for b in [g.theta, g.theta1, g.zero_of_tail()] {
        if (ua - b) * (ub - b) < 0.0 {
            cuts[nc] = (b - ua) / (ub - ua);
            nc += 1;
        }
    }
    cuts[1..nc].sort_by(f64::total_cmp);
    cuts[nc] = 1.0;
    let mut out = [(0.0, 0.0, 0.0, 0.0); 4];
    for k in 0..nc {
        let (fa, fb) = (cuts[k], cuts[k + 1]);
        let (xa, xb) = (ua + fa * (ub - ua), ua + fb * (ub - ua));
        out[k] = (fa, fb, g.value(xa), g.value(xb));
    }
    (out, nc)
}

/// `A(φ)` at every grid node.
pub fn apply_operator(ctx: &WaveContext, phi: &WaveProfile) -> Result<Vec<f64>> {
    let g = &ctx.g;
    let n = phi.len();
    let m = phi.delay_steps;
    let dt = phi.dt;
    let (z1, z2) = (ctx.z1, ctx.z2);
    if n < 2 {
        return Err(WaveError::InvalidConfig("profile grid needs two nodes".into()));
    }
    if (m as f64 * dt - ctx.tau).abs() > 1e-9 * (1.0 + ctx.tau) {
        return Err(WaveError::InvalidConfig(format!(
            "grid step {dt} does not divide the delay {}",
            ctx.tau
        )));
    }

    // delayed states u_i = φ(t_i − τ) for s = t_i, i = 0..n+m
    let mut u = Vec::with_capacity(n + m);
    for i in 0..m {
        u.push(phi.left_tail.eval(phi.t_start + dt * (i as f64 - m as f64)));
    }
    u.extend_from_slice(&phi.values);
    let f: Vec<f64> = u.iter().map(|&x| g.value(x)).collect();
    let seg: Vec<u8> = u.iter().map(|&x| piece_index(g, x)).collect();

    let upper = phi.t_start - ctx.tau;
    let i1_start = match phi.left_tail {
        LeftTail::Modes { mu_slow, .. } => {
            if mu_slow <= 0.0 {
                return Err(WaveError::TailDivergence(format!(
                    "left tail rate {mu_slow} is not positive"
                )));
            }
            let edge = phi.left_tail.eval(upper);
            if edge > g.theta || edge < 0.0 {
                return Err(WaveError::TailDivergence(format!(
                    "left tail value {edge} at t = {upper} leaves [0, theta]"
                )));
            }
            g.k1 * phi.left_tail.exp_integral(z1, upper)
        }
        LeftTail::Constant { value } => g.value(value) / (-z1),
    };

    let rt = phi.right_tail;
    let end_state = rt.target + rt.offset;
    let i2_end = if rt.rate == 0.0 || rt.offset == 0.0 {
        g.value(end_state) / z2
    } else {
        if rt.rate > 0.0 {
            return Err(WaveError::TailDivergence(format!("right tail rate {} > 0", rt.rate)));
        }
        let pa = piece_index(g, end_state);
        if pa != piece_index(g, rt.target) {
            return Err(WaveError::TailDivergence(format!(
                "right tail from {end_state} to {} crosses a kink of g",
                rt.target
            )));
        }
        let (a, b) = g.piece(rt.target);
        (a * rt.target + b) / z2 + a * rt.offset / (z2 - rt.rate)
    };

    // forward recurrence for the z₁ integral
    let e1 = (z1 * dt).exp();
    let (w0, w1) = (p0(z1, dt), p1(z1, dt) / dt);
    let mut i1 = vec![0.0; n];
    i1[0] = i1_start;
    for i in 0..n - 1 {
        let local = if seg[i] == seg[i + 1] {
            f[i + 1] * w0 + (f[i] - f[i + 1]) * w1
        } else {
            let (pieces, np) = split_step(g, u[i], u[i + 1]);
            pieces[..np]
                .iter()
                .map(|&(a, b, fa, fb)| {
                    (z1 * (1.0 - b) * dt).exp() * backward_weighted(z1, (b - a) * dt, fa, fb)
                })
                .sum()
        };
        i1[i + 1] = e1 * i1[i] + local;
    }

    // backward recurrence for the z₂ integral over nodes 0..n+m
    let total = n + m;
    let e2 = (-z2 * dt).exp();
    let (v0, v1) = (p0(-z2, dt), p1(-z2, dt) / dt);
    let mut i2 = i2_end;
    let mut out = vec![0.0; n];
    let scale = 1.0 / (z2 - z1);
    if total - 1 < n {
        out[total - 1] = (i1[total - 1] + i2) * scale;
    }
    for i in (0..total - 1).rev() {
        let local = if seg[i] == seg[i + 1] {
            f[i] * v0 + (f[i + 1] - f[i]) * v1
        } else {
            let (pieces, np) = split_step(g, u[i], u[i + 1]);
            pieces[..np]
                .iter()
                .map(|&(a, b, fa, fb)| {
                    (-z2 * a * dt).exp() * forward_weighted(-z2, (b - a) * dt, fa, fb)
                })
                .sum()
        };
        i2 = e2 * i2 + local;
        if i < n {
            out[i] = (i1[i] + i2) * scale;
        }
    }
    Ok(out)
}

/// `A(φ)` as a profile on the same grid, tails refitted to the new values.
pub fn integral_operator(ctx: &WaveContext, phi: &WaveProfile) -> Result<WaveProfile> {
    let values = apply_operator(ctx, phi)?;
    let mut out = phi.clone();
    out.values = values;
    out.refit_tails(ctx);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Left truncation; default `40/μ₂`.
    pub l: Option<f64>,
    /// Right truncation; default `40/|λ₁|`, or 60 above the upper critical speed.
    pub r: Option<f64>,
    /// Requested grid step; default `min(0.005, ch/200)`, snapped to divide `ch`.
    pub dt: Option<f64>,
    /// Stop once successive iterates differ by less than this in sup norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Shift of the initial logistic guess (it is renormalised anyway).
    pub seed_shift: f64,
    /// Skip the admissibility check on the context.
    pub force: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            l: None,
            r: None,
            dt: None,
            tol: 1e-12,
            max_iter: 20_000,
            seed_shift: 0.0,
            force: false,
        }
    }
}

pub fn default_dt(ctx: &WaveContext) -> f64 {
    0.005f64.min(ctx.tau / 200.0).max(1e-5)
}

fn residual_sup(ctx: &WaveContext, phi: &WaveProfile) -> Result<f64> {
    let a = apply_operator(ctx, phi)?;
    Ok(a.iter()
        .zip(&phi.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

fn initial_guess(ctx: &WaveContext, l: f64, r: f64, dt: f64, shift: f64) -> Result<WaveProfile> {
    let (kappa, theta, mu2) = (ctx.g.kappa(), ctx.g.theta(), ctx.mu2);
    let s0 = -(kappa / theta - 1.0).ln() / mu2 + shift;
    let mut p = WaveProfile::from_fn(ctx.c, ctx.h, -l, r, dt, |t| {
        kappa / (1.0 + (-mu2 * (t + s0)).exp())
    })?;
    p.left_tail = LeftTail::Modes {
        mu_slow: ctx.mu2,
        mu_fast: ctx.mu1,
        origin: -l,
        a: 0.0,
        b: 0.0,
    };
    p.right_tail = RightTail {
        r: p.t_end(),
        target: kappa,
        offset: 0.0,
        rate: ctx.lambda1.unwrap_or(0.0),
    };
    p.refit_tails(ctx);
    Ok(p)
}

fn iterate(ctx: &WaveContext, mut phi: WaveProfile, opts: &SolverOptions) -> Result<WaveProfile> {
    let neg_tol = opts.tol.max(1e-12);
    let mut step = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mut next = phi.clone();
        next.values = apply_operator(ctx, &phi)?;
        let (imin, vmin) = next
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if vmin < -neg_tol {
            return Err(WaveError::LossOfPositivity {
                min: vmin,
                t: next.t(imin),
            });
        }
        for v in next.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        next.iterations = it;
        next.refit_tails(ctx);
        let (norm, _) = next.normalized(ctx)?;
        step = norm
            .values
            .iter()
            .zip(&phi.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        phi = norm;
        phi.iterations = it;
        phi.last_step = step;
        if !step.is_finite() {
            break;
        }
        if step < opts.tol {
            phi.residual = residual_sup(ctx, &phi)?;
            return Ok(phi);
        }
    }
    Err(WaveError::NoConvergence {
        what: "profile iteration".into(),
        iterations: opts.max_iter,
        last_change: step,
    })
}

/// Extends the grid to the right, holding the last value.
fn extend_right(phi: &WaveProfile, new_r: f64) -> WaveProfile {
    let mut out = phi.clone();
    let extra = ((new_r - phi.t_end()) / phi.dt).ceil().max(0.0) as usize;
    let last = *phi.values.last().unwrap_or(&0.0);
    out.values.extend(std::iter::repeat_n(last, extra));
    out.right_tail.r = out.t_end();
    out
}

/// Solves `φ = A(φ)` with `φ(0) = θ`.
///
/// Iterates from a logistic ramp, translating after every sweep so that the
/// first θ-crossing sits at the origin. Tails are refitted every sweep: the
/// left one to the two leading-edge modes at the left end and at a node about
/// ten `e`-folds of their ratio further in, the right one to the decay towards
/// κ at rate `λ₁` (or held constant above the upper critical speed, where `R`
/// is extended until `|φ(R) − κ| < 1e-9`).
pub fn solve_profile(ctx: &WaveContext, opts: &SolverOptions) -> Result<WaveProfile> {
    if !opts.force {
        let chi0 = ctx.chi0();
        for mu in [ctx.mu1, ctx.mu2] {
            if !(mu > 0.0) || chi0.eval(mu).abs() > 1e-8 {
                return Err(WaveError::NotInDomain {
                    h: ctx.h,
                    c: ctx.c,
                    reason: "no positive real leading-edge rates".into(),
                });
            }
        }
    }
    let l = opts.l.unwrap_or(40.0 / ctx.mu2);
    let r = opts.r.unwrap_or(match ctx.lambda1 {
        Some(l1) => 40.0 / l1.abs(),
        None => 60.0,
    });
    let dt = opts.dt.unwrap_or_else(|| default_dt(ctx));
    if !(l > 0.0 && r > ctx.tau && dt > 0.0) {
        return Err(WaveError::InvalidConfig(format!(
            "need L > 0, R > ch and dt > 0 (L = {l}, R = {r}, dt = {dt})"
        )));
    }
    let seed = initial_guess(ctx, l, r, dt, opts.seed_shift)?;
    let mut phi = iterate(ctx, seed, opts)?;
    if ctx.regime == Regime::Oscillatory {
        let kappa = ctx.g.kappa();
        let mut extensions = 0;
        while (phi.values[phi.len() - 1] - kappa).abs() >= 1e-9 && extensions < 4 {
            let longer = extend_right(&phi, phi.t_end() * 1.5);
            let iters = phi.iterations;
            phi = iterate(ctx, longer, opts)?;
            phi.iterations += iters;
            extensions += 1;
        }
    }
    Ok(phi)
}

/// Solves starting from a given profile (its grid and tail kinds are kept).
pub fn solve_from(ctx: &WaveContext, start: WaveProfile, opts: &SolverOptions) -> Result<WaveProfile> {
    let mut start = start;
    start.refit_tails(ctx);
    let (norm, _) = start.normalized(ctx)?;
    iterate(ctx, norm, opts)
}

/// Context for running the solver below the minimal speed, where `χ₀` has no
/// positive real root: the leading-edge rates are replaced by the real part
/// of the complex zero of `χ₀` closest to the real axis.
pub fn forced_context(g: &PiecewiseLinearBirth, h: f64, c: f64) -> Result<WaveContext> {
    if let Ok(ctx) = spectrum::make_context(g, h, c) {
        return Ok(ctx);
    }
    let chi0 = Quasipolynomial::new(c, h, g.slope_at_zero());
    let rep = spectrum::complex_roots_in_rect(&chi0, Rect::new(1e-3, 10.0, 1e-3, 10.0))?;
    let z = rep
        .roots
        .into_iter()
        .min_by(|a, b| a.im.total_cmp(&b.im))
        .ok_or_else(|| WaveError::NotInDomain {
            h,
            c,
            reason: "chi_0 has no zero near the positive real axis".into(),
        })?;
    let chik = Quasipolynomial::new(c, h, g.slope_at_kappa());
    let (lo, hi) = chik.default_window();
    let roots = spectrum::real_roots(&chik, lo, hi)?;
    let neg: Vec<f64> = roots.iter().filter(|r| r.root < 0.0).map(|r| r.root).collect();
    let lambda3 = roots.iter().find(|r| r.root > 0.0).map(|r| r.root).unwrap_or(f64::NAN);
    let (z1, z2) = spectrum::base_roots(c);
    Ok(WaveContext {
        g: *g,
        h,
        c,
        tau: c * h,
        z1,
        z2,
        mu1: z.re,
        mu2: z.re,
        lambda1: neg.last().copied(),
        lambda2: neg.first().copied(),
        lambda3,
        regime: if neg.is_empty() {
            Regime::Oscillatory
        } else {
            Regime::Front
        },
    })
}

/// Sup over interior nodes of `|φ″ − cφ′ − φ + g(φ(t − ch))|` by central differences.
pub fn residual_ode(ctx: &WaveContext, phi: &WaveProfile) -> f64 {
    let v = &phi.values;
    let dt = phi.dt;
    let mut sup: f64 = 0.0;
    for i in 1..phi.len().saturating_sub(1) {
        let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dt * dt);
        let d1 = (v[i + 1] - v[i - 1]) / (2.0 * dt);
        let delayed = phi.eval(phi.t(i) - ctx.tau);
        let r = d2 - ctx.c * d1 - v[i] + ctx.g.value(delayed);
        sup = sup.max(r.abs());
    }
    sup
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRegime {
    DistinctRoots,
    DoubleRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCoefficients {
    pub regime: TailRegime,
    /// Weight of the slow mode, distinct-root case.
    pub p: Option<f64>,
    /// Linear coefficient, double-root case.
    pub q: Option<f64>,
    /// Admissible interval `(lower, upper]` for `p` or `q`.
    pub bounds: (f64, f64),
    /// Sharper upper bound for `q` in the double-root case.
    pub q_sharp_bound: Option<f64>,
    pub within_bounds: bool,
    /// Sup-norm misfit of the model on the fitting window.
    pub fit_error: f64,
}

/// Fits the leading-edge representation on `[−L, 0]`.
///
/// Distinct roots: `φ = p e^{μ₂t} + (θ − p) e^{μ₁t}`. Double root:
/// `φ = (θ − qt) e^{μt}`. Least squares is done in the `φ` scale, so the
/// nodes near `t = 0` carry the weight.
pub fn fit_tail(ctx: &WaveContext, phi: &WaveProfile, regime: TailRegime) -> Result<TailCoefficients> {
    let double = ctx.is_double_mu();
    match (regime, double) {
        (TailRegime::DistinctRoots, true) => {
            return Err(WaveError::RegimeMismatch(format!(
                "mu1 - mu2 = {:e} is below 1e-6; use the double-root fit",
                ctx.mu1 - ctx.mu2
            )))
        }
        (TailRegime::DoubleRoot, false) => {
            return Err(WaveError::RegimeMismatch(format!(
                "mu1 - mu2 = {:e} is not a double root",
                ctx.mu1 - ctx.mu2
            )))
        }
        _ => {}
    }
    let theta = ctx.g.theta();
    let (mu1, mu2, tau) = (ctx.mu1, ctx.mu2, ctx.tau);
    let idx: Vec<usize> = (0..phi.len()).filter(|&i| phi.t(i) <= 1e-12).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &idx {
        let t = phi.t(i);
        let (basis, y) = match regime {
            TailRegime::DistinctRoots => (
                (mu2 * t).exp() - (mu1 * t).exp(),
                phi.values[i] - theta * (mu1 * t).exp(),
            ),
            TailRegime::DoubleRoot => (-t * (mu1 * t).exp(), phi.values[i] - theta * (mu1 * t).exp()),
        };
        num += basis * y;
        den += basis * basis;
    }
    if den == 0.0 {
        return Err(WaveError::InvalidConfig("no grid nodes with t <= 0".into()));
    }
    let coef = num / den;
    let model = |t: f64| match regime {
        TailRegime::DistinctRoots => coef * (mu2 * t).exp() + (theta - coef) * (mu1 * t).exp(),
        TailRegime::DoubleRoot => (theta - coef * t) * (mu1 * t).exp(),
    };
    let fit_error = idx
        .iter()
        .map(|&i| (phi.values[i] - model(phi.t(i))).abs())
        .fold(0.0, f64::max);
    Ok(match regime {
        TailRegime::DistinctRoots => {
            let upper = mu1 * theta / (mu1 - mu2 * (-tau * (mu1 - mu2)).exp());
            TailCoefficients {
                regime,
                p: Some(coef),
                q: None,
                bounds: (theta, upper),
                q_sharp_bound: None,
                within_bounds: theta < coef && coef <= upper,
                fit_error,
            }
        }
        TailRegime::DoubleRoot => {
            let upper = mu1 * theta / (1.0 + mu1 * tau);
            let sharp = (theta - ctx.g.g_theta() * (-mu1 * tau).exp() / (1.0 + mu1 * mu1)) / tau;
            TailCoefficients {
                regime,
                p: None,
                q: Some(coef),
                bounds: (0.0, upper),
                q_sharp_bound: Some(sharp),
                within_bounds: 0.0 < coef && coef <= upper && coef <= sharp,
                fit_error,
            }
        }
    })
}

/// [`fit_tail`] with the regime chosen from the context.
pub fn estimate_tail_coeffs(ctx: &WaveContext, phi: &WaveProfile) -> Result<TailCoefficients> {
    let regime = if ctx.is_double_mu() {
        TailRegime::DoubleRoot
    } else {
        TailRegime::DistinctRoots
    };
    fit_tail(ctx, phi, regime)
}

/// First node after which the profile stops increasing, refined by a parabola
/// through the neighbouring nodes; `None` if the grid profile never decreases.
pub fn first_maximum(phi: &WaveProfile) -> Option<(f64, f64)> {
    let v = &phi.values;
    let i = (1..v.len() - 1).find(|&i| v[i] >= v[i - 1] && v[i] > v[i + 1])?;
    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
    let denom = a - 2.0 * b + c;
    let off = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let peak = b - 0.25 * (a - c) * off;
    Some((phi.t(i) + off * phi.dt, peak))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontInequalities {
    pub phi_at_tau: f64,
    pub gamma: f64,
    /// `φ(ch) ≥ γ(c) − tol`.
    pub lower_bound_holds: bool,
    pub exceeds_kappa: bool,
    pub max_abs_derivative: f64,
    pub derivative_bound: f64,
    pub derivative_bound_holds: bool,
    /// First maximum `τ₁`, `None` for a monotone profile.
    pub tau1: Option<f64>,
    pub increasing_before_tau1: bool,
    pub all_hold: bool,
}

/// Checks `φ(ch) ≥ γ(c)`, `|φ′| ≤ g(θ)/√(c² + 4)` and `φ′ > 0` before `τ₁`.
pub fn check_front_inequalities(ctx: &WaveContext, phi: &WaveProfile, tol: f64) -> Result<FrontInequalities> {
    let gamma = spectrum::gamma(&ctx.g, ctx.h, ctx.c)?;
    let phi_at_tau = phi.eval(ctx.tau);
    let dphi = phi.derivatives();
    let max_abs_derivative = dphi.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let derivative_bound = ctx.g.g_theta() / (ctx.c * ctx.c + 4.0).sqrt();
    let tau1 = first_maximum(phi).map(|(t, _)| t);
    let cut = tau1.unwrap_or(f64::INFINITY);
    // the far leading edge is flat to rounding; judge monotonicity where φ is resolvable
    let floor = 1e-12 * ctx.g.g_theta();
    let increasing_before_tau1 = (0..phi.len())
        .filter(|&i| phi.t(i) < cut - phi.dt && phi.values[i] > floor)
        .all(|i| dphi[i] > 0.0);
    let lower_bound_holds = phi_at_tau >= gamma - tol;
    let derivative_bound_holds = max_abs_derivative <= derivative_bound + tol;
    Ok(FrontInequalities {
        phi_at_tau,
        gamma,
        lower_bound_holds,
        exceeds_kappa: phi_at_tau > ctx.g.kappa(),
        max_abs_derivative,
        derivative_bound,
        derivative_bound_holds,
        tau1,
        increasing_before_tau1,
        all_hold: lower_bound_holds && derivative_bound_holds && increasing_before_tau1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::make_context;

    fn ctx(c: f64) -> WaveContext {
        make_context(&PiecewiseLinearBirth::reference(), 2.0, c).unwrap()
    }

    #[test]
    fn aligned_step_divides_delay() {
        let (dt, m) = aligned_step(1.46, 0.005);
        assert!((dt * m as f64 - 1.46).abs() < 1e-14);
        assert!(dt <= 0.005);
    }

    #[test]
    fn constant_kappa_is_fixed() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::constant(0.73, 2.0, 0.53, -10.0, 10.0, 0.01).unwrap();
        let a = apply_operator(&ctx, &phi).unwrap();
        for v in a {
            assert!((v - 0.53).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_is_fixed() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::constant(0.73, 2.0, 0.0, -10.0, 10.0, 0.01).unwrap();
        assert!(apply_operator(&ctx, &phi).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonpositive_left_rate_is_rejected() {
        let ctx = ctx(0.73);
        let mut phi = WaveProfile::constant(0.73, 2.0, 0.1, -10.0, 10.0, 0.01).unwrap();
        phi.left_tail = LeftTail::Modes {
            mu_slow: 0.0,
            mu_fast: 1.0,
            origin: 0.0,
            a: 0.1,
            b: 0.0,
        };
        assert!(matches!(
            apply_operator(&ctx, &phi),
            Err(WaveError::TailDivergence(_))
        ));
    }

    #[test]
    fn left_tail_integral_closed_form() {
        let tail = LeftTail::Modes {
            mu_slow: 0.7,
            mu_fast: 1.2,
            origin: -1.0,
            a: 0.3,
            b: -0.2,
        };
        let (z, u) = (-0.6, -3.0);
        // trapezoid on a long window
        let n = 400_000;
        let lo = u - 60.0;
        let h = (u - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += w * (z * (u - x)).exp() * tail.eval(x);
        }
        s *= h;
        assert!((tail.exp_integral(z, u) - s).abs() < 1e-9);
    }

    #[test]
    fn double_mode_tail_matches_limit() {
        let a = LeftTail::Modes {
            mu_slow: 0.9,
            mu_fast: 0.9,
            origin: 0.0,
            a: 0.3,
            b: 0.5,
        };
        let b = LeftTail::Modes {
            mu_slow: 0.9,
            mu_fast: 0.9 + 1e-9,
            origin: 0.0,
            a: 0.3,
            b: 0.5,
        };
        for t in [-20.0, -3.0, 0.0] {
            assert!((a.eval(t) - b.eval(t)).abs() < 1e-8);
            assert!((a.exp_integral(-0.5, t) - b.exp_integral(-0.5, t)).abs() < 1e-8);
        }
    }

    #[test]
    fn tail_fit_round_trip() {
        let ctx = ctx(0.73);
        let (theta, mu1, mu2) = (ctx.g.theta(), ctx.mu1, ctx.mu2);
        let p = 0.45;
        let phi = WaveProfile::from_fn(0.73, 2.0, -40.0, 5.0, 0.01, |t| {
            p * (mu2 * t).exp() + (theta - p) * (mu1 * t).exp()
        })
        .unwrap();
        let fit = estimate_tail_coeffs(&ctx, &phi).unwrap();
        assert!((fit.p.unwrap() - p).abs() < 1e-8);
        assert!(matches!(
            fit_tail(&ctx, &phi, TailRegime::DoubleRoot),
            Err(WaveError::RegimeMismatch(_))
        ));
    }

    #[test]
    fn ode_residual_of_equilibrium_is_zero() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::constant(0.73, 2.0, 0.53, -5.0, 5.0, 0.01).unwrap();
        assert!(residual_ode(&ctx, &phi) < 1e-12);
    }

    #[test]
    fn ode_residual_flags_rough_profile() {
        let ctx = ctx(0.73);
        let phi = WaveProfile::from_fn(0.73, 2.0, -5.0, 5.0, 0.01, |t| 0.3 + 0.2 * (7.0 * t).sin()).unwrap();
        assert!(residual_ode(&ctx, &phi) > 1.0);
    }

    #[test]
    fn derivative_bound_trivial_for_constant() {
        let phi = WaveProfile::constant(0.73, 2.0, 0.53, -5.0, 5.0, 0.01).unwrap();
        assert!(phi.derivatives().iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn coarse_solve_at_intermediate_speed() {
        let ctx = ctx(0.73);
        let opts = SolverOptions {
            dt: Some(0.01),
            tol: 1e-10,
            ..SolverOptions::default()
        };
        let phi = solve_profile(&ctx, &opts).unwrap();
        assert!(phi.eval(0.0) - ctx.g.theta() < 1e-9);
        assert!(phi.min_value() >= 0.0);
        let ineq = check_front_inequalities(&ctx, &phi, 1e-6).unwrap();
        assert!(ineq.all_hold, "{ineq:?}");
        assert!(ineq.exceeds_kappa);
    }

    #[test]
    fn solve_in_oscillatory_regime() {
        let ctx = ctx(0.8);
        assert_eq!(ctx.regime, Regime::Oscillatory);
        let opts = SolverOptions {
            dt: Some(0.01),
            tol: 1e-10,
            ..SolverOptions::default()
        };
        let phi = solve_profile(&ctx, &opts).unwrap();
        assert!(phi.residual < 1e-5, "{}", phi.residual);
        assert!((phi.eval(phi.t_end()) - ctx.g.kappa()).abs() < 1e-8);
        assert!(phi.max_value() > ctx.g.kappa());
    }

    #[test]
    fn left_fit_keeps_tail_positive() {
        // Data that would need a negative slow amplitude.
        let tail = LeftTail::fit(0.6, 1.3, -10.0, 1e-3, -5.0, 1e-1);
        for t in [-40.0, -20.0, -10.0] {
            assert!(tail.eval(t) > 0.0);
        }
        let exact = |t: f64| 0.2 * (0.6 * t).exp() + 0.1 * (1.3 * t).exp();
        let fit = LeftTail::fit(0.6, 1.3, -10.0, exact(-10.0), -3.0, exact(-3.0));
        for t in [-30.0, -12.0, -10.0] {
            assert!((fit.eval(t) - exact(t)).abs() < 1e-12 * exact(t).max(1e-300) + 1e-300);
        }
    }
}

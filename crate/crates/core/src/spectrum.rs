//! Characteristic quasipolynomials `χ(z) = z² − cz − 1 + k·e^{−zτ}`, `τ = ch`.
//!
//! Real roots are found exhaustively: `χ″ = 2 + kτ²e^{−zτ}` has at most one
//! zero, so `χ′` has at most two and `χ` is monotone between consecutive
//! zeros of `χ′`. Complex roots are counted with the argument principle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::birth::PiecewiseLinearBirth;
use crate::error::{Result, WaveError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quasipolynomial {
    pub c: f64,
    pub tau: f64,
    pub k: f64,
}

impl Quasipolynomial {
    pub fn new(c: f64, h: f64, k: f64) -> Self {
        Quasipolynomial { c, tau: c * h, k }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        z * z - self.c * z - 1.0 + self.k * (-z * self.tau).exp()
    }

    #[inline]
    pub fn d1(&self, z: f64) -> f64 {
        2.0 * z - self.c - self.k * self.tau * (-z * self.tau).exp()
    }

    #[inline]
    pub fn d2(&self, z: f64) -> f64 {
        2.0 + self.k * self.tau * self.tau * (-z * self.tau).exp()
    }

    #[inline]
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        z * z - self.c * z - 1.0 + self.k * (-z * self.tau).exp()
    }

    #[inline]
    pub fn d1_complex(&self, z: Complex64) -> Complex64 {
        2.0 * z - self.c - self.k * self.tau * (-z * self.tau).exp()
    }

    /// Real window that contains every real root for the parameter ranges in use.
    pub fn default_window(&self) -> (f64, f64) {
        (-20.0 / self.tau.max(1.0), 20.0 + self.c)
    }

    fn root_tol(z: f64) -> f64 {
        1e-10 * z.abs().powi(2).max(1.0)
    }
}

/// `z₁ < 0 < z₂` with `z² − cz − 1 = 0`.
pub fn base_roots(c: f64) -> (f64, f64) {
    let s = (c * c + 4.0).sqrt();
    let z2 = 0.5 * (c + s);
    (-1.0 / z2, z2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealRoot {
    pub root: f64,
    pub multiplicity: u32,
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Zeros of `χ′` in `[lo, hi]`, increasing.
fn critical_points(qp: &Quasipolynomial, lo: f64, hi: f64) -> Vec<f64> {
    let mut nodes = vec![lo];
    // χ″ vanishes only when kτ² < 0
    if qp.k < 0.0 && qp.tau > 0.0 {
        let z = (-qp.k * qp.tau * qp.tau / 2.0).ln() / qp.tau;
        if z > lo && z < hi {
            nodes.push(z);
        }
    }
    nodes.push(hi);
    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (qp.d1(a), qp.d1(b));
        if fa == 0.0 {
            out.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            out.push(bisect(|z| qp.d1(z), a, b));
        }
    }
    if qp.d1(hi) == 0.0 {
        out.push(hi);
    }
    out.dedup();
    out
}

/// All real zeros of `χ` in `[lo, hi]` with multiplicity.
pub fn real_roots(qp: &Quasipolynomial, lo: f64, hi: f64) -> Result<Vec<RealRoot>> {
    if !(lo < hi) {
        return Err(WaveError::WindowTooCoarse {
            lo,
            hi,
            reason: "empty window".into(),
        });
    }
    let crit = critical_points(qp, lo, hi);
    let mut roots = Vec::new();
    let mut touching = Vec::new();
    for &z in &crit {
        let v = qp.eval(z);
        if !v.is_finite() {
            return Err(WaveError::WindowTooCoarse {
                lo,
                hi,
                reason: format!("characteristic function overflows at {z}"),
            });
        }
        if v.abs() < Quasipolynomial::root_tol(z) {
            let mult = if qp.d2(z).abs() < 1e-8 { 3 } else { 2 };
            roots.push(RealRoot {
                root: z,
                multiplicity: mult,
            });
            touching.push(z);
        }
    }
    let mut nodes = vec![lo];
    nodes.extend(crit.iter().copied().filter(|&z| z > lo && z < hi));
    nodes.push(hi);
    let value = |z: f64| {
        if touching.contains(&z) {
            0.0
        } else {
            qp.eval(z)
        }
    };
    for (i, w) in nodes.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (value(a), value(b));
        if !fa.is_finite() || !fb.is_finite() {
            return Err(WaveError::WindowTooCoarse {
                lo,
                hi,
                reason: format!("characteristic function overflows on [{a}, {b}]"),
            });
        }
        if fa == 0.0 && i == 0 && !touching.contains(&a) {
            roots.push(RealRoot {
                root: a,
                multiplicity: 1,
            });
        }
        if fb == 0.0 {
            if !touching.contains(&b) {
                roots.push(RealRoot {
                    root: b,
                    multiplicity: 1,
                });
            }
            continue;
        }
        if fa != 0.0 && (fa < 0.0) != (fb < 0.0) {
            let r = bisect(|z| qp.eval(z), a, b);
            roots.push(RealRoot {
                root: r,
                multiplicity: 1,
            });
        }
    }
    roots.sort_by(|x, y| x.root.total_cmp(&y.root));
    roots.dedup_by(|x, y| x.root == y.root);
    Ok(roots)
}

/// Number of roots (with multiplicity) satisfying `pred`.
pub fn count_roots(roots: &[RealRoot], pred: impl Fn(f64) -> bool) -> u32 {
    roots
        .iter()
        .filter(|r| pred(r.root))
        .map(|r| r.multiplicity)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Two positive roots merge (`k > 1`); gives the minimal speed.
    PositiveDoubleRoot,
    /// Two negative roots merge (`k < 0`); gives the upper critical speed.
    NegativeDoubleRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tangency {
    pub c: f64,
    pub z: f64,
    pub newton_iterations: usize,
}

const SCAN_STEP: f64 = 0.01;
const SCAN_MAX: f64 = 50.0;

fn branch_count(k: f64, h: f64, c: f64, branch: Branch) -> Result<u32> {
    let qp = Quasipolynomial::new(c, h, k);
    let (lo, hi) = qp.default_window();
    let roots = real_roots(&qp, lo, hi)?;
    Ok(match branch {
        Branch::PositiveDoubleRoot => count_roots(&roots, |z| z > 0.0),
        Branch::NegativeDoubleRoot => count_roots(&roots, |z| z < 0.0),
    })
}

/// Speed at which two real roots of one sign merge.
///
/// A scan in `c` with step 0.01 brackets the change between 0 and 2 roots,
/// a few bisection steps shrink the bracket, and Newton on
/// `(χ, χ′) = 0` in the unknowns `(c, z)` finishes.
pub fn critical_speed(k: f64, h: f64, branch: Branch) -> Result<Tangency> {
    match branch {
        Branch::PositiveDoubleRoot if k <= 1.0 => {
            return Err(WaveError::NoTangency {
                k,
                h,
                reason: "positive branch needs k > 1".into(),
            })
        }
        Branch::NegativeDoubleRoot if k >= 0.0 => {
            return Err(WaveError::NoTangency {
                k,
                h,
                reason: "negative branch needs k < 0".into(),
            })
        }
        _ => {}
    }
    let has = |c: f64| -> Result<bool> { Ok(branch_count(k, h, c, branch)? >= 2) };
    let start = has(SCAN_STEP)?;
    let mut prev = SCAN_STEP;
    let mut bracket = None;
    let mut c = SCAN_STEP;
    while c < SCAN_MAX {
        c += SCAN_STEP;
        if has(c)? != start {
            bracket = Some((prev, c));
            break;
        }
        prev = c;
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(WaveError::NoTangency {
            k,
            h,
            reason: format!("root count never changes on (0, {SCAN_MAX}]"),
        });
    };
    for _ in 0..20 {
        let m = 0.5 * (a + b);
        if has(m)? == start {
            a = m;
        } else {
            b = m;
        }
    }
    // seed z with the critical point of χ′ between the merging roots
    let seed_c = if start { a } else { b };
    let qp = Quasipolynomial::new(seed_c, h, k);
    let (lo, hi) = qp.default_window();
    let crit = critical_points(&qp, lo, hi);
    let mut z = match branch {
        Branch::PositiveDoubleRoot => crit.iter().copied().filter(|&z| z > 0.0).fold(f64::NAN, f64::min),
        Branch::NegativeDoubleRoot => crit.iter().copied().filter(|&z| z < 0.0).fold(f64::NAN, f64::max),
    };
    if !z.is_finite() {
        return Err(WaveError::NoTangency {
            k,
            h,
            reason: "no critical point near the transition".into(),
        });
    }
    let mut c = 0.5 * (a + b);
    let mut last = f64::INFINITY;
    for it in 1..=100 {
        let tau = c * h;
        let e = (-z * tau).exp();
        let f1 = z * z - c * z - 1.0 + k * e;
        let f2 = 2.0 * z - c - k * tau * e;
        let j11 = -z - k * z * h * e;
        let j12 = 2.0 * z - c - k * tau * e;
        let j21 = -1.0 - k * h * e * (1.0 - z * tau);
        let j22 = 2.0 + k * tau * tau * e;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dc = (f1 * j22 - f2 * j12) / det;
        let dz = (j11 * f2 - j21 * f1) / det;
        c -= dc;
        z -= dz;
        last = dc.abs().max(dz.abs());
        if last < 1e-15 * (1.0 + c.abs().max(z.abs())) {
            return Ok(Tangency {
                c,
                z,
                newton_iterations: it,
            });
        }
    }
    if last < 1e-12 {
        return Ok(Tangency {
            c,
            z,
            newton_iterations: 100,
        });
    }
    Err(WaveError::NoConvergence {
        what: "tangency Newton iteration".into(),
        iterations: 100,
        last_change: last,
    })
}

/// Membership in the admissible region with the roots that decide it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainCheck {
    pub in_dl: bool,
    pub positive_roots_chi0: Vec<RealRoot>,
    pub negative_roots_chikappa: Vec<RealRoot>,
    pub reason: String,
}

/// `χ₀` (`k = g′(0)`) has two positive and `χ_κ` (`k = g′(κ)`) two negative
/// real roots, multiplicity counted.
pub fn in_domain_dl(g: &PiecewiseLinearBirth, h: f64, c: f64) -> Result<DomainCheck> {
    if !(h >= 0.0 && c > 0.0) {
        return Err(WaveError::NotInDomain {
            h,
            c,
            reason: "need h >= 0 and c > 0".into(),
        });
    }
    let chi0 = Quasipolynomial::new(c, h, g.slope_at_zero());
    let chik = Quasipolynomial::new(c, h, g.slope_at_kappa());
    let (lo0, hi0) = chi0.default_window();
    let (lok, hik) = chik.default_window();
    let pos: Vec<RealRoot> = real_roots(&chi0, lo0, hi0)?
        .into_iter()
        .filter(|r| r.root > 0.0)
        .collect();
    let neg: Vec<RealRoot> = real_roots(&chik, lok, hik)?
        .into_iter()
        .filter(|r| r.root < 0.0)
        .collect();
    let np = count_roots(&pos, |_| true);
    let nn = count_roots(&neg, |_| true);
    let in_dl = np == 2 && nn == 2;
    let reason = if in_dl {
        "two positive roots of chi_0 and two negative roots of chi_kappa".to_string()
    } else {
        format!("chi_0 has {np} positive roots, chi_kappa has {nn} negative roots")
    };
    Ok(DomainCheck {
        in_dl,
        positive_roots_chi0: pos,
        negative_roots_chikappa: neg,
        reason,
    })
}

/// Speeds in `[lo, hi]` where membership in the admissible region changes,
/// located by a scan with spacing `step` and bisection to `1e-10`.
pub fn membership_flips(g: &PiecewiseLinearBirth, h: f64, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && step > 0.0) {
        return Err(WaveError::InvalidConfig(format!("bad scan [{lo}, {hi}] step {step}")));
    }
    let inside = |c: f64| in_domain_dl(g, h, c).map(|d| d.in_dl);
    let n = ((hi - lo) / step).ceil() as usize;
    let mut flips = Vec::new();
    let mut a = lo;
    let mut fa = inside(a)?;
    for i in 1..=n {
        let b = (lo + i as f64 * step).min(hi);
        let fb = inside(b)?;
        if fa != fb {
            let (mut l, mut r) = (a, b);
            while r - l > 1e-10 {
                let m = 0.5 * (l + r);
                if inside(m)? == fa {
                    l = m;
                } else {
                    r = m;
                }
            }
            flips.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    Ok(flips)
}

/// `g(θ)/(1 + μ₁μ₂)`.
pub fn gamma(g: &PiecewiseLinearBirth, h: f64, c: f64) -> Result<f64> {
    let ctx = make_context(g, h, c)?;
    if ctx.regime != Regime::Front {
        return Err(WaveError::NotInDomain {
            h,
            c,
            reason: "chi_kappa has no negative real roots".into(),
        });
    }
    Ok(g.g_theta() / (1.0 + ctx.mu1 * ctx.mu2))
}

/// Closed-form lower bound `(1 + 1.53c²)/(2.55 + 1.53c²)` for the reference model.
pub fn gamma1(c: f64) -> f64 {
    let s = 1.53 * c * c;
    (1.0 + s) / (2.55 + s)
}

/// `(z₂ − z₁)/(z₂e^{−chz₁} − z₁e^{−chz₂})`, which lies in `[e^{−h}, 1]`.
pub fn xi(h: f64, c: f64) -> f64 {
    let (z1, z2) = base_roots(c);
    let tau = c * h;
    (z2 - z1) / (z2 * (-tau * z1).exp() - z1 * (-tau * z2).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Rect {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Self {
        Rect {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_lo, self.im_lo),
            Complex64::new(self.re_hi, self.im_lo),
            Complex64::new(self.re_hi, self.im_hi),
            Complex64::new(self.re_lo, self.im_hi),
        ]
    }

    fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_lo && z.re <= self.re_hi && z.im >= self.im_lo && z.im <= self.im_hi
    }

    fn size(&self) -> f64 {
        (self.re_hi - self.re_lo).max(self.im_hi - self.im_lo)
    }

    fn grown(&self, eps: f64) -> Self {
        Rect::new(self.re_lo - eps, self.re_hi + eps, self.im_lo - eps, self.im_hi + eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexRootReport {
    pub rect: Rect,
    /// Winding number of `χ` around the (possibly perturbed) contour.
    pub winding: usize,
    /// Refined zeros, repeated by multiplicity.
    pub roots: Vec<Complex64>,
}

const EDGE_POINTS: usize = 512;
const MAX_EDGE_POINTS: usize = 1 << 16;

/// `(1/2πi)∮ χ′/χ dz` by the composite trapezoid rule with `n` intervals per edge.
fn winding_integral(qp: &Quasipolynomial, rect: &Rect, n: usize) -> (f64, f64) {
    let corners = rect.corners();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut min_dist = f64::INFINITY;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let dz = (b - a) / n as f64;
        for j in 0..=n {
            let z = a + dz * j as f64;
            let f = qp.eval_complex(z);
            let df = qp.d1_complex(z);
            min_dist = min_dist.min(f.norm() / df.norm().max(1e-300));
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            sum += df / f * dz * w;
        }
    }
    let n_wind = (sum / Complex64::new(0.0, 2.0 * PI)).re;
    (n_wind, min_dist)
}

fn winding(qp: &Quasipolynomial, rect: &Rect) -> Result<(usize, f64)> {
    let mut n = EDGE_POINTS;
    let (mut prev, mut dist) = winding_integral(qp, rect, n);
    while n < MAX_EDGE_POINTS {
        n *= 2;
        let (cur, d) = winding_integral(qp, rect, n);
        dist = dist.min(d);
        if (cur - prev).abs() < 1e-3 && (cur - cur.round()).abs() < 1e-3 {
            return Ok((cur.round().max(0.0) as usize, dist));
        }
        prev = cur;
    }
    Err(WaveError::BoundaryZero {
        re_lo: rect.re_lo,
        re_hi: rect.re_hi,
        im_lo: rect.im_lo,
        im_hi: rect.im_hi,
    })
}

fn newton_complex(qp: &Quasipolynomial, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..60 {
        let f = qp.eval_complex(z);
        let df = qp.d1_complex(z);
        if df.norm() == 0.0 {
            return None;
        }
        let step = f / df;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    (qp.eval_complex(z).norm() < 1e-12 * (1.0 + z.norm_sqr())).then_some(z)
}

fn locate(qp: &Quasipolynomial, rect: Rect, count: usize, out: &mut Vec<Complex64>) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let center = Complex64::new(0.5 * (rect.re_lo + rect.re_hi), 0.5 * (rect.im_lo + rect.im_hi));
    if count == 1 {
        if let Some(z) = newton_complex(qp, center) {
            if rect.contains(z) {
                out.push(z);
                return Ok(());
            }
        }
    }
    if rect.size() < 1e-10 {
        // cluster of zeros below resolution: report the centre with multiplicity
        out.extend(std::iter::repeat_n(center, count));
        return Ok(());
    }
    // split slightly off-centre so that mid-lines avoid symmetric zeros
    let fr = 0.5 + 0.013_7 * std::f64::consts::SQRT_2;
    let fi = 0.5 - 0.011_3 * std::f64::consts::SQRT_2;
    let rm = rect.re_lo + fr * (rect.re_hi - rect.re_lo);
    let im = rect.im_lo + fi * (rect.im_hi - rect.im_lo);
    let subs = [
        Rect::new(rect.re_lo, rm, rect.im_lo, im),
        Rect::new(rm, rect.re_hi, rect.im_lo, im),
        Rect::new(rect.re_lo, rm, im, rect.im_hi),
        Rect::new(rm, rect.re_hi, im, rect.im_hi),
    ];
    let mut total = 0;
    let mut counts = [0usize; 4];
    for (i, s) in subs.iter().enumerate() {
        let (n, _) = winding(qp, s)?;
        counts[i] = n;
        total += n;
    }
    if total != count {
        return Err(WaveError::BoundaryZero {
            re_lo: rect.re_lo,
            re_hi: rect.re_hi,
            im_lo: rect.im_lo,
            im_hi: rect.im_hi,
        });
    }
    for (s, n) in subs.into_iter().zip(counts) {
        locate(qp, s, n, out)?;
    }
    Ok(())
}

/// Zeros of `χ` inside `rect`, counted by the argument principle and refined
/// by complex Newton after adaptive quadrisection.
///
/// If a zero lies close to the contour the rectangle is grown slightly (up to
/// three times) before giving up with [`WaveError::BoundaryZero`].
pub fn complex_roots_in_rect(qp: &Quasipolynomial, rect: Rect) -> Result<ComplexRootReport> {
    let mut r = rect;
    let mut attempt = 0;
    loop {
        let (n, dist) = match winding(qp, &r) {
            Ok(v) => v,
            Err(e) if attempt >= 3 => return Err(e),
            Err(_) => (0, 0.0),
        };
        if dist > 1e-6 {
            let mut roots = Vec::with_capacity(n);
            locate(qp, r, n, &mut roots)?;
            roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            return Ok(ComplexRootReport {
                rect: r,
                winding: n,
                roots,
            });
        }
        if attempt >= 3 {
            if dist > 1e-9 {
                let mut roots = Vec::with_capacity(n);
                locate(qp, r, n, &mut roots)?;
                return Ok(ComplexRootReport {
                    rect: r,
                    winding: n,
                    roots,
                });
            }
            return Err(WaveError::BoundaryZero {
                re_lo: r.re_lo,
                re_hi: r.re_hi,
                im_lo: r.im_lo,
                im_hi: r.im_hi,
            });
        }
        attempt += 1;
        r = rect.grown(1e-4 * attempt as f64 * (1.0 + rect.size()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `(h, c)` in the admissible region: the front converges to κ monotonically in the tail.
    Front,
    /// Speed above the upper critical value: `χ_κ` has no negative real roots.
    Oscillatory,
}

/// A fully resolved `(g, h, c)` instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveContext {
    pub g: PiecewiseLinearBirth,
    pub h: f64,
    pub c: f64,
    pub tau: f64,
    pub z1: f64,
    pub z2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: f64,
    pub regime: Regime,
}

impl WaveContext {
    pub fn chi0(&self) -> Quasipolynomial {
        Quasipolynomial::new(self.c, self.h, self.g.slope_at_zero())
    }

    pub fn chi_kappa(&self) -> Quasipolynomial {
        Quasipolynomial::new(self.c, self.h, self.g.slope_at_kappa())
    }

    pub fn is_double_mu(&self) -> bool {
        self.mu1 - self.mu2 < 1e-6
    }

    /// `(ρ₁, ρ₂) = (cμ₂, cμ₁)`, ordered `ρ₁ ≤ ρ₂`.
    pub fn rho(&self) -> (f64, f64) {
        (self.c * self.mu2, self.c * self.mu1)
    }
}

/// Resolves every root; errors if `χ₀` has fewer than two positive roots.
pub fn make_context(g: &PiecewiseLinearBirth, h: f64, c: f64) -> Result<WaveContext> {
    let dom = in_domain_dl(g, h, c)?;
    let (mu1, mu2) = match dom.positive_roots_chi0.as_slice() {
        [r] if r.multiplicity >= 2 => (r.root, r.root),
        [a, b] => (b.root, a.root),
        _ => {
            return Err(WaveError::NotInDomain {
                h,
                c,
                reason: format!(
                    "chi_0 has no pair of positive real roots ({})",
                    dom.reason
                ),
            })
        }
    };
    let (lambda1, lambda2) = match dom.negative_roots_chikappa.as_slice() {
        [r] if r.multiplicity >= 2 => (Some(r.root), Some(r.root)),
        [a, b] => (Some(b.root), Some(a.root)),
        [] => (None, None),
        other => {
            return Err(WaveError::NotInDomain {
                h,
                c,
                reason: format!("chi_kappa has an odd number of negative roots: {other:?}"),
            })
        }
    };
    let chik = Quasipolynomial::new(c, h, g.slope_at_kappa());
    let (_, hi) = chik.default_window();
    let lambda3 = real_roots(&chik, 0.0, hi)?
        .into_iter()
        .find(|r| r.root > 0.0)
        .map(|r| r.root)
        .ok_or_else(|| WaveError::NotInDomain {
            h,
            c,
            reason: "chi_kappa has no positive root".into(),
        })?;
    let (z1, z2) = base_roots(c);
    let regime = if lambda1.is_some() {
        Regime::Front
    } else {
        Regime::Oscillatory
    };
    Ok(WaveContext {
        g: *g,
        h,
        c,
        tau: c * h,
        z1,
        z2,
        mu1,
        mu2,
        lambda1,
        lambda2,
        lambda3,
        regime,
    })
}

/// Rightmost non-real zero of `χ_κ` with positive imaginary part in a window
/// around the origin, used as the oscillation mode.
pub fn dominant_complex_mode(ctx: &WaveContext) -> Result<Option<Complex64>> {
    let qp = ctx.chi_kappa();
    let im_hi = 8.0 * PI / ctx.tau.max(0.1);
    let rep = complex_roots_in_rect(&qp, Rect::new(-12.0, 2.0, 1e-3, im_hi))?;
    Ok(rep
        .roots
        .into_iter()
        .filter(|z| z.im > 1e-6)
        .max_by(|a, b| a.re.total_cmp(&b.re)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 2.0;

    fn g() -> PiecewiseLinearBirth {
        PiecewiseLinearBirth::reference()
    }

    #[test]
    fn base_roots_vieta() {
        assert_eq!(base_roots(0.0), (-1.0, 1.0));
        for c in [0.1, 0.75, 3.0, 40.0] {
            let (z1, z2) = base_roots(c);
            assert!((z1 * z2 + 1.0).abs() < 1e-12);
            assert!((z1 + z2 - c).abs() < 1e-12);
        }
        let (z1, z2) = base_roots(0.75);
        assert!((z1 + 0.693_000_468_164_691).abs() < 1e-12);
        assert!((z2 - 1.443_000_468_164_691).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficient_gives_quadratic_roots() {
        let qp = Quasipolynomial::new(0.75, H, 0.0);
        let roots = real_roots(&qp, -5.0, 5.0).unwrap();
        let (z1, z2) = base_roots(0.75);
        assert_eq!(roots.len(), 2);
        assert!((roots[0].root - z1).abs() < 1e-12 && (roots[1].root - z2).abs() < 1e-12);
    }

    #[test]
    fn chi0_above_minimal_speed() {
        let qp = Quasipolynomial::new(0.75, H, 3.0);
        let (lo, hi) = qp.default_window();
        let roots = real_roots(&qp, lo, hi).unwrap();
        let pos: Vec<_> = roots.iter().filter(|r| r.root > 0.0).collect();
        assert_eq!(pos.len(), 2);
        for r in pos {
            assert!(qp.eval(r.root).abs() < 1e-10);
        }
    }

    #[test]
    fn chikappa_three_roots() {
        let qp = Quasipolynomial::new(0.73, H, -0.25);
        let (lo, hi) = qp.default_window();
        let roots = real_roots(&qp, lo, hi).unwrap();
        assert_eq!(count_roots(&roots, |z| z < 0.0), 2);
        assert_eq!(count_roots(&roots, |z| z > 0.0), 1);
    }

    #[test]
    fn critical_speeds_reference() {
        let t = critical_speed(3.0, H, Branch::PositiveDoubleRoot).unwrap();
        assert!((t.c - 0.712_278_719_101_144).abs() < 1e-9);
        assert!((t.z - 0.926_802_216_351_805).abs() < 1e-9);
        let t2 = critical_speed(-0.25, H, Branch::NegativeDoubleRoot).unwrap();
        assert!((t2.c - 0.751_303_971_085_185).abs() < 1e-9);
        assert!((t2.z + 1.548_435_150_771_374).abs() < 1e-9);
    }

    #[test]
    fn critical_speed_without_delay() {
        let t = critical_speed(3.0, 0.0, Branch::PositiveDoubleRoot).unwrap();
        let c = 2.0 * 2f64.sqrt();
        assert!((t.c - c).abs() < 1e-10);
        assert!((t.z - c / 2.0).abs() < 1e-10);
    }

    #[test]
    fn wrong_branch_sign_is_rejected() {
        assert!(matches!(
            critical_speed(0.5, H, Branch::PositiveDoubleRoot),
            Err(WaveError::NoTangency { .. })
        ));
    }

    #[test]
    fn domain_membership() {
        let g = g();
        assert!(in_domain_dl(&g, H, 0.73).unwrap().in_dl);
        assert!(!in_domain_dl(&g, H, 0.70).unwrap().in_dl);
        let above = in_domain_dl(&g, H, 0.80).unwrap();
        assert!(!above.in_dl && above.negative_roots_chikappa.is_empty());
    }

    #[test]
    fn gamma_at_minimal_speed() {
        let t = critical_speed(3.0, H, Branch::PositiveDoubleRoot).unwrap();
        let gm = gamma(&g(), H, t.c).unwrap();
        assert!((gm - 1.0 / (1.0 + t.z * t.z)).abs() < 1e-6);
        assert!(gm > 0.53);
    }

    #[test]
    fn gamma1_formula() {
        assert!((gamma1(0.73) - 0.539_4).abs() < 1e-4);
    }

    #[test]
    fn xi_range() {
        assert_eq!(xi(0.0, 0.73), 1.0);
        for i in 0..40 {
            let c = 0.05 + 0.05 * i as f64;
            let v = xi(H, c);
            assert!(v >= (-H).exp() && v <= 1.0, "xi({c}) = {v}");
        }
    }

    #[test]
    fn no_complex_roots_without_delay_term() {
        let qp = Quasipolynomial::new(0.73, H, 0.0);
        let rep = complex_roots_in_rect(&qp, Rect::new(-3.0, 3.0, 0.5, 3.0)).unwrap();
        assert_eq!(rep.winding, 0);
        assert!(rep.roots.is_empty());
    }

    #[test]
    fn strip_below_two_pi_over_tau_is_empty() {
        let qp = Quasipolynomial::new(0.73, H, -0.25);
        let top = 2.0 * PI / qp.tau - 0.01;
        let rep = complex_roots_in_rect(&qp, Rect::new(-10.0, 0.0, 0.01, top)).unwrap();
        assert!(rep.roots.is_empty());
    }

    #[test]
    fn complex_pair_lies_left_of_lambda2() {
        let ctx = make_context(&g(), H, 0.73).unwrap();
        let qp = ctx.chi_kappa();
        let m = 4.0 * PI / qp.tau;
        let rep = complex_roots_in_rect(&qp, Rect::new(-10.0, 0.0, -m, m)).unwrap();
        assert_eq!(rep.winding, rep.roots.len());
        let complex: Vec<_> = rep.roots.iter().filter(|z| z.im.abs() > 1e-8).collect();
        assert_eq!(complex.len(), 2);
        for z in complex {
            assert!(z.re < ctx.lambda2.unwrap());
            assert!(qp.eval_complex(*z).norm() < 1e-10);
        }
    }

    #[test]
    fn context_invariants() {
        let ctx = make_context(&g(), H, 0.73).unwrap();
        assert!((ctx.z1 * ctx.z2 + 1.0).abs() < 1e-12);
        assert!(0.0 < ctx.mu2 && ctx.mu2 <= ctx.mu1);
        let (l1, l2) = (ctx.lambda1.unwrap(), ctx.lambda2.unwrap());
        assert!(l2 <= l1 && l1 < 0.0 && 0.0 < ctx.lambda3);
        let osc = make_context(&g(), H, 0.8).unwrap();
        assert_eq!(osc.regime, Regime::Oscillatory);
        assert!(osc.lambda1.is_none());
    }

    #[test]
    fn context_at_minimal_speed_has_double_root() {
        let t = critical_speed(3.0, H, Branch::PositiveDoubleRoot).unwrap();
        let ctx = make_context(&g(), H, t.c).unwrap();
        assert!(ctx.is_double_mu());
        assert!((ctx.mu1 - 0.926_8).abs() < 1e-3);
    }

    #[test]
    fn dominant_mode_above_upper_speed() {
        let ctx = make_context(&g(), H, 0.8).unwrap();
        let z = dominant_complex_mode(&ctx).unwrap().unwrap();
        assert!((z.re + 1.415_293_98).abs() < 1e-6);
        assert!((z.im - 0.368_997_86).abs() < 1e-6);
    }
}

//! Full acceptance table. Each criterion prints one PASS/FAIL line; the test
//! fails at the end if any line failed. Library results are cross-checked
//! against oracles written here from scratch.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefront_core::profile::{apply_operator, WaveProfile};
use wavefront_core::replication::{self, CriterionResult, ReplicationOptions};
use wavefront_core::shape;
use wavefront_core::spectrum::{make_context, WaveContext};
use wavefront_core::PiecewiseLinearBirth;

fn say(line: &str) {
    // bypasses the harness capture so the table lands in the log
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

/// `max_{z ∈ [lo, hi]} sign·χ(z)` for `χ(z) = z² − cz − 1 + k e^{−2cz}`, via dense scan and golden refinement.
fn chi_extreme(c: f64, k: f64, lo: f64, hi: f64, sign: f64) -> f64 {
    let chi = |z: f64| sign * (z * z - c * z - 1.0 + k * (-2.0 * c * z).exp());
    let n = 4000;
    let step = (hi - lo) / n as f64;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=n {
        let v = chi(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut a, mut b) = (lo + step * (best_i as f64 - 1.0), lo + step * (best_i as f64 + 1.0));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - r * (b - a);
        let x2 = a + r * (b - a);
        if chi(x1) > chi(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    chi(0.5 * (a + b)).max(best)
}

/// Bisection on the speed at which a real root of the requested sign appears or disappears.
fn oracle_speed(k: f64, positive_root: bool) -> f64 {
    let has_root = |c: f64| {
        if positive_root {
            chi_extreme(c, k, 1e-9, 10.0, -1.0) >= 0.0
        } else {
            chi_extreme(c, k, -10.0, -1e-9, 1.0) >= 0.0
        }
    };
    let (mut lo, mut hi) = (0.3, 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        // positive roots exist above c*; negative roots exist below c**
        if has_root(mid) == positive_root {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss10(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        s += w * (f(m - r * x) + f(m + r * x));
    }
    s * r
}

/// Exact up to rounding: on each piece the integrand is an exponential times a
/// linear function, so it is split at grid nodes and at every preimage of a kink of `g`.
fn operator_gauss(ctx: &WaveContext, phi: &WaveProfile, t: f64) -> f64 {
    let tau = ctx.tau;
    let lo = t - 45.0 / -ctx.z1;
    let hi = t + 45.0 / ctx.z2;
    let kinks = ctx.g.breakpoints();
    let mut cuts = vec![lo, hi, t];
    for i in 0..phi.len() {
        let s = phi.t(i) + tau;
        if s > lo && s < hi {
            cuts.push(s);
        }
        if i + 1 < phi.len() {
            let (a, b) = (phi.values[i], phi.values[i + 1]);
            for &k in &kinks {
                if (a - k) * (b - k) < 0.0 {
                    let s = phi.t(i) + tau + (k - a) / (b - a) * phi.dt;
                    if s > lo && s < hi {
                        cuts.push(s);
                    }
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let f = |s: f64| ctx.g.value(phi.eval(s - tau));
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let z = if b <= t { ctx.z1 } else { ctx.z2 };
        // long constant stretches get chopped so the exponential stays well resolved
        let pieces = (((b - a) * z.abs()).ceil() as usize).max(1);
        let h = (b - a) / pieces as f64;
        for j in 0..pieces {
            let (x0, x1) = (a + h * j as f64, a + h * (j + 1) as f64);
            total += gauss10(&|s| (z * (t - s)).exp() * f(s), x0, x1);
        }
    }
    total / (ctx.z2 - ctx.z1)
}

/// Longest chain of strictly alternating signs, greedy over runs.
fn alternations(values: &[f64], zero_tol: f64) -> usize {
    let mut last = 0.0f64;
    let mut n = 0;
    for &v in values {
        if v.abs() <= zero_tol {
            continue;
        }
        if last != 0.0 && v.signum() != last {
            n += 1;
        }
        last = v.signum();
    }
    n
}

fn with_oracle_speeds(mut r: CriterionResult) -> CriterionResult {
    let g = PiecewiseLinearBirth::reference();
    let cs = oracle_speed(g.slope_at_zero(), true);
    let css = oracle_speed(g.slope_at_kappa(), false);
    let ok = cs > 0.710 && cs < 0.714 && css > 0.749 && css < 0.753;
    r.notes.push(format!("independent scan: c* = {cs:.8}, c** = {css:.8}"));
    r.pass &= ok;
    let computed: Vec<f64> = r
        .checks
        .iter()
        .take(2)
        .map(|c| c.computed.parse::<f64>().unwrap_or(f64::NAN))
        .collect();
    let agree = (computed[0] - cs).abs() < 1e-5 && (computed[1] - css).abs() < 1e-5;
    r.notes.push(format!("library vs scan agree to 1e-5: {agree}"));
    r.pass &= agree;
    r
}

/// Larger positive root of `z² − cz − 1 + k₁e^{−2cz}` by plain bisection right of the minimum.
fn with_rho_oracle(mut r: CriterionResult) -> CriterionResult {
    let g = PiecewiseLinearBirth::reference();
    let css = oracle_speed(g.slope_at_kappa(), false);
    let chi = |z: f64| z * z - css * z - 1.0 + g.slope_at_zero() * (-2.0 * css * z).exp();
    let (mut a, mut b) = (0.927, 5.0);
    assert!(chi(a) < 0.0 && chi(b) > 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if chi(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let rho2 = css * 0.5 * (a + b);
    r.notes.push(format!("independent bisection: rho2(c**) = {rho2:.6}"));
    r
}

fn with_gauss_oracle(mut r: CriterionResult, seed: u64) -> CriterionResult {
    let g = PiecewiseLinearBirth::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let c = [0.72, 0.74, 0.78][k % 3];
        let ctx = make_context(&g, 2.0, c).unwrap();
        let phi = replication::random_profile(&ctx, &mut rng).unwrap();
        let a = apply_operator(&ctx, &phi).unwrap();
        for _ in 0..10 {
            let i = rng.gen_range(0..phi.len());
            worst = worst.max((a[i] - operator_gauss(&ctx, &phi, phi.t(i))).abs());
        }
    }
    r.notes.push(format!("Gauss–Legendre oracle max deviation {worst:.2e}"));
    r.pass &= worst <= 1e-10;
    r
}

fn with_alternation_oracle(mut r: CriterionResult, seed: u64) -> CriterionResult {
    let g = PiecewiseLinearBirth::reference();
    let ctx = make_context(&g, 2.0, 0.745).unwrap();
    let tol = shape::ZERO_REL * g.kappa();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..1000 {
        let phi = replication::random_segment_profile(&ctx, &mut rng).unwrap();
        let i = rng.gen_range(phi.delay_steps..phi.len());
        let t = phi.t(i);
        let lib = shape::sign_changes(&ctx, &phi, t).unwrap();
        let samples = shape::window_samples(&ctx, &phi, t).unwrap();
        if lib != alternations(&samples, tol) || lib != replication::sign_changes_exhaustive(&samples, tol) {
            bad += 1;
        }
    }
    r.notes.push(format!("run-count oracle mismatches: {bad} of 1000"));
    r.pass &= bad == 0;
    r
}

#[test]
fn acceptance() {
    let opts = ReplicationOptions::default();
    let mut failed = Vec::new();
    for id in 1..=15u8 {
        let mut r = replication::run_one(id, &opts).expect("criterion id");
        r = match id {
            1 => with_oracle_speeds(r),
            3 => with_rho_oracle(r),
            12 => with_gauss_oracle(r, 7),
            13 => with_alternation_oracle(r, 11),
            _ => r,
        };
        // the verdict may have changed after the extra oracle
        let mut line = r.line();
        if !r.pass && line.starts_with("PASS") {
            line.replace_range(0..4, "FAIL");
        }
        say(&line);
        for n in &r.notes {
            say(&format!("        {n}"));
        }
        if !r.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

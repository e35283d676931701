//! Exact integrals of `e^{zr}` against linear functions on `[0, D]`.

/// `∫₀^D e^{zr} dr`.
#[inline]
pub fn p0(z: f64, d: f64) -> f64 {
    let w = z * d;
    if w.abs() < 1e-5 {
        d * (1.0 + w * (0.5 + w / 6.0))
    } else {
        d * w.exp_m1() / w
    }
}

/// `∫₀^D r e^{zr} dr`.
#[inline]
pub fn p1(z: f64, d: f64) -> f64 {
    d * d * psi(z * d)
}

/// `(e^w(w − 1) + 1)/w² = Σ wⁿ/(n!(n + 2))`.
#[inline]
pub fn psi(w: f64) -> f64 {
    if w.abs() < 0.5 {
        let mut term = 1.0;
        let mut sum = 0.5;
        for n in 1..24 {
            term *= w / n as f64;
            sum += term / (n + 2) as f64;
        }
        sum
    } else {
        (w.exp() * (w - 1.0) + 1.0) / (w * w)
    }
}

/// `∫_p^q e^{z(q−s)} f(s) ds` for `f` linear from `fp` at `p` to `fq` at `q`.
#[inline]
pub fn backward_weighted(z: f64, d: f64, fp: f64, fq: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    fq * p0(z, d) + (fp - fq) * p1(z, d) / d
}

/// `∫_p^q e^{z(s−p)} f(s) ds` for `f` linear from `fp` at `p` to `fq` at `q`.
#[inline]
pub fn forward_weighted(z: f64, d: f64, fp: f64, fq: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    fp * p0(z, d) + (fq - fp) * p1(z, d) / d
}

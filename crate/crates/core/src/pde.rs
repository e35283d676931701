//! Explicit simulation of `u_t = u_xx − u + g(u(t − h, x))` on `[0, L]` with
//! Neumann ends.

use serde::{Deserialize, Serialize};

use crate::birth::PiecewiseLinearBirth;
use crate::error::{Result, WaveError};
use crate::profile::WaveProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub domain_length: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Time between stored snapshots.
    pub output_every: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            domain_length: 400.0,
            dx: 0.1,
            dt: 0.004,
            t_end: 300.0,
            output_every: 1.0,
        }
    }
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * r.max(1.0) && n >= 0.0).then_some(n as usize)
}

impl SimConfig {
    pub fn nodes(&self) -> usize {
        (self.domain_length / self.dx).round() as usize + 1
    }

    /// Largest stable step: `dt ≤ dx²/2` and `dt·(4/dx² + 1) ≤ 2`.
    pub fn max_dt(&self) -> f64 {
        let dx2 = self.dx * self.dx;
        (0.5 * dx2).min(2.0 * dx2 / (4.0 + dx2))
    }

    /// Checks the configuration and returns the delay in steps.
    pub fn validate(&self, h: f64) -> Result<usize> {
        let bad = |m: String| Err(WaveError::InvalidConfig(m));
        let vals = [self.domain_length, self.dx, self.dt, self.t_end, self.output_every, h];
        if vals.iter().any(|v| !v.is_finite()) {
            return bad("non-finite simulation parameter".into());
        }
        if self.dx <= 0.0 || self.dt <= 0.0 || self.t_end <= 0.0 || self.output_every <= 0.0 || h < 0.0 {
            return bad("steps, duration and output interval must be positive".into());
        }
        if self.domain_length < 4.0 * self.dx {
            return bad(format!("domain {} holds fewer than 5 nodes", self.domain_length));
        }
        if integer_ratio(self.domain_length, self.dx).is_none() {
            return bad(format!("dx = {} does not divide L = {}", self.dx, self.domain_length));
        }
        if self.dt > self.max_dt() {
            return bad(format!(
                "dt = {} exceeds the explicit stability limit {} for dx = {}",
                self.dt,
                self.max_dt(),
                self.dx
            ));
        }
        match integer_ratio(h, self.dt) {
            Some(m) if m >= 1 || h == 0.0 => Ok(m),
            _ => bad(format!("dt = {} does not divide h = {h}", self.dt)),
        }
    }
}

/// Snapshots of `u` on the spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeRecord {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub config: SimConfig,
    pub h: f64,
}

impl SpaceTimeRecord {
    pub fn final_state(&self) -> &[f64] {
        self.snapshots.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Rows `(t, x_f)` of the rightmost crossing of `level`.
    pub fn front_trace(&self, level: f64) -> Vec<(f64, Option<f64>)> {
        self.times
            .iter()
            .zip(&self.snapshots)
            .map(|(&t, u)| (t, front_position(&self.x, u, level)))
            .collect()
    }

    /// Values at the probe positions (nearest node) for every snapshot.
    pub fn probe_rows(&self, probes: &[f64]) -> Vec<Vec<f64>> {
        let dx = self.config.dx;
        let idx: Vec<usize> = probes
            .iter()
            .map(|&p| ((p / dx).round().max(0.0) as usize).min(self.x.len() - 1))
            .collect();
        self.times
            .iter()
            .zip(&self.snapshots)
            .map(|(&t, u)| std::iter::once(t).chain(idx.iter().map(|&i| u[i])).collect())
            .collect()
    }
}

/// Rightmost point where `u` falls from `≥ level` to `< level`.
pub fn front_position(x: &[f64], u: &[f64], level: f64) -> Option<f64> {
    let n = u.len();
    let j = (0..n).rev().find(|&j| u[j] >= level)?;
    if j + 1 == n {
        return None;
    }
    let (a, b) = (u[j], u[j + 1]);
    let frac = (a - level) / (a - b);
    Some(x[j] + frac * (x[j + 1] - x[j]))
}

/// Runs the explicit scheme from `history(s, x)` given on `s ∈ [−h, 0]`.
pub fn simulate(
    g: &PiecewiseLinearBirth,
    h: f64,
    config: &SimConfig,
    history: impl Fn(f64, f64) -> f64,
) -> Result<SpaceTimeRecord> {
    let m = config.validate(h)?;
    let n = config.nodes();
    let (dx, dt) = (config.dx, config.dt);
    let x: Vec<f64> = (0..n).map(|j| j as f64 * dx).collect();
    let top = g.g_theta();
    let limit = 2.0 * top;

    // ring of m + 1 levels; level k (time k·dt, k ≥ −m) lives in slot k mod (m + 1)
    let slots = m + 1;
    let slot = |k: i64| k.rem_euclid(slots as i64) as usize;
    let mut ring = vec![vec![0.0; n]; slots];
    for k in -(m as i64)..=0 {
        let s = k as f64 * dt;
        let level = &mut ring[slot(k)];
        for j in 0..n {
            let v = history(s, x[j]);
            if !(0.0..=top).contains(&v) {
                return Err(WaveError::OutOfRange {
                    context: format!("history value at s = {s}, x = {}", x[j]),
                    value: v,
                    lo: 0.0,
                    hi: top,
                });
            }
            level[j] = v;
        }
    }

    let steps = integer_ratio(config.t_end, dt).unwrap_or_else(|| (config.t_end / dt).ceil() as usize);
    let every = integer_ratio(config.output_every, dt).unwrap_or_else(|| (config.output_every / dt).round() as usize).max(1);
    let mut times = vec![0.0];
    let mut snapshots = vec![ring[slot(0)].clone()];
    let r = dt / (dx * dx);
    let mut next = vec![0.0; n];

    for step in 0..steps as i64 {
        let cur = &ring[slot(step)];
        let delayed = &ring[slot(step - m as i64)];
        for j in 0..n {
            let left = if j == 0 { cur[1] } else { cur[j - 1] };
            let right = if j + 1 == n { cur[n - 2] } else { cur[j + 1] };
            let u = cur[j];
            next[j] = u + r * (left - 2.0 * u + right) + dt * (g.value(delayed[j]) - u);
        }
        let t = (step + 1) as f64 * dt;
        if let Some((j, &v)) = next
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= limit))
        {
            return Err(WaveError::StabilityViolation { value: v, x: x[j], t });
        }
        // the oldest level is no longer needed once the new one exists
        let target = slot(step + 1);
        std::mem::swap(&mut ring[target], &mut next);
        if (step as usize + 1).is_multiple_of(every) || step as usize + 1 == steps {
            times.push(t);
            snapshots.push(ring[target].clone());
        }
    }

    Ok(SpaceTimeRecord {
        x,
        times,
        snapshots,
        config: *config,
        h,
    })
}

/// History `κ` on `[0, x₀)` and `0` beyond, constant in time.
pub fn step_history(value: f64, x0: f64) -> impl Fn(f64, f64) -> f64 {
    move |_, x| if x < x0 { value } else { 0.0 }
}

/// History of the traveling wave `φ(cs − (x − x₀))`.
pub fn profile_history(phi: &WaveProfile, x0: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    let c = phi.c;
    move |s, x| phi.eval(c * s - (x - x0)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontSpeed {
    pub speed: f64,
    pub intercept: f64,
    pub points: usize,
    pub level: f64,
    /// Root-mean-square deviation from the fitted line.
    pub rms: f64,
}

/// Least-squares slope of the front position over the last third of the run.
pub fn measure_front_speed(record: &SpaceTimeRecord, level: f64) -> Result<FrontSpeed> {
    let trace = record.front_trace(level);
    match trace.last() {
        Some((_, Some(_))) => {}
        _ => return Err(WaveError::FrontNotFormed { level }),
    }
    let t_end = trace.last().map(|p| p.0).unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|(t, _)| *t >= 2.0 * t_end / 3.0)
        .filter_map(|&(t, x)| x.map(|x| (t, x)))
        .collect();
    if pts.len() < 2 {
        return Err(WaveError::FrontNotFormed { level });
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    if stt == 0.0 {
        return Err(WaveError::FrontNotFormed { level });
    }
    let speed = stx / stt;
    let intercept = mx - speed * mt;
    let rms = (pts.iter().map(|p| (p.1 - intercept - speed * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Ok(FrontSpeed {
        speed,
        intercept,
        points: pts.len(),
        level,
        rms,
    })
}

/// Distance between the final state and the seeded wave moved by `c·t_end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeDrift {
    pub sup_error: f64,
    /// `sup_error / sup φ`.
    pub relative: f64,
    pub at_x: f64,
}

/// Compares the final snapshot with `φ(c·t_end − (x − x₀))`, skipping
/// `margin` space units at each end of the domain.
pub fn shape_drift(record: &SpaceTimeRecord, phi: &WaveProfile, x0: f64, margin: f64) -> ShapeDrift {
    let t = *record.times.last().unwrap_or(&0.0);
    let u = record.final_state();
    let mut worst = (0.0f64, 0.0);
    for (j, &x) in record.x.iter().enumerate() {
        if x < margin || x > record.config.domain_length - margin {
            continue;
        }
        let e = (u[j] - phi.eval(phi.c * t - (x - x0)).max(0.0)).abs();
        if e > worst.0 {
            worst = (e, x);
        }
    }
    ShapeDrift {
        sup_error: worst.0,
        relative: worst.0 / phi.max_value(),
        at_x: worst.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            domain_length: 20.0,
            dx: 0.1,
            dt: 0.004,
            t_end: 4.0,
            output_every: 1.0,
        }
    }

    #[test]
    fn equilibria_are_preserved() {
        let g = PiecewiseLinearBirth::reference();
        let rec = simulate(&g, 2.0, &small(), |_, _| g.kappa).unwrap();
        assert!(rec.final_state().iter().all(|&v| (v - g.kappa).abs() < 1e-12));
        let rec = simulate(&g, 2.0, &small(), |_, _| 0.0).unwrap();
        assert!(rec.final_state().iter().all(|&v| v == 0.0));
        assert!(matches!(
            measure_front_speed(&rec, g.theta),
            Err(WaveError::FrontNotFormed { .. })
        ));
    }

    #[test]
    fn config_checks() {
        let mut cfg = small();
        cfg.dt = 0.0051;
        assert!(matches!(cfg.validate(2.0), Err(WaveError::InvalidConfig(_))));
        cfg.dt = 0.003;
        assert!(matches!(cfg.validate(2.0), Err(WaveError::InvalidConfig(_))));
        cfg.dt = 0.004;
        assert_eq!(cfg.validate(2.0).unwrap(), 500);
        // dx²/2 itself is unstable because of the −u term
        cfg.dt = 0.005;
        assert!(cfg.validate(2.0).is_err());
    }

    #[test]
    fn history_out_of_range() {
        let g = PiecewiseLinearBirth::reference();
        assert!(matches!(
            simulate(&g, 2.0, &small(), |_, _| 1.5),
            Err(WaveError::OutOfRange { .. })
        ));
    }

    #[test]
    fn front_position_interpolates() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let u = [0.5, 0.5, 0.2, 0.0];
        assert!((front_position(&x, &u, 1.0 / 3.0).unwrap() - (1.0 + 0.5 / 0.9)).abs() < 1e-12);
        assert_eq!(front_position(&x, &[0.5; 4], 0.3), None);
    }

    #[test]
    fn heat_part_conserves_mass_with_neumann_ends() {
        // g ≡ u cancels the decay term below θ, leaving pure diffusion
        let g = PiecewiseLinearBirth::two_segment(1.0 + 1e-12, -0.5, 0.9).unwrap();
        let cfg = small();
        let rec = simulate(&g, 0.0, &cfg, |_, x| if (8.0..12.0).contains(&x) { 0.4 } else { 0.0 }).unwrap();
        let mass = |u: &[f64]| {
            let n = u.len();
            cfg.dx * (u.iter().sum::<f64>() - 0.5 * (u[0] + u[n - 1]))
        };
        let m0 = mass(&rec.snapshots[0]);
        let m1 = mass(rec.final_state());
        assert!((m1 - m0).abs() < 1e-9 * m0, "{m0} {m1}");
    }
}

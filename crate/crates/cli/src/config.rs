use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wavefront_core::birth::BirthSpec;
use wavefront_core::pde::SimConfig;
use wavefront_core::{PiecewiseLinearBirth, SolverOptions, WaveError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Solver(WaveError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(WaveError::InvalidConfig(_) | WaveError::InvalidGeometry(_) | WaveError::NotInDomain { .. }) => 2,
            CliError::Solver(_) | CliError::Failed(_) => 3,
        }
    }
}

impl From<WaveError> for CliError {
    fn from(e: WaveError) -> Self {
        CliError::Solver(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// `lo:hi:n`, inclusive ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SpeedRange {
    pub fn parse(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || CliError::Config(format!("--c-range expects lo:hi:n, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(SpeedRange {
            lo: parts[0].trim().parse().map_err(|_| bad())?,
            hi: parts[1].trim().parse().map_err(|_| bad())?,
            n: parts[2].trim().parse().map_err(|_| bad())?,
        })
    }

    pub fn points(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub l: Option<f64>,
    pub r: Option<f64>,
}

/// Contents of a `--model` file. A bare model block is accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: BirthSpec,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub c_range: Option<SpeedRange>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub pde: Option<SimConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: BirthSpec::from(&PiecewiseLinearBirth::reference()),
            h: Some(2.0),
            c: None,
            c_range: None,
            solver: SolverBlock::default(),
            pde: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        match serde_json::from_str::<RunConfig>(text) {
            Ok(cfg) => Ok(cfg),
            Err(full) => match serde_json::from_str::<BirthSpec>(text) {
                Ok(model) => Ok(RunConfig {
                    model,
                    ..RunConfig::default()
                }),
                Err(_) => Err(CliError::Config(full.to_string())),
            },
        }
    }

    /// Finite numbers everywhere, positive steps, sane ranges. Also builds `g`.
    pub fn validate(&self) -> CliResult<PiecewiseLinearBirth> {
        let m = &self.model;
        let mut nums = vec![("k1", m.k1), ("k2", m.k2), ("k3", m.k3), ("theta", m.theta), ("kappa", m.kappa)];
        nums.extend(self.h.map(|v| ("h", v)));
        nums.extend(self.c.map(|v| ("c", v)));
        nums.extend(self.solver.dt.map(|v| ("solver.dt", v)));
        nums.extend(self.solver.tol.map(|v| ("solver.tol", v)));
        nums.extend(self.solver.l.map(|v| ("solver.l", v)));
        nums.extend(self.solver.r.map(|v| ("solver.r", v)));
        if let Some(r) = self.c_range {
            nums.push(("c_range.lo", r.lo));
            nums.push(("c_range.hi", r.hi));
        }
        if let Some(p) = self.pde {
            nums.extend([
                ("pde.domain_length", p.domain_length),
                ("pde.dx", p.dx),
                ("pde.dt", p.dt),
                ("pde.t_end", p.t_end),
                ("pde.output_every", p.output_every),
            ]);
        }
        for (name, v) in &nums {
            if !v.is_finite() {
                return Err(CliError::Config(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [("h", self.h), ("c", self.c)] {
            if let Some(v) = v {
                if v < 0.0 || (name == "c" && v == 0.0) {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        for (name, v) in [("solver.dt", self.solver.dt), ("solver.tol", self.solver.tol)] {
            if let Some(v) = v {
                if v <= 0.0 {
                    return Err(CliError::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(r) = self.c_range {
            if r.lo <= 0.0 || r.hi < r.lo {
                return Err(CliError::Config(format!("c_range needs 0 < lo <= hi, got [{}, {}]", r.lo, r.hi)));
            }
        }
        Ok(m.build()?)
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(2.0)
    }

    pub fn speed(&self) -> CliResult<f64> {
        self.c.ok_or_else(|| CliError::Config("this command needs a speed (--c)".into()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        let d = SolverOptions::default();
        SolverOptions {
            dt: self.solver.dt,
            tol: self.solver.tol.unwrap_or(d.tol),
            max_iter: self.solver.max_iter.unwrap_or(d.max_iter),
            l: self.solver.l,
            r: self.solver.r,
            ..d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_model_block_is_accepted() {
        let cfg = RunConfig::from_json(r#"{"k1":3,"k2":-3,"k3":-0.25,"theta":0.3333333333333333,"kappa":0.53}"#).unwrap();
        assert_eq!(cfg.h(), 2.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = RunConfig::from_json(r#"{"model":{"k1":3,"k2":-3,"k3":-0.25,"theta":0.33,"kappa":0.53},"speed":1}"#);
        assert!(matches!(err, Err(CliError::Config(_))));
    }

    #[test]
    fn range_parsing() {
        let r = SpeedRange::parse("0.7:0.8:11").unwrap();
        assert_eq!(r.points().len(), 11);
        assert!((r.points()[10] - 0.8).abs() < 1e-15);
        assert!(SpeedRange::parse("0.7:0.8").is_err());
        assert!(SpeedRange::parse("0.7:0.8:0").unwrap().points().is_empty());
    }

    #[test]
    fn negative_step_fails_validation() {
        let mut cfg = RunConfig::default();
        cfg.solver.dt = Some(-1.0);
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        cfg.solver.dt = Some(f64::NAN);
        assert!(cfg.validate().is_err());
    }
}

//! `wavefront` command-line tool.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use wavefront_core::birth::{check_hypotheses, critical_secant_slope, HypothesisReport, SecantSlope};
use wavefront_core::error::WaveError;
use wavefront_core::maps::{check_ga, restrict_g, GaReport};
use wavefront_core::pde::{self, FrontSpeed, ShapeDrift, SimConfig};
use wavefront_core::profile::{check_front_inequalities, estimate_tail_coeffs, solve_profile, FrontInequalities, TailCoefficients};
use wavefront_core::replication::{self, CriterionResult, ReplicationOptions};
use wavefront_core::shape::{self, ShapeReport};
use wavefront_core::spectrum::{
    critical_speed, gamma, gamma1, in_domain_dl, make_context, membership_flips, Branch, DomainCheck, Regime, Tangency,
};
use wavefront_core::{io, PiecewiseLinearBirth};

use config::{CliError, CliResult, RunConfig, SpeedRange};

#[derive(Parser, Debug)]
#[command(name = "wavefront", version, about = "Traveling fronts of a delayed monostable reaction-diffusion equation")]
struct Cli {
    /// JSON run configuration (or a bare model block).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Speed grid as lo:hi:n.
    #[arg(long = "c-range", global = true)]
    c_range: Option<String>,
    #[arg(long = "out-dir", global = true)]
    out_dir: Option<PathBuf>,
    /// Fixed-point tolerance of the profile solver.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Requested profile grid step.
    #[arg(long = "grid-dt", global = true)]
    grid_dt: Option<f64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Characteristic roots and region membership at one speed.
    Spectrum,
    /// The two critical speeds for the delay.
    Speeds,
    /// Scan of region membership over a speed interval.
    Region,
    /// Solve, classify and write the profile.
    Profile,
    /// Solve and print the shape report.
    Classify,
    /// Hypotheses on g and global attractivity of g restricted to its invariant interval.
    #[command(alias = "verify-hypotheses")]
    GaCheck,
    /// Direct simulation of the delayed PDE.
    Pde {
        /// Seed with the solved profile at --c instead of a step.
        #[arg(long)]
        seed_profile: bool,
        /// Overrides the simulated time.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Spectrum, γ and shape over a speed grid.
    Sweep,
    /// Reproduce the reference-model results as a pass/fail table.
    #[command(name = "replicate-paper")]
    Replicate {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("WAVEFRONT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("WAVEFRONT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn resolve_config(cli: &Cli) -> CliResult<(RunConfig, PiecewiseLinearBirth)> {
    let mut cfg = match &cli.model {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.h.is_some() {
        cfg.h = cli.h;
    }
    if cli.c.is_some() {
        cfg.c = cli.c;
    }
    if let Some(r) = &cli.c_range {
        cfg.c_range = Some(SpeedRange::parse(r)?);
    }
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    if cli.tol.is_some() {
        cfg.solver.tol = cli.tol;
    }
    if cli.grid_dt.is_some() {
        cfg.solver.dt = cli.grid_dt;
    }
    let g = cfg.validate()?;
    Ok((cfg, g))
}

/// Ignores a closed pipe instead of panicking.
fn out(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn emit<T: Serialize>(cli: &Cli, value: &T) -> CliResult<()> {
    if !cli.quiet {
        let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        out(&s);
    }
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("wavefront-out"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn run(cli: &Cli) -> CliResult<u8> {
    if let Command::Replicate { only } = &cli.command {
        return cmd_replicate(cli, only);
    }
    let (cfg, g) = resolve_config(cli)?;
    match &cli.command {
        Command::Spectrum => emit(cli, &spectrum_report(&g, cfg.h(), cfg.speed()?)?),
        Command::Speeds => emit(cli, &speeds_report(&g, cfg.h())?),
        Command::Region => emit(cli, &region_report(&g, &cfg)?),
        Command::Profile => cmd_profile(cli, &cfg, &g, true),
        Command::Classify => cmd_profile(cli, &cfg, &g, false),
        Command::GaCheck => emit(cli, &ga_report(&g)?),
        Command::Pde { seed_profile, t_end } => cmd_pde(cli, &cfg, &g, *seed_profile, *t_end),
        Command::Sweep => return cmd_sweep(cli, &cfg, &g),
        Command::Replicate { .. } => unreachable!(),
    }?;
    Ok(0)
}

#[derive(Serialize)]
struct RootsBlock {
    tau: f64,
    z1: f64,
    z2: f64,
    mu1: f64,
    mu2: f64,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    lambda3: f64,
    rho1: f64,
    rho2: f64,
    regime: Regime,
    gamma: Option<f64>,
    gamma1: Option<f64>,
}

#[derive(Serialize)]
struct SpectrumReport {
    h: f64,
    c: f64,
    in_dl: bool,
    domain: DomainCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    roots: Option<RootsBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn is_reference(g: &PiecewiseLinearBirth, h: f64) -> bool {
    *g == PiecewiseLinearBirth::reference() && h == replication::REFERENCE_H
}

fn spectrum_report(g: &PiecewiseLinearBirth, h: f64, c: f64) -> CliResult<SpectrumReport> {
    let domain = in_domain_dl(g, h, c)?;
    let (roots, note) = match make_context(g, h, c) {
        Ok(ctx) => {
            let (rho1, rho2) = ctx.rho();
            let roots = RootsBlock {
                tau: ctx.tau,
                z1: ctx.z1,
                z2: ctx.z2,
                mu1: ctx.mu1,
                mu2: ctx.mu2,
                lambda1: ctx.lambda1,
                lambda2: ctx.lambda2,
                lambda3: ctx.lambda3,
                rho1,
                rho2,
                regime: ctx.regime,
                gamma: gamma(g, h, c).ok(),
                gamma1: is_reference(g, h).then(|| gamma1(c)),
            };
            (Some(roots), None)
        }
        Err(e @ WaveError::NotInDomain { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    Ok(SpectrumReport {
        h,
        c,
        in_dl: domain.in_dl,
        domain,
        roots,
        note,
    })
}

#[derive(Serialize)]
struct SpeedsReport {
    h: f64,
    c_star: Tangency,
    c_star_star: Tangency,
}

fn speeds_report(g: &PiecewiseLinearBirth, h: f64) -> CliResult<SpeedsReport> {
    Ok(SpeedsReport {
        h,
        c_star: critical_speed(g.slope_at_zero(), h, Branch::PositiveDoubleRoot)?,
        c_star_star: critical_speed(g.slope_at_kappa(), h, Branch::NegativeDoubleRoot)?,
    })
}

#[derive(Serialize)]
struct RegionReport {
    h: f64,
    lo: f64,
    hi: f64,
    step: f64,
    flips: Vec<f64>,
    inside: Vec<(f64, f64)>,
}

fn region_report(g: &PiecewiseLinearBirth, cfg: &RunConfig) -> CliResult<RegionReport> {
    let h = cfg.h();
    let r = cfg.c_range.unwrap_or(SpeedRange { lo: 0.2, hi: 2.0, n: 3601 });
    if r.n < 2 || r.hi <= r.lo {
        return Err(CliError::Config("region needs a c-range with n >= 2 and hi > lo".into()));
    }
    let step = (r.hi - r.lo) / (r.n - 1) as f64;
    let flips = membership_flips(g, h, r.lo, r.hi, step)?;
    let mut edges = vec![r.lo];
    edges.extend(&flips);
    edges.push(r.hi);
    let mut inside = Vec::new();
    for w in edges.windows(2) {
        if in_domain_dl(g, h, 0.5 * (w[0] + w[1]))?.in_dl {
            inside.push((w[0], w[1]));
        }
    }
    Ok(RegionReport {
        h,
        lo: r.lo,
        hi: r.hi,
        step,
        flips,
        inside,
    })
}

#[derive(Serialize)]
struct ProfileSummary {
    c: f64,
    h: f64,
    grid_dt: f64,
    t_start: f64,
    t_end: f64,
    iterations: usize,
    residual: f64,
    max_value: f64,
    shape: ShapeReport,
    inequalities: Option<FrontInequalities>,
    tail: Option<TailCoefficients>,
    files: Vec<PathBuf>,
}

const GNUPLOT: &str = "set datafile separator ','
set key off
set xlabel 't'
set ylabel 'phi'
plot 'profile.csv' using 1:2 skip 1 with lines lw 2, KAPPA with lines dt 2
";

fn cmd_profile(cli: &Cli, cfg: &RunConfig, g: &PiecewiseLinearBirth, write: bool) -> CliResult<()> {
    let (h, c) = (cfg.h(), cfg.speed()?);
    let ctx = make_context(g, h, c)?;
    let phi = solve_profile(&ctx, &cfg.solver_options())?;
    let report = shape::classify(&ctx, &phi)?;
    let inequalities = match ctx.regime {
        Regime::Front => Some(check_front_inequalities(&ctx, &phi, 1e-6)?),
        Regime::Oscillatory => None,
    };
    let tail = estimate_tail_coeffs(&ctx, &phi).ok();
    let mut files = Vec::new();
    if write {
        let dir = out_dir(cfg)?;
        let p = dir.join("profile.csv");
        io::write_profile_csv(&p, &phi)?;
        files.push(p);
        let p = dir.join("extrema.csv");
        io::write_extrema_csv(&p, &report)?;
        files.push(p);
        let p = dir.join("profile.gp");
        std::fs::write(&p, GNUPLOT.replace("KAPPA", &format!("{}", g.kappa())))
            .map_err(|e| CliError::Failed(e.to_string()))?;
        files.push(p);
    }
    let summary = ProfileSummary {
        c,
        h,
        grid_dt: phi.dt,
        t_start: phi.t_start,
        t_end: phi.t_end(),
        iterations: phi.iterations,
        residual: phi.residual,
        max_value: phi.max_value(),
        shape: report,
        inequalities,
        tail,
        files,
    };
    if write {
        let p = out_dir(cfg)?.join("shape.json");
        io::write_json(&p, &summary)?;
    }
    emit(cli, &summary)
}

#[derive(Serialize)]
struct HypothesesReport {
    hypotheses: HypothesisReport,
    secant_slope: SecantSlope,
    ga: GaReport,
}

fn ga_report(g: &PiecewiseLinearBirth) -> CliResult<HypothesesReport> {
    Ok(HypothesesReport {
        hypotheses: check_hypotheses(g),
        secant_slope: critical_secant_slope(g),
        ga: check_ga(&restrict_g(g)?),
    })
}

#[derive(Serialize)]
struct PdeReport {
    config: SimConfig,
    h: f64,
    initial: &'static str,
    speed: Option<FrontSpeed>,
    drift: Option<ShapeDrift>,
    files: Vec<PathBuf>,
}

fn cmd_pde(cli: &Cli, cfg: &RunConfig, g: &PiecewiseLinearBirth, seeded: bool, t_end: Option<f64>) -> CliResult<()> {
    let h = cfg.h();
    let mut sim = cfg.pde.unwrap_or_default();
    if let Some(t) = t_end {
        sim.t_end = t;
    }
    let dir = out_dir(cfg)?;
    let (record, drift) = if seeded {
        let ctx = make_context(g, h, cfg.speed()?)?;
        let phi = solve_profile(&ctx, &cfg.solver_options())?;
        let x0 = 0.25 * sim.domain_length;
        let rec = pde::simulate(g, h, &sim, pde::profile_history(&phi, x0))?;
        let d = pde::shape_drift(&rec, &phi, x0, 5.0);
        (rec, Some(d))
    } else {
        (pde::simulate(g, h, &sim, pde::step_history(g.kappa(), 20.0))?, None)
    };
    let speed = pde::measure_front_speed(&record, g.theta()).ok();
    let mut files = Vec::new();
    let p = dir.join("front.csv");
    io::write_front_trace_csv(&p, &record, g.theta())?;
    files.push(p);
    let probes: Vec<f64> = (1..=7).map(|i| sim.domain_length * i as f64 / 8.0).collect();
    let p = dir.join("snapshots.csv");
    io::write_snapshots_csv(&p, &record, &probes)?;
    files.push(p);
    let report = PdeReport {
        config: sim,
        h,
        initial: if seeded { "profile" } else { "step" },
        speed,
        drift,
        files,
    };
    io::write_json(&dir.join("pde.json"), &report)?;
    emit(cli, &report)
}

#[derive(Serialize)]
struct SweepRow {
    c: f64,
    in_dl: Option<bool>,
    gamma: Option<f64>,
    gamma1: Option<f64>,
    shape: Option<String>,
    maxima: Option<usize>,
    crossings: Option<usize>,
    residual: Option<f64>,
    error: Option<String>,
}

fn sweep_row(g: &PiecewiseLinearBirth, cfg: &RunConfig, c: f64, reference: bool) -> SweepRow {
    let h = cfg.h();
    let mut row = SweepRow {
        c,
        in_dl: None,
        gamma: None,
        gamma1: reference.then(|| gamma1(c)),
        shape: None,
        maxima: None,
        crossings: None,
        residual: None,
        error: None,
    };
    let body = |row: &mut SweepRow| -> Result<(), WaveError> {
        row.in_dl = Some(in_domain_dl(g, h, c)?.in_dl);
        let ctx = make_context(g, h, c)?;
        if ctx.regime == Regime::Front {
            row.gamma = Some(gamma(g, h, c)?);
        }
        let phi = solve_profile(&ctx, &cfg.solver_options())?;
        row.residual = Some(phi.residual);
        let rep = shape::classify(&ctx, &phi)?;
        row.shape = Some(
            serde_json::to_value(rep.classification)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        );
        row.maxima = Some(rep.maxima());
        row.crossings = Some(rep.crossings_of_kappa);
        Ok(())
    };
    if let Err(e) = body(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    let mut s = String::from("c,in_dl,gamma,gamma1,shape,maxima,crossings,residual,status\n");
    for r in rows {
        s.push_str(&format!(
            "{:.12},{},{},{},{},{},{},{},{}\n",
            r.c,
            r.in_dl.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.gamma),
            opt(r.gamma1),
            r.shape.clone().unwrap_or_default(),
            r.maxima.map(|v| v.to_string()).unwrap_or_default(),
            r.crossings.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.residual),
            match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
            },
        ));
    }
    std::fs::write(path, s).map_err(|e| CliError::Failed(e.to_string()))
}

#[derive(Serialize)]
struct SweepSummary {
    rows: usize,
    succeeded: usize,
    file: PathBuf,
}

fn cmd_sweep(cli: &Cli, cfg: &RunConfig, g: &PiecewiseLinearBirth) -> CliResult<u8> {
    let range = cfg
        .c_range
        .ok_or_else(|| CliError::Config("sweep needs --c-range lo:hi:n".into()))?;
    let cs = range.points();
    if cs.is_empty() {
        return Err(CliError::Config("empty speed range".into()));
    }
    let reference = is_reference(g, cfg.h());
    let rows: Vec<SweepRow> = cs.par_iter().map(|&c| sweep_row(g, cfg, c, reference)).collect();
    let dir = out_dir(cfg)?;
    let file = dir.join("sweep.csv");
    write_sweep_csv(&file, &rows)?;
    let succeeded = rows.iter().filter(|r| r.error.is_none()).count();
    emit(
        cli,
        &SweepSummary {
            rows: rows.len(),
            succeeded,
            file,
        },
    )?;
    Ok(if 10 * succeeded >= 9 * rows.len() { 0 } else { 3 })
}

fn cmd_replicate(cli: &Cli, only: &[u8]) -> CliResult<u8> {
    let opts = ReplicationOptions {
        front_dt: cli.grid_dt.unwrap_or(ReplicationOptions::default().front_dt),
        ..ReplicationOptions::default()
    };
    let ids: Vec<u8> = if only.is_empty() { (1..=15).collect() } else { only.to_vec() };
    let mut results: Vec<CriterionResult> = Vec::new();
    for id in ids {
        let r = replication::run_one(id, &opts).ok_or_else(|| CliError::Config(format!("no criterion {id}")))?;
        if !cli.quiet {
            out(&r.line());
            for n in &r.notes {
                out(&format!("        {n}"));
            }
        }
        results.push(r);
    }
    if let Some(dir) = &cli.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(e.to_string()))?;
        io::write_json(&dir.join("replication.json"), &results)?;
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    if !cli.quiet {
        out(&format!("{} of {} criteria passed", results.len() - failed, results.len()));
    }
    Ok(if failed == 0 { 0 } else { 3 })
}

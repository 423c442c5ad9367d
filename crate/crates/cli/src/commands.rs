//! Subcommand drivers. Each writes its artifacts into the output directory and
//! prints a short human-readable summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use willmore_core::correction::{class_of, ift_solve, Branch, HypothesisReport, IftOptions, IftTarget, QuadraticFamily};
use willmore_core::geometry::{GaussBonnetReport, Immersion};
use willmore_core::minimizer::{minimize_with, sweep, MinimizeOptions, MultiplierFit, Status, SweepPoint};
use willmore_core::uniformization::{conformal_factor, TeichmullerPoint};
use willmore_core::variations::{TeichContext, VariationReport};
use willmore_core::verify::{self, CheckResult, VerifyOptions};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::mesh::{build_surface, write_mesh};

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
struct ConformalSummary {
    sup_norm: f64,
    grad_l2: f64,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    grid: [usize; 2],
    dim: usize,
    energy: f64,
    area: f64,
    gauss_bonnet: GaussBonnetReport,
    tau: [f64; 2],
    conformal_factor: ConformalSummary,
    rank: Option<VariationReport<f64>>,
    rank_error: Option<String>,
    multiplier: MultiplierFit<f64>,
}

pub fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let f = build_surface(cfg)?;
    let dir = out_dir(cfg)?;
    let ctx = TeichContext::new(&f)?;
    let geo = &ctx.geometry;
    let cf = conformal_factor(&geo.g)?;
    let (rank, rank_error) = match ctx.rank_report() {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let tau = ctx.tau();
    let report = AnalyzeReport {
        grid: [f.grid().n_u, f.grid().n_v],
        dim: f.dim(),
        energy: geo.willmore_energy(),
        area: geo.area(),
        gauss_bonnet: geo.gauss_bonnet_report(1),
        tau: [tau.re, tau.im],
        conformal_factor: ConformalSummary { sup_norm: cf.sup_norm, grad_l2: cf.grad_l2 },
        rank,
        rank_error,
        multiplier: willmore_core::minimizer::fit_multiplier_ctx(&ctx)?,
    };
    let path = dir.join("analyze.json");
    write_json(&path, &report)?;
    println!("energy      {:.10}", report.energy);
    println!("tau         {:.10} + {:.10} i", report.tau[0], report.tau[1]);
    println!("rank        {}", report.rank.map_or("n/a".to_string(), |r| r.rank.to_string()));
    println!("el residual {:.3e} (relative {:.3e})", report.multiplier.residual_abs, report.multiplier.residual_rel);
    println!("report      {}", path.display());
    Ok(())
}

/// Minimizer options; an unset target keeps the class of `f0`.
fn minimize_options(cfg: &RunConfig, f0: &Immersion<f64>) -> Result<MinimizeOptions, CliError> {
    let d = MinimizeOptions::default();
    let tau_target = match (cfg.tau_re, cfg.tau_im) {
        (Some(re), Some(im)) => TeichmullerPoint::new(re, im),
        (re, im) => {
            let t = class_of(f0)?;
            TeichmullerPoint::new(re.unwrap_or(t.re()), im.unwrap_or(t.im()))
        }
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(MinimizeOptions {
        tau_target,
        max_iters: cfg.max_iters,
        tol_grad: cfg.tol_grad,
        tol_tau: cfg.tol_tau,
        rng_seed: cfg.seed,
        energy_ceiling: cfg.energy_ceiling.unwrap_or(d.energy_ceiling),
        step_init: cfg.step_init.unwrap_or(d.step_init),
        smoothing_mode: cfg.smoothing_mode.unwrap_or(d.smoothing_mode),
        ..d
    })
}

fn status_result(status: Status, what: &str) -> Result<(), CliError> {
    match status {
        Status::CorrectionFailed => Err(CliError::Failed(format!("{what}: conformal correction failed"))),
        Status::CeilingExceeded => Err(CliError::Ceiling(format!("{what}: energy at or above the ceiling"))),
        Status::Converged | Status::MaxIters => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct MinimizeReport {
    status: Status,
    iterations: usize,
    tau_target: [f64; 2],
    initial_energy: f64,
    final_energy: f64,
    final_tau: [f64; 2],
    el_residual_rel: f64,
    multiplier: MultiplierFit<f64>,
    gauss_bonnet_gap: f64,
    log: PathBuf,
    meshes: Vec<PathBuf>,
}

pub fn minimize(cfg: &RunConfig) -> Result<(), CliError> {
    let f0 = build_surface(cfg)?;
    let opts = minimize_options(cfg, &f0)?;
    let dir = out_dir(cfg)?;
    let res = minimize_with(&f0, &opts, |r| {
        log::info!("iter {} energy {:.10} grad {:.3e} step {:.3e} {}", r.iter, r.energy, r.grad_norm, r.step, r.status)
    })?;
    let log_path = dir.join("iterations.csv");
    write_csv(&log_path, &res.records)?;
    let meshes = write_mesh(dir, "final", &res.final_immersion)?;
    let tau = res.tau_trace.last().copied().unwrap_or(opts.tau_target);
    let report = MinimizeReport {
        status: res.status,
        iterations: res.records.len().saturating_sub(1),
        tau_target: [opts.tau_target.re(), opts.tau_target.im()],
        initial_energy: res.energy_trace[0],
        final_energy: *res.energy_trace.last().unwrap_or(&f64::NAN),
        final_tau: [tau.re(), tau.im()],
        el_residual_rel: res.el_residual_rel,
        multiplier: res.multiplier,
        gauss_bonnet_gap: res.gauss_bonnet_gap,
        log: log_path,
        meshes,
    };
    write_json(&dir.join("minimize.json"), &report)?;
    println!("status      {}", report.status.as_str());
    println!("iterations  {}", report.iterations);
    println!("energy      {:.10} -> {:.10}", report.initial_energy, report.final_energy);
    println!("tau         {:.10} + {:.10} i", report.final_tau[0], report.final_tau[1]);
    println!("el residual {:.3e} (relative)", report.el_residual_rel);
    status_result(res.status, "minimize")
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let surface = build_surface(cfg)?;
    let dir = out_dir(cfg)?;
    let opts = VerifyOptions { n: cfg.grid, filter: cfg.filter.clone(), surface: Some(surface) };
    let results: Vec<CheckResult> = verify::run(&opts).map_err(|e| CliError::Usage(e.to_string()))?;
    write_json(&dir.join("verify.json"), &results)?;
    for r in &results {
        println!(
            "{} {}/{}: {:.3e} (tolerance {:.1e}) {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.module,
            r.name,
            r.value,
            r.tolerance,
            r.detail
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} verification checks failed")));
    }
    Ok(())
}

/// `sweep_points` values of `Im τ` spaced evenly over the configured range.
fn sweep_taus(cfg: &RunConfig) -> Result<Vec<TeichmullerPoint<f64>>, CliError> {
    let n = cfg.sweep_points;
    let re = cfg.tau_re.unwrap_or(0.0);
    (0..n)
        .map(|k| {
            let s = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            let im = cfg.sweep_im_min + s * (cfg.sweep_im_max - cfg.sweep_im_min);
            TeichmullerPoint::new(re, im).map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect()
}

pub fn sweep_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let f0 = build_surface(cfg)?;
    let taus = sweep_taus(cfg)?;
    let opts = minimize_options(cfg, &f0)?;
    let dir = out_dir(cfg)?;
    let points: Vec<SweepPoint> = sweep(&f0, &taus, &opts)?;
    write_csv(&dir.join("sweep.csv"), &points)?;
    for p in &points {
        println!("{:.6} {:.6} {:.10} {} {}", p.tau_re, p.tau_im, p.energy, p.status.as_str(), p.iterations);
    }
    let jump = points
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy).abs() / w[0].energy.abs().min(w[1].energy.abs()))
        .fold(0.0, f64::max);
    println!("max relative neighbor jump {jump:.4e}");
    for p in &points {
        status_result(p.status, &format!("sweep at tau = {} + {} i", p.tau_re, p.tau_im))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct IftCase {
    epsilon: f64,
    gamma: f64,
    eta0: f64,
    eta_bar: f64,
    lambda: f64,
    mu: f64,
    nu: f64,
    branch: Branch,
    residual: f64,
    bound_constant: f64,
    /// `C γ^{−1/2} |Φ(0) − η|^{1/2}` with `C = 10`.
    bound: f64,
    norm: f64,
    hypotheses: Option<HypothesisReport<f64>>,
    violations: Vec<String>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct IftDemoReport {
    cases: Vec<IftCase>,
    /// Fitted exponent of `|ξ|` against `η̄` on the pure quadratic family.
    scaling_exponent: f64,
}

/// Largest bound constant accepted by the demo.
const IFT_C_MAX: f64 = 10.0;

pub fn ift_demo(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let lambda0 = 0.25;
    let mut cases = Vec::new();
    for (eps, gamma) in [(0.0f64, 1.0f64), (0.01, 0.25), (0.02, 0.1)] {
        // Targets scale with γ so that all of them satisfy the smallness condition.
        let scale = gamma / 0.25;
        for (e0, eb) in [(0.0f64, 1e-4f64), (1e-3, 1e-4), (-2e-3, 3e-4), (5e-4, -2e-4), (0.0, 1e-6)] {
            let (e0, eb) = (scale * e0, scale * eb);
            let mut p = QuadraticFamily::new(eps, gamma);
            let c = p.constants(lambda0);
            let target = IftTarget { eta0: vec![e0], eta_bar: eb };
            let s = ift_solve(&mut p, &c, &target, &IftOptions::default())?;
            let gap = (e0 * e0 + eb * eb).sqrt();
            let bound = IFT_C_MAX * gap.sqrt() / gamma.sqrt();
            let violations = s.hypotheses.map(|h| h.violations(&c)).unwrap_or_default();
            let norm = s.xi.norm();
            let passed = s.xi.residual <= 1e-10 && s.xi.mu * s.xi.nu == 0.0 && norm <= bound && violations.is_empty();
            println!(
                "eps {eps:<5} gamma {gamma:<5} eta ({e0:+.1e}, {eb:+.1e}): lambda {:+.6e} mu {:+.6e} nu {:+.6e} C {:.4} residual {:.1e} {}",
                s.xi.lambda[0],
                s.xi.mu,
                s.xi.nu,
                s.bound_constant,
                s.xi.residual,
                if passed { "ok" } else { "FAIL" }
            );
            cases.push(IftCase {
                epsilon: eps,
                gamma,
                eta0: e0,
                eta_bar: eb,
                lambda: s.xi.lambda[0],
                mu: s.xi.mu,
                nu: s.xi.nu,
                branch: s.branch,
                residual: s.xi.residual,
                bound_constant: s.bound_constant,
                bound,
                norm,
                hypotheses: s.hypotheses,
                violations,
                passed,
            });
        }
    }
    let size = |eb: f64| -> Result<f64, CliError> {
        let mut p = QuadraticFamily::new(0.0, 1.0);
        let c = p.constants(lambda0);
        let s = ift_solve(&mut p, &c, &IftTarget { eta0: vec![0.0], eta_bar: eb }, &IftOptions::default())?;
        Ok(s.xi.norm())
    };
    let scaling_exponent = (size(1e-4)? / size(1e-6)?).ln() / 100f64.ln();
    println!("square-root scaling exponent {scaling_exponent:.4}");
    let failed = cases.iter().filter(|c| !c.passed).count();
    write_json(&dir.join("ift_demo.json"), &IftDemoReport { cases, scaling_exponent })?;
    if failed > 0 || !(0.4..=0.6).contains(&scaling_exponent) {
        return Err(CliError::Failed(format!("{failed} IFT cases violate the bound")));
    }
    Ok(())
}

//! Self-checks of every numerical module against closed forms and invariants.
//!
//! Each suite is a list of named checks; a check that errors counts as failed
//! and carries the error text. The suites are small enough to run at 64².

use std::f64::consts::PI;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::correction::{
    build_basis_fields, class_of, correct_full_rank, ift_solve, BasisOptions, CorrectionOptions, IftOptions,
    IftTarget, QuadraticFamily,
};
use crate::error::{Error, Result};
use crate::geometry::{gauss_bonnet_report, pullback_metric, GeometryCache, Immersion};
use crate::grid::{poisson_solve, Dir, GridSpec, ScalarField, TensorField};
use crate::minimizer::{
    descent_step, fit_multiplier_ctx, minimize, normalize, DescentState, MinimizeOptions, Status, StepOutcome,
};
use crate::surfaces::{clifford, perturbed, random_normal_field, thin_torus, torus_energy, torus_modulus, torus_of_revolution};
use crate::tensor::Sym2;
use crate::uniformization::{modulus, tau_of_metric, teich_distance, TeichmullerPoint};
use crate::variations::{decompose, flat_l2_inner, TTTensor, TeichContext};

/// Suite names in execution order.
pub const MODULES: [&str; 6] = ["grid", "geometry", "uniformization", "variations", "correction", "minimizer"];

/// Outcome of one named check. `value` is compared against `tolerance`
/// in the direction the check documents in `detail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub module: String,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(module: &str, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            module: module.into(),
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    fn at_least(module: &str, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { passed: value >= tolerance, ..Self::at_most(module, name, value, tolerance, detail) }
    }

    fn failed(module: &str, name: &str, err: &Error) -> Self {
        Self {
            module: module.into(),
            name: name.into(),
            passed: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Grid size of the corpus surfaces.
    pub n: usize,
    /// Run only the named suite.
    pub filter: Option<String>,
    /// Extra immersion to check for regularity and the Gauss–Bonnet identity.
    pub surface: Option<Immersion<f64>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n: 64, filter: None, surface: None }
    }
}

type Check = (&'static str, fn(&Ctx) -> Result<CheckResult>);

struct Ctx<'a> {
    n: usize,
    surface: Option<&'a Immersion<f64>>,
}

impl Ctx<'_> {
    fn grid(&self) -> Result<GridSpec> {
        GridSpec::square(self.n)
    }

    fn torus(&self) -> Result<Immersion<f64>> {
        Ok(torus_of_revolution(self.grid()?, 2f64.sqrt(), 1.0))
    }

    fn perturbed(&self) -> Result<Immersion<f64>> {
        perturbed(&self.torus()?, 0.05, 3)
    }
}

/// Runs the selected suites. An unknown filter is an [`Error::InvalidOptions`].
pub fn run(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    if let Some(f) = &opts.filter {
        if !MODULES.contains(&f.as_str()) {
            return Err(Error::InvalidOptions(format!(
                "unknown suite '{f}', expected one of {}",
                MODULES.join(", ")
            )));
        }
    }
    if opts.n < 16 {
        return Err(Error::InvalidOptions(format!("verify needs a grid of at least 16, got {}", opts.n)));
    }
    let ctx = Ctx { n: opts.n, surface: opts.surface.as_ref() };
    let mut out = Vec::new();
    for module in MODULES {
        if opts.filter.as_deref().is_some_and(|f| f != module) {
            continue;
        }
        for (name, check) in suite(module) {
            let r = check(&ctx).unwrap_or_else(|e| CheckResult::failed(module, name, &e));
            log::info!("{module}/{name}: {}", if r.passed { "pass" } else { "FAIL" });
            out.push(r);
        }
    }
    Ok(out)
}

fn suite(module: &str) -> Vec<Check> {
    match module {
        "grid" => vec![
            ("derivative_order", grid_derivative_order),
            ("quadrature", grid_quadrature),
            ("poisson_round_trip", grid_poisson_round_trip),
        ],
        "geometry" => vec![
            ("torus_energy", geometry_torus_energy),
            ("clifford_energy", geometry_clifford_energy),
            ("gauss_bonnet", geometry_gauss_bonnet),
            ("immersion_regular", geometry_surface),
        ],
        "uniformization" => vec![
            ("constant_metric_modulus", uniformization_constant),
            ("torus_modulus", uniformization_torus),
            ("conformal_invariance", uniformization_invariance),
        ],
        "variations" => vec![
            ("integral_forms_agree", variations_forms),
            ("decomposition_round_trip", variations_decomposition),
            ("torus_rank", variations_torus_rank),
            ("perturbed_rank", variations_perturbed_rank),
        ],
        "correction" => vec![
            ("ift_quadratic_family", correction_ift),
            ("full_rank_correction", correction_full_rank),
        ],
        "minimizer" => vec![
            ("normalize_idempotent", minimizer_normalize),
            ("descent_step", minimizer_step),
            ("multiplier_orthogonality", minimizer_orthogonality),
            ("ceiling_monitor", minimizer_ceiling),
        ],
        _ => Vec::new(),
    }
}

fn wave(grid: GridSpec) -> (ScalarField<f64>, ScalarField<f64>) {
    let f = ScalarField::from_fn(grid, |u: f64, v: f64| (2.0 * PI * (u + 2.0 * v)).sin());
    let df = ScalarField::from_fn(grid, |u: f64, v: f64| 2.0 * PI * (2.0 * PI * (u + 2.0 * v)).cos());
    (f, df)
}

fn grid_derivative_order(ctx: &Ctx) -> Result<CheckResult> {
    let n = ctx.n / 2;
    let err = |m: usize| -> Result<f64> {
        let (f, df) = wave(GridSpec::square(m)?);
        Ok(f.partial(Dir::U).zip_map(&df, |a, b| a - b).max_abs())
    };
    let order = (err(n)? / err(2 * n)?).log2();
    let fd = f64::from(ctx.grid()?.fd_order);
    Ok(CheckResult::at_least(
        "grid",
        "derivative_order",
        order,
        fd - 1.0,
        format!("observed order between {n} and {}; must reach fd_order - 1", 2 * n),
    ))
}

fn grid_quadrature(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid()?;
    let f = ScalarField::from_fn(grid, |u: f64, v: f64| (2.0 * PI * (u - v)).sin().powi(2));
    let one = ScalarField::constant(grid, 1.0);
    let err = (crate::grid::integrate(&f, &one)? - 0.5).abs();
    Ok(CheckResult::at_most("grid", "quadrature", err, 1e-12, "|integral of sin^2 - 1/2|"))
}

fn grid_poisson_round_trip(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid()?;
    let u = ScalarField::from_fn(grid, |x: f64, y: f64| (2.0 * PI * x).cos() * (4.0 * PI * y).sin() + 0.3 * (2.0 * PI * (x + y)).sin());
    let lap = ScalarField::from_fn(grid, |x: f64, y: f64| {
        -20.0 * PI * PI * (2.0 * PI * x).cos() * (4.0 * PI * y).sin() - 2.4 * PI * PI * (2.0 * PI * (x + y)).sin()
    });
    let back = poisson_solve(&lap)?;
    let err = back.zip_map(&u, |a, b| a - b).max_abs();
    Ok(CheckResult::at_most("grid", "poisson_round_trip", err, 1e-9, "max |solve(lap u) - u|"))
}

fn geometry_torus_energy(ctx: &Ctx) -> Result<CheckResult> {
    let w = GeometryCache::new(&ctx.torus()?)?.willmore_energy();
    let exact = torus_energy(2f64.sqrt(), 1.0);
    let rel = (w - exact).abs() / exact;
    Ok(CheckResult::at_most("geometry", "torus_energy", rel, 1e-3, format!("W = {w:.8}, closed form {exact:.8}")))
}

fn geometry_clifford_energy(ctx: &Ctx) -> Result<CheckResult> {
    let w = GeometryCache::new(&clifford::<f64>(ctx.grid()?))?.willmore_energy();
    let rel = (w - 2.0 * PI * PI).abs() / (2.0 * PI * PI);
    Ok(CheckResult::at_most("geometry", "clifford_energy", rel, 1e-3, format!("W = {w:.12}")))
}

fn geometry_gauss_bonnet(ctx: &Ctx) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    let mut total_k: f64 = 0.0;
    for f in [ctx.torus()?, ctx.perturbed()?, clifford(ctx.grid()?)] {
        let r = gauss_bonnet_report(&f, 1)?;
        worst = worst.max(r.max_rel_gap());
        total_k = total_k.max(r.int_k.abs());
    }
    // 1e-6 at 128², scaled with the fourth-order truncation error.
    let tol = 1e-6 * (128.0 / ctx.n as f64).powi(4).max(1.0);
    Ok(CheckResult::at_most(
        "geometry",
        "gauss_bonnet",
        worst.max(total_k),
        tol,
        format!("max relative gap {worst:e}, max |int K| {total_k:e}"),
    ))
}

fn geometry_surface(ctx: &Ctx) -> Result<CheckResult> {
    let Some(f) = ctx.surface else {
        return Ok(CheckResult::at_most("geometry", "immersion_regular", 0.0, 0.0, "no input surface"));
    };
    let geo = GeometryCache::new(f)?;
    let min_det = geo.sqrt_det_g.data.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let gap = geo.gauss_bonnet_report(1).max_rel_gap();
    let tol = 1e-6 * (128.0 / f.grid().n_u.min(f.grid().n_v) as f64).powi(4).max(1.0);
    let mut r = CheckResult::at_most(
        "geometry",
        "immersion_regular",
        gap,
        tol,
        format!("min sqrt(det g) {min_det:e}, Gauss-Bonnet gap {gap:e}"),
    );
    r.passed &= min_det > 0.0;
    Ok(r)
}

fn uniformization_constant(ctx: &Ctx) -> Result<CheckResult> {
    let g = Sym2::new(1.7f64, 0.35, 0.9);
    let tau = modulus(&TensorField::constant(ctx.grid()?, g))?;
    let exact = Complex::new(g.xy, g.det().sqrt()) / g.xx;
    let err = (tau.tau - exact).norm().max((tau_of_metric(&g) - exact).norm());
    Ok(CheckResult::at_most("uniformization", "constant_metric_modulus", err, 1e-10, "|tau - (G12 + i sqrt det G)/G11|"))
}

fn uniformization_torus(ctx: &Ctx) -> Result<CheckResult> {
    let tau = modulus(&pullback_metric(&ctx.torus()?)?)?;
    let (re, im) = torus_modulus(2f64.sqrt(), 1.0);
    let err = (tau.tau - Complex::new(re, im)).norm();
    Ok(CheckResult::at_most("uniformization", "torus_modulus", err, 1e-4, format!("tau = {}", tau.tau)))
}

fn uniformization_invariance(ctx: &Ctx) -> Result<CheckResult> {
    let g = pullback_metric(&ctx.perturbed()?)?;
    let phi = ScalarField::from_fn(g.grid, |u: f64, v: f64| 0.4 * (2.0 * PI * (u - 2.0 * v)).sin() + 0.2 * (2.0 * PI * v).cos());
    let scaled = TensorField {
        grid: g.grid,
        data: g.data.iter().zip(&phi.data).map(|(s, &x)| s.scale((2.0 * x).exp())).collect(),
    };
    let err = (modulus(&g)?.tau - modulus(&scaled)?.tau).norm();
    Ok(CheckResult::at_most("uniformization", "conformal_invariance", err, 1e-8, "|tau(e^{2 phi} g) - tau(g)|"))
}

fn variations_forms(ctx: &Ctx) -> Result<CheckResult> {
    let f = ctx.perturbed()?;
    let tc = TeichContext::new(&f)?;
    let fv = tc.first_variation(&random_normal_field(&f, 9)?);
    // The forms agree only up to the product-rule error of the stencil, O(h⁴);
    // the tolerance is 1e-8 at 512² scaled at that order.
    let tol = 1e-8 * (512.0 / ctx.n as f64).powi(4).max(1.0);
    Ok(CheckResult::at_most(
        "variations",
        "integral_forms_agree",
        fv.form_gap(),
        tol,
        "absolute gap between the metric and A0 forms",
    ))
}

fn variations_decomposition(ctx: &Ctx) -> Result<CheckResult> {
    let grid = ctx.grid()?;
    let metric = Sym2::new(1.3, 0.4, 0.9);
    let sigma = ScalarField::from_fn(grid, |u: f64, v: f64| 0.5 + 0.2 * (2.0 * PI * (u + v)).cos());
    let x0 = crate::grid::VectorField::from_fn(grid, 2, |u: f64, v: f64, out: &mut [f64]| {
        out[0] = 0.1 * (2.0 * PI * v).sin();
        out[1] = 0.05 * (2.0 * PI * (u - v)).cos();
    });
    let q0 = TTTensor::new(0.3, -0.2).components(&metric);
    let lie = crate::grid::lie_metric(&x0, &metric);
    let s = TensorField {
        grid,
        data: (0..grid.len()).map(|p| metric.scale(sigma.data[p]).add(&lie.data[p]).add(&q0)).collect(),
    };
    let d = decompose(&s, &TensorField::constant(grid, metric))?;
    let err = d
        .sigma
        .zip_map(&sigma, |a, b| a - b)
        .max_abs()
        .max(d.x.axpy(-1.0, &x0).max_norm())
        .max(d.q.sub(&q0).max_abs());
    let qf = TensorField::constant(grid, d.q);
    let dlie = crate::grid::lie_metric(&d.x, &metric);
    let ortho = flat_l2_inner(&qf, &dlie, &metric).abs();
    let mut r = CheckResult::at_most(
        "variations",
        "decomposition_round_trip",
        err,
        1e-9,
        format!("component error {err:e}, TT/Lie inner product {ortho:e}"),
    );
    r.passed &= ortho <= 1e-10;
    Ok(r)
}

fn variations_torus_rank(ctx: &Ctx) -> Result<CheckResult> {
    let rep = TeichContext::new(&ctx.torus()?)?.rank_report()?;
    let mut r = CheckResult::at_most(
        "variations",
        "torus_rank",
        rep.eigen_ratio(),
        1e-6,
        format!("rank {}, Gram eigenvalue ratio {:e}", rep.rank, rep.eigen_ratio()),
    );
    r.passed &= rep.rank == 1 && rep.annihilator.is_some();
    Ok(r)
}

fn variations_perturbed_rank(ctx: &Ctx) -> Result<CheckResult> {
    let rep = TeichContext::new(&ctx.perturbed()?)?.rank_report()?;
    Ok(CheckResult::at_least("variations", "perturbed_rank", rep.rank as f64, 2.0, "rank of the perturbed torus"))
}

fn correction_ift(_: &Ctx) -> Result<CheckResult> {
    let (eps, gamma) = (0.01, 0.25);
    let mut worst_c: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for &(e0, eb) in &[(1e-3, 1e-4), (-2e-3, 3e-4), (5e-4, -2e-4), (0.0, 1e-6)] {
        let mut p = QuadraticFamily::new(eps, gamma);
        let constants = p.constants(0.25);
        let target = IftTarget { eta0: vec![e0], eta_bar: eb };
        let s = ift_solve(&mut p, &constants, &target, &IftOptions::default())?;
        if s.xi.mu * s.xi.nu != 0.0 {
            return Err(Error::IftHypotheses("both quadratic variables active".into()));
        }
        worst_c = worst_c.max(s.bound_constant);
        worst_res = worst_res.max(s.xi.residual);
    }
    let mut r = CheckResult::at_most(
        "correction",
        "ift_quadratic_family",
        worst_c,
        10.0,
        format!("max bound constant {worst_c:.4}, max residual {worst_res:e}"),
    );
    r.passed &= worst_res <= 1e-10;
    Ok(r)
}

fn correction_full_rank(ctx: &Ctx) -> Result<CheckResult> {
    let f = ctx.perturbed()?;
    let rep = TeichContext::new(&f)?.rank_report()?;
    let b = build_basis_fields(&f, &rep, &[], &BasisOptions::default())?;
    let t0 = class_of(&f)?;
    let target = TeichmullerPoint::new(t0.re() + 2e-4, t0.im() - 1e-4)?;
    let opts = CorrectionOptions::default();
    let c = correct_full_rank(&f, &b, &target, &opts)?;
    let d = teich_distance(&c.tau, &target)?;
    Ok(CheckResult::at_most("correction", "full_rank_correction", d, opts.tol_tau, format!("{} Newton steps", c.iterations)))
}

fn minimizer_normalize(ctx: &Ctx) -> Result<CheckResult> {
    let f = ctx.perturbed()?.scaled(1.7).translated(&[0.3, -1.0, 2.0]);
    let a = normalize(&f)?;
    let b = normalize(&a)?;
    let err = b.points.axpy(-1.0, &a.points).max_norm();
    Ok(CheckResult::at_most("minimizer", "normalize_idempotent", err, 1e-12, "max |N(N(f)) - N(f)|"))
}

fn minimizer_step(ctx: &Ctx) -> Result<CheckResult> {
    let f = normalize(&ctx.perturbed()?)?;
    let tau = class_of(&f)?;
    let opts = MinimizeOptions { tau_target: tau, ..MinimizeOptions::default() };
    let mut state = DescentState::new(f, opts.step_init)?;
    let e0 = state.energy;
    let rep = descent_step(&mut state, &opts)?;
    let d = teich_distance(&state.tau, &tau)?;
    let mut r = CheckResult::at_most(
        "minimizer",
        "descent_step",
        d,
        opts.tol_tau,
        format!("energy {e0:.8} -> {:.8}, class distance {d:e}", state.energy),
    );
    r.passed &= rep.outcome == StepOutcome::Accepted && state.energy < e0;
    Ok(r)
}

fn minimizer_orthogonality(ctx: &Ctx) -> Result<CheckResult> {
    let tc = TeichContext::new(&ctx.perturbed()?)?;
    let fit = fit_multiplier_ctx(&tc)?;
    let phi = tc.geometry.l2_norm(&tc.phi[0]).max(tc.geometry.l2_norm(&tc.phi[1]));
    let scale = fit.el_norm * phi;
    Ok(CheckResult::at_most(
        "minimizer",
        "multiplier_orthogonality",
        fit.orthogonality / scale,
        1e-8,
        "residual against the constraint gradients, relative to |EL| |Phi|",
    ))
}

fn minimizer_ceiling(ctx: &Ctx) -> Result<CheckResult> {
    let f = thin_torus::<f64>(ctx.grid()?);
    let opts = MinimizeOptions { tau_target: class_of(&f)?, max_iters: 1, ..MinimizeOptions::default() };
    let res = minimize(&f, &opts)?;
    let w = res.energy_trace.first().copied().unwrap_or(f64::NAN);
    let mut r = CheckResult::at_least(
        "minimizer",
        "ceiling_monitor",
        w,
        8.0 * PI,
        format!("thin torus W = {w:.4}, status {}", res.status.as_str()),
    );
    r.passed &= res.status == Status::CeilingExceeded;
    Ok(r)
}

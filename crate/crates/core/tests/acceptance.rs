//! Acceptance criteria, one test per criterion.
//!
//! Every sub-check writes a `PASS`/`FAIL` line straight to stdout (bypassing
//! the test harness capture, so the lines show up in a normal `cargo test`
//! log) and the test asserts that all of its sub-checks passed.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex;
use willmore_core::correction::{
    build_basis_fields, class_of, correct_degenerate, ift_solve, BasisOptions, CorrectionOptions, IftOptions, IftTarget,
    QuadraticFamily,
};
use willmore_core::geometry::{gauss_bonnet_report, pullback_metric, GeometryCache, Immersion};
use willmore_core::grid::{lie_metric, GridSpec, ScalarField, TensorField, VectorField};
use willmore_core::minimizer::{fit_multiplier, minimize, sweep, MinimizeOptions, Status};
use willmore_core::surfaces::{
    clifford, clifford_reparametrized, clifford_sheared, perturbed, random_normal_field, random_smooth_scalar,
    thin_torus, torus_energy, torus_modulus, torus_of_revolution,
};
use willmore_core::tensor::Sym2;
use willmore_core::uniformization::{modulus, tau_of_metric, teich_distance, TeichmullerPoint};
use willmore_core::variations::{decompose, flat_l2_inner, rank_report, TTTensor, TeichContext, RANK_EPS};

/// Collects the sub-check lines of one criterion.
struct Criterion {
    id: u32,
    failed: Vec<String>,
}

impl Criterion {
    fn new(id: u32) -> Self {
        Self { id, failed: Vec::new() }
    }

    fn line(&self, tag: &str, what: &str, detail: String) {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "acceptance criterion {:>2} {tag}: {what}: {detail}", self.id);
    }

    fn at_most(&mut self, what: &str, value: f64, tol: f64) {
        self.check(value <= tol, what, format!("{value:.3e} <= {tol:.3e}"));
    }

    fn at_least(&mut self, what: &str, value: f64, tol: f64) {
        self.check(value >= tol, what, format!("{value:.6e} >= {tol:.6e}"));
    }

    fn check(&mut self, ok: bool, what: &str, detail: String) {
        self.line(if ok { "PASS" } else { "FAIL" }, what, detail.clone());
        if !ok {
            self.failed.push(format!("{what}: {detail}"));
        }
    }

    fn finish(self) {
        assert!(self.failed.is_empty(), "criterion {} failed: {:#?}", self.id, self.failed);
    }
}

fn grid(n: usize) -> GridSpec {
    GridSpec::square(n).unwrap()
}

fn torus(n: usize) -> Immersion<f64> {
    torus_of_revolution(grid(n), 2f64.sqrt(), 1.0)
}

fn perturbed_torus(n: usize, seed: u64) -> Immersion<f64> {
    perturbed(&torus(n), 0.05, seed).unwrap()
}

fn energy(f: &Immersion<f64>) -> f64 {
    GeometryCache::new(f).unwrap().willmore_energy()
}

fn chart_of(f: &Immersion<f64>) -> [f64; 2] {
    let t = modulus(&pullback_metric(f).unwrap()).unwrap();
    [t.re(), t.im()]
}

fn rel_err2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1]) / b[0].hypot(b[1])
}

#[test]
fn criterion_01_energy_oracle() {
    let mut c = Criterion::new(1);
    let exact = torus_energy(2f64.sqrt(), 1.0);
    assert!((exact - 2.0 * PI * PI).abs() < 1e-12);
    let err = |n: usize| (energy(&torus(n)) - exact).abs() / exact;
    let (e64, e128) = (err(64), err(128));
    c.at_most("torus R=sqrt2 r=1 relative energy error at 128^2", e128, 1e-3);
    let fd_order = f64::from(grid(64).fd_order);
    c.at_least("observed convergence order 64^2 -> 128^2", (e64 / e128).log2(), fd_order - 1.0);
    c.finish();
}

#[test]
fn criterion_02_gauss_bonnet() {
    let mut c = Criterion::new(2);
    let g = grid(128);
    let corpus: Vec<(&str, Immersion<f64>)> = vec![
        ("torus R=sqrt2", torus(128)),
        ("torus R=2", torus_of_revolution(g, 2.0, 1.0)),
        ("perturbed torus", perturbed_torus(128, 3)),
        ("thin torus", thin_torus(g)),
        ("clifford", clifford(g)),
    ];
    for (name, f) in &corpus {
        let r = gauss_bonnet_report(f, 1).unwrap();
        c.at_most(&format!("{name}: relative gap of the three energy expressions"), r.max_rel_gap(), 1e-6);
        c.at_most(&format!("{name}: |int K dmu|"), r.int_k.abs(), 1e-6);
    }
    // Alternative parametrizations of the Clifford torus are not generator
    // surfaces; their O(h⁴) gaps are reported, not checked.
    for (name, f) in [("clifford reparametrized", clifford_reparametrized(g, 0.1)), ("clifford sheared", clifford_sheared(g))] {
        let r = gauss_bonnet_report(&f, 1).unwrap();
        c.line("INFO", &format!("{name} (reference only)"), format!("gap {:.3e}, |int K| {:.3e}", r.max_rel_gap(), r.int_k.abs()));
    }
    c.finish();
}

#[test]
fn criterion_03_modulus_oracle() {
    let mut c = Criterion::new(3);
    for g in [Sym2::<f64>::new(1.0, 0.0, 1.0), Sym2::new(1.7, 0.35, 0.9), Sym2::new(0.4, -0.3, 2.5)] {
        let exact = Complex::new(g.xy, g.det().sqrt()) / g.xx;
        let tau = modulus(&TensorField::constant(grid(64), g)).unwrap().tau;
        let err = (tau - exact).norm().max((tau_of_metric(&g) - exact).norm());
        c.at_most(&format!("constant metric ({}, {}, {})", g.xx, g.xy, g.yy), err, 1e-10);
    }
    for big_r in [2f64.sqrt(), 2.0] {
        let f = torus_of_revolution(grid(128), big_r, 1.0);
        let tau = modulus(&pullback_metric(&f).unwrap()).unwrap().tau;
        let (re, im) = torus_modulus(big_r, 1.0);
        c.at_most(&format!("torus of revolution R={big_r:.4} at 128^2"), (tau - Complex::new(re, im)).norm(), 1e-4);
    }
    let g = pullback_metric(&perturbed_torus(64, 3)).unwrap();
    let phi = random_smooth_scalar::<f64>(g.grid, 11, 3);
    let scaled = TensorField {
        grid: g.grid,
        data: g.data.iter().zip(&phi.data).map(|(s, &x)| s.scale((0.8 * x).exp())).collect(),
    };
    let err = (modulus(&g).unwrap().tau - modulus(&scaled).unwrap().tau).norm();
    c.at_most("conformal invariance tau(e^{2phi} g) = tau(g)", err, 1e-8);
    c.finish();
}

/// Smooth normal field supported near the outer equator of the torus.
fn bump_normal(f: &Immersion<f64>) -> VectorField<f64> {
    let geo = GeometryCache::new(f).unwrap();
    let w = VectorField::from_fn(f.grid(), 3, |u: f64, v: f64, out: &mut [f64]| {
        let du = ((u - 0.1 + 0.5).rem_euclid(1.0) - 0.5) / 0.15;
        let dv = ((v - 0.3 + 0.5).rem_euclid(1.0) - 0.5) / 0.2;
        let r2 = du * du + dv * dv;
        let b = if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() * std::f64::consts::E } else { 0.0 };
        let (cu, su, cv, sv) = ((2.0 * PI * u).cos(), (2.0 * PI * u).sin(), (2.0 * PI * v).cos(), (2.0 * PI * v).sin());
        out[0] = b * cu * cv;
        out[1] = b * cu * sv;
        out[2] = b * su;
    });
    geo.normal_part(&w)
}

#[test]
fn criterion_04_variation_formulas() {
    let mut c = Criterion::new(4);
    // The two integral forms differ by the product-rule truncation error of
    // the difference stencil, O(h⁴); 512² is the first grid below 1e-8.
    let f = perturbed_torus(512, 3);
    let tc = TeichContext::new(&f).unwrap();
    let gap = tc.first_variation(&random_normal_field(&f, 9).unwrap()).form_gap();
    c.at_most("metric form vs A0 form at 512^2 (absolute)", gap, 1e-8);
    drop(tc);

    let f = perturbed_torus(128, 3);
    let tc = TeichContext::new(&f).unwrap();
    let v = random_normal_field(&f, 9).unwrap();
    let t = 1e-4;
    let (p, m) = (chart_of(&f.displaced(t, &v)), chart_of(&f.displaced(-t, &v)));
    let fd = [(p[0] - m[0]) / (2.0 * t), (p[1] - m[1]) / (2.0 * t)];
    c.at_most("first variation vs central differences at 128^2", rel_err2(tc.first_variation(&v).delta, fd), 1e-4);

    let f = torus(128);
    let tc = TeichContext::new(&f).unwrap();
    let v = bump_normal(&f);
    let t = 1e-3;
    let (p, m, z) = (chart_of(&f.displaced(t, &v)), chart_of(&f.displaced(-t, &v)), chart_of(&f));
    let fd = [(p[0] - 2.0 * z[0] + m[0]) / (t * t), (p[1] - 2.0 * z[1] + m[1]) / (t * t)];
    c.at_most("second variation vs second differences at 128^2", rel_err2(tc.second_variation(&v), fd), 1e-2);
    c.finish();
}

#[test]
fn criterion_05_decomposition_round_trip() {
    let mut c = Criterion::new(5);
    let g = grid(64);
    let metric = Sym2::new(1.3, 0.4, 0.9);
    let sigma = random_smooth_scalar::<f64>(g, 21, 3).map(|x| 0.5 + 0.2 * x);
    let mean = |s: &ScalarField<f64>| s.data.iter().sum::<f64>() / s.data.len() as f64;
    let (a, b) = (random_smooth_scalar::<f64>(g, 22, 3), random_smooth_scalar::<f64>(g, 23, 3));
    let (ma, mb) = (mean(&a), mean(&b));
    let x0 = VectorField::from_vec(g, 2, (0..g.len()).flat_map(|p| [0.1 * (a.data[p] - ma), 0.1 * (b.data[p] - mb)]).collect())
        .unwrap();
    let q0 = TTTensor::new(0.3, -0.2).components(&metric);
    let lie = lie_metric(&x0, &metric);
    let s = TensorField {
        grid: g,
        data: (0..g.len()).map(|p| metric.scale(sigma.data[p]).add(&lie.data[p]).add(&q0)).collect(),
    };
    let d = decompose(&s, &TensorField::constant(g, metric)).unwrap();
    c.at_most("sigma recovered", d.sigma.zip_map(&sigma, |x, y| x - y).max_abs(), 1e-9);
    c.at_most("X recovered", d.x.axpy(-1.0, &x0).max_norm(), 1e-9);
    c.at_most("q recovered", d.q.sub(&q0).max_abs(), 1e-9);

    // Trace part, trace-free Lie part and TT part are mutually orthogonal.
    let ginv = metric.inverse();
    let trace = TensorField { grid: g, data: d.sigma.data.iter().map(|&x| metric.scale(x)).collect() };
    let dlie = lie_metric(&d.x, &metric);
    let lie_tf = TensorField { grid: g, data: dlie.data.iter().map(|s| s.trace_free(&metric, &ginv)).collect() };
    let qf = TensorField::constant(g, d.q);
    let scale = |x: &TensorField<f64>| flat_l2_inner(x, x, &metric).sqrt();
    let pairs = [
        ("<q, L_X g>", &qf, &dlie),
        ("<q, sigma g>", &qf, &trace),
        ("<sigma g, (L_X g)tf>", &trace, &lie_tf),
    ];
    for (name, x, y) in pairs {
        let ip = flat_l2_inner(x, y, &metric).abs() / (scale(x) * scale(y)).max(1.0);
        c.at_most(&format!("orthogonality {name}"), ip, 1e-10);
    }
    c.finish();
}

#[test]
fn criterion_06_degeneracy_detection() {
    let mut c = Criterion::new(6);
    let f = torus(64);
    let tc = TeichContext::new(&f).unwrap();
    let rep = tc.rank_report().unwrap();
    c.check(rep.rank == 1, "torus of revolution rank", format!("rank {} == 1", rep.rank));
    c.at_most("torus Gram eigenvalue ratio", rep.eigen_ratio(), 1e-6);
    match rep.annihilator {
        Some(ann) => {
            let field = tc.phi[0].scale(ann.a).axpy(ann.b, &tc.phi[1]);
            let n2 = tc.geometry.l2_norm(&field).powi(2);
            let unit = (ann.a.hypot(ann.b) - 1.0).abs();
            c.at_most("annihilator is a unit vector", unit, 1e-12);
            c.at_most(
                "annihilator kills the constraint field (|sum c_r Phi_r|^2 / lambda_max)",
                n2 / rep.eigenvalues[1],
                10.0 * RANK_EPS,
            );
        }
        None => c.check(false, "annihilator present", "none reported".into()),
    }
    let rep = rank_report(&perturbed_torus(64, 3)).unwrap();
    c.check(rep.rank == 2, "seeded 0.05-perturbation rank", format!("rank {} == 2", rep.rank));
    c.finish();
}

#[test]
fn criterion_07_ift_solver() {
    let mut c = Criterion::new(7);
    for (eps, gamma) in [(0.0f64, 1.0f64), (0.01, 0.25), (0.02, 0.1)] {
        for (e0, eb) in [(1e-3f64, 1e-4f64), (-2e-3, 3e-4), (5e-4, -2e-4), (0.0, 1e-6)] {
            let (e0, eb) = (e0 * gamma / 0.25, eb * gamma / 0.25);
            let mut p = QuadraticFamily::new(eps, gamma);
            let constants = p.constants(0.25);
            let target = IftTarget { eta0: vec![e0], eta_bar: eb };
            let label = format!("eps={eps} gamma={gamma} eta=({e0:e}, {eb:e})");
            let s = match ift_solve(&mut p, &constants, &target, &IftOptions::default()) {
                Ok(s) => s,
                Err(e) => {
                    c.check(false, &label, e.to_string());
                    continue;
                }
            };
            let (l, mu, nu) = (s.xi.lambda[0], s.xi.mu, s.xi.nu);
            // Residual and bound evaluated directly from the closed form, Φ(0) = 0.
            let r0 = l + eps * mu.sin() - e0;
            let r1 = gamma * mu * mu - gamma * nu * nu + eps * l - eb;
            c.at_most(&format!("{label}: |Phi(xi) - eta|"), r0.hypot(r1), 1e-10);
            c.check(mu * nu == 0.0, &format!("{label}: mu nu = 0"), format!("mu {mu:e}, nu {nu:e}"));
            let norm = (l * l + mu * mu + nu * nu).sqrt();
            let bound_c = norm * gamma.sqrt() / e0.hypot(eb).sqrt();
            c.at_most(&format!("{label}: bound constant C"), bound_c, 10.0);
        }
    }

    let f = torus(64);
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let e = b.null_direction.unwrap();
    let tau0 = class_of(&f).unwrap();
    let opts = CorrectionOptions::default();
    let mut sizes = Vec::new();
    for drift in [1e-6, 1e-4] {
        let target = TeichmullerPoint::new(tau0.re() + drift * e[0], tau0.im() + drift * e[1]).unwrap();
        let r = correct_degenerate(&f, &b, &target, &opts).unwrap();
        c.at_most(&format!("degenerate correction residual at drift {drift:e}"), r.residual, opts.tol_tau);
        sizes.push((r.drift, r.mu.abs() + r.nu.abs()));
    }
    let slope = (sizes[1].1 / sizes[0].1).ln() / (sizes[1].0 / sizes[0].0).ln();
    c.check((0.4..=0.6).contains(&slope), "degenerate-branch scaling exponent", format!("{slope:.4} in [0.4, 0.6]"));
    c.finish();
}

fn criterion_8_options() -> MinimizeOptions {
    MinimizeOptions { tau_target: TeichmullerPoint::square(), max_iters: 300, tol_tau: 1e-6, ..MinimizeOptions::default() }
}

#[test]
fn criterion_08_constrained_minimization() {
    let mut c = Criterion::new(8);
    let opts = criterion_8_options();
    let f0 = perturbed_torus(64, 3);
    let w0 = energy(&f0);
    let res = minimize(&f0, &opts).unwrap();
    let e = &res.energy_trace;
    let worst_rise = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    c.check(
        worst_rise <= 0.0,
        "energy monotone non-increasing",
        format!("{} iterates, largest increase {worst_rise:e}", e.len()),
    );
    let worst_tau = res.tau_trace.iter().map(|t| teich_distance(t, &opts.tau_target).unwrap()).fold(0.0, f64::max);
    c.at_most("every accepted iterate within tol_tau of tau_target", worst_tau, opts.tol_tau);
    let floor = 2.0 * PI * PI;
    let w1 = *e.last().unwrap();
    c.at_least(
        &format!("fraction of the excess over 2pi^2 removed (W {w0:.6} -> {w1:.6})"),
        (w0 - w1) / (w0 - floor),
        0.5,
    );
    let el64 = res.el_residual_rel;
    c.at_most("el_residual_rel at 64^2", el64, 0.1);
    drop(res);

    // Same problem at 128²; 100 iterations keeps the run within the time budget.
    let opts128 = MinimizeOptions { max_iters: 100, ..opts };
    let res = minimize(&perturbed_torus(128, 3), &opts128).unwrap();
    let el128 = res.el_residual_rel;
    c.check(el128 < el64, "el_residual_rel smaller at 128^2 than at 64^2", format!("{el128:.4e} < {el64:.4e}"));
    c.finish();
}

#[test]
fn criterion_09_clifford_willmore_surface() {
    let mut c = Criterion::new(9);
    // Tolerance decreasing with refinement at order fd_order - 1.
    let tol = |n: usize| (16.0 / n as f64).powi(i32::from(grid(n).fd_order) - 1);
    c.at_most("tolerance ratio tol(128)/tol(64)", tol(128) / tol(64), 0.5);
    let surfaces: [(&str, fn(GridSpec) -> Immersion<f64>); 2] = [
        ("clifford", |g| clifford(g)),
        ("clifford reparametrized u + 0.1 sin 2pi u", |g| clifford_reparametrized(g, 0.1)),
    ];
    for (name, make) in surfaces {
        for n in [64, 128] {
            let fit = fit_multiplier(&make(grid(n))).unwrap();
            c.at_most(&format!("{name}: |q| at {n}^2"), fit.q.norm(), tol(n));
            c.at_most(&format!("{name}: EL residual at {n}^2"), fit.residual_abs, tol(n));
        }
    }
    c.finish();
}

#[test]
fn criterion_10_threshold_monitor() {
    let mut c = Criterion::new(10);
    let f = thin_torus::<f64>(grid(64));
    let w = energy(&f);
    c.at_least("thin torus energy", w, 8.0 * PI);
    let opts = MinimizeOptions { tau_target: class_of(&f).unwrap(), max_iters: 5, ..MinimizeOptions::default() };
    let res = minimize(&f, &opts).unwrap();
    c.check(
        res.status == Status::CeilingExceeded,
        "status",
        format!("{} == ceiling_exceeded", res.status.as_str()),
    );
    c.finish();
}

#[test]
fn criterion_11_continuity_probe() {
    let mut c = Criterion::new(11);
    let taus: Vec<_> = (0..10)
        .map(|k| TeichmullerPoint::new(0.0, 0.8 + 0.45 * k as f64 / 9.0).unwrap())
        .collect();
    let opts = MinimizeOptions { max_iters: 40, ..MinimizeOptions::default() };
    let pts = sweep(&torus(64), &taus, &opts).unwrap();
    let e: Vec<f64> = pts.iter().map(|p| p.energy).collect();
    c.check(e.iter().all(|w| w.is_finite()), "all energies finite", format!("{e:.5?}"));
    c.at_most("largest energy", e.iter().copied().fold(f64::NEG_INFINITY, f64::max), 8.0 * PI);
    let jump = e.windows(2).map(|w| (w[1] - w[0]).abs() / w[0].min(w[1])).fold(0.0, f64::max);
    c.at_most("max relative neighbor jump", jump, 0.05);
    c.finish();
}

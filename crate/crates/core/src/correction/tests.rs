use proptest::prelude::*;

use super::*;
use crate::geometry::Immersion;
use crate::grid::GridSpec;
use crate::surfaces::{clifford_sheared, perturbed, random_normal_field, torus_of_revolution};
use crate::uniformization::TeichmullerPoint;
use crate::variations::rank_report;

fn torus(n: usize) -> Immersion<f64> {
    torus_of_revolution(GridSpec::square(n).unwrap(), 2.0f64.sqrt(), 1.0)
}

/// `Φ₀ = λ + ε sin μ`, `φ = γμ² − γν² + ελ₁`.
fn synthetic(eps: f64, gamma: f64) -> FnProblem<impl FnMut(&[f64], f64, f64) -> crate::Result<(Vec<f64>, f64)>> {
    FnProblem {
        dim: 1,
        f: move |l: &[f64], mu: f64, nu: f64| Ok((vec![l[0] + eps * mu.sin()], gamma * mu * mu - gamma * nu * nu + eps * l[0])),
    }
}

fn consts(eps: f64, gamma: f64, lambda0: f64) -> IftConstants<f64> {
    IftConstants { epsilon: eps.max(1e-12), gamma, lambda_cap: 1.0f64.max(2.0 * gamma + eps), lambda0 }
}

fn target(eta0: f64, eta_bar: f64) -> IftTarget<f64> {
    IftTarget { eta0: vec![eta0], eta_bar }
}

#[test]
fn ift_zero_target_gives_zero() {
    let mut p = synthetic(0.0, 1.0);
    let s = ift_solve(&mut p, &consts(0.0, 1.0, 0.2), &target(0.0, 0.0), &IftOptions::default()).unwrap();
    assert_eq!((s.xi.lambda[0], s.xi.mu, s.xi.nu), (0.0, 0.0, 0.0));
}

#[test]
fn ift_exact_quadratic_root() {
    let gamma = 1.0;
    let mut p = synthetic(0.0, gamma);
    let opts = IftOptions { want_second: true, ..IftOptions::default() };
    let s = ift_solve(&mut p, &consts(0.0, gamma, 0.6), &target(0.0, gamma * 0.01), &opts).unwrap();
    assert_eq!(s.branch, Branch::Mu);
    assert!(s.xi.lambda[0].abs() <= 1e-14);
    assert_eq!(s.xi.nu, 0.0);
    assert!((s.xi.mu.abs() - 0.1).abs() <= 1e-12, "mu = {}", s.xi.mu);
    assert!(s.xi.residual <= 1e-12);
    // |ξ| = √(η̄/γ) exactly, so C = 1.
    assert!((s.bound_constant - 1.0).abs() <= 1e-10);
    let second = s.second.expect("opposite-side root");
    assert!(second.mu * s.xi.mu < 0.0 && (second.mu.abs() - 0.1).abs() <= 1e-12);
}

#[test]
fn ift_negative_target_uses_nu() {
    let mut p = synthetic(0.0, 1.0);
    let s = ift_solve(&mut p, &consts(0.0, 1.0, 0.6), &target(0.0, -0.01), &IftOptions::default()).unwrap();
    assert_eq!(s.branch, Branch::Nu);
    assert_eq!(s.xi.mu, 0.0);
    assert!((s.xi.nu.abs() - 0.1).abs() <= 1e-12);
}

#[test]
fn ift_coupled_family_meets_bound() {
    let (eps, gamma) = (0.01, 0.25);
    for &(e0, eb) in &[(1e-3, 1e-4), (-2e-3, 3e-4), (5e-4, -2e-4), (0.0, 1e-6)] {
        let mut p = synthetic(eps, gamma);
        let s = ift_solve(&mut p, &consts(eps, gamma, 0.25), &target(e0, eb), &IftOptions::default()).unwrap();
        let (a, b) = (p.f)(&s.xi.lambda, s.xi.mu, s.xi.nu).unwrap();
        let res = ((a[0] - e0).powi(2) + (b - eb).powi(2)).sqrt();
        assert!(res <= 1e-10, "residual {res}");
        assert_eq!(s.xi.mu * s.xi.nu, 0.0);
        assert!(s.bound_constant <= 10.0, "C = {}", s.bound_constant);
        assert!(s.contraction_ratio <= 0.5);
    }
}

#[test]
fn ift_rejects_wrong_curvature() {
    let mut p = FnProblem { dim: 1, f: |l: &[f64], mu: f64, nu: f64| Ok((vec![l[0]], -mu * mu - nu * nu)) };
    let err = ift_solve(&mut p, &consts(0.01, 0.5, 0.25), &target(0.0, 1e-4), &IftOptions::default()).unwrap_err();
    assert!(matches!(err, crate::Error::IftHypotheses(_)), "{err}");
    assert!(err.to_string().starts_with("IFT hypotheses fail"));
}

#[test]
fn ift_rejects_large_gap() {
    let mut p = synthetic(0.0, 1.0);
    let err = ift_solve(&mut p, &consts(0.0, 1.0, 0.1), &target(0.0, 0.5), &IftOptions::default()).unwrap_err();
    assert!(matches!(err, crate::Error::IftHypotheses(_)));
}

#[test]
fn ift_reports_stalled_contraction() {
    let mut p = FnProblem { dim: 1, f: |l: &[f64], mu: f64, _nu: f64| Ok((vec![3.0 * l[0]], mu * mu)) };
    let opts = IftOptions { check_hypotheses: false, ..IftOptions::default() };
    let err = ift_solve(&mut p, &consts(0.01, 1.0, 0.25), &target(1e-3, 0.0), &opts).unwrap_err();
    assert!(matches!(err, crate::Error::FixedPointFailed(_)), "{err}");
}

#[test]
fn ift_reports_missing_bracket() {
    let mut p = FnProblem { dim: 1, f: |l: &[f64], mu: f64, nu: f64| Ok((vec![l[0]], 1e-6 * (mu * mu - nu * nu))) };
    let opts = IftOptions { check_hypotheses: false, ..IftOptions::default() };
    let err = ift_solve(&mut p, &consts(0.01, 1.0, 0.25), &target(0.0, 1e-3), &opts).unwrap_err();
    assert!(matches!(err, crate::Error::RootBracketing(_)), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn ift_solutions_have_one_active_branch(
        eps in 0.0f64..0.02,
        gamma in 0.1f64..0.25,
        e0 in -1e-3f64..1e-3,
        eb in -1e-3f64..1e-3,
    ) {
        let lambda0 = 0.25;
        prop_assume!(eb.abs() <= gamma * lambda0 * lambda0 / 32.0);
        let mut p = synthetic(eps, gamma);
        let s = ift_solve(&mut p, &consts(eps, gamma, lambda0), &target(e0, eb), &IftOptions::default()).unwrap();
        prop_assert_eq!(s.xi.mu * s.xi.nu, 0.0);
        prop_assert!(s.xi.residual <= 1e-10);
        prop_assert!(s.xi.norm() <= lambda0);
        prop_assert!(s.bound_constant <= 10.0);
    }
}

#[test]
fn degenerate_basis_has_opposite_second_variations() {
    let f = torus(64);
    let rep = rank_report(&f).unwrap();
    let b = build_basis_fields(&f, &rep, &[], &BasisOptions::default()).unwrap();
    let [sp, sm] = b.second_signs.unwrap();
    assert!(sp > 0.0 && sm < 0.0, "{sp} {sm}");
    let [fp, fm] = b.first_plus_minus.unwrap();
    assert!(fp.abs() <= 1e-10 && fm.abs() <= 1e-10);
    assert_eq!(b.fields.len(), 1);
    assert!((b.condition_number() - 1.0).abs() <= 1e-12);
}

#[test]
fn basis_fields_vanish_on_excluded_region() {
    let f = torus(64);
    let grid = f.grid();
    let rep = rank_report(&f).unwrap();
    // A patch around (0.5, 0.5).
    let excluded: Vec<bool> = (0..grid.len())
        .map(|p| {
            let (u, v) = grid.point::<f64>(p);
            (u - 0.5).abs() < 0.1 && (v - 0.5).abs() < 0.1
        })
        .collect();
    let b = build_basis_fields(&f, &rep, &excluded, &BasisOptions::default()).unwrap();
    let fields = b.fields.iter().chain(b.plus.iter()).chain(b.minus.iter());
    for v in fields {
        for p in (0..grid.len()).filter(|&p| excluded[p]) {
            assert!(v.get(p).iter().all(|&x| x == 0.0));
        }
    }
    for s in [&b.support_fields, &b.support_plus, &b.support_minus] {
        assert!(!s.is_empty() && s.iter().all(|&p| !excluded[p]));
    }
}

#[test]
fn basis_fails_without_admissible_placement() {
    let f = torus(32);
    let rep = rank_report(&f).unwrap();
    let mut excluded = vec![true; f.grid().len()];
    excluded[0] = false;
    let err = build_basis_fields(&f, &rep, &excluded, &BasisOptions::default()).unwrap_err();
    assert!(err.to_string().starts_with("cannot build correction basis"), "{err}");
}

#[test]
fn full_rank_basis_is_well_conditioned() {
    let f = perturbed(&torus(64), 0.05, 3).unwrap();
    let rep = rank_report(&f).unwrap();
    assert_eq!(rep.rank, 2);
    let b = build_basis_fields(&f, &rep, &[], &BasisOptions::default()).unwrap();
    assert!(b.condition_number() <= 10.0, "condition {}", b.condition_number());
}

#[test]
fn full_rank_no_drift_is_identity() {
    let f = perturbed(&torus(64), 0.05, 3).unwrap();
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let c = correct_full_rank(&f, &b, &class_of(&f).unwrap(), &CorrectionOptions::default()).unwrap();
    assert_eq!(c.iterations, 0);
    assert_eq!(c.lambda, vec![0.0, 0.0]);
}

#[test]
fn full_rank_bound_constant_is_stable() {
    let f = perturbed(&torus(64), 0.05, 3).unwrap();
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let v = random_normal_field(&f, 9).unwrap();
    let target = class_of(&f).unwrap();
    let cs: Vec<f64> = [1e-3, 1e-2]
        .iter()
        .map(|&amp| {
            let c = correct_full_rank(&f.displaced(amp, &v), &b, &target, &CorrectionOptions::default()).unwrap();
            assert!(*c.residuals.last().unwrap() <= 1e-8);
            c.bound_constant
        })
        .collect();
    assert!((cs[0] - cs[1]).abs() <= 0.1 * cs[0], "C = {cs:?}");
}

#[test]
fn full_rank_newton_converges_quadratically() {
    let f = perturbed(&torus(64), 0.05, 3).unwrap();
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let t0 = class_of(&f).unwrap();
    let target = TeichmullerPoint::new(t0.re() + 2e-4, t0.im() - 1e-4).unwrap();
    let c = correct_full_rank(&f, &b, &target, &CorrectionOptions::default()).unwrap();
    assert!(c.iterations <= 5);
    let r = &c.residuals;
    assert!(r.len() >= 4 && *r.last().unwrap() <= 1e-8);
    // Successive residual ratios once in the quadratic regime.
    for w in r.windows(2).skip(1) {
        assert!(w[1] / w[0] <= 0.1, "residuals {r:?}");
    }
}

#[test]
fn flat_product_tori_are_degenerate() {
    let f = clifford_sheared::<f64>(GridSpec::square(32).unwrap());
    assert_eq!(rank_report(&f).unwrap().rank, 1);
}

#[test]
fn full_rank_rejects_start_outside_trust_radius() {
    let f = perturbed(&torus(32), 0.05, 3).unwrap();
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let err = correct_full_rank(&f, &b, &TeichmullerPoint::new(0.5, 1.5).unwrap(), &CorrectionOptions::default());
    assert!(matches!(err, Err(crate::Error::CorrectionDiverged(_))));
}

fn degenerate_target(b: &CorrectionBasis<f64>, tau0: &TeichmullerPoint<f64>, drift: f64) -> TeichmullerPoint<f64> {
    let e = b.null_direction.unwrap();
    TeichmullerPoint::new(tau0.re() + drift * e[0], tau0.im() + drift * e[1]).unwrap()
}

#[test]
fn degenerate_correction_scales_like_square_root() {
    let f = torus(64);
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let tau0 = class_of(&f).unwrap();
    let opts = CorrectionOptions::default();
    let zero = correct_degenerate(&f, &b, &tau0, &opts).unwrap();
    assert_eq!((zero.lambda[0], zero.mu, zero.nu), (0.0, 0.0, 0.0));
    let mut sizes = Vec::new();
    for drift in [1e-6, 1e-4] {
        let c = correct_degenerate(&f, &b, &degenerate_target(&b, &tau0, drift), &opts).unwrap();
        assert!(c.residual <= opts.tol_tau, "residual {}", c.residual);
        assert_eq!(c.mu * c.nu, 0.0);
        sizes.push((c.drift, c.mu.abs() + c.nu.abs()));
    }
    let slope = (sizes[1].1 / sizes[0].1).ln() / (sizes[1].0 / sizes[0].0).ln();
    assert!((0.4..=0.6).contains(&slope), "exponent {slope}");
}

#[test]
fn degenerate_correction_switches_branch_with_side() {
    let f = torus(64);
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let tau0 = class_of(&f).unwrap();
    let opts = CorrectionOptions::default();
    let up = correct_degenerate(&f, &b, &degenerate_target(&b, &tau0, 1e-4), &opts).unwrap();
    let down = correct_degenerate(&f, &b, &degenerate_target(&b, &tau0, -1e-4), &opts).unwrap();
    assert_ne!(up.branch, down.branch);
    assert!(up.residual <= opts.tol_tau && down.residual <= opts.tol_tau);
    // Determinism.
    let again = correct_degenerate(&f, &b, &degenerate_target(&b, &tau0, 1e-4), &opts).unwrap();
    assert_eq!((again.lambda.clone(), again.mu, again.nu), (up.lambda, up.mu, up.nu));
}

#[test]
fn degenerate_correction_reaches_image_direction_target() {
    let f = torus(64);
    let b = build_basis_fields(&f, &rank_report(&f).unwrap(), &[], &BasisOptions::default()).unwrap();
    let tau0 = class_of(&f).unwrap();
    let target = TeichmullerPoint::new(tau0.re(), tau0.im() + 1e-4).unwrap();
    let opts = CorrectionOptions::default();
    let c = correct_degenerate(&f, &b, &target, &opts).unwrap();
    assert_eq!(c.mu * c.nu, 0.0);
    assert!(c.residual <= opts.tol_tau, "residual {}", c.residual);
}

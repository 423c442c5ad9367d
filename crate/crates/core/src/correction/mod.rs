//! Restoring a prescribed Teichmüller class after an ambient perturbation.
//!
//! Full rank: Newton on `λ ↦ chart(π((f + λ_r V_r)* g_euc))` with masked
//! constraint-gradient fields `V_r`. Degenerate: the inverse function solver
//! of [`ift`] on `(λ, μ, ν)` with the extra bump fields `V_±`.

mod basis;
pub mod ift;
#[cfg(test)]
mod tests;

pub use basis::{build_basis, build_basis_fields, smooth_cutoff, BasisOptions, CorrectionBasis};
pub use ift::{
    ift_solve, sample_hypotheses, Branch, FnProblem, HypothesisReport, IftConstants, IftOptions, IftPoint,
    IftProblem, IftSolution, IftTarget, QuadraticFamily,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pullback_metric, Immersion};
use crate::tensor::solve2;
use crate::uniformization::{chart, modulus, teich_distance, TeichmullerPoint};
use crate::variations::TeichContext;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionOptions {
    /// Accepted Teichmüller distance to the target.
    pub tol_tau: f64,
    /// Largest starting distance a correction is attempted from.
    pub trust_radius: f64,
    pub max_iters: usize,
    pub ift: IftOptions,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            tol_tau: 1e-8,
            trust_radius: 0.1,
            max_iters: 20,
            ift: IftOptions { tol: 1e-10, samples: 2, fd_step: 1e-3, ..IftOptions::default() },
        }
    }
}

/// `f + Σ λ_r V_r + μ V₊ + ν V₋`.
pub fn combine<T: Real>(f: &Immersion<T>, basis: &CorrectionBasis<T>, lambda: &[T], mu: T, nu: T) -> Immersion<T> {
    let mut points = f.points.clone();
    for (v, &l) in basis.fields.iter().zip(lambda) {
        if l != T::zero() {
            points = points.axpy(l, v);
        }
    }
    for (v, s) in [(&basis.plus, mu), (&basis.minus, nu)] {
        if let (Some(v), true) = (v, s != T::zero()) {
            points = points.axpy(s, v);
        }
    }
    Immersion { points }
}

/// Teichmüller class of the pulled-back metric.
pub fn class_of<T: Real>(f: &Immersion<T>) -> Result<TeichmullerPoint<T>> {
    modulus(&pullback_metric(f)?)
}

#[derive(Debug, Clone)]
pub struct FullRankCorrection<T: Real> {
    pub lambda: Vec<T>,
    pub iterations: usize,
    /// Teichmüller distance to the target before each Newton step and at the end.
    pub residuals: Vec<T>,
    pub start_distance: T,
    /// `|λ| / d_T(start, target)`, zero without drift.
    pub bound_constant: T,
    pub corrected: Immersion<T>,
    pub tau: TeichmullerPoint<T>,
}

/// Newton correction with the Jacobian `(δτ̂.V_r)_r` re-evaluated at every iterate.
pub fn correct_full_rank<T: Real>(
    f_pert: &Immersion<T>,
    basis: &CorrectionBasis<T>,
    target: &TeichmullerPoint<T>,
    opts: &CorrectionOptions,
) -> Result<FullRankCorrection<T>> {
    if basis.rank != 2 || basis.fields.len() != 2 {
        return Err(Error::SingularJacobian);
    }
    let tol = T::lit(opts.tol_tau);
    let trust = T::lit(opts.trust_radius);
    let goal = chart(target);
    let mut lambda = vec![T::zero(); 2];
    let mut residuals = Vec::new();
    let mut current = f_pert.clone();
    let mut start_distance = T::zero();
    for it in 0..=opts.max_iters {
        let ctx = TeichContext::new(&current)?;
        let tau = ctx.chart.tau;
        let d = teich_distance(&tau, target)?;
        residuals.push(d);
        if it == 0 {
            start_distance = d;
            if !(d <= trust) {
                return Err(Error::CorrectionDiverged(format!(
                    "start distance {:e} exceeds trust radius {:e}",
                    d.to_f64_lossy(),
                    opts.trust_radius
                )));
            }
        }
        if d <= tol {
            let norm = lambda[0].hypot(lambda[1]);
            let bound_constant = if start_distance > T::zero() { norm / start_distance } else { T::zero() };
            log::debug!(
                "full-rank correction: {it} Newton steps, |lambda| = {:e}, C = {:.4}",
                norm.to_f64_lossy(),
                bound_constant.to_f64_lossy()
            );
            return Ok(FullRankCorrection {
                lambda,
                iterations: it,
                residuals,
                start_distance,
                bound_constant,
                corrected: current,
                tau,
            });
        }
        if !(d <= T::lit(2.0) * trust) || it == opts.max_iters {
            break;
        }
        let cols = [ctx.first_variation(&basis.fields[0]).delta, ctx.first_variation(&basis.fields[1]).delta];
        let jac = [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]];
        let x = chart(&tau);
        let step = solve2(jac, [goal[0] - x[0], goal[1] - x[1]], T::lit(1e-12)).ok_or(Error::SingularJacobian)?;
        lambda[0] += step[0];
        lambda[1] += step[1];
        current = combine(f_pert, basis, &lambda, T::zero(), T::zero());
    }
    Err(Error::CorrectionDiverged(format!(
        "residual {:e} after {} Newton steps",
        residuals.last().copied().unwrap_or(T::nan()).to_f64_lossy(),
        residuals.len() - 1
    )))
}

#[derive(Debug, Clone)]
pub struct DegenerateCorrection<T: Real> {
    pub lambda: Vec<T>,
    pub mu: T,
    pub nu: T,
    pub branch: Branch,
    /// Teichmüller distance of the corrected immersion to the target.
    pub residual: T,
    /// Teichmüller distance of `f_pert` to the target.
    pub drift: T,
    pub constants: IftConstants<T>,
    pub hypotheses: Option<HypothesisReport<T>>,
    /// Measured constant of `|ξ| ≤ C γ^{−1/2} |Φ(0) − η|^{1/2}`.
    pub bound_constant: T,
    pub second: Option<IftPoint<T>>,
    pub corrected: Immersion<T>,
    pub tau: TeichmullerPoint<T>,
    pub evaluations: usize,
}

/// `ξ ↦ (⟨x − x_ref, d⟩, ⟨x − x_ref, e⟩)` with `x` the chart class of the combined immersion.
struct DegenerateMap<'a, T: Real> {
    f: &'a Immersion<T>,
    basis: &'a CorrectionBasis<T>,
    x_ref: [T; 2],
    d: [T; 2],
    e: [T; 2],
}

impl<T: Real> IftProblem<T> for DegenerateMap<'_, T> {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&mut self, lambda: &[T], mu: T, nu: T) -> Result<(Vec<T>, T)> {
        let x = chart(&class_of(&combine(self.f, self.basis, lambda, mu, nu))?);
        let dx = [x[0] - self.x_ref[0], x[1] - self.x_ref[1]];
        Ok((vec![dx[0] * self.d[0] + dx[1] * self.d[1]], dx[0] * self.e[0] + dx[1] * self.e[1]))
    }
}

/// Secant solve of the image equation with `μ = ν = 0`. Returns `λ` when the
/// whole class distance, including the null component, is within tolerance;
/// this is the IFT solution whenever the null gap is already negligible.
fn image_only<T: Real>(
    map: &mut DegenerateMap<'_, T>,
    eta0: T,
    target: &TeichmullerPoint<T>,
    opts: &CorrectionOptions,
) -> Result<Option<(T, usize)>> {
    let tol = T::lit(opts.tol_tau);
    let (mut l0, mut r0) = (T::zero(), -eta0);
    let mut l1 = eta0;
    for n in 1..=6 {
        let tau = class_of(&combine(map.f, map.basis, &[l1], T::zero(), T::zero()))?;
        if teich_distance(&tau, target)? <= tol {
            return Ok(Some((l1, n)));
        }
        let x = chart(&tau);
        let r1 = (x[0] - map.x_ref[0]) * map.d[0] + (x[1] - map.x_ref[1]) * map.d[1] - eta0;
        let slope = (r1 - r0) / (l1 - l0);
        if !(slope.abs() > T::lit(0.1)) {
            return Ok(None);
        }
        (l0, r0) = (l1, r1);
        l1 = l1 - r1 / slope;
    }
    Ok(None)
}

/// Radius for which the smallness conditions hold with the given constants.
fn required_radius<T: Real>(gap0: T, gap_bar: T, gamma: T, lambda_cap: T) -> T {
    (T::lit(32.0) * gap_bar / gamma)
        .sqrt()
        .max(T::lit(8.0) * gap0)
        .max((gap0 / lambda_cap).sqrt())
}

/// Degenerate correction: estimates the hypothesis constants by sampling,
/// then runs [`ift_solve`] with `M = 1`.
pub fn correct_degenerate<T: Real>(
    f_pert: &Immersion<T>,
    basis: &CorrectionBasis<T>,
    target: &TeichmullerPoint<T>,
    opts: &CorrectionOptions,
) -> Result<DegenerateCorrection<T>> {
    let (e, _, _) = basis.degenerate_parts()?;
    let d = basis.image_direction;
    let tau0 = class_of(f_pert)?;
    let drift = teich_distance(&tau0, target)?;
    let x_ref = chart(&tau0);
    let goal = chart(target);
    let g = [goal[0] - x_ref[0], goal[1] - x_ref[1]];
    let eta = IftTarget { eta0: vec![g[0] * d[0] + g[1] * d[1]], eta_bar: g[0] * e[0] + g[1] * e[1] };
    let done = |lambda: Vec<T>, mu: T, nu: T, branch, constants, hypotheses, bound_constant, second, evaluations| {
        let corrected = combine(f_pert, basis, &lambda, mu, nu);
        let tau = class_of(&corrected)?;
        let residual = teich_distance(&tau, target)?;
        Ok(DegenerateCorrection {
            lambda,
            mu,
            nu,
            branch,
            residual,
            drift,
            constants,
            hypotheses,
            bound_constant,
            second,
            corrected,
            tau,
            evaluations,
        })
    };
    let trivial = IftConstants { epsilon: T::zero(), gamma: T::zero(), lambda_cap: T::one(), lambda0: T::zero() };
    if drift <= T::lit(opts.tol_tau) {
        return done(vec![T::zero()], T::zero(), T::zero(), Branch::Mu, trivial, None, T::zero(), None, 0);
    }
    if !(drift <= T::lit(opts.trust_radius)) {
        return Err(Error::CorrectionDiverged(format!(
            "start distance {:e} exceeds trust radius {:e}",
            drift.to_f64_lossy(),
            opts.trust_radius
        )));
    }
    let mut map = DegenerateMap { f: f_pert, basis, x_ref, d, e };
    if let Some((lambda, n)) = image_only(&mut map, eta.eta0[0], target, opts)? {
        return done(vec![lambda], T::zero(), T::zero(), Branch::Mu, trivial, None, T::zero(), None, n);
    }
    let gap0 = eta.eta0[0].abs();
    let gap_bar = eta.eta_bar.abs();
    // The fields are normalized so that ∂_λΦ₀ ≈ 1 and ±∂²φ ≈ 1.
    let mut lambda0 = T::lit(1.5) * required_radius(gap0, gap_bar, T::lit(0.5), T::one());
    let mut evals = 0;
    let mut estimate = None;
    for _ in 0..3 {
        let mut o = opts.ift;
        o.fd_step = o.fd_step.min(lambda0.to_f64_lossy() / 8.0);
        let (rep, n) = sample_hypotheses(&mut map, lambda0, &o)?;
        evals += n;
        let c = rep.margined_constants(lambda0);
        if !(c.gamma > T::zero()) {
            return Err(Error::IftHypotheses(format!(
                "estimated curvatures d_mumu phi = {:e}, -d_nunu phi = {:e} are not positive",
                rep.curv_mu.to_f64_lossy(),
                rep.curv_nu.to_f64_lossy()
            )));
        }
        let need = required_radius(gap0, gap_bar, c.gamma, c.lambda_cap);
        estimate = Some((rep, c));
        if need <= lambda0 {
            break;
        }
        lambda0 = T::lit(1.25) * need;
    }
    let (rep, constants) = estimate.ok_or_else(|| Error::IftHypotheses("no estimate".into()))?;
    let constants = IftConstants { lambda0, ..constants };
    let bad = rep.violations(&constants);
    if !bad.is_empty() {
        return Err(Error::IftHypotheses(bad.join("; ")));
    }
    log::info!(
        "degenerate correction: drift {:e}, lambda0 {:e}, eps {:e}, gamma {:e}, Lambda {:e}, coupling ratio {:.3}",
        drift.to_f64_lossy(),
        lambda0.to_f64_lossy(),
        constants.epsilon.to_f64_lossy(),
        constants.gamma.to_f64_lossy(),
        constants.lambda_cap.to_f64_lossy(),
        constants.coupling_ratio().to_f64_lossy()
    );
    let ift_opts = IftOptions { check_hypotheses: false, ..opts.ift };
    let sol = ift_solve(&mut map, &constants, &eta, &ift_opts)?;
    let xi = &sol.xi;
    log::info!(
        "degenerate correction: mu = {:e}, nu = {:e}, |mu|+|nu| / drift^(1/2) = {:.4}",
        xi.mu.to_f64_lossy(),
        xi.nu.to_f64_lossy(),
        ((xi.mu.abs() + xi.nu.abs()) / drift.sqrt()).to_f64_lossy()
    );
    done(
        xi.lambda.clone(),
        xi.mu,
        xi.nu,
        sol.branch,
        constants,
        Some(rep),
        sol.bound_constant,
        sol.second.clone(),
        evals + sol.evaluations,
    )
}

/// Dispatches on the basis rank.
pub fn correct<T: Real>(
    f_pert: &Immersion<T>,
    basis: &CorrectionBasis<T>,
    target: &TeichmullerPoint<T>,
    opts: &CorrectionOptions,
) -> Result<(Immersion<T>, TeichmullerPoint<T>)> {
    if basis.rank == 2 {
        let c = correct_full_rank(f_pert, basis, target, opts)?;
        Ok((c.corrected, c.tau))
    } else {
        let c = correct_degenerate(f_pert, basis, target, opts)?;
        if !(c.residual <= T::lit(opts.tol_tau)) {
            return Err(Error::CorrectionDiverged(format!(
                "degenerate correction left distance {:e}",
                c.residual.to_f64_lossy()
            )));
        }
        Ok((c.corrected, c.tau))
    }
}

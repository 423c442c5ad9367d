//! Willmore descent under a fixed Teichmüller class.
//!
//! Each step moves along the preconditioned, constraint-projected negative
//! gradient, restores the class with the correction module and accepts by
//! Armijo on the corrected energy. Iterates are kept at unit area with the
//! centroid at the origin.

use serde::{Deserialize, Serialize};

use crate::correction::{
    build_basis, class_of, correct, BasisOptions, CorrectionOptions, IftOptions,
};
use crate::error::{Error, Result};
use crate::geometry::{GeometryCache, Immersion};
use crate::grid::{fd_symbol, fd_symbol_second, signed_freq, Dir, DivergenceOperator, Fft2, ScalarField, VectorField};
use crate::tensor::Sym2;
use crate::uniformization::{chart, teich_distance, TeichmullerPoint};
use crate::variations::{TTTensor, TeichContext};
use crate::Real;

/// Energy thresholds `W_{n,p}` below which minimizers are known to exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub n: usize,
    pub genus: usize,
    pub expression: &'static str,
    /// Numerical value, when determined by known constants.
    pub value: Option<f64>,
}

/// `W_{3,p} = min(8π, 4π + Σ_k(β³_{p_k} − 4π))` and
/// `W_{4,p} = min(8π, β⁴_p + 8π/3, 4π + Σ_k(β⁴_{p_k} − 4π))` over splittings
/// `Σ p_k = p`, `0 ≤ p_k < p`, with `β^n_p` the infimum over genus `p` immersions.
pub const THRESHOLDS: [Threshold; 4] = [
    Threshold { n: 3, genus: 1, expression: "min(8pi, 4pi + sum_k(beta3_{p_k} - 4pi))", value: Some(8.0 * std::f64::consts::PI) },
    Threshold { n: 4, genus: 1, expression: "min(8pi, beta4_1 + 8pi/3, 4pi + sum_k(beta4_{p_k} - 4pi))", value: Some(8.0 * std::f64::consts::PI) },
    Threshold { n: 3, genus: 2, expression: "min(8pi, 4pi + sum_k(beta3_{p_k} - 4pi))", value: None },
    Threshold { n: 4, genus: 2, expression: "min(8pi, beta4_2 + 8pi/3, 4pi + sum_k(beta4_{p_k} - 4pi))", value: None },
];

/// `W_{n,p}` from [`THRESHOLDS`].
pub fn threshold(n: usize, genus: usize) -> Option<f64> {
    THRESHOLDS.iter().find(|t| t.n == n && t.genus == genus).and_then(|t| t.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub tau_target: TeichmullerPoint<f64>,
    pub max_iters: usize,
    pub step_init: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    /// Bound on the L² norm of the constraint-projected gradient.
    pub tol_grad: f64,
    pub tol_tau: f64,
    pub energy_ceiling: f64,
    pub rng_seed: u64,
    /// Smallest trial step before the line search gives up.
    pub min_step: f64,
    /// Mode `m` of the preconditioner shift `β = (2π m)²` in `(β − Δ_g)⁻²`.
    pub smoothing_mode: f64,
    pub trust_radius: f64,
    pub basis: BasisOptions,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tau_target: TeichmullerPoint::square(),
            max_iters: 300,
            step_init: 0.5,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            tol_grad: 1e-3,
            tol_tau: 1e-6,
            energy_ceiling: 8.0 * std::f64::consts::PI - 1e-3,
            rng_seed: 1,
            min_step: 1e-10,
            smoothing_mode: 1.0,
            trust_radius: 0.1,
            basis: BasisOptions::default(),
        }
    }
}

impl MinimizeOptions {
    /// Checks ranges; `dim` is the ambient dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = [
            ("step_init", self.step_init),
            ("tol_grad", self.tol_grad),
            ("tol_tau", self.tol_tau),
            ("energy_ceiling", self.energy_ceiling),
            ("min_step", self.min_step),
            ("smoothing_mode", self.smoothing_mode),
            ("trust_radius", self.trust_radius),
            ("tau_target.im", self.tau_target.im()),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidOptions("max_iters must be positive".into()));
        }
        for (name, v) in [("backtrack_factor", self.backtrack_factor), ("armijo_c", self.armijo_c)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidOptions(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if let Some(w) = threshold(dim, 1) {
            if dim == 3 && !(self.energy_ceiling < w) {
                return Err(Error::InvalidOptions(format!(
                    "energy_ceiling {} must be below W_3,1 = {w}",
                    self.energy_ceiling
                )));
            }
        }
        Ok(())
    }

    fn correction(&self) -> CorrectionOptions {
        // Corrected iterates land well inside the tolerance so later drift stays admissible.
        CorrectionOptions {
            tol_tau: 0.1 * self.tol_tau,
            trust_radius: self.trust_radius,
            ift: IftOptions { seed: self.rng_seed, ..CorrectionOptions::default().ift },
            ..CorrectionOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    CeilingExceeded,
    CorrectionFailed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::CeilingExceeded => "ceiling_exceeded",
            Status::CorrectionFailed => "correction_failed",
        }
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub tau_re: f64,
    pub tau_im: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Sup norm of the class correction added to the trial immersion.
    pub corrected_norm: f64,
    pub status: String,
}

/// Translates the area centroid to the origin and scales to unit area.
pub fn normalize<T: Real>(f: &Immersion<T>) -> Result<Immersion<T>> {
    let geo = GeometryCache::new(f)?;
    let area = geo.area();
    let dim = f.dim();
    let centroid: Vec<T> = (0..dim)
        .map(|c| geo.integrate(&f.points.component(c)) / area)
        .collect();
    let neg: Vec<T> = centroid.iter().map(|&x| -x).collect();
    Ok(f.translated(&neg).scaled(T::one() / area.sqrt()))
}

/// Preconditioner `B w = P⊥ M R M P⊥ w` with `M = (β − Δ_g)⁻¹`, self-adjoint
/// and positive on normal fields in `L²(dμ_g)`; its inverse matches the
/// leading part `Δ_g²` of the Willmore Hessian.
///
/// `Δ_g` composes first differences, whose symbol vanishes at the Nyquist
/// modes where the energy's second differences are stiff. `R = g^{-1/4} F g^{1/4}`
/// applies the squared ratio `F = ((1 + s²)/(1 + σ²))²` of the composed symbol
/// `s²` to the second-difference symbol `σ²`, which is `1 + O(h⁴k⁶)` on
/// resolved modes.
struct Smoother<T: Real> {
    op: DivergenceOperator<T>,
    sqrt_g: Vec<T>,
    quarter: Vec<T>,
    fft: Fft2<T>,
    ratio: Vec<T>,
}

const SMOOTHER_TOL: f64 = 1e-9;
const SMOOTHER_MAX_ITERS: usize = 400;

impl<T: Real> Smoother<T> {
    /// `β = (2π m)²` for smoothing mode `m`.
    fn new(geo: &GeometryCache<T>, mode: T) -> Self {
        let grid = geo.grid;
        let beta = (T::tau() * mode).powi(2);
        let sqrt_g = geo.sqrt_det_g.data.clone();
        let coeff = geo.g_inv.data.iter().zip(&sqrt_g).map(|(gi, &s)| gi.scale(s)).collect();
        let mass = sqrt_g.iter().map(|&s| beta * s).collect();
        let quarter = sqrt_g.iter().map(|&s| s.sqrt()).collect();
        let nv = grid.n_v;
        let ratio = (0..grid.len())
            .map(|p| {
                let (ku, kv) = (p / nv, p % nv);
                let s2 = fd_symbol::<T>(&grid, Dir::U, ku).powi(2) + fd_symbol::<T>(&grid, Dir::V, kv).powi(2);
                let sigma2 = -(fd_symbol_second::<T>(&grid, Dir::U, ku) + fd_symbol_second::<T>(&grid, Dir::V, kv));
                ((T::one() + s2) / (T::one() + sigma2)).powi(2)
            })
            .collect();
        Self {
            op: DivergenceOperator::with_mass(grid, coeff, mass),
            sqrt_g,
            quarter,
            fft: Fft2::new(grid),
            ratio,
        }
    }

    /// `(β − Δ_g)⁻¹ r`, i.e. the solution of `D_i(√g g^{ij} D_j x) − β√g x = −√g r`.
    fn resolve(&self, r: &[T]) -> Vec<T> {
        let rhs: Vec<T> = r.iter().zip(&self.sqrt_g).map(|(&a, &s)| -a * s).collect();
        let (x, st) = self.op.solve(&rhs, T::lit(SMOOTHER_TOL), SMOOTHER_MAX_ITERS);
        if !st.converged {
            log::debug!("preconditioner solve stopped at residual {:e}", st.residual);
        }
        x
    }

    fn filter(&self, r: &[T]) -> Vec<T> {
        let nv = self.fft.grid().n_v;
        let x: Vec<T> = r.iter().zip(&self.quarter).map(|(&a, &q)| a * q).collect();
        let y = self.fft.filter(&x, |ku, kv| self.ratio[ku * nv + kv]);
        y.into_iter().zip(&self.quarter).map(|(a, &q)| a / q).collect()
    }

    fn apply(&self, geo: &GeometryCache<T>, w: &VectorField<T>) -> VectorField<T> {
        let n = geo.normal_part(w);
        let comps: Vec<ScalarField<T>> = (0..n.dim)
            .map(|c| {
                let data = self.resolve(&self.filter(&self.resolve(&n.component(c).data)));
                ScalarField { grid: n.grid, data }
            })
            .collect();
        geo.normal_part(&VectorField::from_components(&comps))
    }
}

/// Zeroes the Fourier modes with `|k_u| > n_u/3` or `|k_v| > n_v/3`.
///
/// The energy's second differences are far stiffer near the Nyquist band
/// than the composed first differences of the Euler–Lagrange field, so the
/// descent direction cannot control those modes; filtering every trial keeps
/// them out of the iterates.
pub fn dealias<T: Real>(f: &Immersion<T>) -> Immersion<T> {
    let grid = f.grid();
    let fft = Fft2::new(grid);
    let (cu, cv) = ((grid.n_u / 3) as isize, (grid.n_v / 3) as isize);
    let comps: Vec<ScalarField<T>> = (0..f.dim())
        .map(|c| {
            let data = fft.filter(&f.points.component(c).data, |ku, kv| {
                if signed_freq(ku, grid.n_u).abs() > cu || signed_freq(kv, grid.n_v).abs() > cv {
                    T::zero()
                } else {
                    T::one()
                }
            });
            ScalarField { grid, data }
        })
        .collect();
    Immersion { points: VectorField::from_components(&comps) }
}

/// Least-squares coefficients of `w` on `fields` in `L²(dμ_g)`, dropping
/// Gram eigendirections below `1e-12` of the largest.
fn project_coeffs<T: Real>(gram: &Sym2<T>, rhs: [T; 2]) -> [T; 2] {
    let ev = gram.eigenvalues();
    if !(ev[1] > T::zero()) {
        return [T::zero(); 2];
    }
    let mut c = [T::zero(); 2];
    for &lam in &ev {
        if lam > T::lit(1e-12) * ev[1] {
            let v = gram.eigenvector(lam);
            let s = (v[0] * rhs[0] + v[1] * rhs[1]) / lam;
            c[0] += s * v[0];
            c[1] += s * v[1];
        }
    }
    c
}

/// Multiplier fit of the Euler–Lagrange field on the constraint gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierFit<T> {
    /// Fitted TT tensor in the flat coordinates of the uniformized metric.
    pub q: TTTensor<T>,
    /// Coefficients on the orthonormal TT basis.
    pub coeffs: [T; 2],
    /// `‖EL − Σ q_r Φ_r‖ / ‖EL‖`, zero when `EL = 0`.
    pub residual_rel: T,
    /// `‖EL − Σ q_r Φ_r‖_{L²(dμ_g)}`.
    pub residual_abs: T,
    pub el_norm: T,
    /// `max_r |⟨EL − Σ q_s Φ_s, Φ_r⟩|`.
    pub orthogonality: T,
}

/// Fits `ΔᵖH + Q(A⁰)H ≈ g^{ik}g^{jl}A⁰_ij q_kl` over the TT space. The factor
/// between `q` and the multiplier of the energy is absorbed into `q`.
pub fn fit_multiplier<T: Real>(f: &Immersion<T>) -> Result<MultiplierFit<T>> {
    fit_multiplier_ctx(&TeichContext::new(f)?)
}

pub fn fit_multiplier_ctx<T: Real>(ctx: &TeichContext<T>) -> Result<MultiplierFit<T>> {
    Ok(fit_field(ctx, &ctx.geometry.el_operator()))
}

/// Least-squares fit of an arbitrary normal field `el` on `Φ_1, Φ_2`.
pub fn fit_field<T: Real>(ctx: &TeichContext<T>, el: &VectorField<T>) -> MultiplierFit<T> {
    let geo = &ctx.geometry;
    let el_norm = geo.l2_norm(el);
    if el_norm == T::zero() {
        return MultiplierFit {
            q: TTTensor::default(),
            coeffs: [T::zero(); 2],
            residual_rel: T::zero(),
            residual_abs: T::zero(),
            el_norm,
            orthogonality: T::zero(),
        };
    }
    let phi = &ctx.phi;
    let gram = Sym2::new(geo.l2_inner(&phi[0], &phi[0]), geo.l2_inner(&phi[0], &phi[1]), geo.l2_inner(&phi[1], &phi[1]));
    let coeffs = project_coeffs(&gram, [geo.l2_inner(&phi[0], el), geo.l2_inner(&phi[1], el)]);
    let res = el.axpy(-coeffs[0], &phi[0]).axpy(-coeffs[1], &phi[1]);
    let residual_abs = geo.l2_norm(&res);
    let orthogonality = geo.l2_inner(&res, &phi[0]).abs().max(geo.l2_inner(&res, &phi[1]).abs());
    let m = ctx.chart.metric;
    let qy = ctx.basis[0].scale(coeffs[0]).add(&ctx.basis[1].scale(coeffs[1]));
    MultiplierFit {
        q: TTTensor::from_components(&qy, &m),
        coeffs,
        residual_rel: residual_abs / el_norm,
        residual_abs,
        el_norm,
        orthogonality,
    }
}

/// Iterate carried between descent steps.
#[derive(Debug, Clone)]
pub struct DescentState<T: Real> {
    pub f: Immersion<T>,
    pub energy: T,
    pub tau: TeichmullerPoint<T>,
    /// Trial step of the next line search.
    pub step: T,
    pub iter: usize,
}

impl<T: Real> DescentState<T> {
    pub fn new(f: Immersion<T>, step: T) -> Result<Self> {
        let energy = GeometryCache::new(&f)?.willmore_energy();
        let tau = class_of(&f)?;
        Ok(Self { f, energy, tau, step, iter: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Accepted,
    /// Gradient below tolerance or no decrease down to the minimal step.
    Stationary,
    CorrectionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub outcome: StepOutcome,
    pub record: IterationRecord,
    /// Largest relative gap of the Gauss–Bonnet identities at the step's start.
    pub gauss_bonnet_gap: f64,
    pub rank: usize,
}

/// Constraint-projected gradient data at `f`.
struct Direction<T: Real> {
    d: VectorField<T>,
    slope: T,
    grad_norm: T,
}

fn direction<T: Real>(ctx: &TeichContext<T>, mode: T) -> Direction<T> {
    let geo = &ctx.geometry;
    let half = T::lit(0.5);
    let g = geo.el_operator().scale(half);
    let phi = &ctx.phi;
    let gram = Sym2::new(geo.l2_inner(&phi[0], &phi[0]), geo.l2_inner(&phi[0], &phi[1]), geo.l2_inner(&phi[1], &phi[1]));
    let c = project_coeffs(&gram, [geo.l2_inner(&phi[0], &g), geo.l2_inner(&phi[1], &g)]);
    let r = g.axpy(-c[0], &phi[0]).axpy(-c[1], &phi[1]);
    let grad_norm = geo.l2_norm(&r);
    let smoother = Smoother::new(geo, mode);
    let bg = smoother.apply(geo, &g);
    let bphi = [smoother.apply(geo, &phi[0]), smoother.apply(geo, &phi[1])];
    let bgram = Sym2::new(
        geo.l2_inner(&phi[0], &bphi[0]),
        T::lit(0.5) * (geo.l2_inner(&phi[0], &bphi[1]) + geo.l2_inner(&phi[1], &bphi[0])),
        geo.l2_inner(&phi[1], &bphi[1]),
    );
    let cb = project_coeffs(&bgram, [geo.l2_inner(&phi[0], &bg), geo.l2_inner(&phi[1], &bg)]);
    let d = bg.axpy(-cb[0], &bphi[0]).axpy(-cb[1], &bphi[1]).scale(-T::one());
    let slope = geo.l2_inner(&g, &d);
    Direction { d, slope, grad_norm }
}

/// One line search along the projected, preconditioned gradient with class correction.
pub fn descent_step<T: Real>(state: &mut DescentState<T>, opts: &MinimizeOptions) -> Result<StepReport> {
    let ctx = TeichContext::new(&state.f)?;
    let gb = ctx.geometry.gauss_bonnet_report(1u32).max_rel_gap();
    let dir = direction(&ctx, T::lit(opts.smoothing_mode));
    let target = TeichmullerPoint::new(T::lit(opts.tau_target.re()), T::lit(opts.tau_target.im()))?;
    let mut record = IterationRecord {
        iter: state.iter + 1,
        energy: state.energy.to_f64_lossy(),
        tau_re: state.tau.re().to_f64_lossy(),
        tau_im: state.tau.im().to_f64_lossy(),
        grad_norm: dir.grad_norm.to_f64_lossy(),
        step: 0.0,
        corrected_norm: 0.0,
        status: String::new(),
    };
    let report = |outcome: StepOutcome, mut record: IterationRecord, rank: usize| {
        record.status = match outcome {
            StepOutcome::Accepted => "accepted",
            StepOutcome::Stationary => "converged",
            StepOutcome::CorrectionFailed => "correction_failed",
        }
        .to_string();
        StepReport { outcome, record, gauss_bonnet_gap: gb, rank }
    };
    if dir.grad_norm <= T::lit(opts.tol_grad) || !(dir.slope < T::zero()) {
        return Ok(report(StepOutcome::Stationary, record, 0));
    }
    let rank_report = ctx.rank_report()?;
    let basis = build_basis(&ctx, &rank_report, &[], &opts.basis)?;
    let copts = opts.correction();
    let mut t = state.step;
    let mut last_failure = None;
    while t >= T::lit(opts.min_step) {
        let trial = dealias(&state.f.displaced(t, &dir.d));
        let attempt = correct(&trial, &basis, &target, &copts)
            .and_then(|(fc, tau)| Ok((GeometryCache::new(&fc)?.willmore_energy(), fc, tau)));
        match attempt {
            Ok((energy, fc, tau)) => {
                last_failure = None;
                if energy <= state.energy + T::lit(opts.armijo_c) * t * dir.slope {
                    let delta = fc.points.axpy(-T::one(), &trial.points).max_norm();
                    state.f = normalize(&fc)?;
                    state.energy = energy;
                    state.tau = tau;
                    state.iter += 1;
                    state.step = t * T::lit(2.0);
                    record.energy = energy.to_f64_lossy();
                    record.tau_re = tau.re().to_f64_lossy();
                    record.tau_im = tau.im().to_f64_lossy();
                    record.step = t.to_f64_lossy();
                    record.corrected_norm = delta.to_f64_lossy();
                    return Ok(report(StepOutcome::Accepted, record, rank_report.rank));
                }
            }
            // Any numerical failure on the trial immersion rejects the step.
            Err(Error::InvalidOptions(m)) => return Err(Error::InvalidOptions(m)),
            Err(e) => {
                log::debug!("trial at step {:e} failed: {e}", t.to_f64_lossy());
                last_failure = Some(e);
            }
        }
        t = t * T::lit(opts.backtrack_factor);
    }
    state.step = T::lit(opts.step_init);
    record.step = t.to_f64_lossy();
    let outcome = match last_failure {
        Some(e) => {
            log::warn!("correction failed at the minimal step: {e}");
            StepOutcome::CorrectionFailed
        }
        None => StepOutcome::Stationary,
    };
    Ok(report(outcome, record, rank_report.rank))
}

#[derive(Debug, Clone)]
pub struct MinimizeResult<T: Real> {
    pub final_immersion: Immersion<T>,
    /// Energies of the initial and every accepted iterate.
    pub energy_trace: Vec<T>,
    pub tau_trace: Vec<TeichmullerPoint<T>>,
    pub multiplier: MultiplierFit<T>,
    pub el_residual_rel: T,
    pub status: Status,
    pub records: Vec<IterationRecord>,
    /// Largest Gauss–Bonnet gap along the trajectory.
    pub gauss_bonnet_gap: f64,
}

/// Damped Gauss–Newton flow along the constraint gradients `Φ_r` towards
/// `target`, stopping once the class distance is at most `stop`.
///
/// The `Φ_r` are global normal fields, so large class changes spread over
/// the whole surface instead of the localized correction supports. Steps are
/// capped in sup norm by `max_disp` (relative to the unit-area scale) and the
/// cap halves whenever the distance fails to decrease.
pub fn class_flow<T: Real>(
    f: &Immersion<T>,
    target: &TeichmullerPoint<T>,
    stop: T,
    max_disp: T,
    max_steps: usize,
) -> Result<Immersion<T>> {
    let mut cur = f.clone();
    let mut cap = max_disp;
    let mut dist = teich_distance(&class_of(&cur)?, target)?;
    let goal = chart(target);
    for _ in 0..max_steps {
        if dist <= stop {
            return Ok(cur);
        }
        let ctx = TeichContext::new(&cur)?;
        let x = chart(&ctx.chart.tau);
        let gap = [goal[0] - x[0], goal[1] - x[1]];
        let geo = &ctx.geometry;
        let m2 = T::lit(-2.0);
        let cols = [0, 1].map(|s| {
            ctx.chart_image([m2 * geo.l2_inner(&ctx.phi[0], &ctx.phi[s]), m2 * geo.l2_inner(&ctx.phi[1], &ctx.phi[s])])
        });
        // Minimum-norm least squares through the normal equations of J = [cols].
        let jtj = Sym2::new(
            cols[0][0] * cols[0][0] + cols[0][1] * cols[0][1],
            cols[0][0] * cols[1][0] + cols[0][1] * cols[1][1],
            cols[1][0] * cols[1][0] + cols[1][1] * cols[1][1],
        );
        let jtg = [cols[0][0] * gap[0] + cols[0][1] * gap[1], cols[1][0] * gap[0] + cols[1][1] * gap[1]];
        let c = project_coeffs(&jtj, jtg);
        let v = ctx.phi[0].scale(c[0]).axpy(c[1], &ctx.phi[1]);
        let sup = v.max_norm();
        if !(sup > T::zero()) {
            break;
        }
        let scale = geo.area().sqrt();
        let mut accepted = false;
        while cap > T::lit(1e-8) {
            let t = T::one().min(cap * scale / sup);
            let trial = dealias(&cur.displaced(t, &v));
            if let Ok(d) = class_of(&trial).and_then(|tau| teich_distance(&tau, target)) {
                if d < dist {
                    cur = trial;
                    dist = d;
                    accepted = true;
                    cap = (cap * T::lit(1.5)).min(max_disp);
                    break;
                }
            }
            cap = cap * T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    if dist <= stop {
        Ok(cur)
    } else {
        Err(Error::CorrectionDiverged(format!(
            "class flow stopped at distance {:e}",
            dist.to_f64_lossy()
        )))
    }
}

/// Moves `f` into the target class with [`class_flow`]; the local correction
/// only closes a remaining gap the flow cannot reach, such as a null direction
/// of a degenerate immersion.
fn pre_correct<T: Real>(f: &Immersion<T>, target: &TeichmullerPoint<T>, opts: &MinimizeOptions) -> Result<Immersion<T>> {
    let dist = teich_distance(&class_of(f)?, target)?;
    if dist <= T::lit(opts.tol_tau) {
        return Ok(f.clone());
    }
    let stop = T::lit(0.1 * opts.tol_tau);
    let near = match class_flow(f, target, stop, T::lit(PRE_CORRECTION_DISP), PRE_CORRECTION_STEPS) {
        Ok(g) => return Ok(g),
        Err(Error::CorrectionDiverged(m)) => {
            log::info!("{m}; finishing with the local correction");
            class_flow(f, target, T::lit(opts.trust_radius), T::lit(PRE_CORRECTION_DISP), PRE_CORRECTION_STEPS)?
        }
        Err(e) => return Err(e),
    };
    let ctx = TeichContext::new(&near)?;
    let basis = build_basis(&ctx, &ctx.rank_report()?, &[], &opts.basis)?;
    Ok(correct(&near, &basis, target, &opts.correction())?.0)
}

const PRE_CORRECTION_DISP: f64 = 0.02;
const PRE_CORRECTION_STEPS: usize = 400;

/// Runs [`descent_step`] until stationary, failed or out of iterations.
pub fn minimize<T: Real>(f0: &Immersion<T>, opts: &MinimizeOptions) -> Result<MinimizeResult<T>> {
    minimize_with(f0, opts, |_| {})
}

/// As [`minimize`], calling `on_record` for every iteration record.
pub fn minimize_with<T: Real>(
    f0: &Immersion<T>,
    opts: &MinimizeOptions,
    mut on_record: impl FnMut(&IterationRecord),
) -> Result<MinimizeResult<T>> {
    opts.validate(f0.dim())?;
    let target = TeichmullerPoint::new(T::lit(opts.tau_target.re()), T::lit(opts.tau_target.im()))?;
    let f = normalize(f0)?;
    let mut records = Vec::new();
    let start = match pre_correct(&f, &target, opts) {
        Ok(g) => normalize(&g)?,
        Err(e) => {
            log::warn!("pre-correction failed: {e}");
            let state = DescentState::new(f.clone(), T::lit(opts.step_init))?;
            return finish(state, vec![], vec![], records, Status::CorrectionFailed, 0.0, opts);
        }
    };
    let mut state = DescentState::new(start, T::lit(opts.step_init))?;
    let first = IterationRecord {
        iter: 0,
        energy: state.energy.to_f64_lossy(),
        tau_re: state.tau.re().to_f64_lossy(),
        tau_im: state.tau.im().to_f64_lossy(),
        grad_norm: f64::NAN,
        step: 0.0,
        corrected_norm: 0.0,
        status: "start".into(),
    };
    on_record(&first);
    records.push(first);
    let mut energy_trace = vec![state.energy];
    let mut tau_trace = vec![state.tau];
    let mut gb_max = 0.0f64;
    let mut status = Status::MaxIters;
    for _ in 0..opts.max_iters {
        let rep = descent_step(&mut state, opts)?;
        gb_max = gb_max.max(rep.gauss_bonnet_gap);
        log::debug!(
            "iter {}: energy {:.10} grad {:.3e} step {:.3e} rank {} gauss-bonnet gap {:.2e}",
            rep.record.iter,
            rep.record.energy,
            rep.record.grad_norm,
            rep.record.step,
            rep.rank,
            rep.gauss_bonnet_gap
        );
        on_record(&rep.record);
        records.push(rep.record);
        match rep.outcome {
            StepOutcome::Accepted => {
                energy_trace.push(state.energy);
                tau_trace.push(state.tau);
            }
            StepOutcome::Stationary => {
                status = Status::Converged;
                break;
            }
            StepOutcome::CorrectionFailed => {
                status = Status::CorrectionFailed;
                break;
            }
        }
    }
    finish(state, energy_trace, tau_trace, records, status, gb_max, opts)
}

fn finish<T: Real>(
    state: DescentState<T>,
    mut energy_trace: Vec<T>,
    mut tau_trace: Vec<TeichmullerPoint<T>>,
    records: Vec<IterationRecord>,
    mut status: Status,
    gauss_bonnet_gap: f64,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult<T>> {
    if energy_trace.is_empty() {
        energy_trace.push(state.energy);
        tau_trace.push(state.tau);
    }
    if status != Status::CorrectionFailed && !(state.energy.to_f64_lossy() < opts.energy_ceiling) {
        log::warn!(
            "energy {} is at or above the ceiling {}; minimizers are not guaranteed",
            state.energy.to_f64_lossy(),
            opts.energy_ceiling
        );
        status = Status::CeilingExceeded;
    }
    let multiplier = fit_multiplier(&state.f)?;
    Ok(MinimizeResult {
        final_immersion: state.f,
        energy_trace,
        tau_trace,
        el_residual_rel: multiplier.residual_rel,
        multiplier,
        status,
        records,
        gauss_bonnet_gap,
    })
}

/// One `(τ, energy)` sample of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau_re: f64,
    pub tau_im: f64,
    pub energy: f64,
    pub status: Status,
    pub iterations: usize,
}

/// Warm-started [`minimize`] along a list of classes.
pub fn sweep<T: Real>(f0: &Immersion<T>, taus: &[TeichmullerPoint<f64>], opts: &MinimizeOptions) -> Result<Vec<SweepPoint>> {
    let mut f = f0.clone();
    let mut out = Vec::with_capacity(taus.len());
    for tau in taus {
        let o = MinimizeOptions { tau_target: *tau, ..*opts };
        let res = minimize(&f, &o)?;
        out.push(SweepPoint {
            tau_re: tau.re(),
            tau_im: tau.im(),
            energy: res.energy_trace.last().copied().unwrap_or(T::nan()).to_f64_lossy(),
            status: res.status,
            iterations: res.records.len().saturating_sub(1),
        });
        f = res.final_immersion;
    }
    Ok(out)
}

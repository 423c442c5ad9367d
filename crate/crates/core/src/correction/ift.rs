//! Inverse function solver for maps `Φ = (Φ₀, φ): R^{M+2} → R^{M+1}` whose
//! last component is a saddle in the two extra variables `(μ, ν)`.
//!
//! For fixed `μ` the `λ` block is solved by the contraction
//! `T_μ(λ) = λ − Φ₀(λ, μ) + η₀`; the remaining scalar equation
//! `ψ(μ) = φ(λ(μ), μ) − η̄ = 0` is bracketed on `[0, λ₀/2)` and solved by
//! Illinois regula falsi. Only one of `μ`, `ν` is ever nonzero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Lipschitz ratio the inner contraction must certify.
pub const CONTRACTION_BOUND: f64 = 0.5;

/// Relative tolerance of sampled derivative bounds.
pub const SAMPLE_SLACK: f64 = 1e-6;

/// A map `ξ = (λ, μ, ν) ↦ (Φ₀(ξ), φ(ξ))` with `λ ∈ R^M`.
pub trait IftProblem<T: Real> {
    fn dim(&self) -> usize;
    fn eval(&mut self, lambda: &[T], mu: T, nu: T) -> Result<(Vec<T>, T)>;
}

/// Closure-backed [`IftProblem`].
pub struct FnProblem<F> {
    pub dim: usize,
    pub f: F,
}

impl<T: Real, F> IftProblem<T> for FnProblem<F>
where
    F: FnMut(&[T], T, T) -> Result<(Vec<T>, T)>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, lambda: &[T], mu: T, nu: T) -> Result<(Vec<T>, T)> {
        (self.f)(lambda, mu, nu)
    }
}

/// Synthetic family `Φ₀ = λ + ε sin μ`, `φ = γμ² − γν² + ελ` with `λ ∈ R`.
///
/// The origin is a degenerate point with curvature `γ` in both quadratic
/// directions and coupling of size `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFamily<T> {
    pub epsilon: T,
    pub gamma: T,
}

impl<T: Real> QuadraticFamily<T> {
    pub fn new(epsilon: T, gamma: T) -> Self {
        Self { epsilon, gamma }
    }

    /// Constants valid on the ball of radius `lambda0`.
    pub fn constants(&self, lambda0: T) -> IftConstants<T> {
        IftConstants {
            epsilon: self.epsilon.max(T::lit(1e-12)),
            gamma: self.gamma,
            lambda_cap: T::one().max(T::lit(2.0) * self.gamma + self.epsilon),
            lambda0,
        }
    }
}

impl<T: Real> IftProblem<T> for QuadraticFamily<T> {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&mut self, lambda: &[T], mu: T, nu: T) -> Result<(Vec<T>, T)> {
        let (e, g) = (self.epsilon, self.gamma);
        Ok((vec![lambda[0] + e * mu.sin()], g * mu * mu - g * nu * nu + e * lambda[0]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IftConstants<T> {
    pub epsilon: T,
    pub gamma: T,
    pub lambda_cap: T,
    pub lambda0: T,
}

impl<T: Real> IftConstants<T> {
    /// `Λε/γ`; the existence argument needs it below a universal constant.
    pub fn coupling_ratio(&self) -> T {
        self.lambda_cap * self.epsilon / self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IftTarget<T> {
    pub eta0: Vec<T>,
    pub eta_bar: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IftOptions {
    /// Tolerance on `|Φ(ξ) − η|`.
    pub tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Random sample points (besides the origin) for the hypothesis check.
    pub samples: usize,
    /// Finite-difference step of the hypothesis check.
    pub fd_step: f64,
    pub seed: u64,
    pub check_hypotheses: bool,
    pub want_second: bool,
}

impl Default for IftOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_inner: 200,
            max_outer: 200,
            samples: 4,
            fd_step: 1e-4,
            seed: 7,
            check_hypotheses: true,
            want_second: false,
        }
    }
}

/// Which quadratic variable carries the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Mu,
    Nu,
}

/// Sampled derivative bounds of `Φ` on the ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport<T> {
    pub points: usize,
    /// `max ‖∂_λΦ₀ − I‖`.
    pub dlambda_dev: T,
    /// `max(|∂_{(μ,ν)}Φ₀|, |∂_λφ|)`.
    pub coupling: T,
    /// `max ‖D²Φ‖`, the largest spectral norm of a component Hessian.
    pub hessian: T,
    /// `min ∂_{μμ}φ`.
    pub curv_mu: T,
    /// `min −∂_{νν}φ`.
    pub curv_nu: T,
    /// `|Dφ(0)|`.
    pub dphi0: T,
}

impl<T: Real> HypothesisReport<T> {
    /// Constants implied by the samples, margined by a factor 2.
    pub fn margined_constants(&self, lambda0: T) -> IftConstants<T> {
        let two = T::lit(2.0);
        IftConstants {
            epsilon: (two * self.coupling).max(T::lit(1e-300)),
            gamma: self.curv_mu.min(self.curv_nu) / two,
            lambda_cap: (two * self.hessian).max(T::one()),
            lambda0,
        }
    }

    /// Failed hypotheses for the given constants, empty if all hold.
    pub fn violations(&self, c: &IftConstants<T>) -> Vec<String> {
        let mut out = Vec::new();
        let f = |x: T| x.to_f64_lossy();
        // Finite-difference estimates carry rounding; bounds get a relative slack.
        let up = T::one() + T::lit(SAMPLE_SLACK);
        let down = T::one() - T::lit(SAMPLE_SLACK);
        if !(self.dlambda_dev <= T::lit(0.5) * up) {
            out.push(format!("|d_lambda Phi0 - I| = {:e} > 1/2", f(self.dlambda_dev)));
        }
        if !(self.coupling <= c.epsilon * up) {
            out.push(format!("coupling {:e} > epsilon {:e}", f(self.coupling), f(c.epsilon)));
        }
        if !(self.hessian <= c.lambda_cap * up) {
            out.push(format!("|D2 Phi| {:e} > Lambda {:e}", f(self.hessian), f(c.lambda_cap)));
        }
        if !(self.curv_mu >= c.gamma * down) {
            out.push(format!("d_mumu phi {:e} < gamma {:e}", f(self.curv_mu), f(c.gamma)));
        }
        if !(self.curv_nu >= c.gamma * down) {
            out.push(format!("-d_nunu phi {:e} < gamma {:e}", f(self.curv_nu), f(c.gamma)));
        }
        out
    }

    /// Nominal second-solution condition `Λε + σ/λ₀ + Λλ₀ ≤ γ` (unit constant).
    pub fn second_guaranteed(&self, c: &IftConstants<T>) -> bool {
        c.lambda_cap * c.epsilon + self.dphi0 / c.lambda0 + c.lambda_cap * c.lambda0 <= c.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IftPoint<T> {
    pub lambda: Vec<T>,
    pub mu: T,
    pub nu: T,
    /// `|Φ(ξ) − η|`.
    pub residual: T,
}

impl<T: Real> IftPoint<T> {
    pub fn norm(&self) -> T {
        (self.lambda.iter().map(|&x| x * x).sum::<T>() + self.mu * self.mu + self.nu * self.nu).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IftSolution<T> {
    pub xi: IftPoint<T>,
    pub branch: Branch,
    /// `|ξ| γ^{1/2} / |Φ(0) − η|^{1/2}`.
    pub bound_constant: T,
    /// Largest Lipschitz ratio of `T_μ` measured along the iterations.
    pub contraction_ratio: T,
    pub hypotheses: Option<HypothesisReport<T>>,
    /// Solution with the quadratic variable of opposite sign, when requested and found.
    pub second: Option<IftPoint<T>>,
    pub second_guaranteed: bool,
    pub evaluations: usize,
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Counts evaluations and applies the branch/sign reduction `s ↦ (μ, ν)`.
struct Reduced<'a, T: Real, P: IftProblem<T>> {
    p: &'a mut P,
    eta: &'a IftTarget<T>,
    evals: usize,
    ratio: T,
    opts: IftOptions,
}

impl<'a, T: Real, P: IftProblem<T>> Reduced<'a, T, P> {
    fn eval(&mut self, lambda: &[T], mu: T, nu: T) -> Result<(Vec<T>, T)> {
        self.evals += 1;
        let (phi0, phi) = self.p.eval(lambda, mu, nu)?;
        if phi0.len() != lambda.len() {
            return Err(Error::DimensionMismatch(format!(
                "Phi0 has {} components, lambda has {}",
                phi0.len(),
                lambda.len()
            )));
        }
        Ok((phi0, phi))
    }

    fn args(branch: Branch, s: T) -> (T, T) {
        match branch {
            Branch::Mu => (s, T::zero()),
            Branch::Nu => (T::zero(), s),
        }
    }

    /// Fixed point of `T_s(λ) = λ − Φ₀(λ, s) + η₀`, returning `(λ, φ(λ, s))`.
    fn inner(&mut self, branch: Branch, s: T, start: &[T]) -> Result<(Vec<T>, T)> {
        let (mu, nu) = Self::args(branch, s);
        let tol = T::lit(self.opts.tol) * T::lit(0.01);
        let mut lam = start.to_vec();
        let mut prev_step: Option<T> = None;
        for _ in 0..self.opts.max_inner {
            let (phi0, phi) = self.eval(&lam, mu, nu)?;
            let step: Vec<T> = phi0.iter().zip(&self.eta.eta0).map(|(&a, &b)| b - a).collect();
            let sn = norm(&step);
            if sn <= tol {
                return Ok((lam, phi));
            }
            if let Some(ps) = prev_step {
                // |T(λ_{k+1}) − T(λ_k)| / |λ_{k+1} − λ_k| with λ_{k+1} = T(λ_k).
                if ps > T::lit(1e3) * tol {
                    let ratio = sn / ps;
                    self.ratio = self.ratio.max(ratio);
                    if ratio > T::lit(CONTRACTION_BOUND) {
                        return Err(Error::FixedPointFailed(format!(
                            "Lipschitz ratio {:e} exceeds 1/2",
                            ratio.to_f64_lossy()
                        )));
                    }
                }
            }
            prev_step = Some(sn);
            for (l, d) in lam.iter_mut().zip(&step) {
                *l += *d;
            }
        }
        Err(Error::FixedPointFailed(format!("no convergence in {} iterations", self.opts.max_inner)))
    }

    fn psi(&mut self, branch: Branch, s: T, start: &[T]) -> Result<(T, Vec<T>)> {
        let (lam, phi) = self.inner(branch, s, start)?;
        Ok((phi - self.eta.eta_bar, lam))
    }

    /// Root of `ψ` on the side `dir` of the origin within `[0, limit)`.
    fn root(
        &mut self,
        branch: Branch,
        dir: T,
        psi0: T,
        lam0: &[T],
        limit: T,
        scale: T,
    ) -> Result<(T, Vec<T>)> {
        let tol = T::lit(self.opts.tol) * T::lit(0.1);
        if psi0.abs() <= tol {
            return Ok((T::zero(), lam0.to_vec()));
        }
        // Geometric search for a sign change, starting near the quadratic guess.
        let mut a = T::zero();
        let mut fa = psi0;
        let mut lam_a = lam0.to_vec();
        let mut s = scale.min(limit);
        let bracket = loop {
            let (fs, lam) = self.psi(branch, dir * s, &lam_a)?;
            if fs.abs() <= tol {
                return Ok((dir * s, lam));
            }
            if fs.signum() != fa.signum() {
                break (s, fs, lam);
            }
            if s >= limit {
                return Err(Error::RootBracketing(format!(
                    "psi keeps sign {:+e} up to |s| = {:e}",
                    fs.to_f64_lossy(),
                    s.to_f64_lossy()
                )));
            }
            a = s;
            fa = fs;
            lam_a = lam;
            s = (s * T::lit(2.0)).min(limit);
        };
        let (mut b, mut fb, mut lam_b) = bracket;
        let mut side = 0i8;
        for _ in 0..self.opts.max_outer {
            let c = (a * fb - b * fa) / (fb - fa);
            let c = if c > a.min(b) && c < a.max(b) { c } else { (a + b) / T::lit(2.0) };
            let start = if (c - a).abs() < (c - b).abs() { lam_a.clone() } else { lam_b.clone() };
            let (fc, lam_c) = self.psi(branch, dir * c, &start)?;
            if fc.abs() <= tol || (b - a).abs() <= T::epsilon() * T::lit(4.0) * b.abs().max(T::min_positive_value()) {
                return Ok((dir * c, lam_c));
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                lam_b = lam_c;
                if side == -1 {
                    fa = fa / T::lit(2.0);
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                lam_a = lam_c;
                if side == 1 {
                    fb = fb / T::lit(2.0);
                }
                side = 1;
            }
        }
        Err(Error::RootBracketing(format!("no convergence in {} iterations", self.opts.max_outer)))
    }
}

/// Gradient and Hessian of every component by central differences.
fn derivatives<T: Real, P: IftProblem<T>>(
    p: &mut P,
    x: &[T],
    h: T,
    evals: &mut usize,
) -> Result<(Vec<Vec<T>>, Vec<Vec<Vec<T>>>)> {
    let n = x.len();
    let m = n - 2;
    let mut f = |y: &[T]| -> Result<Vec<T>> {
        *evals += 1;
        let (mut a, b) = p.eval(&y[..m], y[m], y[m + 1])?;
        a.push(b);
        Ok(a)
    };
    let f0 = f(x)?;
    let k = f0.len();
    let shifted = |i: usize, si: T, j: Option<(usize, T)>| {
        let mut y = x.to_vec();
        y[i] += si;
        if let Some((j, sj)) = j {
            y[j] += sj;
        }
        y
    };
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for i in 0..n {
        plus.push(f(&shifted(i, h, None))?);
        minus.push(f(&shifted(i, -h, None))?);
    }
    let two = T::lit(2.0);
    let grad: Vec<Vec<T>> = (0..k).map(|c| (0..n).map(|i| (plus[i][c] - minus[i][c]) / (two * h)).collect()).collect();
    let mut hess = vec![vec![vec![T::zero(); n]; n]; k];
    for i in 0..n {
        for c in 0..k {
            hess[c][i][i] = (plus[i][c] - two * f0[c] + minus[i][c]) / (h * h);
        }
        for j in (i + 1)..n {
            let pp = f(&shifted(i, h, Some((j, h))))?;
            let pm = f(&shifted(i, h, Some((j, -h))))?;
            let mp = f(&shifted(i, -h, Some((j, h))))?;
            let mm = f(&shifted(i, -h, Some((j, -h))))?;
            for c in 0..k {
                let v = (pp[c] - pm[c] - mp[c] + mm[c]) / (T::lit(4.0) * h * h);
                hess[c][i][j] = v;
                hess[c][j][i] = v;
            }
        }
    }
    Ok((grad, hess))
}

/// Spectral norm of a small dense matrix via power iteration on `AᵀA`.
fn spectral_norm<T: Real>(a: &[Vec<T>]) -> T {
    let cols = a.first().map_or(0, Vec::len);
    if cols == 0 {
        return T::zero();
    }
    let mut v = vec![T::one(); cols];
    let mut sigma = T::zero();
    for _ in 0..100 {
        let av: Vec<T> = a.iter().map(|row| row.iter().zip(&v).map(|(&x, &y)| x * y).sum()).collect();
        let mut w = vec![T::zero(); cols];
        for (row, &s) in a.iter().zip(&av) {
            for (wj, &x) in w.iter_mut().zip(row) {
                *wj += x * s;
            }
        }
        let wn = norm(&w);
        if wn == T::zero() {
            return T::zero();
        }
        sigma = wn.sqrt();
        v = w.into_iter().map(|x| x / wn).collect();
    }
    sigma
}

/// Samples the hypothesis quantities at the origin and at random points of
/// the ball of radius `λ₀/2`.
pub fn sample_hypotheses<T: Real, P: IftProblem<T>>(
    p: &mut P,
    lambda0: T,
    opts: &IftOptions,
) -> Result<(HypothesisReport<T>, usize)> {
    let m = p.dim();
    let n = m + 2;
    let h = T::lit(opts.fd_step);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = vec![vec![T::zero(); n]];
    for _ in 0..opts.samples {
        let dirn: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = dirn.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let rad: f64 = rng.gen_range(0.0..1.0f64).powf(1.0 / n as f64);
        points.push(dirn.iter().map(|&x| lambda0 * T::lit(0.5 * rad * x / len)).collect());
    }
    let mut evals = 0;
    let mut rep = HypothesisReport {
        points: points.len(),
        dlambda_dev: T::zero(),
        coupling: T::zero(),
        hessian: T::zero(),
        curv_mu: T::infinity(),
        curv_nu: T::infinity(),
        dphi0: T::zero(),
    };
    for (k, x) in points.iter().enumerate() {
        let (grad, hess) = derivatives(p, x, h, &mut evals)?;
        let dev: Vec<Vec<T>> = (0..m)
            .map(|c| (0..m).map(|i| grad[c][i] - if i == c { T::one() } else { T::zero() }).collect())
            .collect();
        rep.dlambda_dev = rep.dlambda_dev.max(spectral_norm(&dev));
        let cross: Vec<Vec<T>> = (0..m).map(|c| vec![grad[c][m], grad[c][m + 1]]).collect();
        rep.coupling = rep.coupling.max(spectral_norm(&cross)).max(norm(&grad[m][..m]));
        let h2 = hess.iter().map(|hc| spectral_norm(hc)).fold(T::zero(), T::max);
        rep.hessian = rep.hessian.max(h2);
        rep.curv_mu = rep.curv_mu.min(hess[m][m][m]);
        rep.curv_nu = rep.curv_nu.min(-hess[m][m + 1][m + 1]);
        if k == 0 {
            rep.dphi0 = norm(&grad[m]);
        }
    }
    Ok((rep, evals))
}

/// Solves `Φ(ξ) = η` with `μν = 0` following the contraction-plus-bracketing
/// construction; see the module documentation.
pub fn ift_solve<T: Real, P: IftProblem<T>>(
    p: &mut P,
    constants: &IftConstants<T>,
    eta: &IftTarget<T>,
    opts: &IftOptions,
) -> Result<IftSolution<T>> {
    let m = p.dim();
    if eta.eta0.len() != m {
        return Err(Error::DimensionMismatch(format!("eta0 has {} entries, M = {m}", eta.eta0.len())));
    }
    let c = constants;
    if !(c.epsilon > T::zero() && c.gamma > T::zero() && c.lambda0 > T::zero() && c.lambda_cap >= T::one()) {
        return Err(Error::IftHypotheses("constants must satisfy epsilon, gamma, lambda0 > 0, Lambda >= 1".into()));
    }
    let zero = vec![T::zero(); m];
    let (phi0_0, phi_0) = p.eval(&zero, T::zero(), T::zero())?;
    let d0: Vec<T> = phi0_0.iter().zip(&eta.eta0).map(|(&a, &b)| a - b).collect();
    let dbar = phi_0 - eta.eta_bar;
    let gap = (norm(&d0).powi(2) + dbar * dbar).sqrt();
    let l0 = c.lambda0;
    if !(norm(&d0) <= (c.lambda_cap * l0 * l0).min(l0 / T::lit(8.0))) {
        return Err(Error::IftHypotheses(format!(
            "|Phi0(0) - eta0| = {:e} exceeds min(Lambda lambda0^2, lambda0/8)",
            norm(&d0).to_f64_lossy()
        )));
    }
    if !(dbar.abs() <= c.gamma * l0 * l0 / T::lit(32.0)) {
        return Err(Error::IftHypotheses(format!(
            "|phi(0) - eta_bar| = {:e} exceeds gamma lambda0^2/32",
            dbar.abs().to_f64_lossy()
        )));
    }
    let mut evals = 1;
    let hypotheses = if opts.check_hypotheses {
        let (rep, n) = sample_hypotheses(p, l0, opts)?;
        evals += n;
        let bad = rep.violations(c);
        if !bad.is_empty() {
            return Err(Error::IftHypotheses(bad.join("; ")));
        }
        Some(rep)
    } else {
        None
    };
    let second_guaranteed = hypotheses.map_or(false, |h| h.second_guaranteed(c));
    let mut red = Reduced { p, eta, evals: 0, ratio: T::zero(), opts: *opts };
    if gap <= T::lit(opts.tol) {
        return Ok(IftSolution {
            xi: IftPoint { lambda: zero, mu: T::zero(), nu: T::zero(), residual: gap },
            branch: Branch::Mu,
            bound_constant: T::zero(),
            contraction_ratio: T::zero(),
            hypotheses,
            second: None,
            second_guaranteed,
            evaluations: evals,
        });
    }

    // ψ(0) is shared by both branches; its sign picks μ (convex) or ν (concave).
    let (psi0, lam0) = red.psi(Branch::Mu, T::zero(), &zero)?;
    let branch = if psi0 <= T::zero() { Branch::Mu } else { Branch::Nu };
    let limit = l0 / T::lit(2.0) * (T::one() - T::lit(1e-9));
    let hs = (T::lit(opts.fd_step)).min(limit / T::lit(4.0));
    let (pp, _) = red.psi(branch, hs, &lam0)?;
    let (pm, _) = red.psi(branch, -hs, &lam0)?;
    // After the reduction ψ must move away from its starting sign along `dir`.
    let slope = (pp - pm) / (T::lit(2.0) * hs);
    let toward_zero = if branch == Branch::Mu { slope } else { -slope };
    let dir = if toward_zero >= T::zero() { T::one() } else { -T::one() };
    let scale = (T::lit(2.0) * psi0.abs() / c.gamma).sqrt().max(hs);
    let (s, lam) = red.root(branch, dir, psi0, &lam0, limit, scale)?;
    let (mu, nu) = Reduced::<T, P>::args(branch, s);
    let residual = residual_at(&mut red, &lam, mu, nu)?;
    let xi = IftPoint { lambda: lam, mu, nu, residual };
    let second = if opts.want_second {
        match red.root(branch, -dir, psi0, &lam0, limit, scale) {
            Ok((s2, lam2)) => {
                let (mu2, nu2) = Reduced::<T, P>::args(branch, s2);
                let residual = residual_at(&mut red, &lam2, mu2, nu2)?;
                Some(IftPoint { lambda: lam2, mu: mu2, nu: nu2, residual })
            }
            Err(Error::RootBracketing(msg)) => {
                log::info!("no opposite-side solution: {msg}");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let bound_constant = xi.norm() * c.gamma.sqrt() / gap.sqrt();
    log::info!(
        "ift_solve: branch {:?}, |xi| = {:e}, C = {:.4}, contraction {:.3e}",
        branch,
        xi.norm().to_f64_lossy(),
        bound_constant.to_f64_lossy(),
        red.ratio.to_f64_lossy()
    );
    Ok(IftSolution {
        xi,
        branch,
        bound_constant,
        contraction_ratio: red.ratio,
        hypotheses,
        second,
        second_guaranteed,
        evaluations: evals + red.evals,
    })
}

fn residual_at<T: Real, P: IftProblem<T>>(red: &mut Reduced<'_, T, P>, lam: &[T], mu: T, nu: T) -> Result<T> {
    let (a, b) = red.eval(lam, mu, nu)?;
    let r0: T = a.iter().zip(&red.eta.eta0).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok((r0 + (b - red.eta.eta_bar).powi(2)).sqrt())
}

use super::{diff::fd_symbol, Dir, Fft2, GridSpec, ScalarField};
use crate::tensor::Sym2;
use crate::Real;

/// Convergence data of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual relative to the projected right-hand side.
    pub residual: f64,
    pub converged: bool,
}

/// Divergence-form operator `x ↦ D_i(c^{ij} D_j x)` with periodic differences.
///
/// For `c = √g g⁻¹` this is `√g Δ_g`. The kernel is spanned by the modes on
/// which the difference operator vanishes (the constant and Nyquist modes);
/// solves work on the orthogonal complement.
#[derive(Debug, Clone)]
pub struct DivergenceOperator<T: Real> {
    grid: GridSpec,
    coeff: Vec<Sym2<T>>,
    fft: Fft2<T>,
    precond: Vec<T>,
    /// Pointwise `m ≥ 0` of the shifted operator `D_i(c^{ij} D_j x) − m x`.
    mass: Option<Vec<T>>,
}

impl<T: Real> DivergenceOperator<T> {
    /// `coeff` must be symmetric positive definite at every point.
    pub fn new(grid: GridSpec, coeff: Vec<Sym2<T>>) -> Self {
        Self::build(grid, coeff, None)
    }

    /// `x ↦ D_i(c^{ij} D_j x) − m x` with `m > 0`, which has trivial kernel.
    pub fn with_mass(grid: GridSpec, coeff: Vec<Sym2<T>>, mass: Vec<T>) -> Self {
        Self::build(grid, coeff, Some(mass))
    }

    fn build(grid: GridSpec, coeff: Vec<Sym2<T>>, mass: Option<Vec<T>>) -> Self {
        let n = T::of_usize(coeff.len());
        let mean = coeff.iter().fold(Sym2::zero(), |a, s| a.add(s)).scale(T::one() / n);
        let mean_mass = mass.as_ref().map(|m| m.iter().copied().sum::<T>() / n);
        let nv = grid.n_v;
        let precond = (0..grid.len())
            .map(|p| {
                let su = fd_symbol::<T>(&grid, Dir::U, p / nv);
                let sv = fd_symbol::<T>(&grid, Dir::V, p % nv);
                let q = mean.xx * su * su + T::lit(2.0) * mean.xy * su * sv + mean.yy * sv * sv;
                match mean_mass {
                    Some(m) => T::one() / (q + m),
                    None if su == T::zero() && sv == T::zero() => T::zero(),
                    None => T::one() / q,
                }
            })
            .collect();
        Self { grid, coeff, fft: Fft2::new(grid), precond, mass }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Evaluates `D_i(c^{ij} D_j x)`.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let f = ScalarField { grid: self.grid, data: x.to_vec() };
        let du = f.partial(Dir::U);
        let dv = f.partial(Dir::V);
        let mut fu = du.clone();
        let mut fv = dv.clone();
        for p in 0..x.len() {
            let c = &self.coeff[p];
            fu.data[p] = c.xx * du.data[p] + c.xy * dv.data[p];
            fv.data[p] = c.xy * du.data[p] + c.yy * dv.data[p];
        }
        let a = fu.partial(Dir::U);
        let b = fv.partial(Dir::V);
        let mut out: Vec<T> = a.data.iter().zip(&b.data).map(|(&p, &q)| p + q).collect();
        if let Some(m) = &self.mass {
            for ((o, &mp), &xp) in out.iter_mut().zip(m).zip(x) {
                *o -= mp * xp;
            }
        }
        out
    }

    /// Removes the kernel modes, projecting onto the operator's range.
    pub fn project_range(&self, x: &[T]) -> Vec<T> {
        if self.mass.is_some() {
            return x.to_vec();
        }
        self.fft.filter(x, |ku, kv| {
            let k = ku * self.grid.n_v + kv;
            if self.precond[k] == T::zero() {
                T::zero()
            } else {
                T::one()
            }
        })
    }

    /// Inverse of the negated mean-coefficient operator on the range.
    fn precondition(&self, r: &[T]) -> Vec<T> {
        let nv = self.grid.n_v;
        self.fft.filter(r, |ku, kv| self.precond[ku * nv + kv])
    }

    /// Solves `D_i(c^{ij} D_j x) = rhs` after projecting `rhs` onto the range.
    ///
    /// Preconditioned conjugate gradients on the negated (positive) operator.
    pub fn solve(&self, rhs: &[T], tol: T, max_iter: usize) -> (Vec<T>, SolveStats) {
        let b = self.project_range(rhs);
        let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
        let bn = norm(&b);
        let mut x = vec![T::zero(); b.len()];
        if bn == T::zero() {
            return (x, SolveStats { iterations: 0, residual: 0.0, converged: true });
        }
        // Residual of -A x = -b.
        let mut r: Vec<T> = b.iter().map(|&v| -v).collect();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let mut rel = T::one();
        for it in 0..max_iter {
            let ap: Vec<T> = self.apply(&p).into_iter().map(|v| -v).collect();
            let pap: T = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            rel = norm(&r) / bn;
            if rel <= tol {
                return (
                    x,
                    SolveStats { iterations: it + 1, residual: rel.to_f64_lossy(), converged: true },
                );
            }
            z = self.precondition(&r);
            let rz_new: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
        (
            x,
            SolveStats { iterations: max_iter, residual: rel.to_f64_lossy(), converged: false },
        )
    }
}

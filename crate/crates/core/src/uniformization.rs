//! Conformal factor to the flat unit-volume metric and the modulus of a torus.
//!
//! The modulus comes from harmonic 1-forms `ω_k = dx_k + dh_k`. Their
//! primitives `y = x + h` are flat affine coordinates for the uniformized
//! metric, which later stages reuse as a global chart.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::gauss_curvature_density;
use crate::grid::{DivergenceOperator, Dir, GridSpec, ScalarField, SolveStats, TensorField};
use crate::tensor::{Mat2, Sym2};
use crate::Real;

const MAX_SOLVER_ITERS: usize = 500;

/// Relative residual targeted by the elliptic solves.
pub(crate) fn solver_tol<T: Real>() -> T {
    T::lit(1e-13).max(T::lit(50.0) * T::epsilon())
}

/// Point of genus-1 Teichmüller space (upper half-plane).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeichmullerPoint<T> {
    pub tau: Complex<T>,
}

impl<T: Real> TeichmullerPoint<T> {
    pub fn new(re: T, im: T) -> Result<Self> {
        if !(im > T::zero()) || !re.is_finite() {
            return Err(Error::InvalidTeichmullerPoint);
        }
        Ok(Self { tau: Complex::new(re, im) })
    }

    /// The square torus `τ = i`.
    pub fn square() -> Self {
        Self { tau: Complex::new(T::zero(), T::one()) }
    }

    pub fn re(&self) -> T {
        self.tau.re
    }

    pub fn im(&self) -> T {
        self.tau.im
    }
}

/// Hyperbolic distance `arcosh(1 + |τ₁−τ₂|²/(2 Im τ₁ Im τ₂))`.
pub fn teich_distance<T: Real>(a: &TeichmullerPoint<T>, b: &TeichmullerPoint<T>) -> Result<T> {
    if !(a.im() > T::zero()) || !(b.im() > T::zero()) {
        return Err(Error::InvalidTeichmullerPoint);
    }
    let x = (a.tau - b.tau).norm_sqr() / (T::lit(2.0) * a.im() * b.im());
    // arcosh(1 + x) = ln1p(x + √(x(2 + x))) keeps full precision near 0.
    Ok((x + (x * (T::lit(2.0) + x)).sqrt()).ln_1p())
}

/// Identity chart `τ ↦ (Re τ, Im τ)`.
pub fn chart<T: Real>(p: &TeichmullerPoint<T>) -> [T; 2] {
    [p.re(), p.im()]
}

pub fn chart_inverse<T: Real>(x: [T; 2]) -> Result<TeichmullerPoint<T>> {
    TeichmullerPoint::new(x[0], x[1])
}

/// Modulus of the constant metric `G`: `(G₁₂ + i√det G)/G₁₁`.
pub fn tau_of_metric<T: Real>(g: &Sym2<T>) -> Complex<T> {
    Complex::new(g.xy, g.det().sqrt()) / g.xx
}

/// Harmonic coordinates of a metric on the torus.
#[derive(Debug, Clone)]
pub struct FlatChart<T: Real> {
    pub grid: GridSpec,
    /// Periodic parts `h_k` of the flat coordinates `y_k = x_k + h_k`.
    pub h: [ScalarField<T>; 2],
    /// `jac[p].m[k][i] = δ_ki + ∂_i h_k`.
    pub jac: Vec<Mat2<T>>,
    /// Unit-determinant flat metric in `y` coordinates.
    pub metric: Sym2<T>,
    pub tau: TeichmullerPoint<T>,
    pub stats: [SolveStats; 2],
    /// `det` of the raw period matrix; one up to discretization error.
    pub period_det: T,
}

impl<T: Real> FlatChart<T> {
    /// Conformal factor read off the chart: `e^{2u} = √g / det J`.
    pub fn conformal_factor_from_chart(&self, g: &TensorField<T>) -> ScalarField<T> {
        let data = g
            .data
            .iter()
            .zip(&self.jac)
            .map(|(s, j)| T::lit(0.5) * (s.det().sqrt() / j.det()).ln())
            .collect();
        ScalarField { grid: self.grid, data }
    }

    /// Flat metric `Jᵀ M J` pulled back to grid coordinates.
    pub fn flat_metric_on_grid(&self) -> TensorField<T> {
        TensorField {
            grid: self.grid,
            data: self.jac.iter().map(|j| self.metric.congruence(j)).collect(),
        }
    }

    /// `∂/∂y_a = Σ_i (J⁻¹)[i][a] ∂/∂x_i`, returned as the inverse Jacobians.
    pub fn inverse_jacobians(&self) -> Vec<Mat2<T>> {
        self.jac.iter().map(|j| j.inverse()).collect()
    }
}

/// `c = √g g⁻¹`, the conformally invariant coefficient of `√g Δ_g`.
pub(crate) fn laplace_coefficients<T: Real>(g: &TensorField<T>) -> Result<Vec<Sym2<T>>> {
    g.data
        .iter()
        .enumerate()
        .map(|(p, s)| {
            let det = s.det();
            if !(det > T::zero()) || !(s.xx > T::zero()) {
                return Err(Error::DegenerateImmersion { index: p });
            }
            Ok(s.inverse().scale(det.sqrt()))
        })
        .collect()
}

/// Computes harmonic coordinates, the period matrix and the modulus.
pub fn flat_chart<T: Real>(g: &TensorField<T>) -> Result<FlatChart<T>> {
    let grid = g.grid;
    let c = laplace_coefficients(g)?;
    let op = DivergenceOperator::new(grid, c.clone());
    let cs = [
        [
            ScalarField { grid, data: c.iter().map(|s| s.xx).collect() },
            ScalarField { grid, data: c.iter().map(|s| s.xy).collect() },
        ],
        [
            ScalarField { grid, data: c.iter().map(|s| s.xy).collect() },
            ScalarField { grid, data: c.iter().map(|s| s.yy).collect() },
        ],
    ];
    let mut hs = Vec::with_capacity(2);
    let mut stats = Vec::with_capacity(2);
    for k in 0..2 {
        // D_i(c^{ij}(δ_kj + D_j h_k)) = 0.
        let div = cs[0][k].partial(Dir::U).zip_map(&cs[1][k].partial(Dir::V), |a, b| -(a + b));
        let (h, st) = op.solve(&div.data, solver_tol(), MAX_SOLVER_ITERS);
        if !st.converged {
            return Err(Error::IllConditioned(format!(
                "harmonic form solve stalled at residual {:e}",
                st.residual
            )));
        }
        hs.push(ScalarField { grid, data: h });
        stats.push(st);
    }
    let dh = [hs[0].gradient(), hs[1].gradient()];
    let jac: Vec<Mat2<T>> = (0..grid.len())
        .map(|p| {
            Mat2::new([
                [T::one() + dh[0][0].data[p], dh[0][1].data[p]],
                [dh[1][0].data[p], T::one() + dh[1][1].data[p]],
            ])
        })
        .collect();
    // Periods of the Hodge duals (*ω_m)_i = √g ε_ij g^{jl} ω_{m,l}, averaged over the torus.
    let mut periods = [[T::zero(); 2]; 2];
    for (p, j) in jac.iter().enumerate() {
        let cp = &c[p];
        for (m, row) in periods.iter_mut().enumerate() {
            let w = j.m[m];
            let up = [cp.xx * w[0] + cp.xy * w[1], cp.xy * w[0] + cp.yy * w[1]];
            row[0] += up[1];
            row[1] -= up[0];
        }
    }
    let n = T::of_usize(grid.len());
    for row in periods.iter_mut() {
        for x in row.iter_mut() {
            *x /= n;
        }
    }
    let m11 = periods[1][0];
    let m12 = periods[1][1];
    let m22 = -periods[0][1];
    let raw = Sym2::new(m11, m12, m22);
    let det = raw.det();
    if !(m11 > T::zero()) || !(det > T::zero()) || !det.is_finite() {
        return Err(Error::IllConditioned(format!(
            "period matrix [[{m11:?}, {m12:?}], [{m12:?}, {m22:?}]] is not positive definite"
        )));
    }
    let metric = raw.scale(T::one() / det.sqrt());
    let tau = TeichmullerPoint { tau: tau_of_metric(&metric) };
    let [h0, h1]: [ScalarField<T>; 2] = hs.try_into().expect("two harmonic forms");
    Ok(FlatChart { grid, h: [h0, h1], jac, metric, tau, stats: [stats[0], stats[1]], period_det: det })
}

/// Modulus `τ` of the conformal class of `g`.
pub fn modulus<T: Real>(g: &TensorField<T>) -> Result<TeichmullerPoint<T>> {
    Ok(flat_chart(g)?.tau)
}

/// Solution of `−Δ_g u = K_g` normalized so `e^{−2u} g` has unit volume.
#[derive(Debug, Clone)]
pub struct ConformalFactor<T> {
    pub u: ScalarField<T>,
    pub flat_metric: TensorField<T>,
    /// `‖u‖_∞`.
    pub sup_norm: T,
    /// `‖∇u‖_{L²(g)}`, conformally invariant.
    pub grad_l2: T,
    pub stats: SolveStats,
}

pub fn conformal_factor<T: Real>(g: &TensorField<T>) -> Result<ConformalFactor<T>> {
    let grid = g.grid;
    let c = laplace_coefficients(g)?;
    let density = gauss_curvature_density(g)?;
    let total = density.mean();
    let scale = density.data.iter().map(|x| x.abs()).sum::<T>() / T::of_usize(grid.len());
    if !total.is_finite() || total.abs() > T::lit(1e-8) * (T::one() + scale) {
        return Err(Error::NotGenusOneMetric { total: total.to_f64_lossy() });
    }
    let op = DivergenceOperator::new(grid, c.clone());
    let rhs: Vec<T> = density.data.iter().map(|&x| -x).collect();
    let (u, stats) = op.solve(&rhs, solver_tol(), MAX_SOLVER_ITERS);
    if !stats.converged {
        return Err(Error::UniformizationFailed {
            iterations: stats.iterations,
            residual: stats.residual,
        });
    }
    let mut u = ScalarField { grid, data: u };
    let vol: T = u
        .data
        .iter()
        .zip(&g.data)
        .map(|(&x, s)| (-T::lit(2.0) * x).exp() * s.det().sqrt())
        .sum::<T>()
        * grid.cell_area::<T>();
    let shift = T::lit(0.5) * vol.ln();
    for x in u.data.iter_mut() {
        *x += shift;
    }
    let flat_metric = TensorField {
        grid,
        data: u
            .data
            .iter()
            .zip(&g.data)
            .map(|(&x, s)| s.scale((-T::lit(2.0) * x).exp()))
            .collect(),
    };
    let du = u.gradient();
    let grad2: T = (0..grid.len())
        .map(|p| {
            let d = [du[0].data[p], du[1].data[p]];
            let cp = &c[p];
            cp.xx * d[0] * d[0] + T::lit(2.0) * cp.xy * d[0] * d[1] + cp.yy * d[1] * d[1]
        })
        .sum::<T>()
        * grid.cell_area::<T>();
    Ok(ConformalFactor { sup_norm: u.max_abs(), grad_l2: grad2.sqrt(), u, flat_metric, stats })
}

/// Volume `∫√det g` of a metric on the parameter torus.
pub fn volume<T: Real>(g: &TensorField<T>) -> T {
    g.data.iter().map(|s| s.det().sqrt()).sum::<T>() * g.grid.cell_area::<T>()
}

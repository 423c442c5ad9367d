//! First and second variations of the Teichmüller class under ambient
//! deformations, tensor decomposition and degeneracy detection.
//!
//! All chart-dependent quantities use the harmonic coordinates `y` of
//! [`flat_chart`](crate::uniformization::flat_chart): there the uniformized
//! metric is the constant unit-determinant `M`, TT tensors are constants and
//! the chart differentials of `τ(M)` are exact.

mod decompose;
mod rank;
mod second;
mod tt;

pub use decompose::{decompose, flat_l2_inner, ChartDecomposition, TensorDecomposition};
pub use rank::{rank_report, VariationReport, RANK_EPS};
pub use tt::{flat_inner, tau_first, tau_second, to_chart, tt_basis, tt_basis_field, TTTensor};

use num_complex::Complex;

use crate::error::Result;
use crate::geometry::{GeometryCache, Immersion};
use crate::grid::{dot, Dir, ScalarField, TensorField, VectorField};
use crate::tensor::Sym2;
use crate::uniformization::{flat_chart, FlatChart};
use crate::Real;
use decompose::{chart_basis, decompose_in_chart, ChartLieOperator};

/// `(∂_t g, ∂_tt g)` at `t = 0` for `g_t = (f + tV)* g_euc`.
pub fn metric_variation<T: Real>(
    f: &Immersion<T>,
    v: &VectorField<T>,
) -> (TensorField<T>, TensorField<T>) {
    let df = [f.points.partial(Dir::U), f.points.partial(Dir::V)];
    metric_variation_with(&df, v)
}

fn metric_variation_with<T: Real>(
    df: &[VectorField<T>; 2],
    v: &VectorField<T>,
) -> (TensorField<T>, TensorField<T>) {
    let grid = v.grid;
    let dv = [v.partial(Dir::U), v.partial(Dir::V)];
    let two = T::lit(2.0);
    let mut first = Vec::with_capacity(grid.len());
    let mut second = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        first.push(Sym2::from_fn(|i, j| {
            dot(df[i].get(p), dv[j].get(p)) + dot(df[j].get(p), dv[i].get(p))
        }));
        second.push(Sym2::from_fn(|i, j| two * dot(dv[i].get(p), dv[j].get(p))));
    }
    (TensorField { grid, data: first }, TensorField { grid, data: second })
}

/// First variation in chart coordinates together with both integral forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstVariation<T> {
    /// `δτ̂_f.V` as `(Re, Im)`.
    pub delta: [T; 2],
    /// `∫ g^{ik}g^{jl} ∂_t g_ij q^r_kl dμ_g`.
    pub metric_form: [T; 2],
    /// `−2∫ ⟨Φ_r, V⟩ dμ_g`.
    pub a0_form: [T; 2],
}

impl<T: Real> FirstVariation<T> {
    /// Largest absolute gap between the two integral forms.
    pub fn form_gap(&self) -> T {
        (self.metric_form[0] - self.a0_form[0]).abs().max((self.metric_form[1] - self.a0_form[1]).abs())
    }
}

/// Everything about `f` the variation formulas need, computed once.
pub struct TeichContext<T: Real> {
    pub geometry: GeometryCache<T>,
    pub chart: FlatChart<T>,
    /// Orthonormal TT basis in `y` coordinates.
    pub basis: [Sym2<T>; 2],
    /// The basis tensors in grid coordinates, `q^r = Jᵀ Q^r J`.
    pub q_fields: [TensorField<T>; 2],
    /// Constraint-gradient normal fields `Φ_r = g^{ik}g^{jl} q^r_kl A⁰_ij`.
    pub phi: [VectorField<T>; 2],
    /// `dτ̂(Q^r)`.
    pub dtau: [Complex<T>; 2],
    /// `d²τ̂(Q^r, Q^s)`.
    pub d2tau: [[Complex<T>; 2]; 2],
    /// `e^{2u} = √g / det J`.
    pub e2u: ScalarField<T>,
    lie_op: ChartLieOperator<T>,
}

impl<T: Real> TeichContext<T> {
    pub fn new(f: &Immersion<T>) -> Result<Self> {
        let geometry = GeometryCache::new(f)?;
        let chart = flat_chart(&geometry.g)?;
        let grid = f.grid();
        let m = chart.metric;
        let basis = chart_basis(&m);
        let q_fields = [0, 1].map(|r| TensorField {
            grid,
            data: chart.jac.iter().map(|j| basis[r].congruence(j)).collect(),
        });
        let phi = [geometry.contract_a0(&q_fields[0]), geometry.contract_a0(&q_fields[1])];
        let dtau = [tau_first(&m, &basis[0]), tau_first(&m, &basis[1])];
        let d2tau = [0, 1].map(|r| [0, 1].map(|s| tau_second(&m, &basis[r], &basis[s])));
        let e2u = ScalarField {
            grid,
            data: geometry
                .sqrt_det_g
                .data
                .iter()
                .zip(&chart.jac)
                .map(|(&s, j)| s / j.det())
                .collect(),
        };
        let lie_op = ChartLieOperator::new(grid, m, &chart.jac);
        Ok(Self { geometry, chart, basis, q_fields, phi, dtau, d2tau, e2u, lie_op })
    }

    pub fn tau(&self) -> Complex<T> {
        self.chart.tau.tau
    }

    /// Chart image `Σ_r c_r dτ̂(Q^r)` of TT coefficients.
    pub fn chart_image(&self, c: [T; 2]) -> [T; 2] {
        to_chart(self.dtau[0] * c[0] + self.dtau[1] * c[1])
    }

    /// Metric-form coefficients `F_r` of a metric variation `S`.
    pub fn metric_form(&self, s: &TensorField<T>) -> [T; 2] {
        let cell = s.grid.cell_area::<T>();
        [0, 1].map(|r| {
            let mut acc = T::zero();
            for p in 0..s.grid.len() {
                acc += s.data[p].contract(&self.q_fields[r].data[p], &self.geometry.g_inv.data[p])
                    * self.geometry.sqrt_det_g.data[p];
            }
            acc * cell
        })
    }

    pub fn first_variation(&self, v: &VectorField<T>) -> FirstVariation<T> {
        let (s, _) = metric_variation_with(&self.geometry.df, v);
        let metric_form = self.metric_form(&s);
        let m2 = T::lit(-2.0);
        let a0_form = [m2 * self.geometry.l2_inner(&self.phi[0], v), m2 * self.geometry.l2_inner(&self.phi[1], v)];
        let delta = self.chart_image(metric_form);
        let fv = FirstVariation { delta, metric_form, a0_form };
        log::debug!("first variation form gap {:e}", fv.form_gap().to_f64_lossy());
        fv
    }

    /// Converts a grid-coordinate tensor into conformally rescaled `y` components
    /// `e^{−2u} J^{−T} S J^{−1}`.
    pub(crate) fn to_chart_tensor(&self, s: &TensorField<T>) -> Vec<Sym2<T>> {
        s.data
            .iter()
            .zip(&self.lie_op.jinv)
            .zip(&self.e2u.data)
            .map(|((x, ji), &e)| x.congruence(ji).scale(T::one() / e))
            .collect()
    }

    /// Decomposition of the rescaled first metric variation of `V` in the chart.
    pub fn decompose_variation(&self, v: &VectorField<T>) -> ChartDecomposition<T> {
        let (s, _) = metric_variation_with(&self.geometry.df, v);
        decompose_in_chart(&self.lie_op, &self.to_chart_tensor(&s), &self.basis)
    }

    pub fn second_variation(&self, v: &VectorField<T>) -> [T; 2] {
        second::second_variation(self, v)
    }

    pub(crate) fn lie_op(&self) -> &ChartLieOperator<T> {
        &self.lie_op
    }
}

/// `δτ̂_f.V` in chart coordinates.
pub fn first_variation<T: Real>(f: &Immersion<T>, v: &VectorField<T>) -> Result<[T; 2]> {
    Ok(TeichContext::new(f)?.first_variation(v).delta)
}

/// `δ²τ̂_f(V)` in chart coordinates.
pub fn second_variation<T: Real>(f: &Immersion<T>, v: &VectorField<T>) -> Result<[T; 2]> {
    Ok(TeichContext::new(f)?.second_variation(v))
}

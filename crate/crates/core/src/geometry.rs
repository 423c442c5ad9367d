//! Pointwise differential geometry of a sampled immersion.
//!
//! Second fundamental form components are stored in the order
//! `A₁₁, A₁₂, A₂₂` (index via [`sym_index`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot, Dir, GridSpec, ScalarField, TensorField, VectorField};
use crate::tensor::Sym2;
use crate::Real;

/// Position of `(i, j)` in the packed `11, 12, 22` storage.
#[inline]
pub fn sym_index(i: usize, j: usize) -> usize {
    i + j
}

/// Doubly periodic map of the parameter torus into R³ or R⁴.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Immersion<T> {
    pub points: VectorField<T>,
}

impl<T: Real> Immersion<T> {
    pub fn new(points: VectorField<T>) -> Result<Self> {
        if points.dim != 3 && points.dim != 4 {
            return Err(Error::DimensionMismatch(format!(
                "immersions live in R^3 or R^4, got R^{}",
                points.dim
            )));
        }
        Ok(Self { points })
    }

    pub fn grid(&self) -> GridSpec {
        self.points.grid
    }

    pub fn dim(&self) -> usize {
        self.points.dim
    }

    /// `f + t·V`.
    pub fn displaced(&self, t: T, v: &VectorField<T>) -> Self {
        Self { points: self.points.axpy(t, v) }
    }

    pub fn translated(&self, c: &[T]) -> Self {
        let mut out = self.clone();
        for p in 0..self.grid().len() {
            for (x, &y) in out.points.get_mut(p).iter_mut().zip(c) {
                *x += y;
            }
        }
        out
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { points: self.points.scale(s) }
    }

    /// Applies a linear map given row-major as `dim × dim` entries.
    pub fn transformed(&self, m: &[T]) -> Self {
        let d = self.dim();
        let mut out = self.clone();
        for p in 0..self.grid().len() {
            let x = self.points.get(p);
            let y = out.points.get_mut(p);
            for r in 0..d {
                y[r] = (0..d).map(|c| m[r * d + c] * x[c]).sum();
            }
        }
        out
    }
}

/// Derived geometric fields of an immersion.
#[derive(Debug, Clone)]
pub struct GeometryCache<T> {
    pub grid: GridSpec,
    pub dim: usize,
    /// Coordinate tangents `∂_u f`, `∂_v f`.
    pub df: [VectorField<T>; 2],
    pub g: TensorField<T>,
    pub g_inv: TensorField<T>,
    pub sqrt_det_g: ScalarField<T>,
    /// `christoffel[k][p]` holds the symmetric matrix `Γ^k_ij` at point `p`.
    pub christoffel: [Vec<Sym2<T>>; 2],
    pub a: [VectorField<T>; 3],
    pub a0: [VectorField<T>; 3],
    pub h: VectorField<T>,
    /// Gauss curvature from the metric alone, in divergence form.
    pub k: ScalarField<T>,
    /// Gauss curvature from the Gauss equation `(⟨A₁₁,A₂₂⟩ − |A₁₂|²)/det g`.
    pub k_gauss: ScalarField<T>,
}

impl<T: Real> GeometryCache<T> {
    pub fn new(f: &Immersion<T>) -> Result<Self> {
        let grid = f.grid();
        let dim = f.dim();
        let df = [f.points.partial(Dir::U), f.points.partial(Dir::V)];
        let g = metric_from_tangents(&df)?;
        let n = grid.len();
        let mut g_inv = g.clone();
        let mut sqrt_det_g = ScalarField::zeros(grid);
        for p in 0..n {
            g_inv.data[p] = g.data[p].inverse();
            sqrt_det_g.data[p] = g.data[p].det().sqrt();
        }
        let second = [
            f.points.second_partial(Dir::U),
            df[0].partial(Dir::V),
            f.points.second_partial(Dir::V),
        ];
        let mut christoffel = [vec![Sym2::zero(); n], vec![Sym2::zero(); n]];
        let mut a = [
            VectorField::zeros(grid, dim),
            VectorField::zeros(grid, dim),
            VectorField::zeros(grid, dim),
        ];
        for p in 0..n {
            let gi = &g_inv.data[p];
            let t = [df[0].get(p), df[1].get(p)];
            let mut gam = [[T::zero(); 3]; 2];
            for (s, sec) in second.iter().enumerate() {
                let x = sec.get(p);
                let pr = [dot(x, t[0]), dot(x, t[1])];
                for (k, gk) in gam.iter_mut().enumerate() {
                    gk[s] = gi.at(k, 0) * pr[0] + gi.at(k, 1) * pr[1];
                }
                let out = a[s].get_mut(p);
                for c in 0..dim {
                    out[c] = x[c] - gam[0][s] * t[0][c] - gam[1][s] * t[1][c];
                }
            }
            for k in 0..2 {
                christoffel[k][p] = Sym2::new(gam[k][0], gam[k][1], gam[k][2]);
            }
        }
        let mut h = VectorField::zeros(grid, dim);
        let mut a0 = a.clone();
        let mut k_gauss = ScalarField::zeros(grid);
        for p in 0..n {
            let gi = g_inv.data[p];
            let gp = g.data[p];
            let hp: Vec<T> = (0..dim)
                .map(|c| {
                    gi.xx * a[0].get(p)[c] + T::lit(2.0) * gi.xy * a[1].get(p)[c] + gi.yy * a[2].get(p)[c]
                })
                .collect();
            let half = T::lit(0.5);
            for (s, (i, j)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                let gij = gp.at(i, j);
                let out = a0[s].get_mut(p);
                for c in 0..dim {
                    out[c] -= half * gij * hp[c];
                }
            }
            h.get_mut(p).copy_from_slice(&hp);
            k_gauss.data[p] = (dot(a[0].get(p), a[2].get(p)) - dot(a[1].get(p), a[1].get(p)))
                / gp.det();
        }
        let k = gauss_curvature(&g)?;
        Ok(Self { grid, dim, df, g, g_inv, sqrt_det_g, christoffel, a, a0, h, k, k_gauss })
    }

    pub fn area_density(&self) -> &ScalarField<T> {
        &self.sqrt_det_g
    }

    /// `∫ φ dμ_g`.
    pub fn integrate(&self, phi: &ScalarField<T>) -> T {
        crate::grid::weighted_sum(&phi.data, &self.sqrt_det_g.data) * self.grid.cell_area::<T>()
    }

    pub fn area(&self) -> T {
        self.sqrt_det_g.data.iter().copied().sum::<T>() * self.grid.cell_area::<T>()
    }

    /// `∫ ⟨a, b⟩ dμ_g` for vector fields.
    pub fn l2_inner(&self, a: &VectorField<T>, b: &VectorField<T>) -> T {
        self.integrate(&a.dot(b))
    }

    pub fn l2_norm(&self, a: &VectorField<T>) -> T {
        self.l2_inner(a, a).sqrt()
    }

    fn tangential_coeffs(&self, p: usize, x: &[T]) -> [T; 2] {
        let gi = &self.g_inv.data[p];
        let pr = [dot(x, self.df[0].get(p)), dot(x, self.df[1].get(p))];
        [gi.xx * pr[0] + gi.xy * pr[1], gi.xy * pr[0] + gi.yy * pr[1]]
    }

    /// Pointwise `(π_f W, π⊥_f W)`.
    pub fn projections(&self, w: &VectorField<T>) -> (VectorField<T>, VectorField<T>) {
        let mut tan = VectorField::zeros(self.grid, self.dim);
        let mut nor = w.clone();
        for p in 0..self.grid.len() {
            let c = self.tangential_coeffs(p, w.get(p));
            let t = tan.get_mut(p);
            for d in 0..self.dim {
                t[d] = c[0] * self.df[0].get(p)[d] + c[1] * self.df[1].get(p)[d];
            }
            let tv = tan.get(p).to_vec();
            for (x, y) in nor.get_mut(p).iter_mut().zip(tv) {
                *x -= y;
            }
        }
        (tan, nor)
    }

    pub fn normal_part(&self, w: &VectorField<T>) -> VectorField<T> {
        self.projections(w).1
    }

    /// `Q(A⁰)φ = g^{ik}g^{jl} A⁰_ij ⟨A⁰_kl, φ⟩`.
    pub fn q_action(&self, phi: &VectorField<T>) -> VectorField<T> {
        let pairing = self.a0_pairing(phi);
        self.contract_a0(&pairing)
    }

    /// Tensor `⟨A⁰_ij, V⟩`.
    pub fn a0_pairing(&self, v: &VectorField<T>) -> TensorField<T> {
        let data = (0..self.grid.len())
            .map(|p| {
                Sym2::new(
                    dot(self.a0[0].get(p), v.get(p)),
                    dot(self.a0[1].get(p), v.get(p)),
                    dot(self.a0[2].get(p), v.get(p)),
                )
            })
            .collect();
        TensorField { grid: self.grid, data }
    }

    /// Normal field `g^{ik}g^{jl} q_kl A⁰_ij`.
    pub fn contract_a0(&self, q: &TensorField<T>) -> VectorField<T> {
        let mut out = VectorField::zeros(self.grid, self.dim);
        for p in 0..self.grid.len() {
            let up = q.data[p].raise(&self.g_inv.data[p]);
            let w = [up.xx, T::lit(2.0) * up.xy, up.yy];
            let o = out.get_mut(p);
            for (s, &ws) in w.iter().enumerate() {
                for (c, oc) in o.iter_mut().enumerate() {
                    *oc += ws * self.a0[s].get(p)[c];
                }
            }
        }
        out
    }

    /// Pointwise squared norm `g^{ik}g^{jl}⟨A_ij, A_kl⟩` of a packed normal-valued tensor.
    fn tensor_norm2(&self, t: &[VectorField<T>; 3], p: usize) -> T {
        let gi = &self.g_inv.data[p];
        let mut s = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        s += gi.at(i, k) * gi.at(j, l)
                            * dot(t[sym_index(i, j)].get(p), t[sym_index(k, l)].get(p));
                    }
                }
            }
        }
        s
    }

    pub fn a_norm2(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            data: (0..self.grid.len()).map(|p| self.tensor_norm2(&self.a, p)).collect(),
        }
    }

    pub fn a0_norm2(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            data: (0..self.grid.len()).map(|p| self.tensor_norm2(&self.a0, p)).collect(),
        }
    }

    pub fn h_norm2(&self) -> ScalarField<T> {
        self.h.dot(&self.h)
    }

    pub fn willmore_energy(&self) -> T {
        T::lit(0.25) * self.integrate(&self.h_norm2())
    }

    /// Normal-bundle Laplacian `Δ^⊥φ` with `∇^⊥ = P⊥∘∂`.
    pub fn normal_laplacian(&self, phi: &VectorField<T>) -> VectorField<T> {
        let nabla = [
            self.normal_part(&phi.partial(Dir::U)),
            self.normal_part(&phi.partial(Dir::V)),
        ];
        let d = [
            [nabla[0].partial(Dir::U), nabla[1].partial(Dir::U)],
            [nabla[0].partial(Dir::V), nabla[1].partial(Dir::V)],
        ];
        // d[i][j] = ∂_i(∇_j φ).
        let mut acc = VectorField::zeros(self.grid, self.dim);
        for p in 0..self.grid.len() {
            let gi = &self.g_inv.data[p];
            let gk = [
                self.christoffel[0][p].trace_with(gi),
                self.christoffel[1][p].trace_with(gi),
            ];
            let o = acc.get_mut(p);
            for c in 0..self.dim {
                let mut v = T::zero();
                for i in 0..2 {
                    for j in 0..2 {
                        v += gi.at(i, j) * d[i][j].get(p)[c];
                    }
                }
                v -= gk[0] * nabla[0].get(p)[c] + gk[1] * nabla[1].get(p)[c];
                o[c] = v;
            }
        }
        self.normal_part(&acc)
    }

    /// `Δ^⊥H + Q(A⁰)H`.
    pub fn el_operator(&self) -> VectorField<T> {
        let lap = self.normal_laplacian(&self.h);
        let q = self.q_action(&self.h);
        lap.axpy(T::one(), &q)
    }
}

fn metric_from_tangents<T: Real>(df: &[VectorField<T>; 2]) -> Result<TensorField<T>> {
    let grid = df[0].grid;
    let mut data = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let (a, b) = (df[0].get(p), df[1].get(p));
        let s = Sym2::new(dot(a, a), dot(a, b), dot(b, b));
        let det = s.det();
        if !(det > T::zero()) || !(s.xx > T::zero()) || !det.is_finite() {
            return Err(Error::DegenerateImmersion { index: p });
        }
        data.push(s);
    }
    Ok(TensorField { grid, data })
}

/// `g_ij = ⟨∂_i f, ∂_j f⟩`.
pub fn pullback_metric<T: Real>(f: &Immersion<T>) -> Result<TensorField<T>> {
    metric_from_tangents(&[f.points.partial(Dir::U), f.points.partial(Dir::V)])
}

pub fn curvature<T: Real>(f: &Immersion<T>) -> Result<GeometryCache<T>> {
    GeometryCache::new(f)
}

pub fn willmore_energy<T: Real>(f: &Immersion<T>) -> Result<T> {
    Ok(GeometryCache::new(f)?.willmore_energy())
}

pub fn el_operator<T: Real>(f: &Immersion<T>) -> Result<VectorField<T>> {
    Ok(GeometryCache::new(f)?.el_operator())
}

pub fn projections<T: Real>(
    f: &Immersion<T>,
    w: &VectorField<T>,
) -> Result<(VectorField<T>, VectorField<T>)> {
    Ok(GeometryCache::new(f)?.projections(w))
}

/// Gauss curvature of a metric alone, as `K√g = ∂_v(√g Γ²₁₁/g₁₁) − ∂_u(√g Γ²₁₂/g₁₁)`.
///
/// The divergence form makes `∫K dμ_g` vanish exactly on the periodic grid.
pub fn gauss_curvature<T: Real>(g: &TensorField<T>) -> Result<ScalarField<T>> {
    let density = gauss_curvature_density(g)?;
    let mut k = density.clone();
    for (kp, s) in k.data.iter_mut().zip(&g.data) {
        *kp /= s.det().sqrt();
    }
    Ok(k)
}

/// `K√g` in divergence form.
pub fn gauss_curvature_density<T: Real>(g: &TensorField<T>) -> Result<ScalarField<T>> {
    let grid = g.grid;
    if let Some(index) = g.data.iter().position(|s| !(s.det() > T::zero()) || !(s.xx > T::zero())) {
        return Err(Error::DegenerateImmersion { index });
    }
    let comps = [g.component(0, 0), g.component(0, 1), g.component(1, 1)];
    let d: Vec<[ScalarField<T>; 2]> =
        comps.iter().map(|c| [c.partial(Dir::U), c.partial(Dir::V)]).collect();
    // dg(l, i, j) = ∂_l g_ij.
    let dg = |p: usize, l: usize, i: usize, j: usize| d[sym_index(i, j)][l].data[p];
    let half = T::lit(0.5);
    let mut a = ScalarField::zeros(grid);
    let mut b = ScalarField::zeros(grid);
    for p in 0..grid.len() {
        let gp = g.data[p];
        let gi = gp.inverse();
        // Lowered Γ_{k,ij} = ½(∂_i g_jk + ∂_j g_ik − ∂_k g_ij).
        let low = |k: usize, i: usize, j: usize| half * (dg(p, i, j, k) + dg(p, j, i, k) - dg(p, k, i, j));
        let g2_11 = gi.at(1, 0) * low(0, 0, 0) + gi.at(1, 1) * low(1, 0, 0);
        let g2_12 = gi.at(1, 0) * low(0, 0, 1) + gi.at(1, 1) * low(1, 0, 1);
        let w = gp.det().sqrt() / gp.xx;
        a.data[p] = w * g2_11;
        b.data[p] = w * g2_12;
    }
    let av = a.partial(Dir::V);
    let bu = b.partial(Dir::U);
    Ok(av.zip_map(&bu, |x, y| x - y))
}

/// The three Gauss–Bonnet-equivalent energy expressions and the total curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussBonnetReport {
    pub energy: f64,
    /// `¼∫|A|² + 2π(1−p)`.
    pub quarter_int_a2_plus: f64,
    /// `½∫|A⁰|² + 4π(1−p)`.
    pub half_int_a02_plus: f64,
    /// `∫K dμ` with the metric-intrinsic curvature.
    pub int_k: f64,
    /// `∫K dμ` with the Gauss-equation curvature.
    pub int_k_gauss: f64,
}

impl GaussBonnetReport {
    /// Largest relative disagreement between the three energy expressions.
    pub fn max_rel_gap(&self) -> f64 {
        let e = [self.energy, self.quarter_int_a2_plus, self.half_int_a02_plus];
        let mut m: f64 = 0.0;
        for x in e {
            for y in e {
                m = m.max((x - y).abs());
            }
        }
        m / self.energy.abs().max(f64::MIN_POSITIVE)
    }
}

impl<T: Real> GeometryCache<T> {
    pub fn gauss_bonnet_report(&self, genus: u32) -> GaussBonnetReport {
        let chi_term = std::f64::consts::TAU * (1.0 - genus as f64);
        GaussBonnetReport {
            energy: self.willmore_energy().to_f64_lossy(),
            quarter_int_a2_plus: 0.25 * self.integrate(&self.a_norm2()).to_f64_lossy() + chi_term,
            half_int_a02_plus: 0.5 * self.integrate(&self.a0_norm2()).to_f64_lossy()
                + 2.0 * chi_term,
            int_k: self.integrate(&self.k).to_f64_lossy(),
            int_k_gauss: self.integrate(&self.k_gauss).to_f64_lossy(),
        }
    }
}

pub fn gauss_bonnet_report<T: Real>(f: &Immersion<T>, genus: u32) -> Result<GaussBonnetReport> {
    Ok(GeometryCache::new(f)?.gauss_bonnet_report(genus))
}

use super::tt::{flat_inner, tt_basis, tt_basis_field, TTTensor};
use crate::error::Result;
use crate::grid::{
    fd_symbol, vector_poisson_solve_with, Dir, Fft2, GridSpec, ScalarField, SolveStats,
    TensorField, VectorField,
};
use crate::tensor::{Mat2, Sym2};
use crate::Real;

/// `S = σ G + L_X G + q` on a constant flat background `G`.
#[derive(Debug, Clone)]
pub struct TensorDecomposition<T> {
    pub sigma: ScalarField<T>,
    /// Zero-mean vector field, upper indices.
    pub x: VectorField<T>,
    /// Constant TT part (components).
    pub q: Sym2<T>,
    pub q_tt: TTTensor<T>,
}

impl<T: Real> TensorDecomposition<T> {
    pub fn reconstruct(&self, metric: &Sym2<T>) -> TensorField<T> {
        let lie = crate::grid::lie_metric(&self.x, metric);
        TensorField {
            grid: lie.grid,
            data: lie
                .data
                .iter()
                .zip(&self.sigma.data)
                .map(|(l, &s)| metric.scale(s).add(l).add(&self.q))
                .collect(),
        }
    }
}

/// L² inner product `∫ G^{ac}G^{bd} A_ab B_cd dμ_G` of sampled tensors on a constant background.
pub fn flat_l2_inner<T: Real>(a: &TensorField<T>, b: &TensorField<T>, metric: &Sym2<T>) -> T {
    let ginv = metric.inverse();
    let s: T = a.data.iter().zip(&b.data).map(|(x, y)| x.contract(y, &ginv)).sum();
    s * metric.det().sqrt() * a.grid.cell_area::<T>()
}

/// Splits `S` into trace, Lie-derivative and TT parts w.r.t. a constant flat metric.
pub fn decompose<T: Real>(
    s: &TensorField<T>,
    flat_metric: &TensorField<T>,
) -> Result<TensorDecomposition<T>> {
    let basis = tt_basis_field(flat_metric)?;
    let metric = flat_metric.data[0];
    let ginv = metric.inverse();
    let mean = s.mean();
    let coeffs = [flat_inner(&mean, &basis[0], &metric), flat_inner(&mean, &basis[1], &metric)];
    let q = basis[0].scale(coeffs[0]).add(&basis[1].scale(coeffs[1]));
    let rest = TensorField {
        grid: s.grid,
        data: s.data.iter().map(|x| x.trace_free(&metric, &ginv).sub(&q)).collect(),
    };
    let x = vector_poisson_solve_with(&rest, &metric)?;
    let lie = crate::grid::lie_metric(&x, &metric);
    let half = T::lit(0.5);
    let sigma = ScalarField {
        grid: s.grid,
        data: s
            .data
            .iter()
            .zip(&lie.data)
            .map(|(a, l)| half * a.sub(l).trace_with(&ginv))
            .collect(),
    };
    let q_tt = TTTensor::from_components(&q, &metric);
    Ok(TensorDecomposition { sigma, x, q, q_tt })
}

/// Lie-derivative operator `X ↦ TF_M(L_X M)` in the flat affine coordinates `y` of a chart,
/// sampled on the parameter grid, with its adjoint and a Fourier preconditioner.
pub(crate) struct ChartLieOperator<T: Real> {
    pub grid: GridSpec,
    pub metric: Sym2<T>,
    pub metric_inv: Sym2<T>,
    /// `jinv[p].m[i][a] = ∂x_i/∂y_a`.
    pub jinv: Vec<Mat2<T>>,
    /// Flat area weights `det J · h_u h_v`; they sum to one.
    pub w: Vec<T>,
    fft: Fft2<T>,
    precond: Vec<[[T; 2]; 2]>,
}

impl<T: Real> ChartLieOperator<T> {
    pub fn new(grid: GridSpec, metric: Sym2<T>, jac: &[Mat2<T>]) -> Self {
        let jinv: Vec<Mat2<T>> = jac.iter().map(|j| j.inverse()).collect();
        let cell = grid.cell_area::<T>();
        let w: Vec<T> = jac.iter().map(|j| j.det() * cell).collect();
        let wbar = w.iter().copied().sum::<T>() / T::of_usize(w.len());
        let minv = metric.inverse();
        let nv = grid.n_v;
        let two = T::lit(2.0);
        let precond = (0..grid.len())
            .map(|p| {
                let s = [fd_symbol::<T>(&grid, Dir::U, p / nv), fd_symbol::<T>(&grid, Dir::V, p % nv)];
                if s[0] == T::zero() && s[1] == T::zero() {
                    return [[T::zero(); 2]; 2];
                }
                // r[e]: real symbol of TF_M(L_X M) on the unit vector e.
                let r: Vec<Sym2<T>> = (0..2)
                    .map(|e| {
                        let y = [metric.at(0, e), metric.at(1, e)];
                        let full = Sym2::from_fn(|a, b| s[a] * y[b] + s[b] * y[a]);
                        full.trace_free(&metric, &minv)
                    })
                    .collect();
                let mut k = [[T::zero(); 2]; 2];
                for (e, re) in r.iter().enumerate() {
                    let up = re.raise(&minv);
                    for (c, kc) in k.iter_mut().enumerate() {
                        let mut v = T::zero();
                        for a in 0..2 {
                            for b in 0..2 {
                                v += s[a] * up.at(a, b) * metric.at(c, b);
                            }
                        }
                        kc[e] = two * wbar * v;
                    }
                }
                Mat2::new(k).inverse().m
            })
            .collect();
        Self { grid, metric, metric_inv: minv, jinv, w, fft: Fft2::new(grid), precond }
    }

    /// `[∂F/∂y₁, ∂F/∂y₂]`.
    pub fn dy(&self, f: &ScalarField<T>) -> [ScalarField<T>; 2] {
        let dx = f.gradient();
        let mut out = [ScalarField::zeros(self.grid), ScalarField::zeros(self.grid)];
        for p in 0..self.grid.len() {
            let ji = &self.jinv[p];
            for (a, o) in out.iter_mut().enumerate() {
                o.data[p] = ji.m[0][a] * dx[0].data[p] + ji.m[1][a] * dx[1].data[p];
            }
        }
        out
    }

    /// `(L_X M, dX)` with `dX[c][a] = ∂_a X^c`.
    pub fn lie(&self, x: &[ScalarField<T>; 2]) -> (Vec<Sym2<T>>, [[ScalarField<T>; 2]; 2]) {
        let dx = [self.dy(&x[0]), self.dy(&x[1])];
        let m = &self.metric;
        let l = (0..self.grid.len())
            .map(|p| {
                Sym2::from_fn(|a, b| {
                    let mut v = T::zero();
                    for c in 0..2 {
                        v += m.at(c, b) * dx[c][a].data[p] + m.at(a, c) * dx[c][b].data[p];
                    }
                    v
                })
            })
            .collect();
        (l, dx)
    }

    pub fn trace_free(&self, t: &Sym2<T>) -> Sym2<T> {
        t.trace_free(&self.metric, &self.metric_inv)
    }

    fn apply(&self, x: &[ScalarField<T>; 2]) -> Vec<Sym2<T>> {
        self.lie(x).0.iter().map(|l| self.trace_free(l)).collect()
    }

    /// Weighted adjoint `w · P*T` for trace-free `T`.
    fn adjoint_weighted(&self, t: &[Sym2<T>]) -> [ScalarField<T>; 2] {
        let two = T::lit(2.0);
        let mut out = [ScalarField::zeros(self.grid), ScalarField::zeros(self.grid)];
        for (c, oc) in out.iter_mut().enumerate() {
            for i in 0..2 {
                let mut y = ScalarField::zeros(self.grid);
                for p in 0..self.grid.len() {
                    let up = t[p].raise(&self.metric_inv);
                    let mut v = T::zero();
                    for a in 0..2 {
                        for b in 0..2 {
                            v += up.at(a, b) * self.metric.at(c, b) * self.jinv[p].m[i][a];
                        }
                    }
                    y.data[p] = two * self.w[p] * v;
                }
                let d = y.partial(Dir::from_index(i));
                for (o, dv) in oc.data.iter_mut().zip(&d.data) {
                    *o -= *dv;
                }
            }
        }
        out
    }

    fn normal(&self, x: &[ScalarField<T>; 2]) -> [ScalarField<T>; 2] {
        self.adjoint_weighted(&self.apply(x))
    }

    fn precondition(&self, r: &[ScalarField<T>; 2]) -> [ScalarField<T>; 2] {
        let f0 = self.fft.forward_real(&r[0].data);
        let f1 = self.fft.forward_real(&r[1].data);
        let mut z0 = f0.clone();
        let mut z1 = f1.clone();
        for p in 0..self.grid.len() {
            let k = &self.precond[p];
            z0[p] = f0[p] * k[0][0] + f1[p] * k[0][1];
            z1[p] = f0[p] * k[1][0] + f1[p] * k[1][1];
        }
        [
            ScalarField { grid: self.grid, data: self.fft.inverse_real(z0) },
            ScalarField { grid: self.grid, data: self.fft.inverse_real(z1) },
        ]
    }

    /// Weighted inner product `Σ w M^{ac}M^{bd} A_ab B_cd`.
    pub fn inner(&self, a: &[Sym2<T>], b: &[Sym2<T>]) -> T {
        a.iter()
            .zip(b)
            .zip(&self.w)
            .map(|((x, y), &w)| x.contract(y, &self.metric_inv) * w)
            .sum()
    }

    /// Least-squares solution of `TF_M(L_X M) = t` by preconditioned CG on the normal equations.
    pub fn solve(&self, t: &[Sym2<T>], tol: T, max_iter: usize) -> ([ScalarField<T>; 2], SolveStats) {
        let dot2 = |a: &[ScalarField<T>; 2], b: &[ScalarField<T>; 2]| -> T {
            (0..2)
                .map(|c| a[c].data.iter().zip(&b[c].data).map(|(&x, &y)| x * y).sum::<T>())
                .sum()
        };
        let b = self.adjoint_weighted(t);
        let bn = dot2(&b, &b).sqrt();
        let mut x = [ScalarField::zeros(self.grid), ScalarField::zeros(self.grid)];
        if bn == T::zero() {
            return (x, SolveStats { iterations: 0, residual: 0.0, converged: true });
        }
        let mut r = b.clone();
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot2(&r, &z);
        let mut rel = T::one();
        for it in 0..max_iter {
            let ap = self.normal(&p);
            let pap = dot2(&p, &ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            for c in 0..2 {
                for k in 0..self.grid.len() {
                    x[c].data[k] += alpha * p[c].data[k];
                    r[c].data[k] -= alpha * ap[c].data[k];
                }
            }
            rel = dot2(&r, &r).sqrt() / bn;
            if rel <= tol {
                return (
                    x,
                    SolveStats { iterations: it + 1, residual: rel.to_f64_lossy(), converged: true },
                );
            }
            z = self.precondition(&r);
            let rz_new = dot2(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for c in 0..2 {
                for k in 0..self.grid.len() {
                    p[c].data[k] = z[c].data[k] + beta * p[c].data[k];
                }
            }
        }
        (x, SolveStats { iterations: max_iter, residual: rel.to_f64_lossy(), converged: false })
    }
}

/// Decomposition `S̃ = σM + L_X M + q` in the flat affine coordinates of a chart.
#[derive(Debug, Clone)]
pub struct ChartDecomposition<T> {
    pub sigma: ScalarField<T>,
    /// `y`-components of `X`.
    pub x: [ScalarField<T>; 2],
    /// `dx[c][a] = ∂X^c/∂y_a`.
    pub dx: [[ScalarField<T>; 2]; 2],
    /// `L_X M` sampled on the grid.
    pub lie: Vec<Sym2<T>>,
    /// Coefficients of the TT part in the orthonormal basis.
    pub beta: [T; 2],
    pub q: Sym2<T>,
    /// Relative L² mismatch of the reconstruction.
    pub residual: T,
    pub stats: SolveStats,
}

pub(crate) fn decompose_in_chart<T: Real>(
    op: &ChartLieOperator<T>,
    s: &[Sym2<T>],
    basis: &[Sym2<T>; 2],
) -> ChartDecomposition<T> {
    let grid = op.grid;
    let beta = [
        s.iter().zip(&op.w).map(|(x, &w)| x.contract(&basis[0], &op.metric_inv) * w).sum::<T>(),
        s.iter().zip(&op.w).map(|(x, &w)| x.contract(&basis[1], &op.metric_inv) * w).sum::<T>(),
    ];
    let q = basis[0].scale(beta[0]).add(&basis[1].scale(beta[1]));
    let t: Vec<Sym2<T>> = s.iter().map(|x| op.trace_free(x).sub(&q)).collect();
    let tol = T::lit(1e-11).max(T::lit(100.0) * T::epsilon());
    let (x, stats) = op.solve(&t, tol, 500);
    let (lie, dx) = op.lie(&x);
    let half = T::lit(0.5);
    let sigma = ScalarField {
        grid,
        data: s.iter().zip(&lie).map(|(a, l)| half * a.sub(l).trace_with(&op.metric_inv)).collect(),
    };
    let recon: Vec<Sym2<T>> = (0..grid.len())
        .map(|p| op.metric.scale(sigma.data[p]).add(&lie[p]).add(&q).sub(&s[p]))
        .collect();
    let sn = op.inner(s, s);
    let residual = if sn > T::zero() { (op.inner(&recon, &recon) / sn).sqrt() } else { T::zero() };
    ChartDecomposition { sigma, x, dx, lie, beta, q, residual, stats }
}

/// Basis of the TT tensors used by [`decompose_in_chart`].
pub(crate) fn chart_basis<T: Real>(metric: &Sym2<T>) -> [Sym2<T>; 2] {
    tt_basis(metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::random_smooth_scalar;

    fn synth(metric: Sym2<f64>) -> (TensorField<f64>, ScalarField<f64>, VectorField<f64>, Sym2<f64>) {
        let grid = GridSpec::square(32).unwrap();
        let sigma = random_smooth_scalar(grid, 1, 3).map(|x| 0.5 + x);
        let x0 = VectorField::from_components(&[
            random_smooth_scalar(grid, 2, 3),
            random_smooth_scalar(grid, 3, 3),
        ]);
        let q0 = TTTensor::new(0.3, -0.2).components(&metric);
        let lie = crate::grid::lie_metric(&x0, &metric);
        let s = TensorField {
            grid,
            data: (0..grid.len())
                .map(|p| metric.scale(sigma.data[p]).add(&lie.data[p]).add(&q0))
                .collect(),
        };
        (s, sigma, x0, q0)
    }

    #[test]
    fn round_trip_recovers_components() {
        for metric in [Sym2::identity(), Sym2::new(1.3, 0.4, 0.9)] {
            let (s, sigma, x0, q0) = synth(metric);
            let flat = TensorField::constant(s.grid, metric);
            let d = decompose(&s, &flat).unwrap();
            assert!(d.sigma.zip_map(&sigma, |a, b| a - b).max_abs() < 1e-9);
            assert!(d.x.axpy(-1.0, &x0).max_norm() < 1e-9);
            assert!(d.q.sub(&q0).max_abs() < 1e-12);
            let recon = d.reconstruct(&metric);
            for (a, b) in recon.data.iter().zip(&s.data) {
                assert!(a.sub(b).max_abs() < 1e-10);
            }
            let lie = crate::grid::lie_metric(&d.x, &metric);
            let qf = TensorField::constant(s.grid, d.q);
            let trace = TensorField { grid: s.grid, data: d.sigma.data.iter().map(|&x| metric.scale(x)).collect() };
            assert!(flat_l2_inner(&qf, &lie, &metric).abs() < 1e-10);
            assert!(flat_l2_inner(&qf, &trace, &metric).abs() < 1e-10);
        }
    }

    #[test]
    fn trivial_decompositions() {
        let grid = GridSpec::square(16).unwrap();
        let metric = Sym2::new(2.0f64, 0.1, 0.6);
        let flat = TensorField::constant(grid, metric);
        let d = decompose(&flat, &flat).unwrap();
        assert!(d.sigma.data.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        assert!(d.x.max_norm() < 1e-14 && d.q.max_abs() < 1e-14);
        let q0 = TTTensor::new(-0.4, 0.9).components(&metric);
        let d = decompose(&TensorField::constant(grid, q0), &flat).unwrap();
        assert!(d.sigma.max_abs() < 1e-14 && d.x.max_norm() < 1e-14);
        assert!(d.q.sub(&q0).max_abs() < 1e-14);
    }
}

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{diff::fd_symbol, Dir, GridSpec, ScalarField, TensorField, VectorField};
use crate::error::{Error, Result};
use crate::tensor::{Mat2, Sym2};
use crate::Real;

/// Two-dimensional FFT over a periodic grid, built from row and column passes.
#[derive(Clone)]
pub struct Fft2<T: Real> {
    grid: GridSpec,
    fwd_u: Arc<dyn Fft<T>>,
    inv_u: Arc<dyn Fft<T>>,
    fwd_v: Arc<dyn Fft<T>>,
    inv_v: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.grid.n_u, self.grid.n_v)
    }
}

impl<T: Real> Fft2<T> {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd_u: planner.plan_fft_forward(grid.n_u),
            inv_u: planner.plan_fft_inverse(grid.n_u),
            fwd_v: planner.plan_fft_forward(grid.n_v),
            inv_v: planner.plan_fft_inverse(grid.n_v),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Batched transform along `u`: transposes, runs the row batch, transposes back.
    fn columns(&self, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>, scratch: &mut Vec<Complex<T>>) {
        let (nu, nv) = (self.grid.n_u, self.grid.n_v);
        let mut t = vec![Complex::new(T::zero(), T::zero()); data.len()];
        for i in 0..nu {
            for j in 0..nv {
                t[j * nu + i] = data[i * nv + j];
            }
        }
        fft.process_with_scratch(&mut t, scratch_for(scratch, fft.as_ref()));
        for j in 0..nv {
            for i in 0..nu {
                data[i * nv + j] = t[j * nu + i];
            }
        }
    }

    fn both(&self, data: &mut [Complex<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        let mut scratch = Vec::new();
        rows.process_with_scratch(data, scratch_for(&mut scratch, rows.as_ref()));
        self.columns(data, cols, &mut scratch);
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.both(data, &self.fwd_v, &self.fwd_u);
    }

    /// Inverse transform including the `1/(n_u n_v)` normalization.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.both(data, &self.inv_v, &self.inv_u);
        let s = T::one() / T::of_usize(self.grid.len());
        for x in data.iter_mut() {
            *x = *x * s;
        }
    }

    pub fn forward_real(&self, data: &[T]) -> Vec<Complex<T>> {
        let mut c: Vec<_> = data.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.forward(&mut c);
        c
    }

    pub fn inverse_real(&self, mut data: Vec<Complex<T>>) -> Vec<T> {
        self.inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Multiplies mode `(k_u, k_v)` (unsigned indices) by `factor(k_u, k_v)`.
    pub fn filter(&self, data: &[T], factor: impl Fn(usize, usize) -> T) -> Vec<T> {
        let mut c = self.forward_real(data);
        let nv = self.grid.n_v;
        for (p, x) in c.iter_mut().enumerate() {
            *x = *x * factor(p / nv, p % nv);
        }
        self.inverse_real(c)
    }
}

fn scratch_for<'a, T: Real>(buf: &'a mut Vec<Complex<T>>, fft: &dyn Fft<T>) -> &'a mut [Complex<T>] {
    let n = fft.get_inplace_scratch_len();
    if buf.len() < n {
        buf.resize(n, Complex::new(T::zero(), T::zero()));
    }
    &mut buf[..n]
}

/// Signed frequency of the unsigned FFT index `k` on `n` samples.
pub fn signed_freq(k: usize, n: usize) -> isize {
    if k <= n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Zero-mean solution of the flat Laplace equation `Δu = rhs`, exact per Fourier mode.
pub fn poisson_solve<T: Real>(rhs: &ScalarField<T>) -> Result<ScalarField<T>> {
    let grid = rhs.grid;
    let mean = rhs.mean();
    let tol = T::epsilon().sqrt() * (T::one() + rhs.max_abs());
    if mean.abs() > tol {
        return Err(Error::IncompatibleRhs { mean: mean.to_f64_lossy() });
    }
    let fft = Fft2::new(grid);
    let tau = T::tau();
    let data = fft.filter(&rhs.data, |ku, kv| {
        if ku == 0 && kv == 0 {
            return T::zero();
        }
        let a = tau * T::lit(signed_freq(ku, grid.n_u) as f64);
        let b = tau * T::lit(signed_freq(kv, grid.n_v) as f64);
        -T::one() / (a * a + b * b)
    });
    Ok(ScalarField { grid, data })
}

/// Zero-mean `X` with trace-free part of `∂_iX_j + ∂_jX_i` equal to `rhs` on the
/// flat square background.
pub fn vector_poisson_solve<T: Real>(rhs: &TensorField<T>) -> Result<VectorField<T>> {
    vector_poisson_solve_with(rhs, &Sym2::identity())
}

/// Solves `TF_G(L_X G) = rhs` for a constant metric `G`, where
/// `(L_X G)_ab = G_cb ∂_aX^c + G_ac ∂_bX^c` and `X` is returned with upper indices.
///
/// The mean of `rhs` and every mode annihilated by the difference operator are
/// outside the range and are dropped; the solution has zero mean.
pub fn vector_poisson_solve_with<T: Real>(
    rhs: &TensorField<T>,
    metric: &Sym2<T>,
) -> Result<VectorField<T>> {
    let grid = rhs.grid;
    let fft = Fft2::new(grid);
    let comps: Vec<Vec<Complex<T>>> = [(0, 0), (0, 1), (1, 1)]
        .iter()
        .map(|&(i, j)| fft.forward_real(&rhs.component(i, j).data))
        .collect();
    let ginv = metric.inverse();
    let mut y0 = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut y1 = y0.clone();
    let nv = grid.n_v;
    for p in 0..grid.len() {
        let s = [fd_symbol::<T>(&grid, Dir::U, p / nv), fd_symbol::<T>(&grid, Dir::V, p % nv)];
        if s[0] == T::zero() && s[1] == T::zero() {
            continue;
        }
        // With Y = G X̂ the symbol is T_ab = i(s_a Y_b + s_b Y_a) - i G_ab (G^{cd} s_c Y_d).
        // Rows: the (1,1) and (1,2) components; columns: Y_1, Y_2.
        let gs = [
            ginv.xx * s[0] + ginv.xy * s[1],
            ginv.xy * s[0] + ginv.yy * s[1],
        ];
        let row = |a: usize, b: usize| -> [T; 2] {
            let mut r = [T::zero(); 2];
            for (d, rd) in r.iter_mut().enumerate() {
                let mut v = T::zero();
                if d == b {
                    v += s[a];
                }
                if d == a {
                    v += s[b];
                }
                *rd = v - metric.at(a, b) * gs[d];
            }
            r
        };
        let m = Mat2::new([row(0, 0), row(0, 1)]);
        let det = m.det();
        assert!(det.abs() > T::zero(), "singular mode system at a nonzero symbol");
        let inv = m.inverse();
        // T = i M Y  =>  Y = -i M^{-1} T.
        let t = [comps[0][p], comps[1][p]];
        let mi = Complex::new(T::zero(), -T::one());
        let ya = (t[0] * inv.m[0][0] + t[1] * inv.m[0][1]) * mi;
        let yb = (t[0] * inv.m[1][0] + t[1] * inv.m[1][1]) * mi;
        // X̂ = G^{-1} Y.
        let gi = ginv.mat();
        y0[p] = ya * gi.m[0][0] + yb * gi.m[0][1];
        y1[p] = ya * gi.m[1][0] + yb * gi.m[1][1];
    }
    let x0 = fft.inverse_real(y0);
    let x1 = fft.inverse_real(y1);
    Ok(VectorField::from_components(&[
        ScalarField { grid, data: x0 },
        ScalarField { grid, data: x1 },
    ]))
}

/// Trace-free part (w.r.t. constant `G`) of `L_X G` computed with grid differences.
pub fn lie_metric_tf<T: Real>(x: &VectorField<T>, metric: &Sym2<T>) -> TensorField<T> {
    let lie = lie_metric(x, metric);
    let ginv = metric.inverse();
    TensorField {
        grid: lie.grid,
        data: lie.data.iter().map(|s| s.trace_free(metric, &ginv)).collect(),
    }
}

/// `L_X G` for a constant metric `G` and a vector field given with upper indices.
pub fn lie_metric<T: Real>(x: &VectorField<T>, metric: &Sym2<T>) -> TensorField<T> {
    let grid = x.grid;
    let dx = [x.partial(Dir::U), x.partial(Dir::V)];
    let data = (0..grid.len())
        .map(|p| {
            Sym2::from_fn(|a, b| {
                let mut v = T::zero();
                for c in 0..2 {
                    v += metric.at(c, b) * dx[a].get(p)[c] + metric.at(a, c) * dx[b].get(p)[c];
                }
                v
            })
        })
        .collect();
    TensorField { grid, data }
}

//! Periodic-grid calculus on the parameter torus R²/Z².
//!
//! Samples are stored row-major with the `u` index outermost: point `(i, j)`
//! lives at `i * n_v + j`. Vector fields interleave their components per
//! point.

mod diff;
mod elliptic;
mod spectral;

pub use diff::{fd_symbol, fd_symbol_second};
pub use elliptic::{DivergenceOperator, SolveStats};
pub use spectral::{
    lie_metric, lie_metric_tf, poisson_solve, signed_freq, vector_poisson_solve, vector_poisson_solve_with, Fft2,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Sym2;
use crate::Real;

/// Coordinate direction on the parameter torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    U,
    V,
}

impl Dir {
    pub const BOTH: [Dir; 2] = [Dir::U, Dir::V];

    pub fn index(self) -> usize {
        match self {
            Dir::U => 0,
            Dir::V => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Dir::U
        } else {
            Dir::V
        }
    }
}

/// Resolution and finite-difference order of a periodic grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_u: usize,
    pub n_v: usize,
    pub fd_order: u8,
}

impl GridSpec {
    pub fn new(n_u: usize, n_v: usize, fd_order: u8) -> Result<Self> {
        if n_u < 8 || n_v < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 samples per direction, got {n_u}x{n_v}"
            )));
        }
        if fd_order != 2 && fd_order != 4 {
            return Err(Error::InvalidGrid(format!(
                "fd_order must be 2 or 4, got {fd_order}"
            )));
        }
        Ok(Self { n_u, n_v, fd_order })
    }

    /// Square grid with fourth-order differences.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n, 4)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n(&self, dir: Dir) -> usize {
        match dir {
            Dir::U => self.n_u,
            Dir::V => self.n_v,
        }
    }

    pub fn h<T: Real>(&self, dir: Dir) -> T {
        T::one() / T::of_usize(self.n(dir))
    }

    /// Area of one grid cell in parameter space.
    pub fn cell_area<T: Real>(&self) -> T {
        T::one() / T::of_usize(self.len())
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (i % self.n_u) * self.n_v + (j % self.n_v)
    }

    /// Index with signed periodic wraparound.
    #[inline]
    pub fn wrap(&self, i: isize, j: isize) -> usize {
        let iu = i.rem_euclid(self.n_u as isize) as usize;
        let jv = j.rem_euclid(self.n_v as isize) as usize;
        iu * self.n_v + jv
    }

    #[inline]
    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p / self.n_v, p % self.n_v)
    }

    /// Parameter-space position `(u, v) ∈ [0, 1)²` of a sample.
    pub fn point<T: Real>(&self, p: usize) -> (T, T) {
        let (i, j) = self.coords(p);
        (
            T::of_usize(i) / T::of_usize(self.n_u),
            T::of_usize(j) / T::of_usize(self.n_v),
        )
    }

    fn check(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch(format!(
                "grid {}x{} vs {}x{}",
                self.n_u, self.n_v, other.n_u, other.n_v
            )));
        }
        Ok(())
    }
}

/// Grid-sampled real function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField<T> {
    pub grid: GridSpec,
    pub data: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: GridSpec, c: T) -> Self {
        Self { grid, data: vec![c; grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a grid of {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f(u, v)` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(T, T) -> T) -> Self {
        let data = (0..grid.len())
            .map(|p| {
                let (u, v) = grid.point(p);
                f(u, v)
            })
            .collect();
        Self { grid, data }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn at(&self, i: isize, j: isize) -> T {
        self.data[self.grid.wrap(i, j)]
    }

    /// Parameter-space mean (integral against the unit area form).
    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::of_usize(self.data.len())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn partial(&self, dir: Dir) -> Self {
        Self { grid: self.grid, data: diff::partial_raw(&self.grid, &self.data, 1, dir) }
    }

    pub fn second_partial(&self, dir: Dir) -> Self {
        Self { grid: self.grid, data: diff::second_partial_raw(&self.grid, &self.data, 1, dir) }
    }

    pub fn gradient(&self) -> [Self; 2] {
        [self.partial(Dir::U), self.partial(Dir::V)]
    }
}

/// Grid-sampled map into R^dim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField<T> {
    pub grid: GridSpec,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        Self { grid, dim, data: vec![T::zero(); grid.len() * dim] }
    }

    pub fn from_vec(grid: GridSpec, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} points of dimension {dim}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, dim, data })
    }

    /// Samples `f(u, v, out)` at every grid point.
    pub fn from_fn(grid: GridSpec, dim: usize, mut f: impl FnMut(T, T, &mut [T])) -> Self {
        let mut out = Self::zeros(grid, dim);
        for p in 0..grid.len() {
            let (u, v) = grid.point(p);
            f(u, v, &mut out.data[p * dim..(p + 1) * dim]);
        }
        out
    }

    /// Builds a field from per-component scalar fields.
    pub fn from_components(comps: &[ScalarField<T>]) -> Self {
        let grid = comps[0].grid;
        let dim = comps.len();
        let mut out = Self::zeros(grid, dim);
        for (c, s) in comps.iter().enumerate() {
            for p in 0..grid.len() {
                out.data[p * dim + c] = s.data[p];
            }
        }
        out
    }

    pub fn component(&self, c: usize) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            data: (0..self.grid.len()).map(|p| self.data[p * self.dim + c]).collect(),
        }
    }

    #[inline]
    pub fn get(&self, p: usize) -> &[T] {
        &self.data[p * self.dim..(p + 1) * self.dim]
    }

    #[inline]
    pub fn get_mut(&mut self, p: usize) -> &mut [T] {
        &mut self.data[p * self.dim..(p + 1) * self.dim]
    }

    pub fn partial(&self, dir: Dir) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            data: diff::partial_raw(&self.grid, &self.data, self.dim, dir),
        }
    }

    pub fn second_partial(&self, dir: Dir) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            data: diff::second_partial_raw(&self.grid, &self.data, self.dim, dir),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + s * b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { grid: self.grid, dim: self.dim, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// Pointwise Euclidean inner product.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        let data = (0..self.grid.len())
            .map(|p| dot(self.get(p), other.get(p)))
            .collect();
        ScalarField { grid: self.grid, data }
    }

    /// Multiplies every point by the matching scalar sample.
    pub fn scale_by(&self, s: &ScalarField<T>) -> Self {
        let mut out = self.clone();
        for p in 0..self.grid.len() {
            for x in out.get_mut(p) {
                *x *= s.data[p];
            }
        }
        out
    }

    pub fn max_norm(&self) -> T {
        (0..self.grid.len()).fold(T::zero(), |m, p| m.max(dot(self.get(p), self.get(p)).sqrt()))
    }
}

/// Grid-sampled symmetric 2×2 tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField<T> {
    pub grid: GridSpec,
    pub data: Vec<Sym2<T>>,
}

impl<T: Real> TensorField<T> {
    pub fn constant(grid: GridSpec, value: Sym2<T>) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(T, T) -> Sym2<T>) -> Self {
        let data = (0..grid.len())
            .map(|p| {
                let (u, v) = grid.point(p);
                f(u, v)
            })
            .collect();
        Self { grid, data }
    }

    /// Component field `(i, j)`.
    pub fn component(&self, i: usize, j: usize) -> ScalarField<T> {
        ScalarField { grid: self.grid, data: self.data.iter().map(|s| s.at(i, j)).collect() }
    }

    /// Whether all samples agree with the first to relative tolerance `tol`.
    pub fn is_constant(&self, tol: T) -> bool {
        let first = self.data[0];
        let scale = first.max_abs().max(T::min_positive_value());
        self.data.iter().all(|s| s.sub(&first).max_abs() <= tol * scale)
    }

    pub fn mean(&self) -> Sym2<T> {
        let n = T::of_usize(self.data.len());
        self.data.iter().fold(Sym2::zero(), |a, s| a.add(s)).scale(T::one() / n)
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Trapezoid quadrature `Σ field · density · h_u h_v`.
pub fn integrate<T: Real>(field: &ScalarField<T>, density: &ScalarField<T>) -> Result<T> {
    field.grid.check(&density.grid)?;
    if let Some(index) = density.data.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::DegenerateAreaElement { index });
    }
    Ok(weighted_sum(&field.data, &density.data) * field.grid.cell_area::<T>())
}

/// `Σ a_p w_p` without positivity checks.
pub(crate) fn weighted_sum<T: Real>(a: &[T], w: &[T]) -> T {
    a.iter().zip(w).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::square(n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(4, 16, 4).is_err());
        assert!(GridSpec::new(16, 16, 3).is_err());
        assert!(GridSpec::new(16, 8, 2).is_ok());
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = ScalarField::constant(grid(16), 3.5);
        assert!(f.partial(Dir::U).max_abs() == 0.0);
        assert!(f.partial(Dir::V).max_abs() == 0.0);
    }

    fn sine_error(n: usize, order: u8) -> f64 {
        let g = GridSpec::new(n, n, order).unwrap();
        let f = ScalarField::from_fn(g, |u: f64, _: f64| (2.0 * PI * u).sin());
        let df = f.partial(Dir::U);
        let exact = ScalarField::from_fn(g, |u: f64, _: f64| 2.0 * PI * (2.0 * PI * u).cos());
        df.zip_map(&exact, |a, b| a - b).max_abs()
    }

    #[test]
    fn derivative_converges_at_stencil_order() {
        for order in [2u8, 4] {
            let ratio = sine_error(64, order) / sine_error(128, order);
            let expected = 2f64.powi(order as i32);
            assert!((ratio / expected - 1.0).abs() < 0.05, "order {order}: ratio {ratio}");
        }
    }

    #[test]
    fn second_derivative_along_v() {
        let g = grid(64);
        let f = ScalarField::from_fn(g, |_: f64, v: f64| (4.0 * PI * v).cos());
        let d2 = f.second_partial(Dir::V);
        let exact = ScalarField::from_fn(g, |_: f64, v: f64| -16.0 * PI * PI * (4.0 * PI * v).cos());
        assert!(d2.zip_map(&exact, |a, b| a - b).max_abs() < 1e-3 * 16.0 * PI * PI);
    }

    #[test]
    fn quadrature_examples() {
        let g = grid(16);
        let one = ScalarField::constant(g, 1.0f64);
        assert!((integrate(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        let s = ScalarField::from_fn(g, |u: f64, _: f64| (2.0 * PI * u).sin());
        assert!(integrate(&s, &one).unwrap().abs() < 1e-15);
        let density = ScalarField::constant(g, (4.0f64 * 1.0).sqrt());
        assert!((integrate(&one, &density).unwrap() - 2.0).abs() < 1e-14);
        let mut bad = one.clone();
        bad.data[5] = 0.0;
        assert_eq!(integrate(&one, &bad), Err(Error::DegenerateAreaElement { index: 5 }));
    }

    #[test]
    fn vector_components_round_trip() {
        let g = grid(8);
        let f = VectorField::from_fn(g, 3, |u: f64, v: f64, out: &mut [f64]| {
            out[0] = u;
            out[1] = v;
            out[2] = u * v;
        });
        let rebuilt = VectorField::from_components(&[f.component(0), f.component(1), f.component(2)]);
        assert_eq!(f, rebuilt);
    }

    #[test]
    fn wraparound_indexing() {
        let g = GridSpec::new(8, 12, 4).unwrap();
        assert_eq!(g.wrap(-1, -1), g.index(7, 11));
        assert_eq!(g.wrap(8, 12), 0);
    }
}

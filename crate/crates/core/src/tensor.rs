//! Pointwise 2×2 linear algebra used throughout the grid calculus.

use serde::{Deserialize, Serialize};

use crate::Real;

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(xx: T, xy: T, yy: T) -> Self {
        Self { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn diag(a: T, b: T) -> Self {
        Self::new(a, T::zero(), b)
    }

    /// Entry by index pair; `at(0, 1) == at(1, 0)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        Self::new(f(0, 0), f(0, 1), f(1, 1))
    }

    #[inline]
    pub fn det(&self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    #[inline]
    pub fn trace(&self) -> T {
        self.xx + self.yy
    }

    /// Inverse; the caller guarantees `det != 0`.
    #[inline]
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.xx * s, self.xy * s, self.yy * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    /// Trace with respect to a metric given by its inverse: `ginv^{ij} S_ij`.
    #[inline]
    pub fn trace_with(&self, ginv: &Self) -> T {
        ginv.xx * self.xx + T::lit(2.0) * ginv.xy * self.xy + ginv.yy * self.yy
    }

    /// Full contraction `ginv^{ik} ginv^{jl} S_ij Q_kl`.
    #[inline]
    pub fn contract(&self, other: &Self, ginv: &Self) -> T {
        let a = ginv.mat().mul(&self.mat()).mul(&ginv.mat());
        let mut s = T::zero();
        for k in 0..2 {
            for l in 0..2 {
                s += a.m[k][l] * other.at(k, l);
            }
        }
        s
    }

    /// Trace-free part with respect to the metric `g` (inverse `ginv`).
    pub fn trace_free(&self, g: &Self, ginv: &Self) -> Self {
        let t = self.trace_with(ginv) / T::lit(2.0);
        self.sub(&g.scale(t))
    }

    /// `ginv · S · ginv`, raising both indices.
    pub fn raise(&self, ginv: &Self) -> Self {
        Self::from_mat(&ginv.mat().mul(&self.mat()).mul(&ginv.mat()))
    }

    pub fn mat(&self) -> Mat2<T> {
        Mat2::new([[self.xx, self.xy], [self.xy, self.yy]])
    }

    /// Symmetric part of a general matrix.
    pub fn from_mat(m: &Mat2<T>) -> Self {
        Self::new(m.m[0][0], (m.m[0][1] + m.m[1][0]) / T::lit(2.0), m.m[1][1])
    }

    /// Congruence `Aᵀ S A`.
    pub fn congruence(&self, a: &Mat2<T>) -> Self {
        Self::from_mat(&a.transpose().mul(&self.mat()).mul(a))
    }

    pub fn max_abs(&self) -> T {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [T; 2] {
        let half = T::lit(0.5);
        let m = (self.xx + self.yy) * half;
        let d = ((self.xx - self.yy) * half).hypot(self.xy);
        [m - d, m + d]
    }

    /// Unit eigenvector for the eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: T) -> [T; 2] {
        let a = [self.xy, lambda - self.xx];
        let b = [lambda - self.yy, self.xy];
        let na = a[0].hypot(a[1]);
        let nb = b[0].hypot(b[1]);
        if na.max(nb) <= T::epsilon() * (T::one() + self.max_abs()) {
            return [T::one(), T::zero()];
        }
        if na >= nb {
            [a[0] / na, a[1] / na]
        } else {
            [b[0] / nb, b[1] / nb]
        }
    }
}

/// General 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    pub fn new(m: [[T; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::new([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    #[inline]
    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new([
            [self.m[1][1] / d, -self.m[0][1] / d],
            [-self.m[1][0] / d, self.m[0][0] / d],
        ])
    }

    pub fn transpose(&self) -> Self {
        Self::new([[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]])
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = [[T::zero(); 2]; 2];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Self::new(r)
    }

    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new([
            [self.m[0][0] * s, self.m[0][1] * s],
            [self.m[1][0] * s, self.m[1][1] * s],
        ])
    }
}

/// Solves a 2×2 system `m x = b`, `None` when singular relative to `rel_tol`.
pub fn solve2<T: Real>(m: [[T; 2]; 2], b: [T; 2], rel_tol: T) -> Option<[T; 2]> {
    let mat = Mat2::new(m);
    let scale = m
        .iter()
        .flatten()
        .fold(T::zero(), |a, &x| a.max(x.abs()));
    let d = mat.det();
    if scale == T::zero() || d.abs() <= rel_tol * scale * scale {
        return None;
    }
    Some(mat.inverse().apply(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_with_identity_is_frobenius() {
        let a = Sym2::new(1.0f64, 2.0, 3.0);
        let b = Sym2::new(-1.0f64, 0.5, 4.0);
        let id = Sym2::<f64>::identity();
        assert!((a.contract(&b, &id) - (-1.0 + 2.0 * 1.0 + 12.0)).abs() < 1e-14);
    }

    #[test]
    fn trace_free_part_is_trace_free() {
        let g = Sym2::new(2.0f64, 0.3, 1.5);
        let gi = g.inverse();
        let s = Sym2::new(0.7f64, -1.1, 2.2);
        assert!(s.trace_free(&g, &gi).trace_with(&gi).abs() < 1e-14);
    }

    #[test]
    fn eigen_decomposition() {
        let s = Sym2::new(2.0f64, 1.0, 2.0);
        let [l0, l1] = s.eigenvalues();
        assert!((l0 - 1.0).abs() < 1e-14 && (l1 - 3.0).abs() < 1e-14);
        let v = s.eigenvector(l1);
        assert!((v[0] - v[1]).abs() < 1e-14);
        let w = Sym2::new(1.0f64, 0.0, 1.0);
        let e = w.eigenvector(1.0);
        assert!((e[0].hypot(e[1]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mat_inverse() {
        let a = Mat2::new([[2.0f64, 1.0], [0.5, 3.0]]);
        let p = a.mul(&a.inverse());
        assert!((p.m[0][0] - 1.0).abs() < 1e-14 && p.m[0][1].abs() < 1e-14);
        assert!(solve2([[1.0f64, 2.0], [2.0, 4.0]], [1.0, 1.0], 1e-12).is_none());
    }
}

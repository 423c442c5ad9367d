use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TensorField;
use crate::tensor::Sym2;
use crate::uniformization::tau_of_metric;
use crate::Real;

/// Constant trace-free symmetric tensor given in conformal coordinates of a flat
/// metric: `q₁₁ = −q₂₂ = a`, `q₁₂ = q₂₁ = b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TTTensor<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> TTTensor<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    /// Holomorphic quadratic differential coefficient `a − i b`.
    pub fn holomorphic(&self) -> Complex<T> {
        Complex::new(self.a, -self.b)
    }

    pub fn norm(&self) -> T {
        self.a.hypot(self.b)
    }

    /// Components in the coordinates where the constant flat metric is `metric`.
    ///
    /// With `τ` the modulus of `metric` and `e = (1, τ)`, the components are
    /// `√vol · Re((a − ib) e eᵀ) / Im τ`; for `metric = δ` this is `[[a, b], [b, −a]]`.
    pub fn components(&self, metric: &Sym2<T>) -> Sym2<T> {
        let vol = metric.det().sqrt();
        let tau = tau_of_metric(metric);
        let h = self.holomorphic();
        let s = vol.sqrt() / tau.im;
        let e11 = h;
        let e12 = h * tau;
        let e22 = h * tau * tau;
        Sym2::new(e11.re * s, e12.re * s, e22.re * s)
    }

    /// Inverse of [`components`](Self::components) on the trace-free constant tensors of `metric`.
    pub fn from_components(q: &Sym2<T>, metric: &Sym2<T>) -> Self {
        let half = T::lit(0.5);
        let b1 = Self::new(T::one(), T::zero()).components(metric);
        let b2 = Self::new(T::zero(), T::one()).components(metric);
        Self::new(half * flat_inner(q, &b1, metric), half * flat_inner(q, &b2, metric))
    }
}

/// `∫ G^{ac}G^{bd} A_ab B_cd dμ_G` for constants on the unit parameter torus.
pub fn flat_inner<T: Real>(a: &Sym2<T>, b: &Sym2<T>, metric: &Sym2<T>) -> T {
    a.contract(b, &metric.inverse()) * metric.det().sqrt()
}

/// Orthonormal basis of the TT tensors of a constant flat metric.
pub fn tt_basis<T: Real>(metric: &Sym2<T>) -> [Sym2<T>; 2] {
    let c = T::one() / T::lit(2.0).sqrt();
    [
        TTTensor::new(c, T::zero()).components(metric),
        TTTensor::new(T::zero(), c).components(metric),
    ]
}

/// [`tt_basis`] for a sampled metric, which must be constant.
pub fn tt_basis_field<T: Real>(flat_metric: &TensorField<T>) -> Result<[Sym2<T>; 2]> {
    if !flat_metric.is_constant(T::lit(1e-12).max(T::lit(100.0) * T::epsilon())) {
        return Err(Error::NonConstantMetric);
    }
    Ok(tt_basis(&flat_metric.data[0]))
}

/// First derivative `dτ(G).Q` of `τ(G) = (G₁₂ + i√det G)/G₁₁`.
pub fn tau_first<T: Real>(g: &Sym2<T>, q: &Sym2<T>) -> Complex<T> {
    let two = T::lit(2.0);
    let s = g.det().sqrt();
    let dd = g.xx * q.yy + g.yy * q.xx - two * g.xy * q.xy;
    let ds = dd / (two * s);
    let n = Complex::new(g.xy, s);
    let dn = Complex::new(q.xy, ds);
    dn / g.xx - n * (q.xx / (g.xx * g.xx))
}

/// Second derivative `d²τ(G)(Q, P)`.
pub fn tau_second<T: Real>(g: &Sym2<T>, q: &Sym2<T>, p: &Sym2<T>) -> Complex<T> {
    let two = T::lit(2.0);
    let s = g.det().sqrt();
    let dd = |x: &Sym2<T>| g.xx * x.yy + g.yy * x.xx - two * g.xy * x.xy;
    let d2d = q.xx * p.yy + q.yy * p.xx - two * q.xy * p.xy;
    let (dq, dp) = (dd(q), dd(p));
    let d2s = d2d / (two * s) - dq * dp / (T::lit(4.0) * s * s * s);
    let n = Complex::new(g.xy, s);
    let dn_q = Complex::new(q.xy, dq / (two * s));
    let dn_p = Complex::new(p.xy, dp / (two * s));
    let d2n = Complex::new(T::zero(), d2s);
    let g11 = g.xx;
    d2n / g11 - dn_q * (p.xx / (g11 * g11)) - dn_p * (q.xx / (g11 * g11))
        + n * (two * q.xx * p.xx / (g11 * g11 * g11))
}

/// Chart coordinates `(Re, Im)` of a complex tangent vector.
pub fn to_chart<T: Real>(z: Complex<T>) -> [T; 2] {
    [z.re, z.im]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use proptest::prelude::*;

    fn metric_strategy() -> impl Strategy<Value = Sym2<f64>> {
        (0.3f64..3.0, -0.8f64..0.8, 0.3f64..3.0)
            .prop_filter("positive definite", |(a, b, c)| a * c - b * b > 0.05)
            .prop_map(|(a, b, c)| Sym2::new(a, b, c))
    }

    #[test]
    fn square_basis() {
        let [q1, q2] = tt_basis(&Sym2::<f64>::identity());
        let c = 1.0 / 2f64.sqrt();
        assert!(q1.sub(&Sym2::new(c, 0.0, -c)).max_abs() < 1e-15);
        assert!(q2.sub(&Sym2::new(0.0, c, 0.0)).max_abs() < 1e-15);
    }

    #[test]
    fn square_chart_derivative() {
        let id = Sym2::<f64>::identity();
        let (a, b) = (0.7, -0.4);
        let d = tau_first(&id, &Sym2::new(a, b, -a));
        assert!((d - Complex::new(b, -a)).norm() < 1e-15);
    }

    #[test]
    fn non_constant_metric_rejected() {
        let grid = GridSpec::square(8).unwrap();
        let mut g = TensorField::constant(grid, Sym2::<f64>::identity());
        g.data[3].xx = 1.5;
        assert_eq!(tt_basis_field(&g), Err(Error::NonConstantMetric));
    }

    proptest! {
        #[test]
        fn basis_is_orthonormal(g in metric_strategy()) {
            let q = tt_basis(&g);
            for r in 0..2 {
                prop_assert!(q[r].trace_with(&g.inverse()).abs() < 1e-12);
                for s in 0..2 {
                    let expected = if r == s { 1.0 } else { 0.0 };
                    prop_assert!((flat_inner(&q[r], &q[s], &g) - expected).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn components_round_trip(g in metric_strategy(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let t = TTTensor::new(a, b);
            let back = TTTensor::from_components(&t.components(&g), &g);
            prop_assert!((back.a - a).abs() < 1e-11 && (back.b - b).abs() < 1e-11);
        }

        #[test]
        fn chart_derivatives_match_differences(
            g in metric_strategy(),
            q in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b, c)| Sym2::new(a, b, c)),
            p in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b, c)| Sym2::new(a, b, c)),
        ) {
            let t = 1e-4;
            let tau = |x: &Sym2<f64>| tau_of_metric(x);
            let fd1 = (tau(&g.add(&q.scale(t))) - tau(&g.sub(&q.scale(t)))) / (2.0 * t);
            prop_assert!((fd1 - tau_first(&g, &q)).norm() < 1e-6 * (1.0 + fd1.norm()));
            let at = |x: f64, y: f64| tau(&g.add(&q.scale(x)).add(&p.scale(y)));
            let t2 = 1e-3;
            let fd2 = (at(t2, t2) - at(t2, -t2) - at(-t2, t2) + at(-t2, -t2)) / (4.0 * t2 * t2);
            let exact = tau_second(&g, &q, &p);
            prop_assert!((fd2 - exact).norm() < 1e-3 * (1.0 + exact.norm()), "{fd2} vs {exact}");
        }
    }
}

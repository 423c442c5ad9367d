//! Closed-form genus-1 test surfaces and seeded smooth perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{GeometryCache, Immersion};
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::Real;

/// `((R + r cos 2πu) cos 2πv, (R + r cos 2πu) sin 2πv, r sin 2πu)`.
pub fn torus_of_revolution<T: Real>(grid: GridSpec, big_r: T, r: T) -> Immersion<T> {
    let tau = T::tau();
    Immersion {
        points: VectorField::from_fn(grid, 3, |u, v, out| {
            let a = big_r + r * (tau * u).cos();
            out[0] = a * (tau * v).cos();
            out[1] = a * (tau * v).sin();
            out[2] = r * (tau * u).sin();
        }),
    }
}

/// Willmore energy `π²R²/(r√(R²−r²))` of the torus of revolution.
pub fn torus_energy(big_r: f64, r: f64) -> f64 {
    std::f64::consts::PI.powi(2) * big_r * big_r / (r * (big_r * big_r - r * r).sqrt())
}

/// Modulus of the torus of revolution in the parametrization above (tube angle first).
pub fn torus_modulus(big_r: f64, r: f64) -> (f64, f64) {
    (0.0, (big_r * big_r - r * r).sqrt() / r)
}

/// Product of two circles of radius `1/√2` in R⁴.
pub fn clifford<T: Real>(grid: GridSpec) -> Immersion<T> {
    clifford_reparametrized(grid, T::zero())
}

/// Clifford torus with the first angle reparametrized as `u + eps·sin 2πu`.
///
/// Same surface, non-constant metric: `|eps| < 1/(2π)` keeps it immersed.
pub fn clifford_reparametrized<T: Real>(grid: GridSpec, eps: T) -> Immersion<T> {
    let tau = T::tau();
    let s = T::one() / T::lit(2.0).sqrt();
    Immersion {
        points: VectorField::from_fn(grid, 4, |u, v, out| {
            let a = tau * (u + eps * (tau * u).sin());
            out[0] = s * a.cos();
            out[1] = s * a.sin();
            out[2] = s * (tau * v).cos();
            out[3] = s * (tau * v).sin();
        }),
    }
}

/// Clifford torus over the sheared lattice `(u, u + v)`; flat with constant
/// non-diagonal metric and modulus `(1 + i)/2`.
pub fn clifford_sheared<T: Real>(grid: GridSpec) -> Immersion<T> {
    let tau = T::tau();
    let s = T::one() / T::lit(2.0).sqrt();
    Immersion {
        points: VectorField::from_fn(grid, 4, |u, v, out| {
            out[0] = s * (tau * u).cos();
            out[1] = s * (tau * u).sin();
            out[2] = s * (tau * (u + v)).cos();
            out[3] = s * (tau * (u + v)).sin();
        }),
    }
}

/// Thin-tube torus `R = 5, r = 1` whose energy exceeds 8π.
pub fn thin_torus<T: Real>(grid: GridSpec) -> Immersion<T> {
    torus_of_revolution(grid, T::lit(5.0), T::one())
}

/// Seeded random trigonometric polynomial with modes `|k_u|, |k_v| ≤ max_mode`,
/// normalized to sup-norm one.
pub fn random_smooth_scalar<T: Real>(grid: GridSpec, seed: u64, max_mode: i32) -> ScalarField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for ku in -max_mode..=max_mode {
        for kv in -max_mode..=max_mode {
            if ku == 0 && kv == 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (ku * ku + kv * kv) as f64);
            let a: f64 = rng.gen_range(-1.0..1.0) * decay;
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((ku, kv, a, phase));
        }
    }
    let tau = T::tau();
    let f = ScalarField::from_fn(grid, |u, v| {
        terms
            .iter()
            .map(|&(ku, kv, a, ph)| {
                let arg = tau * (T::lit(ku as f64) * u + T::lit(kv as f64) * v) + T::lit(ph);
                T::lit(a) * arg.cos()
            })
            .sum()
    });
    let m = f.max_abs();
    f.map(|x| x / m)
}

/// Smooth normal field of sup-norm one built from seeded low-mode components.
pub fn random_normal_field<T: Real>(f: &Immersion<T>, seed: u64) -> Result<VectorField<T>> {
    let geo = GeometryCache::new(f)?;
    let comps: Vec<ScalarField<T>> = (0..f.dim())
        .map(|c| random_smooth_scalar(f.grid(), seed.wrapping_mul(31).wrapping_add(c as u64), 2))
        .collect();
    let w = VectorField::from_components(&comps);
    let n = geo.normal_part(&w);
    let m = n.max_norm();
    Ok(n.scale(T::one() / m))
}

/// `f + amplitude·N` for a seeded smooth normal field `N` with sup-norm one.
pub fn perturbed<T: Real>(f: &Immersion<T>, amplitude: T, seed: u64) -> Result<Immersion<T>> {
    let n = random_normal_field(f, seed)?;
    Ok(f.displaced(amplitude, &n))
}

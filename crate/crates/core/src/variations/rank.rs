use serde::{Deserialize, Serialize};

use super::{TTTensor, TeichContext};
use crate::error::{Error, Result};
use crate::geometry::Immersion;
use crate::tensor::Sym2;
use crate::Real;

/// Eigenvalue ratio below which the Gram matrix counts as rank deficient.
pub const RANK_EPS: f64 = 1e-6;

/// Rank of the constraint gradients and, when degenerate, the annihilator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationReport<T> {
    /// `G_rs = ⟨Φ_r, Φ_s⟩_{L²(μ_g)}`.
    pub gram: Sym2<T>,
    /// Ascending eigenvalues of `gram`.
    pub eigenvalues: [T; 2],
    pub rank: usize,
    /// Coefficients (in the orthonormal TT basis) of the dominant constraint direction.
    pub image_coeffs: [T; 2],
    /// Unit chart direction orthogonal to the image of `δτ̂_f`, when degenerate.
    pub null_direction: Option<[T; 2]>,
    /// TT tensor (basis coefficients) with `g^{ik}g^{jl}A⁰_ij q_kl ≈ 0`, when degenerate.
    pub annihilator: Option<TTTensor<T>>,
}

impl<T: Real> VariationReport<T> {
    pub fn eigen_ratio(&self) -> T {
        self.eigenvalues[0] / self.eigenvalues[1]
    }
}

impl<T: Real> TeichContext<T> {
    pub fn rank_report(&self) -> Result<VariationReport<T>> {
        let geo = &self.geometry;
        if !(geo.integrate(&geo.a0_norm2()) > T::lit(1e-12)) {
            return Err(Error::VanishingTracefreeForm);
        }
        let gram = Sym2::new(
            geo.l2_inner(&self.phi[0], &self.phi[0]),
            geo.l2_inner(&self.phi[0], &self.phi[1]),
            geo.l2_inner(&self.phi[1], &self.phi[1]),
        );
        let eigenvalues = gram.eigenvalues();
        if !(eigenvalues[1] > T::zero()) {
            return Err(Error::VanishingTracefreeForm);
        }
        let image_coeffs = gram.eigenvector(eigenvalues[1]);
        let degenerate = eigenvalues[0] <= T::lit(RANK_EPS) * eigenvalues[1];
        let (null_direction, annihilator) = if degenerate {
            let ann = gram.eigenvector(eigenvalues[0]);
            let img = self.chart_image(image_coeffs);
            let norm = img[0].hypot(img[1]);
            (Some([-img[1] / norm, img[0] / norm]), Some(TTTensor::new(ann[0], ann[1])))
        } else {
            (None, None)
        };
        Ok(VariationReport {
            gram,
            eigenvalues,
            rank: if degenerate { 1 } else { 2 },
            image_coeffs,
            null_direction,
            annihilator,
        })
    }
}

pub fn rank_report<T: Real>(f: &Immersion<T>) -> Result<VariationReport<T>> {
    TeichContext::new(f)?.rank_report()
}

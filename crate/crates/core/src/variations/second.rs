use super::{metric_variation_with, to_chart, TeichContext};
use crate::grid::VectorField;
use crate::tensor::Sym2;
use crate::Real;

/// Second variation of the chart coordinates of `τ̂` along `f + tV`.
///
/// In the flat chart `y` the rescaled metric variation splits as
/// `S̃ = σM + L_X M + Σ β_r Q^r`. The tangent of the projected curve is
/// `Σ β_r Q^r`, and its acceleration has TT coefficients
/// `α_r = ⟨S̃₂ − L_X L_X M − 2σ L_X M − 2σ q − 2 L_X q, Q^r⟩`, where `S̃₂` is
/// the rescaled `∂_tt g`. The curvature of the chart enters through
/// `d²τ̂(Q^r, Q^s)`.
pub(super) fn second_variation<T: Real>(ctx: &TeichContext<T>, v: &VectorField<T>) -> [T; 2] {
    let op = ctx.lie_op();
    let (s, s2) = metric_variation_with(&ctx.geometry.df, v);
    let st = ctx.to_chart_tensor(&s);
    let s2t = ctx.to_chart_tensor(&s2);
    let dec = super::decompose_in_chart(op, &st, &ctx.basis);
    if !dec.stats.converged {
        log::warn!(
            "chart decomposition stalled: residual {:e} after {} iterations",
            dec.stats.residual,
            dec.stats.iterations
        );
    }
    let n = op.grid.len();
    let comps = [(0, 0), (0, 1), (1, 1)];
    // Derivatives of L_X M along y.
    let dl: Vec<[crate::grid::ScalarField<T>; 2]> = comps
        .iter()
        .map(|&(a, b)| {
            op.dy(&crate::grid::ScalarField {
                grid: op.grid,
                data: dec.lie.iter().map(|l| l.at(a, b)).collect(),
            })
        })
        .collect();
    let dx = &dec.dx;
    let two = T::lit(2.0);
    let q = dec.q;
    let w: Vec<Sym2<T>> = (0..n)
        .map(|p| {
            let l = &dec.lie[p];
            let sig = dec.sigma.data[p];
            let xv = [dec.x[0].data[p], dec.x[1].data[p]];
            let lxl = Sym2::from_fn(|a, b| {
                let k = a + b;
                let mut v = xv[0] * dl[k][0].data[p] + xv[1] * dl[k][1].data[p];
                for c in 0..2 {
                    v += l.at(c, b) * dx[c][a].data[p] + l.at(a, c) * dx[c][b].data[p];
                }
                v
            });
            let lxq = Sym2::from_fn(|a, b| {
                let mut v = T::zero();
                for c in 0..2 {
                    v += q.at(c, b) * dx[c][a].data[p] + q.at(a, c) * dx[c][b].data[p];
                }
                v
            });
            s2t[p]
                .sub(&lxl)
                .sub(&l.scale(two * sig))
                .sub(&q.scale(two * sig))
                .sub(&lxq.scale(two))
        })
        .collect();
    let alpha = [0, 1].map(|r| {
        w.iter()
            .zip(&op.w)
            .map(|(x, &wt)| x.contract(&ctx.basis[r], &op.metric_inv) * wt)
            .sum::<T>()
    });
    let beta = dec.beta;
    let mut z = ctx.dtau[0] * alpha[0] + ctx.dtau[1] * alpha[1];
    for r in 0..2 {
        for s in 0..2 {
            z = z + ctx.d2tau[r][s] * (beta[r] * beta[s]);
        }
    }
    to_chart(z)
}

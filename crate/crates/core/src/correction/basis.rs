use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Immersion;
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::tensor::Sym2;
use crate::variations::{TeichContext, VariationReport};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisOptions {
    /// Width of the cutoff transition in parameter units.
    pub cutoff_width: f64,
    /// Radius of the bump profiles in flat coordinates.
    pub bump_radius: f64,
    /// Placement points tried, in decreasing order of `|A⁰|² √g`.
    pub placement_tries: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self { cutoff_width: 0.06, bump_radius: 0.2, placement_tries: 64 }
    }
}

/// Correction fields and their first-order action on the class.
#[derive(Debug, Clone)]
pub struct CorrectionBasis<T> {
    pub rank: usize,
    /// `V_r`; two in the full-rank case, one otherwise.
    pub fields: Vec<VectorField<T>>,
    pub plus: Option<VectorField<T>>,
    pub minus: Option<VectorField<T>>,
    /// Grid indices where the respective fields are nonzero.
    pub support_fields: Vec<usize>,
    pub support_plus: Vec<usize>,
    pub support_minus: Vec<usize>,
    /// Chart vectors `δτ̂_f.V_r`.
    pub jacobian: Vec<[T; 2]>,
    /// Condition number of `(δτ̂_f(χΦ_r))_r` before re-orthogonalization.
    pub raw_condition: T,
    /// Unit chart direction spanned by the image.
    pub image_direction: [T; 2],
    pub null_direction: Option<[T; 2]>,
    /// Grid index of the bump center.
    pub center: Option<usize>,
    /// `⟨δ²τ̂_f(V_±), e⟩`.
    pub second_signs: Option<[T; 2]>,
    /// `⟨δτ̂_f.V_±, d⟩` for the image direction `d`.
    pub first_plus_minus: Option<[T; 2]>,
}

impl<T: Real> CorrectionBasis<T> {
    /// Condition number of the returned Jacobian.
    pub fn condition_number(&self) -> T {
        condition(&self.jacobian)
    }

    pub(crate) fn degenerate_parts(&self) -> Result<([T; 2], &VectorField<T>, &VectorField<T>)> {
        match (self.rank, self.null_direction, &self.plus, &self.minus) {
            (1, Some(e), Some(p), Some(m)) => Ok((e, p, m)),
            _ => Err(Error::CannotBuildBasis("degenerate fields V_+ and V_- are absent".into())),
        }
    }
}

fn condition<T: Real>(cols: &[[T; 2]]) -> T {
    match cols {
        [a] => {
            if a[0].hypot(a[1]) > T::zero() {
                T::one()
            } else {
                T::infinity()
            }
        }
        [a, b] => {
            let g = Sym2::new(a[0] * a[0] + a[1] * a[1], a[0] * b[0] + a[1] * b[1], b[0] * b[0] + b[1] * b[1]);
            let ev = g.eigenvalues();
            if ev[0] > T::zero() {
                (ev[1] / ev[0]).sqrt()
            } else {
                T::infinity()
            }
        }
        _ => T::infinity(),
    }
}

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_cutoff<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let a = (-T::one() / x).exp();
    let b = (-T::one() / (T::one() - x)).exp();
    a / (a + b)
}

/// `exp(1 − 1/(1 − t²))` on `|t| < 1`, peak one.
fn bump<T: Real>(t: T) -> T {
    let s = T::one() - t * t;
    if s <= T::zero() {
        T::zero()
    } else {
        (T::one() - T::one() / s).exp()
    }
}

fn wrap_unit<T: Real>(x: T) -> T {
    x - (x + T::lit(0.5)).floor()
}

/// Periodic parameter distance from every point to the marked set.
fn distance_to_set<T: Real>(grid: GridSpec, marked: &[usize]) -> Vec<T> {
    let pts: Vec<(T, T)> = marked.iter().map(|&p| grid.point(p)).collect();
    (0..grid.len())
        .map(|p| {
            let (u, v) = grid.point::<T>(p);
            pts.iter()
                .map(|&(a, b)| wrap_unit(u - a).hypot(wrap_unit(v - b)))
                .fold(T::infinity(), T::min)
        })
        .collect()
}

fn cutoff_field<T: Real>(grid: GridSpec, excluded: &[usize], width: T) -> ScalarField<T> {
    if excluded.is_empty() {
        return ScalarField::constant(grid, T::one());
    }
    let d = distance_to_set::<T>(grid, excluded);
    ScalarField { grid, data: d.into_iter().map(|x| smooth_cutoff(x / width)).collect() }
}

fn support<T: Real>(v: &VectorField<T>) -> Vec<usize> {
    (0..v.grid.len()).filter(|&p| v.get(p).iter().any(|&x| x != T::zero())).collect()
}

/// Builds the correction fields for `f`; `excluded` is a grid mask (empty for none).
pub fn build_basis_fields<T: Real>(
    f: &Immersion<T>,
    report: &VariationReport<T>,
    excluded: &[bool],
    opts: &BasisOptions,
) -> Result<CorrectionBasis<T>> {
    build_basis(&TeichContext::new(f)?, report, excluded, opts)
}

/// As [`build_basis_fields`] with a precomputed context.
pub fn build_basis<T: Real>(
    ctx: &TeichContext<T>,
    report: &VariationReport<T>,
    excluded: &[bool],
    opts: &BasisOptions,
) -> Result<CorrectionBasis<T>> {
    let grid = ctx.geometry.grid;
    if !excluded.is_empty() && excluded.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "excluded mask has {} entries, grid has {}",
            excluded.len(),
            grid.len()
        )));
    }
    let marked: Vec<usize> = (0..excluded.len()).filter(|&p| excluded[p]).collect();
    if marked.len() == grid.len() {
        return Err(Error::CannotBuildBasis("excluded region covers the whole surface".into()));
    }
    let width = T::lit(opts.cutoff_width);
    if report.rank == 2 {
        full_rank(ctx, &marked, width)
    } else {
        degenerate(ctx, report, &marked, width, opts)
    }
}

fn full_rank<T: Real>(ctx: &TeichContext<T>, marked: &[usize], width: T) -> Result<CorrectionBasis<T>> {
    let grid = ctx.geometry.grid;
    let chi = cutoff_field(grid, marked, width);
    let w = [ctx.phi[0].scale_by(&chi), ctx.phi[1].scale_by(&chi)];
    let cols = [ctx.first_variation(&w[0]).delta, ctx.first_variation(&w[1]).delta];
    let raw_condition = condition(&cols);
    let det = cols[0][0] * cols[1][1] - cols[1][0] * cols[0][1];
    let scale = (cols[0][0].hypot(cols[0][1])) * (cols[1][0].hypot(cols[1][1]));
    if !(det.abs() > T::lit(1e-12) * scale) || !(scale > T::zero()) {
        return Err(Error::CannotBuildBasis(format!(
            "masked constraint gradients are dependent (condition {:e})",
            raw_condition.to_f64_lossy()
        )));
    }
    // V_s = Σ_r W_r (J⁻¹)_{rs} so that δτ̂.V_s is the s-th unit vector.
    let inv = [[cols[1][1] / det, -cols[1][0] / det], [-cols[0][1] / det, cols[0][0] / det]];
    let fields: Vec<VectorField<T>> =
        (0..2).map(|s| w[0].scale(inv[0][s]).axpy(inv[1][s], &w[1])).collect();
    let jacobian: Vec<[T; 2]> = fields.iter().map(|v| ctx.first_variation(v).delta).collect();
    let support_fields = support(&fields[0]).into_iter().chain(support(&fields[1])).collect::<std::collections::BTreeSet<_>>();
    log::debug!(
        "full-rank basis: raw condition {:.3e}, returned condition {:.3e}",
        raw_condition.to_f64_lossy(),
        condition(&jacobian).to_f64_lossy()
    );
    Ok(CorrectionBasis {
        rank: 2,
        fields,
        plus: None,
        minus: None,
        support_fields: support_fields.into_iter().collect(),
        support_plus: Vec::new(),
        support_minus: Vec::new(),
        jacobian,
        raw_condition,
        image_direction: [T::one(), T::zero()],
        null_direction: None,
        center: None,
        second_signs: None,
        first_plus_minus: None,
    })
}

/// Orthonormal frame of `(y, M)` rotated from the eigenframe of `⟨A⁰, n₀⟩` by `angle`.
fn bump_frame<T: Real>(ctx: &TeichContext<T>, p0: usize, n0: &[T], angle: T) -> [[T; 2]; 2] {
    let geo = &ctx.geometry;
    let a = Sym2::new(
        crate::grid::dot(geo.a0[0].get(p0), n0),
        crate::grid::dot(geo.a0[1].get(p0), n0),
        crate::grid::dot(geo.a0[2].get(p0), n0),
    );
    let jinv = ctx.chart.jac[p0].inverse();
    let ay = a.congruence(&jinv);
    let m = ctx.chart.metric;
    let f1 = [T::one() / m.xx.sqrt(), T::zero()];
    let f2 = {
        let s = (m.xx / m.det()).sqrt();
        [-m.xy / m.xx * s, s]
    };
    let quad = |x: &[T; 2], y: &[T; 2]| {
        ay.xx * x[0] * y[0] + ay.xy * (x[0] * y[1] + x[1] * y[0]) + ay.yy * x[1] * y[1]
    };
    let ahat = Sym2::new(quad(&f1, &f1), quad(&f1, &f2), quad(&f2, &f2));
    let ev = ahat.eigenvalues();
    let w1 = if ev[1] - ev[0] > T::epsilon() * (ev[1].abs() + T::one()) {
        ahat.eigenvector(ev[1])
    } else {
        [T::one(), T::zero()]
    };
    let w = [w1, [-w1[1], w1[0]]];
    let e = w.map(|wk| [wk[0] * f1[0] + wk[1] * f2[0], wk[0] * f1[1] + wk[1] * f2[1]]);
    let (s, c) = angle.sin_cos();
    [
        [c * e[0][0] + s * e[1][0], c * e[0][1] + s * e[1][1]],
        [-s * e[0][0] + c * e[1][0], -s * e[0][1] + c * e[1][1]],
    ]
}

/// Profiles `ξ(ỹ₁/ρ) τ(ỹ₂/ρ)` with `ξ(t) = τ(2t)`, or with the roles exchanged.
fn bump_profile<T: Real>(ctx: &TeichContext<T>, p0: usize, frame: &[[T; 2]; 2], rho: T, exchanged: bool) -> ScalarField<T> {
    let grid = ctx.geometry.grid;
    let m = ctx.chart.metric;
    let (u0, v0) = grid.point::<T>(p0);
    let h0 = [ctx.chart.h[0].data[p0], ctx.chart.h[1].data[p0]];
    let two = T::lit(2.0);
    ScalarField {
        grid,
        data: (0..grid.len())
            .map(|p| {
                let (u, v) = grid.point::<T>(p);
                let dy = [
                    wrap_unit(u - u0) + ctx.chart.h[0].data[p] - h0[0],
                    wrap_unit(v - v0) + ctx.chart.h[1].data[p] - h0[1],
                ];
                let md = [m.xx * dy[0] + m.xy * dy[1], m.xy * dy[0] + m.yy * dy[1]];
                let t1 = (md[0] * frame[0][0] + md[1] * frame[0][1]) / rho;
                let t2 = (md[0] * frame[1][0] + md[1] * frame[1][1]) / rho;
                if exchanged {
                    bump(t1) * bump(two * t2)
                } else {
                    bump(two * t1) * bump(t2)
                }
            })
            .collect(),
    }
}

fn degenerate<T: Real>(
    ctx: &TeichContext<T>,
    report: &VariationReport<T>,
    marked: &[usize],
    width: T,
    opts: &BasisOptions,
) -> Result<CorrectionBasis<T>> {
    let geo = &ctx.geometry;
    let grid = geo.grid;
    let e = report
        .null_direction
        .ok_or_else(|| Error::CannotBuildBasis("degenerate report without null direction".into()))?;
    let d = [e[1], -e[0]];
    let excluded: Vec<bool> = {
        let mut m = vec![false; grid.len()];
        for &p in marked {
            m[p] = true;
        }
        m
    };
    let dens = geo.a0_norm2().zip_map(&geo.sqrt_det_g, |a, s| a * s);
    let peak = dens.max_abs();
    let mut order: Vec<usize> = (0..grid.len()).filter(|&p| !excluded[p]).collect();
    order.sort_by(|&a, &b| dens.data[b].partial_cmp(&dens.data[a]).unwrap_or(std::cmp::Ordering::Equal));
    let rho = T::lit(opts.bump_radius);
    let angles = [T::FRAC_PI_4(), T::zero()];
    let mut placement = None;
    for &p0 in order.iter().take(opts.placement_tries) {
        if !(dens.data[p0] > T::lit(1e-3) * peak) {
            break;
        }
        let a0p = [geo.a0[0].get(p0), geo.a0[1].get(p0), geo.a0[2].get(p0)];
        let big = a0p
            .iter()
            .copied()
            .max_by(|x, y| {
                let nx: T = x.iter().map(|&t| t * t).sum();
                let ny: T = y.iter().map(|&t| t * t).sum();
                nx.partial_cmp(&ny).unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(a0p[0]);
        let nn = big.iter().map(|&t| t * t).sum::<T>().sqrt();
        if !(nn > T::zero()) {
            continue;
        }
        let n0: Vec<T> = big.iter().map(|&t| t / nn).collect();
        let mut profiles = Vec::new();
        for &angle in &angles {
            let frame = bump_frame(ctx, p0, &n0, angle);
            for exchanged in [false, true] {
                profiles.push(bump_profile(ctx, p0, &frame, rho, exchanged));
            }
        }
        let hits = profiles.iter().any(|pr| pr.data.iter().zip(&excluded).any(|(&x, &ex)| ex && x != T::zero()));
        if !hits {
            placement = Some((p0, n0, profiles));
            break;
        }
    }
    let (p0, n0, profiles) = placement.ok_or_else(|| {
        Error::CannotBuildBasis("no admissible bump placement on the support of |A0|".into())
    })?;
    let bump_set: Vec<usize> = (0..grid.len())
        .filter(|&p| excluded[p] || profiles.iter().any(|pr| pr.data[p] != T::zero()))
        .collect();

    let chi = cutoff_field(grid, &bump_set, width);
    let c = report.image_coeffs;
    let w = ctx.phi[0].scale(c[0]).axpy(c[1], &ctx.phi[1]).scale_by(&chi);
    let a = {
        let fv = ctx.first_variation(&w).delta;
        fv[0] * d[0] + fv[1] * d[1]
    };
    if !(a.abs() > T::zero()) {
        return Err(Error::CannotBuildBasis("masked constraint gradient has no first-order action".into()));
    }
    let v1 = w.scale(T::one() / a);

    let normal = geo.normal_part(&VectorField::from_fn(grid, geo.dim, |_, _, out| out.copy_from_slice(&n0)));
    let mut cands = Vec::new();
    for pr in &profiles {
        let raw = normal.scale_by(pr);
        let fv = ctx.first_variation(&raw).delta;
        let gamma = fv[0] * d[0] + fv[1] * d[1];
        let v = raw.axpy(-gamma, &v1);
        let sv = ctx.second_variation(&v);
        let s = sv[0] * e[0] + sv[1] * e[1];
        log::debug!("bump candidate: <d2tau, e> = {:e}", s.to_f64_lossy());
        cands.push((s, v, pr));
    }
    let best = |sign: T| {
        cands
            .iter()
            .filter(|c| c.0 * sign > T::zero())
            .max_by(|x, y| (x.0 * sign).partial_cmp(&(y.0 * sign)).unwrap_or(std::cmp::Ordering::Equal))
    };
    let (plus, minus) = match (best(T::one()), best(-T::one())) {
        (Some(p), Some(m)) => (p, m),
        _ => {
            return Err(Error::CannotBuildBasis(format!(
                "bump second variations do not take both signs: {:?}",
                cands.iter().map(|c| c.0.to_f64_lossy()).collect::<Vec<_>>()
            )))
        }
    };
    let vp = plus.1.scale(T::one() / plus.0.abs().sqrt());
    let vm = minus.1.scale(T::one() / minus.0.abs().sqrt());
    let project = |v: &VectorField<T>| {
        let fv = ctx.first_variation(v).delta;
        fv[0] * d[0] + fv[1] * d[1]
    };
    let signs = [0, 1].map(|k| {
        let sv = ctx.second_variation(if k == 0 { &vp } else { &vm });
        sv[0] * e[0] + sv[1] * e[1]
    });
    let first_pm = [project(&vp), project(&vm)];
    let jacobian = vec![ctx.first_variation(&v1).delta];
    Ok(CorrectionBasis {
        rank: 1,
        support_fields: support(&v1),
        support_plus: support(&vp),
        support_minus: support(&vm),
        fields: vec![v1],
        plus: Some(vp),
        minus: Some(vm),
        jacobian,
        raw_condition: T::one(),
        image_direction: d,
        null_direction: Some(e),
        center: Some(p0),
        second_signs: Some(signs),
        first_plus_minus: Some(first_pm),
    })
}

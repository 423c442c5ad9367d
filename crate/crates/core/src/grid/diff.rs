use super::{Dir, GridSpec};
use crate::Real;

/// Antisymmetric first-difference weights `(offset k, w)`, applied as
/// `w·(f[+k] − f[−k]) / h`.
fn first_weights<T: Real>(order: u8) -> Vec<(isize, T)> {
    if order == 2 {
        vec![(1, T::lit(0.5))]
    } else {
        let c = T::lit(12.0);
        vec![(1, T::lit(8.0) / c), (2, -T::one() / c)]
    }
}

fn second_weights<T: Real>(order: u8) -> Vec<(isize, T)> {
    if order == 2 {
        vec![(1, T::one()), (0, T::lit(-2.0)), (-1, T::one())]
    } else {
        let c = T::lit(12.0);
        vec![
            (2, -T::one() / c),
            (1, T::lit(16.0) / c),
            (0, T::lit(-30.0) / c),
            (-1, T::lit(16.0) / c),
            (-2, -T::one() / c),
        ]
    }
}

fn apply_stencil<T: Real>(
    grid: &GridSpec,
    data: &[T],
    dim: usize,
    dir: Dir,
    weights: &[(isize, T)],
    scale: T,
) -> Vec<T> {
    let mut out = vec![T::zero(); data.len()];
    let (nu, nv) = (grid.n_u, grid.n_v);
    let row = nv * dim;
    for (i, out_row) in out.chunks_exact_mut(row).enumerate() {
        for &(k, w) in weights {
            let w = w * scale;
            // Destination j reads source j + k, split into two contiguous runs.
            let (src_row, shift) = match dir {
                Dir::U => ((i as isize + k).rem_euclid(nu as isize) as usize, 0),
                Dir::V => (i, k.rem_euclid(nv as isize) as usize * dim),
            };
            let src = &data[src_row * row..(src_row + 1) * row];
            let (head, tail) = out_row.split_at_mut(row - shift);
            for (o, &x) in head.iter_mut().zip(&src[shift..]) {
                *o += w * x;
            }
            for (o, &x) in tail.iter_mut().zip(&src[..shift]) {
                *o += w * x;
            }
        }
    }
    out
}

/// Periodic centered first difference of every component.
pub(crate) fn partial_raw<T: Real>(grid: &GridSpec, data: &[T], dim: usize, dir: Dir) -> Vec<T> {
    let h: T = grid.h(dir);
    let weights: Vec<(isize, T)> = first_weights::<T>(grid.fd_order)
        .into_iter()
        .flat_map(|(k, w)| [(k, w), (-k, -w)])
        .collect();
    apply_stencil(grid, data, dim, dir, &weights, T::one() / h)
}

pub(crate) fn second_partial_raw<T: Real>(
    grid: &GridSpec,
    data: &[T],
    dim: usize,
    dir: Dir,
) -> Vec<T> {
    let h: T = grid.h(dir);
    apply_stencil(grid, data, dim, dir, &second_weights(grid.fd_order), T::one() / (h * h))
}

/// Real symbol `s(k)` of the first difference: `partial(e^{2πiku}) = i·s(k)·e^{2πiku}`.
pub fn fd_symbol<T: Real>(grid: &GridSpec, dir: Dir, k: usize) -> T {
    let n = grid.n(dir);
    let h: T = grid.h(dir);
    let th = T::tau() * T::of_usize(k) / T::of_usize(n);
    let s: T = first_weights::<T>(grid.fd_order)
        .iter()
        .map(|&(o, w)| T::lit(2.0) * w * (th * T::lit(o as f64)).sin())
        .sum();
    let s = s / h;
    // Exact zeros at k = 0 and at the Nyquist mode.
    if k == 0 || 2 * k == n {
        T::zero()
    } else {
        s
    }
}

/// Real symbol of the second difference (non-positive).
pub fn fd_symbol_second<T: Real>(grid: &GridSpec, dir: Dir, k: usize) -> T {
    let n = grid.n(dir);
    let h: T = grid.h(dir);
    let th = T::tau() * T::of_usize(k) / T::of_usize(n);
    let s: T = second_weights::<T>(grid.fd_order)
        .iter()
        .map(|&(o, w)| w * (th * T::lit(o as f64)).cos())
        .sum();
    s / (h * h)
}

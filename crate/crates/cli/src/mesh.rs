//! Surface generators and mesh files.
//!
//! OBJ files carry a `# grid n_u n_v` header so the periodic sample grid can be
//! rebuilt on import; vertex `k` is grid sample `k` in row-major order. Raw
//! tables are whitespace separated `i j x1 .. xd` rows under the same header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use willmore_core::geometry::Immersion;
use willmore_core::grid::{GridSpec, VectorField};
use willmore_core::surfaces;

use crate::config::{RunConfig, SurfaceKind};
use crate::error::CliError;

fn generator(kind: SurfaceKind, cfg: &RunConfig, grid: GridSpec) -> Result<Immersion<f64>, CliError> {
    Ok(match kind {
        SurfaceKind::TorusOfRevolution => {
            if !(cfg.big_r > cfg.r && cfg.r > 0.0) {
                return Err(CliError::Usage(format!("need R > r > 0, got R = {}, r = {}", cfg.big_r, cfg.r)));
            }
            surfaces::torus_of_revolution(grid, cfg.big_r, cfg.r)
        }
        SurfaceKind::Clifford => surfaces::clifford(grid),
        SurfaceKind::Thin => surfaces::thin_torus(grid),
        SurfaceKind::Perturbed => {
            let base = generator(cfg.base, cfg, grid)?;
            surfaces::perturbed(&base, cfg.amplitude, cfg.seed)?
        }
        SurfaceKind::FromFile => {
            let path = cfg
                .input
                .as_ref()
                .ok_or_else(|| CliError::Usage("surface from_file needs input = PATH".into()))?;
            read_mesh(path)?
        }
    })
}

/// The configured initial surface.
pub fn build_surface(cfg: &RunConfig) -> Result<Immersion<f64>, CliError> {
    let grid = GridSpec::square(cfg.grid).map_err(|e| CliError::Usage(e.to_string()))?;
    generator(cfg.surface, cfg, grid)
}

fn header(grid: GridSpec, dim: usize, what: &str) -> String {
    format!("# {what}\n# grid {} {}\n# dim {dim}\n", grid.n_u, grid.n_v)
}

/// OBJ text of the coordinates `axes` of `f`; quads split along the `(i,j)–(i+1,j+1)` diagonal.
pub fn obj_text(f: &Immersion<f64>, axes: [usize; 3]) -> String {
    let grid = f.grid();
    let mut s = header(grid, 3, &format!("willmore mesh, coordinates x{} x{} x{}", axes[0] + 1, axes[1] + 1, axes[2] + 1));
    for p in 0..grid.len() {
        let x = f.points.get(p);
        let _ = writeln!(s, "v {:.12e} {:.12e} {:.12e}", x[axes[0]], x[axes[1]], x[axes[2]]);
    }
    for i in 0..grid.n_u {
        for j in 0..grid.n_v {
            let a = grid.index(i, j) + 1;
            let b = grid.index(i + 1, j) + 1;
            let c = grid.index(i + 1, j + 1) + 1;
            let d = grid.index(i, j + 1) + 1;
            let _ = writeln!(s, "f {a} {b} {c}\nf {a} {c} {d}");
        }
    }
    s
}

pub fn table_text(f: &Immersion<f64>) -> String {
    let grid = f.grid();
    let mut s = header(grid, f.dim(), "willmore raw coordinate table: i j x1 .. xd");
    for p in 0..grid.len() {
        let (i, j) = grid.coords(p);
        let _ = write!(s, "{i} {j}");
        for x in f.points.get(p) {
            let _ = write!(s, " {x:.17e}");
        }
        s.push('\n');
    }
    s
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `stem.obj` in R³; in R⁴ writes `stem_x123.obj`, `stem_x124.obj` and
/// the exact table `stem.txt`. Returns the written paths.
pub fn write_mesh(dir: &Path, stem: &str, f: &Immersion<f64>) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    if f.dim() == 3 {
        let p = dir.join(format!("{stem}.obj"));
        write(&p, &obj_text(f, [0, 1, 2]))?;
        out.push(p);
    } else {
        for (name, axes) in [("x123", [0, 1, 2]), ("x124", [0, 1, 3])] {
            let p = dir.join(format!("{stem}_{name}.obj"));
            write(&p, &obj_text(f, axes))?;
            out.push(p);
        }
        let p = dir.join(format!("{stem}.txt"));
        write(&p, &table_text(f))?;
        out.push(p);
    }
    Ok(out)
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

/// Reads an OBJ written by [`write_mesh`] or a raw table.
pub fn read_mesh(path: &Path) -> Result<Immersion<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut dims = None;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut cells: Vec<(usize, usize)> = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(path, format!("bad number '{s}'")));
        match it.next() {
            Some("#") => {
                if it.next() == Some("grid") {
                    let n: Vec<usize> = it.filter_map(|s| s.parse().ok()).collect();
                    if n.len() != 2 {
                        return Err(bad(path, "malformed grid header"));
                    }
                    dims = Some((n[0], n[1]));
                }
            }
            Some("v") => coords.push(it.map(num).collect::<Result<_, _>>()?),
            Some("f") | Some("vn") | Some("vt") | None => {}
            Some(first) => {
                let i: usize = first.parse().map_err(|_| bad(path, format!("unexpected line '{line}'")))?;
                let j: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(path, "missing column index"))?;
                cells.push((i, j));
                coords.push(it.map(num).collect::<Result<_, _>>()?);
            }
        }
    }
    let (n_u, n_v) = dims.ok_or_else(|| bad(path, "missing '# grid n_u n_v' header"))?;
    let grid = GridSpec::new(n_u, n_v, 4).map_err(|e| bad(path, e))?;
    if coords.len() != grid.len() {
        return Err(bad(path, format!("expected {} vertices, found {}", grid.len(), coords.len())));
    }
    let dim = coords[0].len();
    if coords.iter().any(|c| c.len() != dim) {
        return Err(bad(path, "rows have different lengths"));
    }
    let mut data = vec![0.0; grid.len() * dim];
    for (k, c) in coords.iter().enumerate() {
        let p = match cells.get(k) {
            Some(&(i, j)) if i < n_u && j < n_v => grid.index(i, j),
            Some(_) => return Err(bad(path, "cell index out of range")),
            None => k,
        };
        data[p * dim..(p + 1) * dim].copy_from_slice(c);
    }
    let points = VectorField::from_vec(grid, dim, data).map_err(|e| bad(path, e))?;
    Immersion::new(points).map_err(|e| bad(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &Immersion<f64>, b: &Immersion<f64>) -> f64 {
        a.points.axpy(-1.0, &b.points).max_norm()
    }

    #[test]
    fn obj_round_trip_is_within_text_precision() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(24, 16, 4).unwrap();
        let f = surfaces::perturbed(&surfaces::torus_of_revolution(grid, 2.0, 1.0), 0.05, 5).unwrap();
        let paths = write_mesh(dir.path(), "m", &f).unwrap();
        assert_eq!(paths.len(), 1);
        let g = read_mesh(&paths[0]).unwrap();
        assert_eq!(g.grid(), grid);
        assert!(max_diff(&f, &g) <= 1e-6);
        let text = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2 * grid.len());
    }

    #[test]
    fn four_dimensional_export_pairs_objs_with_exact_table() {
        let dir = tempfile::tempdir().unwrap();
        let f = surfaces::clifford::<f64>(GridSpec::square(16).unwrap());
        let paths = write_mesh(dir.path(), "m", &f).unwrap();
        assert_eq!(paths.len(), 3);
        let table = read_mesh(&paths[2]).unwrap();
        assert_eq!(max_diff(&f, &table), 0.0);
        for (path, axes) in paths[..2].iter().zip([[0, 1, 2], [0, 1, 3]]) {
            let obj = read_mesh(path).unwrap();
            for p in 0..f.grid().len() {
                for (k, &a) in axes.iter().enumerate() {
                    assert!((obj.points.get(p)[k] - f.points.get(p)[a]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn headerless_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.obj");
        fs::write(&p, "v 0 0 0\n").unwrap();
        let err = read_mesh(&p).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }
}

//! Run configuration: flat `key = value` files overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

use crate::error::CliError;

/// Flags shared by every subcommand. Each one overrides the config key of the
/// same name (dashes become underscores).
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Samples per direction of the parameter grid.
    #[arg(long, global = true, value_name = "N")]
    pub grid: Option<usize>,
    /// torus_of_revolution | clifford | perturbed | thin | from_file
    #[arg(long, global = true, value_name = "NAME")]
    pub surface: Option<String>,
    /// Center radius of the torus of revolution.
    #[arg(long = "R", global = true, value_name = "R")]
    pub big_r: Option<f64>,
    /// Tube radius of the torus of revolution.
    #[arg(long = "r", global = true, value_name = "r")]
    pub r: Option<f64>,
    /// Normal perturbation amplitude of the perturbed surface.
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    /// Seed of the random perturbation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Target Re tau; defaults to the class of the initial surface.
    #[arg(long = "tau-re", global = true)]
    pub tau_re: Option<f64>,
    /// Target Im tau; defaults to the class of the initial surface.
    #[arg(long = "tau-im", global = true)]
    pub tau_im: Option<f64>,
    /// Iteration cap of the descent.
    #[arg(long = "max-iters", global = true)]
    pub max_iters: Option<usize>,
    /// Stop once the L2 norm of the projected gradient is below this.
    #[arg(long = "tol-grad", global = true)]
    pub tol_grad: Option<f64>,
    /// Accepted Teichmueller distance to the target class.
    #[arg(long = "tol-tau", global = true)]
    pub tol_tau: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Verify only this module's suite.
    #[arg(long, global = true, value_name = "NAME")]
    pub filter: Option<String>,
    /// Mesh read by the from_file surface (OBJ or raw table).
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        put("grid", self.grid.map(|x| x.to_string()));
        put("surface", self.surface.clone());
        put("R", self.big_r.map(|x| x.to_string()));
        put("r", self.r.map(|x| x.to_string()));
        put("amplitude", self.amplitude.map(|x| x.to_string()));
        put("seed", self.seed.map(|x| x.to_string()));
        put("tau_re", self.tau_re.map(|x| x.to_string()));
        put("tau_im", self.tau_im.map(|x| x.to_string()));
        put("max_iters", self.max_iters.map(|x| x.to_string()));
        put("tol_grad", self.tol_grad.map(|x| x.to_string()));
        put("tol_tau", self.tol_tau.map(|x| x.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("filter", self.filter.clone());
        put("input", self.input.as_ref().map(|p| p.display().to_string()));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    TorusOfRevolution,
    Clifford,
    Perturbed,
    Thin,
    FromFile,
}

impl FromStr for SurfaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "torus_of_revolution" => Self::TorusOfRevolution,
            "clifford" => Self::Clifford,
            "perturbed" => Self::Perturbed,
            "thin" => Self::Thin,
            "from_file" => Self::FromFile,
            _ => return Err(format!("unknown surface '{s}'")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: usize,
    pub surface: SurfaceKind,
    /// Surface perturbed by `perturbed`; a generator, never `perturbed` or `from_file`.
    pub base: SurfaceKind,
    pub big_r: f64,
    pub r: f64,
    pub amplitude: f64,
    pub seed: u64,
    pub input: Option<PathBuf>,
    /// Target class; `None` keeps the class of the initial surface.
    pub tau_re: Option<f64>,
    pub tau_im: Option<f64>,
    pub max_iters: usize,
    pub tol_grad: f64,
    pub tol_tau: f64,
    pub energy_ceiling: Option<f64>,
    pub step_init: Option<f64>,
    pub smoothing_mode: Option<f64>,
    pub out: PathBuf,
    pub filter: Option<String>,
    pub sweep_im_min: f64,
    pub sweep_im_max: f64,
    pub sweep_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            surface: SurfaceKind::Perturbed,
            base: SurfaceKind::TorusOfRevolution,
            big_r: std::f64::consts::SQRT_2,
            r: 1.0,
            amplitude: 0.05,
            seed: 3,
            input: None,
            tau_re: None,
            tau_im: None,
            max_iters: 300,
            tol_grad: 1e-3,
            tol_tau: 1e-6,
            energy_ceiling: None,
            step_init: None,
            smoothing_mode: None,
            out: PathBuf::from("out"),
            filter: None,
            sweep_im_min: 0.8,
            sweep_im_max: 1.25,
            sweep_points: 10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Usage(format!("invalid value '{value}' for '{key}'")))
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key = value", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies pairs in order, later ones winning.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), CliError> {
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "grid" => self.grid = parse(k, v)?,
                "surface" => self.surface = v.parse().map_err(CliError::Usage)?,
                "base" => self.base = v.parse().map_err(CliError::Usage)?,
                "R" => self.big_r = parse(k, v)?,
                "r" => self.r = parse(k, v)?,
                "amplitude" => self.amplitude = parse(k, v)?,
                "seed" => self.seed = parse(k, v)?,
                "input" => self.input = Some(PathBuf::from(v)),
                "tau_re" => self.tau_re = Some(parse(k, v)?),
                "tau_im" => self.tau_im = Some(parse(k, v)?),
                "max_iters" => self.max_iters = parse(k, v)?,
                "tol_grad" => self.tol_grad = parse(k, v)?,
                "tol_tau" => self.tol_tau = parse(k, v)?,
                "energy_ceiling" => self.energy_ceiling = Some(parse(k, v)?),
                "step_init" => self.step_init = Some(parse(k, v)?),
                "smoothing_mode" => self.smoothing_mode = Some(parse(k, v)?),
                "out" => self.out = PathBuf::from(v),
                "filter" => self.filter = Some(v.to_string()),
                "sweep_im_min" => self.sweep_im_min = parse(k, v)?,
                "sweep_im_max" => self.sweep_im_max = parse(k, v)?,
                "sweep_points" => self.sweep_points = parse(k, v)?,
                _ => return Err(CliError::Usage(format!("unknown configuration key '{k}'"))),
            }
        }
        if matches!(self.base, SurfaceKind::Perturbed | SurfaceKind::FromFile) {
            return Err(CliError::Usage("base must be an unperturbed surface".into()));
        }
        if self.sweep_points == 0 {
            return Err(CliError::Usage("sweep_points must be positive".into()));
        }
        Ok(())
    }

    /// Defaults, then the config file, then the flags.
    pub fn load(flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Some(path) = &flags.config {
            cfg.apply(&read_config(path)?)?;
        }
        let pairs: Vec<(String, String)> = flags.pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        cfg.apply(&pairs)?;
        Ok(cfg)
    }
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    parse_pairs(&text, &path.display().to_string())
}

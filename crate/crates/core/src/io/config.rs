//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! flow.name = pendulum
//! partition.dims = 64x64
//! spectral.tau = 0.05
//! spectral.observable = obs_pendulum
//! spectral.bands = -0.3:0.3, 1.5:2.0
//! ```
//!
//! Keys are grouped by prefix: `flow.*`, `partition.*`, `spectral.*`,
//! `output.*`, `run.*`, `convergence.*` and `upwind.*`. Unknown or repeated
//! keys are rejected. A `[section]` line prefixes the keys that follow it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flows::FlowSpec;
use crate::observables::ObservableId;
use crate::spectral::{bandwidth, Band};

const KEYS: &[&str] = &[
    "flow.name",
    "flow.omega",
    "flow.a",
    "flow.b",
    "flow.c",
    "flow.amplitude",
    "flow.epsilon",
    "partition.dims",
    "partition.method",
    "partition.samples_per_cell",
    "partition.substeps",
    "spectral.tau",
    "spectral.observable",
    "spectral.wavenumber",
    "spectral.grid_file",
    "spectral.alpha",
    "spectral.bands",
    "spectral.quad_points",
    "spectral.b_sweep",
    "output.dir",
    "run.seed",
    "run.workers",
    "run.cache",
    "convergence.levels",
    "convergence.box_lo",
    "convergence.box_hi",
    "convergence.time",
    "convergence.samples",
    "convergence.substeps",
    "upwind.r",
    "upwind.w",
    "upwind.omega",
    "upwind.gamma",
    "upwind.n",
];

/// How the permutation is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermMethod {
    /// Lattice shears when the flow has a splitting, matching otherwise.
    Auto,
    Lattice,
    Matching,
}

/// One level of a refinement chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub dims: Vec<usize>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub levels: Vec<Level>,
    /// Box whose covering cells form the tracked set.
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    /// Half-length of the time window.
    pub time: f64,
    /// Sample points per cell and axis.
    pub samples: usize,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpwindConfig {
    pub r: u32,
    pub w: u32,
    pub omega: f64,
    pub gammas: Vec<f64>,
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub flow: FlowSpec,
    pub dims: Vec<usize>,
    pub method: PermMethod,
    /// Stratified sample points per cell and axis for matching.
    pub samples_per_cell: usize,
    /// Integrator substeps per tau for maps that are not exact.
    pub substeps: usize,
    pub tau: f64,
    pub observable: ObservableId,
    pub wavenumber: Vec<i64>,
    pub grid_file: Option<PathBuf>,
    pub alpha: f64,
    pub bands: Vec<Band>,
    /// Midpoint-rule points per cell and axis when averaging the observable.
    pub quad_points: usize,
    pub b_sweep: Vec<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub cache: Option<PathBuf>,
    pub convergence: ConvergenceConfig,
    pub upwind: UpwindConfig,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| invalid(format!("{key}: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

/// `64x64`, `64,64` or `64`.
fn parse_dims(key: &str, v: &str) -> Result<Vec<usize>> {
    let dims: Vec<usize> = v.split(['x', ',']).map(|s| parse_num(key, s)).collect::<Result<_>>()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(invalid(format!("{key}: dimensions must be positive, got `{v}`")));
    }
    Ok(dims)
}

/// `a:b` pairs separated by commas.
fn parse_bands(key: &str, v: &str) -> Result<Vec<Band>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (a, b) = s.split_once(':').ok_or_else(|| invalid(format!("{key}: band `{s}` is not `a:b`")))?;
            Band::new(parse_num(key, a)?, parse_num(key, b)?).map_err(|e| invalid(format!("{key}: {e}")))
        })
        .collect()
}

/// `dims@tau` entries separated by commas, e.g. `16@0.125, 64@0.0625`.
fn parse_levels(key: &str, v: &str) -> Result<Vec<Level>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (d, t) = s.split_once('@').ok_or_else(|| invalid(format!("{key}: level `{s}` is not `dims@tau`")))?;
            Ok(Level { dims: parse_dims(key, d.trim())?, tau: parse_num(key, t)? })
        })
        .collect()
}

/// Raw key/value pairs in file order.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = format!("{}.", name.trim());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = format!("{section}{}", k.trim());
        if !KEYS.contains(&key.as_str()) {
            return Err(invalid(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(invalid(format!("line {}: key `{key}` given twice", lineno + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(g) = cfg.grid_file.as_mut() {
            if g.is_relative() {
                *g = path.parent().unwrap_or(Path::new(".")).join(&*g);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = parse_pairs(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str);
        let num = |k: &str, default: f64| -> Result<f64> { get(k).map_or(Ok(default), |v| parse_num(k, v)) };
        let int = |k: &str, default: u64| -> Result<u64> { get(k).map_or(Ok(default), |v| parse_num(k, v)) };

        let flow = match get("flow.name").unwrap_or("translation") {
            "translation" => FlowSpec::Translation { omega: num("flow.omega", 1.0)? },
            "pendulum" => FlowSpec::Pendulum,
            "duffing" => FlowSpec::Duffing { a: num("flow.a", 1.0)?, b: num("flow.b", -1.0)? },
            "quadruple_gyre" => {
                let FlowSpec::QuadrupleGyre { amplitude, epsilon } = FlowSpec::gyre_default() else { unreachable!() };
                FlowSpec::QuadrupleGyre {
                    amplitude: num("flow.amplitude", amplitude)?,
                    epsilon: num("flow.epsilon", epsilon)?,
                }
            }
            "abc" => {
                let FlowSpec::Abc { a, b, c } = FlowSpec::abc_default() else { unreachable!() };
                FlowSpec::Abc { a: num("flow.a", a)?, b: num("flow.b", b)?, c: num("flow.c", c)? }
            }
            other => return Err(invalid(format!("flow.name: unknown flow `{other}`"))),
        };

        let default_dims = match flow.dim() {
            1 => "256",
            2 => "64x64",
            _ => "32x32x8",
        };
        let default_obs = match flow {
            FlowSpec::Translation { .. } => ObservableId::Fourier,
            FlowSpec::Pendulum => ObservableId::Pendulum,
            FlowSpec::Duffing { .. } => ObservableId::DuffingEnergy,
            FlowSpec::QuadrupleGyre { .. } => ObservableId::Gyre,
            FlowSpec::Abc { .. } => ObservableId::Abc,
        };
        let method = match get("partition.method").unwrap_or("auto") {
            "auto" => PermMethod::Auto,
            "lattice" => PermMethod::Lattice,
            "matching" => PermMethod::Matching,
            other => return Err(invalid(format!("partition.method: unknown method `{other}`"))),
        };
        let observable = match get("spectral.observable") {
            Some(v) => v.parse()?,
            None => default_obs,
        };
        let wavenumber = match get("spectral.wavenumber") {
            Some(v) => parse_list("spectral.wavenumber", v)?,
            None => {
                let mut k = vec![0; flow.dim()];
                k[0] = 1;
                k
            }
        };

        let default_box = match flow {
            FlowSpec::Translation { .. } => (vec![0.2], vec![0.3]),
            FlowSpec::Pendulum => (vec![2.8, -0.5], vec![3.4, 0.5]),
            FlowSpec::Duffing { .. } => (vec![0.5, -0.5], vec![1.0, 0.5]),
            _ => (vec![0.4; 3], vec![0.6; 3]),
        };
        let convergence = ConvergenceConfig {
            levels: get("convergence.levels").map_or(Ok(Vec::new()), |v| parse_levels("convergence.levels", v))?,
            box_lo: get("convergence.box_lo").map_or(Ok(default_box.0), |v| parse_list("convergence.box_lo", v))?,
            box_hi: get("convergence.box_hi").map_or(Ok(default_box.1), |v| parse_list("convergence.box_hi", v))?,
            time: num("convergence.time", 1.0)?,
            samples: int("convergence.samples", 3)? as usize,
            substeps: int("convergence.substeps", 8)? as usize,
        };
        let upwind = UpwindConfig {
            r: int("upwind.r", 2)? as u32,
            w: int("upwind.w", 2)? as u32,
            omega: num("upwind.omega", 1.0)?,
            gammas: get("upwind.gamma").map_or(Ok(vec![0.25, 0.75, 1.0, 1.25]), |v| parse_list("upwind.gamma", v))?,
            levels: get("upwind.n").map_or(Ok(vec![2, 3, 4, 5, 6]), |v| parse_list("upwind.n", v))?,
        };

        let cfg = RunConfig {
            flow,
            dims: parse_dims("partition.dims", get("partition.dims").unwrap_or(default_dims))?,
            method,
            samples_per_cell: int("partition.samples_per_cell", 3)? as usize,
            substeps: int("partition.substeps", 8)? as usize,
            tau: num("spectral.tau", 0.1)?,
            observable,
            wavenumber,
            grid_file: get("spectral.grid_file").map(PathBuf::from),
            alpha: num("spectral.alpha", 0.1)?,
            bands: get("spectral.bands").map_or(Ok(Vec::new()), |v| parse_bands("spectral.bands", v))?,
            quad_points: int("spectral.quad_points", 2)? as usize,
            b_sweep: get("spectral.b_sweep").map_or(Ok(Vec::new()), |v| parse_list("spectral.b_sweep", v))?,
            out_dir: PathBuf::from(get("output.dir").unwrap_or("out")),
            seed: int("run.seed", 0)?,
            workers: int("run.workers", 0)? as usize,
            cache: get("run.cache").map(PathBuf::from),
            convergence,
            upwind,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate().map_err(|e| invalid(format!("flow: {e}")))?;
        let m = self.flow.dim();
        if self.dims.len() != m {
            return Err(invalid(format!("partition.dims: {} axes for a {m}-dimensional flow", self.dims.len())));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("spectral.tau must be > 0, got {}", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("spectral.alpha must be > 0, got {}", self.alpha)));
        }
        if self.samples_per_cell == 0 || self.substeps == 0 || self.quad_points == 0 {
            return Err(invalid("samples_per_cell, substeps and quad_points must be >= 1"));
        }
        for band in &self.bands {
            band.check_within(self.tau).map_err(|e| invalid(format!("spectral.bands: {e}")))?;
        }
        if let Some(d) = self.observable.dim() {
            if d != m {
                return Err(invalid(format!("{} needs a {d}-dimensional flow", self.observable)));
            }
        }
        if self.observable == ObservableId::Fourier && self.wavenumber.len() != m {
            return Err(invalid(format!("spectral.wavenumber needs {m} entries")));
        }
        if self.observable == ObservableId::UserGrid && self.grid_file.is_none() {
            return Err(invalid("user-grid observable needs spectral.grid_file"));
        }
        if !self.b_sweep.is_empty() && !matches!(self.flow, FlowSpec::Duffing { .. }) {
            return Err(invalid("spectral.b_sweep only applies to the duffing flow"));
        }
        if let FlowSpec::QuadrupleGyre { .. } = self.flow {
            gyre_slice_shift(self.tau, self.dims[2])?;
        }
        if self.method == PermMethod::Lattice && matches!(self.flow, FlowSpec::QuadrupleGyre { .. }) {
            return Err(invalid("the quadruple gyre has no lattice splitting; use partition.method = matching"));
        }
        self.validate_convergence()?;
        let u = &self.upwind;
        if u.r < 2 || u.w < 2 || !(u.omega != 0.0 && u.omega.is_finite()) {
            return Err(invalid("upwind: need r, w > 1 and omega != 0"));
        }
        if u.gammas.iter().any(|&g| !(g > 0.0 && g.is_finite())) || u.levels.contains(&0) {
            return Err(invalid("upwind: gamma must be > 0 and n >= 1"));
        }
        Ok(())
    }

    fn validate_convergence(&self) -> Result<()> {
        let c = &self.convergence;
        let m = self.flow.dim();
        if c.box_lo.len() != m || c.box_hi.len() != m || c.box_lo.iter().zip(&c.box_hi).any(|(a, b)| !(a < b)) {
            return Err(invalid(format!("convergence box needs {m} coordinates with lo < hi")));
        }
        if !(c.time >= 0.0) || c.samples == 0 || c.substeps == 0 {
            return Err(invalid("convergence: need time >= 0, samples >= 1, substeps >= 1"));
        }
        for lvl in &c.levels {
            if lvl.dims.len() != m || !(lvl.tau > 0.0) {
                return Err(invalid("convergence.levels: wrong dimension count or tau <= 0"));
            }
            if let FlowSpec::QuadrupleGyre { .. } = self.flow {
                gyre_slice_shift(lvl.tau, lvl.dims[2])?;
            }
        }
        Ok(())
    }

    /// Grid of the density output: `[-bandwidth, bandwidth)` with spacing `alpha / 10`.
    pub fn density_grid(&self) -> Vec<f64> {
        density_grid(bandwidth(self.tau), self.alpha)
    }
}

pub fn density_grid(bw: f64, alpha: f64) -> Vec<f64> {
    let h = alpha / 10.0;
    let n = (2.0 * bw / h).ceil() as usize;
    (0..n).map(|i| -bw + i as f64 * h).filter(|&w| w < bw).collect()
}

/// Whole number of `x3` cells the gyre advances per step; `tau * d3` must be an integer.
pub fn gyre_slice_shift(tau: f64, d3: usize) -> Result<i64> {
    let s = tau * d3 as f64;
    let r = s.round();
    if (s - r).abs() > 1e-9 * s.abs().max(1.0) {
        return Err(invalid(format!("quadruple_gyre needs tau * d3 to be an integer, got {s}")));
    }
    Ok(r as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_sections() {
        let cfg = RunConfig::parse("[flow]\nname = pendulum\n[spectral]\ntau = 0.05\nbands = -0.3:0.3, 1.5:2\n").unwrap();
        assert_eq!(cfg.flow, FlowSpec::Pendulum);
        assert_eq!(cfg.dims, vec![64, 64]);
        assert_eq!(cfg.observable, ObservableId::Pendulum);
        assert_eq!(cfg.bands, vec![Band::new(-0.3, 0.3).unwrap(), Band::new(1.5, 2.0).unwrap()]);
        assert_eq!(cfg.method, PermMethod::Auto);
    }

    #[test]
    fn dotted_keys_and_comments() {
        let cfg = RunConfig::parse(
            "flow.name = duffing  # comment\nflow.b = 0.5\npartition.dims = 32x48\nspectral.b_sweep = -1, 0, 1\n\
             convergence.levels = 16x16@0.1, 32x32@0.04\n",
        )
        .unwrap();
        assert_eq!(cfg.flow, FlowSpec::Duffing { a: 1.0, b: 0.5 });
        assert_eq!(cfg.dims, vec![32, 48]);
        assert_eq!(cfg.b_sweep, vec![-1.0, 0.0, 1.0]);
        assert_eq!(cfg.convergence.levels[1], Level { dims: vec![32, 32], tau: 0.04 });
    }

    #[test]
    fn rejections() {
        for bad in [
            "flow.name = nope",
            "nonsense.key = 1",
            "spectral.tau = 0",
            "spectral.tau = -1",
            "spectral.alpha = 0",
            "spectral.tau = 1\nspectral.bands = 0:4",
            "spectral.tau = 1\nspectral.tau = 2",
            "flow.name = quadruple_gyre\npartition.dims = 32x32x8\nspectral.tau = 0.1",
            "flow.name = translation\nspectral.observable = obs_gyre",
            "flow.name = pendulum\nspectral.b_sweep = 1",
            "flow.name = pendulum\npartition.dims = 64",
            "partition.dims = 0",
            "just a line",
        ] {
            let err = RunConfig::parse(bad).unwrap_err();
            assert!(matches!(err, Error::ConfigInvalid(_)), "{bad}: {err}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn gyre_shift() {
        assert_eq!(gyre_slice_shift(0.125, 8).unwrap(), 1);
        assert_eq!(gyre_slice_shift(0.01, 100).unwrap(), 1);
        assert!(gyre_slice_shift(0.1, 8).is_err());
    }

    #[test]
    fn grid_spacing_and_range() {
        let g = density_grid(std::f64::consts::PI, 0.1);
        assert_eq!(g[0], -std::f64::consts::PI);
        assert!(g.iter().all(|&w| w < std::f64::consts::PI));
        assert!(((g[1] - g[0]) - 0.01).abs() < 1e-15);
    }
}

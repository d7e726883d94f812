//! End-to-end runs: partition, permutation, observable, spectrum and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;

use crate::approx::{
    lattice_splitting_perm, match_perm, match_perm_sliced, set_evolution_error, Method, Permutation,
};
use crate::error::{Error, Result};
use crate::flows::FlowSpec;
use crate::io::cache::{load_perm, save_perm, PermCache};
use crate::io::config::{density_grid, gyre_slice_shift, PermMethod, RunConfig};
use crate::io::csv;
use crate::partition::{CellMask, Domain, Partition};
use crate::spectral::{
    average_observable, band_project, bandwidth, compute_spectrum, density, DiscreteObservable, Mollifier,
    Spectrum,
};
use crate::upwind::{analytic_eigs, max_deviation, numeric_eigs, Eigenvalue, UpwindSpec};

/// Runs `f` on a rayon pool with `workers` threads (0 = one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// The partition a run computes on.
///
/// Hamiltonian flows live on an energy sub-level set; their partition is the
/// configured grid over its bounding box, padded on sheared non-periodic axes
/// so that lattice shears of active cells never cross the outer boundary.
#[derive(Debug, Clone)]
pub struct Ambient {
    pub partition: Arc<Partition>,
    /// Configured grid inside the padded one.
    pub dims: Vec<usize>,
    /// Index of the configured grid's first cell along each axis.
    pub offset: Vec<usize>,
    pub mask: Option<Arc<CellMask>>,
}

impl Ambient {
    pub fn new(flow: &FlowSpec, dims: &[usize], tau: f64) -> Result<Self> {
        let domain = flow.domain()?;
        if dims.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!("{} axes for a {}-dimensional flow", dims.len(), domain.dim())));
        }
        let Some(level) = flow.energy_level() else {
            let partition = Arc::new(Partition::new(domain, dims)?);
            return Ok(Ambient { partition, dims: dims.to_vec(), offset: vec![0; dims.len()], mask: None });
        };
        let width: Vec<f64> = (0..2).map(|k| domain.width(k) / dims[k] as f64).collect();
        let reach = |k: usize| domain.lower()[k].abs().max(domain.upper()[k].abs());
        // Largest displacement of each shear over the bounding box.
        let max_shift = match *flow {
            FlowSpec::Duffing { a, b } => [reach(1), b.abs() * reach(0) + a.abs() * reach(0).powi(3)],
            _ => [reach(1), 1.0],
        };
        let pad: Vec<usize> = (0..2)
            .map(|k| if domain.is_periodic(k) { 0 } else { (tau * max_shift[k] / width[k]).ceil() as usize + 2 })
            .collect();
        let lower: Vec<f64> = (0..2).map(|k| domain.lower()[k] - pad[k] as f64 * width[k]).collect();
        let upper: Vec<f64> = (0..2).map(|k| domain.upper()[k] + pad[k] as f64 * width[k]).collect();
        let padded = Domain::new(lower, upper, domain.periodic().to_vec())?;
        let full: Vec<usize> = (0..2).map(|k| dims[k] + 2 * pad[k]).collect();
        let partition = Arc::new(Partition::new(padded, &full)?);
        let energy = *flow;
        let mask = partition.mask_sublevel(|x| energy.energy(x).unwrap_or(f64::INFINITY), level);
        Ok(Ambient { partition, dims: dims.to_vec(), offset: pad, mask: Some(Arc::new(mask)) })
    }

    /// Index in the padded grid of a cell given in configured-grid coordinates.
    pub fn embed(&self, multi: &[usize]) -> usize {
        let m: Vec<usize> = multi.iter().zip(&self.offset).map(|(i, o)| i + o).collect();
        self.partition.index_of(&m)
    }

    /// Configured-grid coordinates of a padded-grid cell, if it lies inside.
    pub fn restrict(&self, multi: &[usize]) -> Option<Vec<usize>> {
        multi
            .iter()
            .zip(&self.offset)
            .zip(&self.dims)
            .map(|((&i, &o), &d)| i.checked_sub(o).filter(|&v| v < d))
            .collect()
    }
}

/// How to build the permutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermOptions {
    pub method: PermMethod,
    pub samples_per_cell: usize,
    pub substeps: usize,
    pub seed: u64,
}

impl PermOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        PermOptions {
            method: cfg.method,
            samples_per_cell: cfg.samples_per_cell,
            substeps: cfg.substeps,
            seed: cfg.seed,
        }
    }
}

/// Periodic approximation of the `tau`-map of `flow` on `amb`.
///
/// Flows with a shear splitting get the exact lattice permutation; the
/// quadruple gyre is matched slice by slice along `x3`.
pub fn build_permutation(flow: &FlowSpec, amb: &Ambient, tau: f64, opts: &PermOptions) -> Result<Permutation> {
    let p = &amb.partition;
    let mask = amb.mask.as_deref();
    let lattice = match opts.method {
        PermMethod::Lattice => true,
        PermMethod::Matching => false,
        PermMethod::Auto => !matches!(flow, FlowSpec::QuadrupleGyre { .. }),
    };
    if lattice {
        let scheme = flow.shear_splitting(tau)?;
        return lattice_splitting_perm(p, &scheme, mask);
    }
    let spec = *flow;
    let substeps = opts.substeps;
    let map = move |x: &[f64]| spec.integrate_tau(tau, x, substeps);
    let perm = match flow {
        FlowSpec::QuadrupleGyre { .. } => {
            let shift = gyre_slice_shift(tau, p.dims()[2])?;
            match_perm_sliced(p, mask, &map, tau, 2, shift, opts.samples_per_cell, opts.seed)?
        }
        _ => match_perm(p, mask, &map, tau, opts.samples_per_cell, opts.seed)?,
    };
    let report = perm.validate();
    if !report.is_ok() {
        return Err(Error::IntegrityFailure(format!("matching produced an invalid permutation: {report}")));
    }
    Ok(perm)
}

/// Cell averages of the configured observable on `amb`.
pub fn observable(cfg: &RunConfig, amb: &Ambient) -> Result<DiscreteObservable> {
    let g = match cfg.observable.evaluator(&cfg.wavenumber) {
        Some(f) => average_observable(f, &amb.partition, amb.mask.as_ref(), cfg.quad_points)?,
        None => {
            let path = cfg.grid_file.as_ref().ok_or_else(|| Error::ConfigInvalid("missing spectral.grid_file".into()))?;
            let local = Partition::new(Domain::unit_torus(amb.dims.len())?, &amb.dims)?;
            let values = csv::read_grid(path, &local)?;
            let mut coeffs = vec![Complex64::new(0.0, 0.0); amb.partition.len()];
            for (j, v) in values.into_iter().enumerate() {
                coeffs[amb.embed(&local.multi_index(j))] = v;
            }
            let g = DiscreteObservable::new(amb.partition.clone(), coeffs)?;
            match &amb.mask {
                Some(m) => g.with_mask(m.clone())?,
                None => g,
            }
        }
    };
    Ok(g)
}

/// Everything a spectral pass needs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub ambient: Ambient,
    pub perm: Permutation,
    pub observable: DiscreteObservable,
}

/// Builds (or loads from `run.cache`) the permutation and averages the observable.
pub fn prepare(cfg: &RunConfig) -> Result<Setup> {
    prepare_flow(cfg, &cfg.flow)
}

fn prepare_flow(cfg: &RunConfig, flow: &FlowSpec) -> Result<Setup> {
    let ambient = Ambient::new(flow, &cfg.dims, cfg.tau)?;
    let opts = PermOptions::from_config(cfg);
    let perm = match &cfg.cache {
        Some(path) if path.exists() && flow == &cfg.flow => {
            let cached = load_perm(path)?;
            if cached.tau.to_bits() != cfg.tau.to_bits() {
                return Err(Error::IntegrityFailure(format!(
                    "{} was built for tau = {}, config has {}",
                    path.display(),
                    cached.tau,
                    cfg.tau
                )));
            }
            info!("loaded permutation from {}", path.display());
            cached.into_perm(ambient.partition.clone(), Method::Explicit)?
        }
        cache => {
            let perm = build_permutation(flow, &ambient, cfg.tau, &opts)?;
            if let (Some(path), true) = (cache, flow == &cfg.flow) {
                save_perm(&perm, path)?;
                info!("saved permutation to {}", path.display());
            }
            perm
        }
    };
    let hist = perm.cycles().histogram();
    info!("{flow}: {} cells, {} cycles, method {}", perm.len(), hist.values().sum::<usize>(), perm.method());
    let observable = observable(cfg, &ambient)?;
    Ok(Setup { ambient, perm, observable })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn log_parseval(label: &str, spec: &Spectrum) {
    let r = spec.parseval_residual();
    if r <= 1e-10 {
        info!("{label}: Parseval residual {r:.3e}");
    } else {
        warn!("{label}: Parseval residual {r:.3e} exceeds 1e-10");
    }
}

#[derive(Debug, Clone)]
pub struct DensityOutput {
    pub spectrum: Spectrum,
    pub grid: Vec<f64>,
    pub rho: Vec<f64>,
    pub files: Vec<PathBuf>,
}

/// Spectrum and mollified density of the configured run.
///
/// With a Duffing `b` sweep, the densities for every `b` are additionally
/// written as columns of `density_sweep.csv`.
pub fn run_density(cfg: &RunConfig) -> Result<DensityOutput> {
    ensure_dir(&cfg.out_dir)?;
    let setup = prepare(cfg)?;
    let spectrum = compute_spectrum(&setup.perm, &setup.observable, cfg.tau)?;
    log_parseval(cfg.flow.name(), &spectrum);
    let mol = Mollifier::new(cfg.alpha)?;
    let grid = cfg.density_grid();
    let rho = density(&spectrum, &mol, &grid)?;
    let spec_path = cfg.out_dir.join("spectrum.csv");
    let dens_path = cfg.out_dir.join("density.csv");
    csv::write_spectrum(&spec_path, &spectrum)?;
    csv::write_density(&dens_path, &grid, &rho)?;
    let mut files = vec![spec_path, dens_path];

    if let (FlowSpec::Duffing { a, .. }, false) = (cfg.flow, cfg.b_sweep.is_empty()) {
        let mut labels = Vec::new();
        let mut columns = Vec::new();
        for &b in &cfg.b_sweep {
            let flow = FlowSpec::Duffing { a, b };
            let s = prepare_flow(cfg, &flow)?;
            let sp = compute_spectrum(&s.perm, &s.observable, cfg.tau)?;
            log_parseval(&format!("duffing b = {b}"), &sp);
            columns.push(density(&sp, &mol, &grid)?);
            labels.push(format!("rho_b{b}"));
        }
        let path = cfg.out_dir.join("density_sweep.csv");
        csv::write_density_matrix(&path, &grid, &labels, &columns)?;
        files.push(path);
    }
    Ok(DensityOutput { spectrum, grid, rho, files })
}

/// `x3` positions of the slices written for three-dimensional projections.
pub const SLICES_X3: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

#[derive(Debug, Clone)]
pub struct ProjectionOutput {
    pub setup: Setup,
    pub projections: Vec<DiscreteObservable>,
    pub files: Vec<PathBuf>,
}

/// Band projections of the observable for every configured band.
pub fn run_projection(cfg: &RunConfig) -> Result<ProjectionOutput> {
    if cfg.bands.is_empty() {
        return Err(Error::ConfigInvalid("spectral.bands is empty".into()));
    }
    ensure_dir(&cfg.out_dir)?;
    let setup = prepare(cfg)?;
    let mut projections = Vec::new();
    let mut files = Vec::new();
    for (k, band) in cfg.bands.iter().enumerate() {
        let proj = band_project(&setup.perm, &setup.observable, cfg.tau, band)?;
        files.extend(write_projection(&cfg.out_dir, k, &setup.ambient, &proj)?);
        projections.push(proj);
    }
    Ok(ProjectionOutput { setup, projections, files })
}

fn write_projection(dir: &Path, k: usize, amb: &Ambient, proj: &DiscreteObservable) -> Result<Vec<PathBuf>> {
    let p = &amb.partition;
    // Rows use configured-grid indices; padding cells are not written.
    let local = Partition::new(Domain::unit_torus(amb.dims.len())?, &amb.dims)?;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); local.len()];
    for (j, c) in proj.coeffs().iter().enumerate() {
        if let Some(m) = amb.restrict(&p.multi_index(j)) {
            coeffs[local.index_of(&m)] = *c;
        }
    }
    if amb.dims.len() < 3 {
        let path = dir.join(format!("projection_{k}.csv"));
        csv::write_grid(&path, &local, &coeffs, |_| true)?;
        return Ok(vec![path]);
    }
    let mut files = Vec::new();
    for x3 in SLICES_X3 {
        let slice = p.locate_axis(2, p.domain().lower()[2] + x3 * p.domain().width(2)).unwrap_or(0);
        let path = dir.join(format!("projection_{k}_x3_{x3}.csv"));
        csv::write_grid(&path, &local, &coeffs, |m| m[2] == slice)?;
        files.push(path);
    }
    Ok(files)
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub q: usize,
    pub l: f64,
    pub tau: f64,
    pub parseval_residual: f64,
    pub hausdorff_integral: f64,
    /// Sup-norm distance to the previous level's density on the shared grid.
    pub density_linf: Option<f64>,
    pub is_identity: bool,
    /// `|Omega - Omega_hat| / |Omega|` of the lattice shift, translation only.
    pub freq_err: Option<f64>,
}

impl ConvergenceRow {
    pub fn l_over_tau(&self) -> f64 {
        self.l / self.tau
    }
}

pub const CONVERGENCE_HEADER: [&str; 10] = [
    "level",
    "q",
    "l",
    "tau",
    "l_over_tau",
    "parseval_residual",
    "hausdorff_integral",
    "density_linf",
    "is_identity",
    "freq_err",
];

/// Cells of `p` whose closed boxes meet the box `[lo, hi]`.
pub fn cells_covering(p: &Partition, lo: &[f64], hi: &[f64]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for j in 0..p.len() {
        let (a, b) = p.cell_box(j)?;
        if (0..p.dim()).all(|k| a[k] <= hi[k] && lo[k] <= b[k]) {
            out.push(j);
        }
    }
    Ok(out)
}

/// Diagnostics along the configured refinement chain.
pub fn run_convergence(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    let levels = &cfg.convergence.levels;
    if levels.is_empty() {
        return Err(Error::ConfigInvalid("convergence.levels is empty".into()));
    }
    let ratios: Vec<f64> = levels
        .iter()
        .map(|l| {
            let d = cfg.flow.domain()?;
            let diam = (0..d.dim()).map(|k| (d.width(k) / l.dims[k] as f64).powi(2)).sum::<f64>().sqrt();
            Ok(diam / l.tau)
        })
        .collect::<Result<_>>()?;
    if ratios.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::ConfigInvalid(format!("l/tau must strictly decrease along the chain, got {ratios:?}")));
    }
    ensure_dir(&cfg.out_dir)?;
    let mol = Mollifier::new(cfg.alpha)?;
    let shared_bw = levels.iter().map(|l| bandwidth(l.tau)).fold(f64::INFINITY, f64::min);
    let grid = density_grid(shared_bw, cfg.alpha);
    let c = &cfg.convergence;

    let mut rows = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    for (i, lvl) in levels.iter().enumerate() {
        let mut sub = cfg.clone();
        sub.dims = lvl.dims.clone();
        sub.tau = lvl.tau;
        sub.cache = None;
        let setup = prepare(&sub)?;
        let spectrum = compute_spectrum(&setup.perm, &setup.observable, lvl.tau)?;
        log_parseval(&format!("level {i}"), &spectrum);
        let rho = density(&spectrum, &mol, &grid)?;
        let density_linf = prev.as_ref().map(|p| p.iter().zip(&rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        prev = Some(rho);

        let p = &setup.ambient.partition;
        let cells = cells_covering(p, &c.box_lo, &c.box_hi)?;
        let trace = set_evolution_error(&setup.perm, &cfg.flow, &cells, c.time, c.samples, c.substeps)?;
        let freq_err = match cfg.flow {
            FlowSpec::Translation { omega } => {
                // The image only fixes the shift modulo d; take the representative
                // nearest the exact displacement.
                let d = p.len() as f64;
                let exact = omega * lvl.tau / p.cell_extent()[0];
                let s = setup.perm.image()[0] as f64;
                let signed = s - d * ((s - exact) / d).round();
                let omega_hat = signed * p.cell_extent()[0] / lvl.tau;
                Some((omega - omega_hat).abs() / omega.abs())
            }
            _ => None,
        };
        rows.push(ConvergenceRow {
            level: i,
            q: p.len(),
            l: p.diam_bound(),
            tau: lvl.tau,
            parseval_residual: spectrum.parseval_residual(),
            hausdorff_integral: trace.integral,
            density_linf,
            is_identity: setup.perm.is_identity(),
            freq_err,
        });
    }
    for w in rows.windows(3) {
        if let (Some(a), Some(b)) = (w[1].density_linf, w[2].density_linf) {
            if b > a {
                warn!("density distance grew from {a:.3e} to {b:.3e} at level {}", w[2].level);
            }
        }
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), csv::fmt_f64);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                r.q.to_string(),
                csv::fmt_f64(r.l),
                csv::fmt_f64(r.tau),
                csv::fmt_f64(r.l_over_tau()),
                csv::fmt_f64(r.parseval_residual),
                csv::fmt_f64(r.hausdorff_integral),
                opt(r.density_linf),
                r.is_identity.to_string(),
                opt(r.freq_err),
            ]
        })
        .collect();
    csv::write_table(&cfg.out_dir.join("convergence.csv"), &CONVERGENCE_HEADER, &table)?;
    Ok(rows)
}

/// Summary of one `(gamma, n)` pair of the upwind sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct UpwindSummary {
    pub gamma: f64,
    pub n: u32,
    pub tau: f64,
    pub max_deviation: f64,
    pub max_re: f64,
    /// Smallest real part among modes with `kappa != 0`.
    pub min_re_nonzero: f64,
}

pub const UPWIND_HEADER: [&str; 6] = ["gamma", "n", "tau", "max_deviation", "max_re", "min_re_nonzero"];

/// Analytic and numeric eigenvalues over the configured `(gamma, n)` sweep.
pub fn run_upwind(cfg: &RunConfig) -> Result<Vec<UpwindSummary>> {
    ensure_dir(&cfg.out_dir)?;
    let u = &cfg.upwind;
    let mut analytic_rows: Vec<(Eigenvalue, f64, u32)> = Vec::new();
    let mut numeric_rows = Vec::new();
    let mut summary = Vec::new();
    for &gamma in &u.gammas {
        for &n in &u.levels {
            let spec = UpwindSpec::new(gamma, u.r, u.w, n, u.omega)?;
            let a = analytic_eigs(&spec)?;
            let b = numeric_eigs(&spec)?;
            let dev = max_deviation(&a, &b, spec.tau());
            let max_re = a.iter().map(|e| e.lambda.re).fold(f64::NEG_INFINITY, f64::max);
            let min_re_nonzero =
                a.iter().filter(|e| e.kappa != 0).map(|e| e.lambda.re).fold(f64::INFINITY, f64::min);
            info!("gamma = {gamma}, n = {n}: max deviation {dev:.3e}");
            summary.push(UpwindSummary { gamma, n, tau: spec.tau(), max_deviation: dev, max_re, min_re_nonzero });
            analytic_rows.extend(a.into_iter().map(|e| (e, gamma, n)));
            numeric_rows.extend(b.into_iter().map(|e| (e, gamma, n)));
        }
    }
    csv::write_eigs(&cfg.out_dir.join("eigenvalues.csv"), &analytic_rows)?;
    csv::write_eigs(&cfg.out_dir.join("eigenvalues_numeric.csv"), &numeric_rows)?;
    let table: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                csv::fmt_f64(s.gamma),
                s.n.to_string(),
                csv::fmt_f64(s.tau),
                csv::fmt_f64(s.max_deviation),
                csv::fmt_f64(s.max_re),
                csv::fmt_f64(s.min_re_nonzero),
            ]
        })
        .collect();
    csv::write_table(&cfg.out_dir.join("upwind_summary.csv"), &UPWIND_HEADER, &table)?;
    Ok(summary)
}

/// Builds the configured permutation, saves it and verifies the reloaded copy.
///
/// Returns the cache path. An existing file at `run.cache` is only validated.
pub fn run_cache(cfg: &RunConfig) -> Result<PathBuf> {
    let path = cfg.cache.clone().unwrap_or_else(|| cfg.out_dir.join("perm.kpax"));
    if path.exists() {
        let cached = load_perm(&path)?;
        info!("{}: valid permutation of {} cells, tau = {}", path.display(), cached.image.len(), cached.tau);
        return Ok(path);
    }
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let amb = Ambient::new(&cfg.flow, &cfg.dims, cfg.tau)?;
    let perm = build_permutation(&cfg.flow, &amb, cfg.tau, &PermOptions::from_config(cfg))?;
    save_perm(&perm, &path)?;
    let back = load_perm(&path)?;
    if back != PermCache::from_perm(&perm) {
        return Err(Error::IntegrityFailure(format!("{} does not reproduce the permutation", path.display())));
    }
    info!("wrote {} ({} cells)", path.display(), perm.len());
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str, dir: &Path) -> RunConfig {
        let mut c = RunConfig::parse(text).unwrap();
        c.out_dir = dir.to_path_buf();
        c
    }

    #[test]
    fn pendulum_ambient_is_padded_and_masked() {
        let amb = Ambient::new(&FlowSpec::Pendulum, &[64, 64], 0.05).unwrap();
        assert_eq!(amb.offset[0], 0);
        assert!(amb.offset[1] >= 2);
        assert_eq!(amb.partition.dims()[1], 64 + 2 * amb.offset[1]);
        let mask = amb.mask.as_ref().unwrap();
        assert!(mask.active_count() > 0 && mask.active_count() < amb.partition.len());
        let j = amb.embed(&[0, 0]);
        assert_eq!(amb.restrict(&amb.partition.multi_index(j)), Some(vec![0, 0]));
        assert_eq!(amb.restrict(&[0, 0]), None);
    }

    #[test]
    fn translation_density_run() {
        let dir = tempfile::tempdir().unwrap();
        // tau * d = 32, so the lattice shift is exact.
        let c = cfg("partition.dims = 256\nspectral.tau = 0.125\nspectral.alpha = 0.1\n", dir.path());
        let out = run_density(&c).unwrap();
        assert!(out.spectrum.parseval_residual() <= 1e-10);
        let (imax, _) = out.rho.iter().enumerate().fold((0, f64::MIN), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
        assert!((out.grid[imax] - 2.0 * std::f64::consts::PI).abs() <= 0.01);
        let back = csv::read_spectrum(&out.files[0]).unwrap();
        let total: f64 = back.iter().map(|a| a.1).sum();
        assert!((total - out.spectrum.norm_sq).abs() <= 1e-8 * out.spectrum.norm_sq);
    }

    #[test]
    fn determinism_of_outputs() {
        let text = "flow.name = pendulum\npartition.dims = 16x16\nspectral.tau = 0.1\n";
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_density(&cfg(text, d1.path())).unwrap();
        run_density(&cfg(text, d2.path())).unwrap();
        for f in ["spectrum.csv", "density.csv"] {
            assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap());
        }
    }

    #[test]
    fn upwind_run_writes_tables() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("upwind.gamma = 0.75, 1, 1.25\nupwind.n = 4\n", dir.path());
        let s = run_upwind(&c).unwrap();
        assert!(s.iter().all(|r| r.max_deviation <= 1e-8));
        assert!(s[1].max_re.abs() <= 1e-10 && s[1].min_re_nonzero.abs() <= 1e-10);
        assert!(s[2].max_re > 0.0);
        let text = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
        assert!(text.starts_with("j,kappa,re_lambda,im_lambda,gamma,n\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 16);
    }

    #[test]
    fn convergence_rejects_non_decreasing_ratio() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("convergence.levels = 16@0.2, 16@0.1\n", dir.path());
        assert!(matches!(run_convergence(&c), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn coarsening_space_chain_is_rejected() {
        // r = 2, w = 4 gives l/tau = 2^n, growing along the chain.
        let dir = tempfile::tempdir().unwrap();
        let levels: Vec<String> = (1..=4).map(|n| format!("{}@{}", 2usize.pow(n), 0.25f64.powi(n as i32))).collect();
        let c = cfg(&format!("convergence.levels = {}\n", levels.join(",")), dir.path());
        assert!(matches!(run_convergence(&c), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn translation_chain_recovers_frequency() {
        // r = 4, w = 2, gamma = 1.3.
        let dir = tempfile::tempdir().unwrap();
        let levels: Vec<String> =
            (1..=6).map(|n| format!("{}@{}", 4usize.pow(n), 1.3 / 2f64.powi(n as i32))).collect();
        let c = cfg(&format!("convergence.levels = {}\nconvergence.time = 0.5\n", levels.join(",")), dir.path());
        let rows = run_convergence(&c).unwrap();
        let errs: Vec<f64> = rows.iter().map(|r| r.freq_err.unwrap()).collect();
        assert!(errs[5] < 1e-2, "{errs:?}");
        for (n, e) in errs.iter().enumerate() {
            assert!(*e <= 0.5 * 0.5f64.powi(n as i32 + 1) / 1.3 + 1e-12);
        }
        assert!(rows.iter().all(|r| r.parseval_residual <= 1e-10 && !r.is_identity));
        let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
        assert!(text.starts_with("level,q,l,tau,l_over_tau,"));
    }

    #[test]
    fn cache_run_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("flow.name = abc\npartition.dims = 8x8x8\nspectral.tau = 0.25\n", dir.path());
        let path = run_cache(&c).unwrap();
        let cached = load_perm(&path).unwrap();
        assert_eq!(cached.image.len(), 512);
        assert_eq!(run_cache(&c).unwrap(), path);
    }
}

//! Sampled Hausdorff distance between a set evolved by the flow and the same
//! set of cells evolved by its periodic approximation.

use rayon::prelude::*;

use super::Permutation;
use crate::error::{Error, Result};
use crate::flows::FlowSpec;
use crate::partition::{Domain, Partition};

/// Sampled trace of `d_H(S^s(A), S_n^{xi(s)}(A_n))` over `s` in `[-t, t]`.
#[derive(Debug, Clone)]
pub struct ErrorTrace {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Midpoint-rule estimate of the time integral of `distances`.
    pub integral: f64,
    /// Sample points per evolved set.
    pub samples: usize,
}

const TIME_SAMPLES_PER_STEP: usize = 4;

/// Estimates the set-evolution error of `perm` against `spec` for the cell set `cells`.
///
/// Time is sampled at interval midpoints, four per tau step, over `[-t, t]`.
/// Each cell contributes `density^m` regular sample points; the true set is
/// obtained by pushing them through [`FlowSpec::integrate_tau`] with
/// `substeps_per_tau` substeps per elapsed tau.
pub fn set_evolution_error(
    perm: &Permutation,
    spec: &FlowSpec,
    cells: &[usize],
    t: f64,
    density: usize,
    substeps_per_tau: usize,
) -> Result<ErrorTrace> {
    let tau = perm.tau();
    if !(tau > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidArgument("need tau > 0 and t >= 0".into()));
    }
    if density == 0 {
        return Err(Error::InvalidArgument("sample density must be >= 1".into()));
    }
    let p = perm.partition();
    let steps = (t / tau).ceil().max(1.0) as usize;
    let n = 2 * steps * TIME_SAMPLES_PER_STEP;
    let h = 2.0 * t / n as f64;
    let times: Vec<f64> = (0..n).map(|i| -t + (i as f64 + 0.5) * h).collect();

    let mut cells = cells.to_vec();
    cells.sort_unstable();
    cells.dedup();
    let points = sample_cells(p, &cells, density);

    // The flow preserves X, so evolving every cell is error-free.
    if cells.len() == p.len() {
        let distances = vec![0.0; n];
        return Ok(ErrorTrace { times, distances, integral: 0.0, samples: points.len() });
    }

    let cycles = perm.cycles();
    let distances: Vec<f64> = times
        .par_iter()
        .map(|&s| -> Result<f64> {
            let k = (s.signum() * (s.abs() / tau).ceil()) as i64;
            let substeps = ((s.abs() / tau).ceil() as usize).max(1) * substeps_per_tau.max(1);
            let evolved: Vec<Vec<f64>> = points
                .iter()
                .map(|x| spec.integrate_tau(s, x, substeps))
                .collect::<Result<_>>()?;
            let mut discrete: Vec<usize> = cells.iter().map(|&j| cycles.advance(j, k)).collect();
            discrete.sort_unstable();
            let discrete_points = sample_cells(p, &discrete, density);
            Ok(hausdorff(p, &evolved, &discrete, &discrete_points))
        })
        .collect::<Result<_>>()?;
    let integral = distances.iter().sum::<f64>() * h;
    Ok(ErrorTrace { times, distances, integral, samples: points.len() })
}

fn sample_cells(p: &Partition, cells: &[usize], density: usize) -> Vec<Vec<f64>> {
    let m = p.dim();
    let per_cell = density.pow(m as u32);
    let ext = p.cell_extent();
    let mut out = Vec::with_capacity(cells.len() * per_cell);
    for &c in cells {
        let (lo, _) = p.cell_box(c).expect("cell index in range");
        for s in 0..per_cell {
            let mut rem = s;
            let x: Vec<f64> = (0..m)
                .map(|k| {
                    let i = rem % density;
                    rem /= density;
                    lo[k] + ext[k] * (i as f64 + 0.5) / density as f64
                })
                .collect();
            out.push(x);
        }
    }
    out
}

fn axis_gap(domain: &Domain, k: usize, x: f64, lo: f64, hi: f64) -> f64 {
    let direct = |y: f64| (lo - y).max(y - hi).max(0.0);
    if domain.is_periodic(k) {
        let w = domain.width(k);
        direct(x).min(direct(x - w)).min(direct(x + w))
    } else {
        direct(x)
    }
}

fn distance_to_cells(p: &Partition, x: &[f64], cells: &[usize]) -> f64 {
    if let Ok(j) = p.locate(x) {
        if cells.binary_search(&j).is_ok() {
            return 0.0;
        }
    }
    let domain = p.domain();
    cells
        .iter()
        .map(|&c| {
            let (lo, hi) = p.cell_box(c).expect("cell index in range");
            (0..p.dim())
                .map(|k| axis_gap(domain, k, x[k], lo[k], hi[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn hausdorff(
    p: &Partition,
    evolved: &[Vec<f64>],
    cells: &[usize],
    cell_points: &[Vec<f64>],
) -> f64 {
    let domain = p.domain();
    let forward = evolved
        .iter()
        .map(|a| distance_to_cells(p, a, cells))
        .fold(0.0, f64::max);
    let backward = cell_points
        .iter()
        .map(|b| evolved.iter().map(|a| domain.distance(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    forward.max(backward)
}

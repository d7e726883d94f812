use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{bandwidth, Band, DiscreteObservable, Mollifier};
use crate::approx::{CycleSet, Permutation};
use crate::error::{Error, Result};

/// One spectral atom: harmonic `harmonic` of cycle `cycle`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub omega: f64,
    pub weight: f64,
    pub cycle: u32,
    pub cycle_len: u32,
    pub harmonic: u32,
}

/// Atomic spectral measure of an observable under a periodic approximation.
///
/// Atoms are kept per cycle, ordered by `(cycle, harmonic)`; use
/// [`Spectrum::merged`] for the aggregated measure.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub tau: f64,
    pub bandwidth: f64,
    pub atoms: Vec<Atom>,
    /// `‖g_n‖²` of the observable the spectrum was computed from.
    pub norm_sq: f64,
}

impl Spectrum {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `|Σ weights − ‖g‖²| / ‖g‖²` (absolute when `‖g‖ = 0`).
    pub fn parseval_residual(&self) -> f64 {
        let diff = (self.total_weight() - self.norm_sq).abs();
        if self.norm_sq > 0.0 {
            diff / self.norm_sq
        } else {
            diff
        }
    }

    /// Atoms with identical frequency summed, sorted by frequency.
    pub fn merged(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.omega, a.weight)).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (w, m) in pairs {
            match out.last_mut() {
                Some(last) if last.0 == w => last.1 += m,
                _ => out.push((w, m)),
            }
        }
        out
    }

    /// Total weight of atoms inside `band`.
    pub fn band_weight(&self, band: &Band) -> f64 {
        self.atoms.iter().filter(|a| band.contains(a.omega)).map(|a| a.weight).sum()
    }
}

/// Frequency of harmonic `m` on a cycle of length `c`, folded into `[-pi/tau, pi/tau)`.
///
/// The Nyquist harmonic `2m = c` lands on `-pi/tau`.
pub(crate) fn harmonic_frequency(m: usize, c: usize, tau: f64) -> f64 {
    let signed = if 2 * m < c { m as f64 } else { m as f64 - c as f64 };
    // Scaling the exact ratio keeps the Nyquist harmonic at exactly -pi/tau.
    (2.0 * signed / c as f64) * bandwidth(tau)
}

struct Plans {
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl Plans {
    fn new(cycles: &CycleSet, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let mut forward = HashMap::new();
        let mut inv = HashMap::new();
        for len in cycles.lengths() {
            if len > 1 && !forward.contains_key(&len) {
                forward.insert(len, planner.plan_fft_forward(len));
                if inverse {
                    inv.insert(len, planner.plan_fft_inverse(len));
                }
            }
        }
        Plans { forward, inverse: inv }
    }
}

/// Unitary DFT of `g` restricted to a cycle, in visiting order.
fn cycle_transform(plans: &Plans, cycle: &[usize], g: &[Complex64]) -> Vec<Complex64> {
    let c = cycle.len();
    let mut buf: Vec<Complex64> = cycle.iter().map(|&j| g[j]).collect();
    if c > 1 {
        plans.forward[&c].process(&mut buf);
        let s = 1.0 / (c as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= s);
    }
    buf
}

/// Spectral atoms of `g` under the permutation operator with time step `tau`.
///
/// Harmonic `m` of a cycle of length `c` contributes weight
/// `mu(X)/q * |ĝ(m)|²` at frequency `2 pi m / (c tau)` folded into the band.
pub fn compute_spectrum(perm: &Permutation, g: &DiscreteObservable, tau: f64) -> Result<Spectrum> {
    g.check_same(perm.partition())?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
    }
    let cycles = perm.cycles();
    let plans = Plans::new(&cycles, false);
    let cell = g.partition().cell_measure();
    let coeffs = g.coeffs();
    let atoms: Vec<Atom> = (0..cycles.len())
        .into_par_iter()
        .flat_map_iter(|id| {
            let cyc = cycles.cycle(id);
            let c = cyc.len();
            let hat = cycle_transform(&plans, cyc, coeffs);
            hat.into_iter().enumerate().map(move |(m, v)| Atom {
                omega: harmonic_frequency(m, c, tau),
                weight: cell * v.norm_sqr(),
                cycle: id as u32,
                cycle_len: c as u32,
                harmonic: m as u32,
            })
        })
        .collect();
    Ok(Spectrum { tau, bandwidth: bandwidth(tau), atoms, norm_sq: g.norm_sq() })
}

/// Applies a per-frequency multiplier to every spectral component of `g`.
fn spectral_filter<W>(perm: &Permutation, g: &DiscreteObservable, tau: f64, weight: W) -> Result<DiscreteObservable>
where
    W: Fn(f64) -> f64 + Sync,
{
    g.check_same(perm.partition())?;
    let cycles = perm.cycles();
    let plans = Plans::new(&cycles, true);
    let coeffs = g.coeffs();
    let parts: Vec<Vec<Complex64>> = (0..cycles.len())
        .into_par_iter()
        .map(|id| {
            let cyc = cycles.cycle(id);
            let c = cyc.len();
            let mut hat = cycle_transform(&plans, cyc, coeffs);
            for (m, v) in hat.iter_mut().enumerate() {
                let w = weight(harmonic_frequency(m, c, tau));
                if w != 1.0 {
                    *v *= w;
                }
            }
            if c > 1 {
                plans.inverse[&c].process(&mut hat);
                let s = 1.0 / (c as f64).sqrt();
                hat.iter_mut().for_each(|v| *v *= s);
            }
            hat
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for (id, part) in parts.into_iter().enumerate() {
        for (&j, v) in cycles.cycle(id).iter().zip(part) {
            out[j] = v;
        }
    }
    Ok(g.with_coeffs(out))
}

/// Orthogonal projection of `g` onto the spectral components with frequency in `band`.
pub fn band_project(
    perm: &Permutation,
    g: &DiscreteObservable,
    tau: f64,
    band: &Band,
) -> Result<DiscreteObservable> {
    band.check_within(tau)?;
    spectral_filter(perm, g, tau, |w| if band.contains(w) { 1.0 } else { 0.0 })
}

/// Projection with the band indicator replaced by its mollified version.
pub fn smoothed_project(
    perm: &Permutation,
    g: &DiscreteObservable,
    tau: f64,
    band: &Band,
    mollifier: &Mollifier,
) -> Result<DiscreteObservable> {
    band.check_within(tau)?;
    // Distinct frequencies are few compared to cells; evaluate each once.
    let cycles = perm.cycles();
    let mut table: HashMap<u64, f64> = HashMap::new();
    for c in cycles.lengths() {
        for m in 0..c {
            let w = harmonic_frequency(m, c, tau);
            table.entry(w.to_bits()).or_insert_with(|| mollifier.smoothed_indicator(band, w));
        }
    }
    spectral_filter(perm, g, tau, |w| table[&w.to_bits()])
}

/// Left-continuous cumulative spectral function: weight of atoms with `omega_atom < omega`.
pub fn cumulative(spec: &Spectrum, omega: f64) -> f64 {
    spec.atoms.iter().filter(|a| a.omega < omega).map(|a| a.weight).sum()
}

/// Mollified spectral density `Σ weight · phi_alpha(omega, omega_atom)` on `grid`.
pub fn density(spec: &Spectrum, mollifier: &Mollifier, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("density grid must be strictly increasing".into()));
    }
    let merged = spec.merged();
    let omegas: Vec<f64> = merged.iter().map(|p| p.0).collect();
    let alpha = mollifier.alpha();
    Ok(grid
        .par_iter()
        .map(|&w| {
            let lo = omegas.partition_point(|&o| o <= w - alpha);
            let hi = omegas.partition_point(|&o| o < w + alpha);
            merged[lo..hi].iter().map(|&(o, m)| m * mollifier.phi(w, o)).sum()
        })
        .collect())
}

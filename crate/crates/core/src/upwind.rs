//! Upwind finite-difference discretization of circle translation.
//!
//! With `N = r^n` cells and `tau = gamma / (Omega w^n)`, one time step of the
//! first-order upwind scheme is the circulant matrix with diagonal `1 - gamma rho`
//! and cyclic subdiagonal `gamma rho`, where `rho = (r/w)^n`. When `r = w` and
//! `0 < gamma <= 1` it is the Ulam matrix of a random jump to the next cell.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::approx::{round_half_up, Method, Permutation};
use crate::error::{Error, Result};
use crate::partition::{Domain, Partition};

/// Largest grid for which eigenvalues are computed numerically.
pub const MAX_NUMERIC_SIZE: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpwindSpec {
    pub gamma: f64,
    pub r: u32,
    pub w: u32,
    pub n: u32,
    pub omega: f64,
}

impl UpwindSpec {
    pub fn new(gamma: f64, r: u32, w: u32, n: u32, omega: f64) -> Result<Self> {
        let spec = UpwindSpec { gamma, r, w, n, omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.r < 2 || self.w < 2 {
            return Err(Error::InvalidArgument("r and w must be integers > 1".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidArgument("level n must be >= 1".into()));
        }
        if !(self.omega != 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument("drift omega must be finite and nonzero".into()));
        }
        if self.checked_size().is_none() {
            return Err(Error::InvalidArgument(format!("grid {}^{} is too large", self.r, self.n)));
        }
        Ok(())
    }

    fn checked_size(&self) -> Option<usize> {
        (self.r as usize).checked_pow(self.n).filter(|&s| s <= isize::MAX as usize / 16)
    }

    /// Number of cells `r^n`.
    pub fn size(&self) -> usize {
        self.checked_size().expect("validated spec")
    }

    /// `(r/w)^n`.
    pub fn rho(&self) -> f64 {
        (self.r as f64 / self.w as f64).powi(self.n as i32)
    }

    /// Time step `gamma / (Omega w^n)`.
    pub fn tau(&self) -> f64 {
        self.gamma / (self.omega * (self.w as f64).powi(self.n as i32))
    }

    /// Wavenumber label of eigenvalue `j` (1-based): `((j - 1 - N/2) mod N) - N/2`.
    pub fn kappa(&self, j: usize) -> i64 {
        let big_n = self.size() as i64;
        // N/2 is fractional for odd N; doubling keeps the arithmetic exact.
        let twice = (2 * (j as i64 - 1) - big_n).rem_euclid(2 * big_n) - big_n;
        twice.div_euclid(2)
    }
}

/// One-step circulant matrix, stored by its first column.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamCirculant {
    pub size: usize,
    pub diagonal: f64,
    pub subdiagonal: f64,
}

impl UlamCirculant {
    /// Entry `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diagonal
        } else if row == (col + 1) % self.size {
            self.subdiagonal
        } else {
            0.0
        }
    }

    pub fn first_column(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.entry(i, 0)).collect()
    }

    /// Column sums equal 1 and all entries lie in `[0, 1]`.
    pub fn is_doubly_stochastic(&self) -> bool {
        (0.0..=1.0).contains(&self.subdiagonal) && (self.diagonal + self.subdiagonal - 1.0).abs() < 1e-15
    }

    pub fn is_permutation(&self) -> bool {
        self.size == 1 || (self.diagonal == 0.0 && self.subdiagonal == 1.0)
    }

    /// Dense row-major matrix; only for small sizes.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.size;
        let mut out = vec![0.0; n * n];
        for row in 0..n {
            for col in 0..n {
                out[row * n + col] = self.entry(row, col);
            }
        }
        out
    }
}

pub fn upwind_matrix(spec: &UpwindSpec) -> Result<UlamCirculant> {
    spec.validate()?;
    let g = spec.gamma * spec.rho();
    let size = spec.size();
    if size == 1 {
        return Ok(UlamCirculant { size, diagonal: 1.0, subdiagonal: 0.0 });
    }
    Ok(UlamCirculant { size, diagonal: 1.0 - g, subdiagonal: g })
}

/// Continuous-time eigenvalue with its wavenumber label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub j: usize,
    pub kappa: i64,
    pub lambda: Complex64,
}

impl Eigenvalue {
    /// A zero step eigenvalue: the mode is annihilated in one step.
    pub fn is_infinite_decay(&self) -> bool {
        self.lambda.re == f64::NEG_INFINITY
    }
}

/// Principal log, with values lost in rounding against `scale` treated as exact zeros.
fn log_or_decay(z: Complex64, scale: f64) -> Complex64 {
    if z.norm() <= 1e-14 * scale {
        Complex64::new(f64::NEG_INFINITY, 0.0)
    } else {
        z.ln()
    }
}

/// Closed-form eigenvalues for `r = w`, ordered by `j = 1..N`.
///
/// `lambda = 2 pi kappa Omega i + (Omega N / gamma) Log((1 - gamma + gamma e^{i phi}) / e^{i gamma phi})`
/// with `phi = 2 pi kappa / N` and the principal logarithm.
pub fn analytic_eigs(spec: &UpwindSpec) -> Result<Vec<Eigenvalue>> {
    spec.validate()?;
    if spec.r != spec.w {
        return Err(Error::InvalidArgument("closed-form eigenvalues need r = w".into()));
    }
    if spec.gamma == 0.0 {
        return Err(Error::InvalidArgument("closed-form eigenvalues need gamma > 0".into()));
    }
    let size = spec.size();
    let n = size as f64;
    let (g, om) = (spec.gamma, spec.omega);
    Ok((1..=size)
        .into_par_iter()
        .map(|j| {
            let kappa = spec.kappa(j);
            let phi = 2.0 * PI * kappa as f64 / n;
            let num = Complex64::new(1.0 - g, 0.0) + g * Complex64::from_polar(1.0, phi);
            let ratio = num * Complex64::from_polar(1.0, -g * phi);
            let lambda = Complex64::new(0.0, 2.0 * PI * kappa as f64 * om) + log_or_decay(ratio, (1.0 - g).abs() + g) * (om * n / g);
            Eigenvalue { j, kappa, lambda }
        })
        .collect())
}

/// Step eigenvalues `mu_k = sum_m c_m e^{2 pi i m k / N}` from the first column.
///
/// Index `k` carries the same mode as wavenumber `kappa ≡ k (mod N)`.
pub fn step_eigs(c: &UlamCirculant) -> Result<Vec<Complex64>> {
    if c.size > MAX_NUMERIC_SIZE {
        return Err(Error::InvalidArgument(format!(
            "numeric eigenvalues limited to {MAX_NUMERIC_SIZE} cells, got {}",
            c.size
        )));
    }
    let mut buf: Vec<Complex64> = c.first_column().into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(c.size).process(&mut buf);
    Ok(buf)
}

/// `Log(mu) / tau` for every step eigenvalue, labeled like [`analytic_eigs`].
pub fn numeric_eigs(spec: &UpwindSpec) -> Result<Vec<Eigenvalue>> {
    let c = upwind_matrix(spec)?;
    let mu = step_eigs(&c)?;
    let size = c.size as i64;
    let tau = spec.tau();
    let scale = c.diagonal.abs() + c.subdiagonal.abs();
    Ok((1..=c.size)
        .map(|j| {
            let kappa = spec.kappa(j);
            let z = mu[kappa.rem_euclid(size) as usize];
            let lambda = if tau == 0.0 { Complex64::new(0.0, 0.0) } else { log_or_decay(z, scale) / tau };
            Eigenvalue { j, kappa, lambda }
        })
        .collect())
}

/// Distance between two continuous-time eigenvalues of a step of length `tau`.
///
/// `e^{lambda tau}` only fixes the imaginary part modulo `2 pi / tau`, so the
/// imaginary parts are compared on that circle.
pub fn eig_distance(a: Complex64, b: Complex64, tau: f64) -> f64 {
    if a.re == f64::NEG_INFINITY && b.re == f64::NEG_INFINITY {
        return 0.0;
    }
    let period = 2.0 * PI / tau;
    let d = (a.im - b.im).rem_euclid(period);
    let dim = d.min(period - d);
    (a.re - b.re).hypot(dim)
}

/// Largest [`eig_distance`] between matched analytic and numeric eigenvalues.
pub fn max_deviation(analytic: &[Eigenvalue], numeric: &[Eigenvalue], tau: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| eig_distance(a.lambda, b.lambda, tau))
        .fold(0.0, f64::max)
}

/// Nearest-cell shift permutation of the translation `tau`-map and its effective drift.
///
/// Cell `j` moves to `(j + round(gamma rho)) mod N`, halves rounded up; the
/// returned drift is `round(gamma rho) (Omega / gamma) (w/r)^n`.
pub fn optimal_translation_perm(spec: &UpwindSpec) -> Result<(Permutation, f64)> {
    spec.validate()?;
    let size = spec.size();
    let g = spec.gamma * spec.rho();
    let shift = round_half_up(g);
    let partition = Arc::new(Partition::with_level(Domain::unit_circle(), &[size], spec.n)?);
    let s = shift.rem_euclid(size as i64) as usize;
    let image = (0..size).map(|j| (j + s) % size).collect();
    let perm = Permutation::from_image(partition, image, spec.tau(), Method::Lattice)?;
    let omega_hat = if spec.gamma == 0.0 { 0.0 } else { shift as f64 * spec.omega / spec.gamma / spec.rho() };
    Ok((perm, omega_hat))
}

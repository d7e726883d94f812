//! Built-in observables of the benchmark experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `½ x2² - cos x1`.
pub fn obs_pendulum(x: &[f64]) -> Complex64 {
    Complex64::new(0.5 * x[1] * x[1] - x[0].cos(), 0.0)
}

/// `½ x2² - ½ x1² + ¼ x1⁴`.
pub fn obs_duffing_energy(x: &[f64]) -> Complex64 {
    let x1 = x[0] * x[0];
    Complex64::new(0.5 * x[1] * x[1] - 0.5 * x1 + 0.25 * x1 * x1, 0.0)
}

/// `½ x2² + i ½ x1²`.
pub fn obs_duffing_complex(x: &[f64]) -> Complex64 {
    Complex64::new(0.5 * x[1] * x[1], 0.5 * x[0] * x[0])
}

/// Bump centred on the middle of the unit square, zero outside the disk of radius ½.
pub fn gyre_bump(x1: f64, x2: f64) -> f64 {
    let r2 = (x1 - 0.5).powi(2) + (x2 - 0.5).powi(2);
    if r2 <= 0.25 {
        (-1.0 / (1.0 - 0.5 * r2.sqrt())).exp()
    } else {
        0.0
    }
}

/// `i sin(4 pi x1) sin(4 pi x2) + 4 psi(x1, x2)`.
pub fn obs_gyre(x: &[f64]) -> Complex64 {
    Complex64::new(
        4.0 * gyre_bump(x[0], x[1]),
        (4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin(),
    )
}

/// `e^{4 pi i x2} + 2 e^{6 pi i x1} + e^{2 pi i x3}`.
pub fn obs_abc(x: &[f64]) -> Complex64 {
    Complex64::from_polar(1.0, 4.0 * PI * x[1])
        + 2.0 * Complex64::from_polar(1.0, 6.0 * PI * x[0])
        + Complex64::from_polar(1.0, 2.0 * PI * x[2])
}

/// Fourier mode `e^{2 pi i k·x}`.
pub fn obs_fourier(k: &[i64], x: &[f64]) -> Complex64 {
    let phase: f64 = k.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum();
    Complex64::from_polar(1.0, 2.0 * PI * phase)
}

/// Observable selector of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableId {
    Pendulum,
    DuffingEnergy,
    DuffingComplex,
    Gyre,
    Abc,
    Fourier,
    UserGrid,
}

impl ObservableId {
    pub fn name(&self) -> &'static str {
        match self {
            ObservableId::Pendulum => "obs_pendulum",
            ObservableId::DuffingEnergy => "obs_duffing_energy",
            ObservableId::DuffingComplex => "obs_duffing_complex",
            ObservableId::Gyre => "obs_gyre",
            ObservableId::Abc => "obs_abc",
            ObservableId::Fourier => "obs_fourier",
            ObservableId::UserGrid => "user-grid",
        }
    }

    /// State dimension the observable is defined on; `None` for any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ObservableId::Pendulum | ObservableId::DuffingEnergy | ObservableId::DuffingComplex => Some(2),
            ObservableId::Gyre | ObservableId::Abc => Some(3),
            ObservableId::Fourier | ObservableId::UserGrid => None,
        }
    }

    /// Pointwise evaluator, for the observables given by a formula.
    pub fn evaluator(&self, wavenumber: &[i64]) -> Option<Box<dyn Fn(&[f64]) -> Complex64 + Send + Sync>> {
        Some(match self {
            ObservableId::Pendulum => Box::new(obs_pendulum),
            ObservableId::DuffingEnergy => Box::new(obs_duffing_energy),
            ObservableId::DuffingComplex => Box::new(obs_duffing_complex),
            ObservableId::Gyre => Box::new(obs_gyre),
            ObservableId::Abc => Box::new(obs_abc),
            ObservableId::Fourier => {
                let k = wavenumber.to_vec();
                Box::new(move |x| obs_fourier(&k, x))
            }
            ObservableId::UserGrid => return None,
        })
    }
}

impl fmt::Display for ObservableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObservableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "obs_pendulum" => ObservableId::Pendulum,
            "obs_duffing_energy" => ObservableId::DuffingEnergy,
            "obs_duffing_complex" => ObservableId::DuffingComplex,
            "obs_gyre" => ObservableId::Gyre,
            "obs_abc" => ObservableId::Abc,
            "obs_fourier" => ObservableId::Fourier,
            "user-grid" => ObservableId::UserGrid,
            _ => return Err(Error::ConfigInvalid(format!("unknown observable `{s}`"))),
        })
    }
}

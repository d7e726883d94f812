//! Discrete Koopman spectral engine.
//!
//! The permutation operator is unitary and splits into independent cycles.
//! On a cycle of length `c` its eigenvectors are the discrete Fourier modes,
//! with eigenvalues the `c`-th roots of unity; harmonic `m` corresponds to the
//! angle `2 pi m / c` and the frequency `2 pi m / (c tau)`, folded into the
//! band `[-pi/tau, pi/tau)`.

mod mollifier;
mod observable;
pub mod quad;
mod spectrum;

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use mollifier::{normalization_constant, Mollifier};
pub use observable::{average_observable, evolve, DiscreteObservable};
pub use spectrum::{
    band_project, compute_spectrum, cumulative, density, smoothed_project, Atom, Spectrum,
};

/// `sign(t) * ceil(|t| / tau) * tau`: the time grid point used for `t`.
pub fn xi(t: f64, tau: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    t.signum() * (t.abs() / tau).ceil() * tau
}

/// Spectral bandwidth `pi / tau`.
pub fn bandwidth(tau: f64) -> f64 {
    PI / tau
}

/// Folds `omega` into `[-bandwidth, bandwidth)` by multiples of `2 * bandwidth`.
pub fn alias_fold(omega: f64, bandwidth: f64) -> f64 {
    if (-bandwidth..bandwidth).contains(&omega) {
        return omega;
    }
    let period = 2.0 * bandwidth;
    let mut r = omega - period * ((omega + bandwidth) / period).floor();
    if r >= bandwidth {
        r -= period;
    }
    if r < -bandwidth {
        r += period;
    }
    r
}

/// Half-open frequency interval `[a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub a: f64,
    pub b: f64,
}

impl Band {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("band needs a < b, got [{a}, {b})")));
        }
        Ok(Band { a, b })
    }

    /// The whole band `[-pi/tau, pi/tau)`.
    pub fn full(tau: f64) -> Self {
        let w = bandwidth(tau);
        Band { a: -w, b: w }
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.a <= omega && omega < self.b
    }

    pub(crate) fn check_within(&self, tau: f64) -> Result<()> {
        let w = bandwidth(tau);
        let slack = 1e-12 * w;
        if self.a < -w - slack || self.b > w + slack {
            return Err(Error::BandOutOfRange { a: self.a, b: self.b, bandwidth: w });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn xi_examples() {
        assert_eq!(xi(0.0, 0.5), 0.0);
        assert!((xi(1.2, 0.5) - 1.5).abs() < 1e-15);
        assert!((xi(-1.2, 0.5) + 1.5).abs() < 1e-15);
        assert_eq!(xi(1.0, 0.5), 1.0);
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(bandwidth(1.0), PI);
        assert!((bandwidth(0.025) - 40.0 * PI).abs() < 1e-12);
        assert!((bandwidth(0.025) - 125.664).abs() < 1e-3);
        assert!((bandwidth(0.01) - 100.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn alias_examples() {
        assert_eq!(alias_fold(0.3, PI), 0.3);
        assert!((alias_fold(1.5 * PI, PI) + 0.5 * PI).abs() < 1e-15);
        assert_eq!(alias_fold(PI, PI), -PI);
        assert_eq!(alias_fold(-PI, PI), -PI);
        assert!((alias_fold(-3.5 * PI, PI) - 0.5 * PI).abs() < 1e-14);
    }

    #[test]
    fn band_checks() {
        assert!(Band::new(1.0, 1.0).is_err());
        assert!(Band::full(1.0).check_within(1.0).is_ok());
        assert!(matches!(
            Band::new(-4.0, 0.0).unwrap().check_within(1.0),
            Err(Error::BandOutOfRange { .. })
        ));
        let b = Band::new(0.0, 1.0).unwrap();
        assert!(b.contains(0.0) && !b.contains(1.0));
    }

    proptest! {
        #[test]
        fn alias_fold_lands_in_band_and_is_idempotent(omega in -1e4f64..1e4, w in 0.1f64..50.0) {
            let f = alias_fold(omega, w);
            prop_assert!(f >= -w && f < w);
            prop_assert_eq!(alias_fold(f, w), f);
            let k = ((omega - f) / (2.0 * w)).round();
            prop_assert!((omega - f - 2.0 * w * k).abs() <= 1e-9 * (1.0 + omega.abs()));
        }
    }
}

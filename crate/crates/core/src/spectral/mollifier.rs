use std::sync::OnceLock;

use super::quad;
use super::Band;
use crate::error::{Error, Result};

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// `K = 1 / ∫_{-1}^{1} exp(-1 / (1 - x^2)) dx`, computed once and cached.
pub fn normalization_constant() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| 1.0 / quad::integrate(bump, -1.0, 1.0, 1e-14))
}

/// Compactly supported smoothing kernel of half-width `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    alpha: f64,
    k: f64,
}

impl Mollifier {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("mollifier width must be > 0, got {alpha}")));
        }
        Ok(Mollifier { alpha, k: normalization_constant() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn normalization(&self) -> f64 {
        self.k
    }

    /// `phi_alpha(x, y)`, zero once `|x - y| >= alpha`.
    pub fn phi(&self, x: f64, y: f64) -> f64 {
        self.k / self.alpha * bump((x - y) / self.alpha)
    }

    /// `∫ phi_alpha(omega, xi) chi_D(xi) dxi`, the mollified band indicator.
    pub fn smoothed_indicator(&self, band: &Band, omega: f64) -> f64 {
        let lo = band.a.max(omega - self.alpha);
        let hi = band.b.min(omega + self.alpha);
        if lo >= hi {
            return 0.0;
        }
        if band.a <= omega - self.alpha && omega + self.alpha <= band.b {
            return 1.0;
        }
        let u0 = (lo - omega) / self.alpha;
        let u1 = (hi - omega) / self.alpha;
        (self.k * quad::integrate(bump, u0, u1, 1e-14)).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matches_trapezoid_oracle() {
        // The bump is flat to all orders at ±1, so the trapezoid rule converges
        // faster than any power of the step.
        let n = 20_000;
        let h = 2.0 / n as f64;
        let integral: f64 = (1..n).map(|i| bump(-1.0 + i as f64 * h)).sum::<f64>() * h;
        assert!((normalization_constant() - 1.0 / integral).abs() < 1e-10);
        assert!((normalization_constant() - 2.25228).abs() < 1e-5);
    }

    #[test]
    fn kernel_integrates_to_one() {
        let m = Mollifier::new(0.3).unwrap();
        let total = quad::integrate(|x| m.phi(x, 0.0), -0.3, 0.3, 1e-14);
        assert!((total - 1.0).abs() < 1e-8);
        assert_eq!(m.phi(0.3, 0.0), 0.0);
        assert_eq!(m.phi(-1.0, 0.0), 0.0);
    }

    #[test]
    fn smoothed_indicator_geometries() {
        let m = Mollifier::new(0.1).unwrap();
        let band = Band::new(-1.0, 1.0).unwrap();
        assert_eq!(m.smoothed_indicator(&band, 0.0), 1.0);
        assert_eq!(m.smoothed_indicator(&band, 1.5), 0.0);
        assert!((m.smoothed_indicator(&band, 1.0) - 0.5).abs() < 1e-8);
        assert!((m.smoothed_indicator(&band, -1.0) - 0.5).abs() < 1e-8);
        let mid = m.smoothed_indicator(&band, 0.95);
        assert!(mid > 0.5 && mid < 1.0);
    }

    #[test]
    fn rejects_nonpositive_width() {
        assert!(Mollifier::new(0.0).is_err());
        assert!(Mollifier::new(-1.0).is_err());
    }
}

//! Property tests over random permutations and observables.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use koopman_core::approx::{match_perm, Method, Permutation};
use koopman_core::io::cache::PermCache;
use koopman_core::spectral::{band_project, bandwidth, compute_spectrum, cumulative, density, evolve};
use koopman_core::{Band, DiscreteObservable, Domain, FlowSpec, Mollifier, Partition};

fn sample(seed: u64, q: usize, tau: f64) -> (Permutation, DiscreteObservable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image: Vec<usize> = (0..q).collect();
    image.shuffle(&mut rng);
    let p = Arc::new(Partition::new(Domain::unit_circle(), &[q]).unwrap());
    let perm = Permutation::from_image(p.clone(), image, tau, Method::Explicit).unwrap();
    let coeffs = (0..q).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    (perm, DiscreteObservable::new(p, coeffs).unwrap())
}

fn add(a: &DiscreteObservable, b: &DiscreteObservable) -> Vec<Complex64> {
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x + y).collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_composes_to_identity(seed in any::<u64>(), q in 1usize..300) {
        let (perm, _) = sample(seed, q, 0.5);
        prop_assert!(perm.compose(&perm.inverse()).unwrap().is_identity());
        let cycles = perm.cycles();
        let mut seen = vec![false; q];
        for c in cycles.iter() {
            for &j in c {
                prop_assert!(!seen[j]);
                seen[j] = true;
            }
            prop_assert_eq!(cycles.advance(c[0], c.len() as i64), c[0]);
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn atoms_resolve_the_norm(seed in any::<u64>(), q in 1usize..500, tau in 0.01f64..2.0) {
        let (perm, g) = sample(seed, q, tau);
        let s = compute_spectrum(&perm, &g, tau).unwrap();
        let w = bandwidth(tau);
        prop_assert!((s.total_weight() - g.norm_sq()).abs() <= 1e-10 * g.norm_sq());
        for a in &s.atoms {
            prop_assert!(a.weight >= 0.0);
            prop_assert!(a.omega >= -w && a.omega < w);
        }
        // Each merged atom is the squared norm of the projection onto a band isolating it.
        for (omega, weight) in s.merged().into_iter().take(5) {
            let band = Band::new((omega - 1e-9).max(-w), (omega + 1e-9).min(w)).unwrap();
            let proj = band_project(&perm, &g, tau, &band).unwrap();
            prop_assert!((proj.norm_sq() - weight).abs() <= 1e-10 * g.norm_sq().max(1e-300));
        }
    }

    #[test]
    fn projections_are_additive_and_commute(seed in any::<u64>(), q in 1usize..200, cut in -0.9f64..0.9, k in -50i64..50) {
        let tau = 1.0;
        let (perm, g) = sample(seed, q, tau);
        let w = bandwidth(tau);
        let lower = band_project(&perm, &g, tau, &Band::new(-w, cut * w).unwrap()).unwrap();
        let upper = band_project(&perm, &g, tau, &Band::new(cut * w, w).unwrap()).unwrap();
        prop_assert!(max_diff(&add(&lower, &upper), g.coeffs()) <= 1e-12);
        let a = evolve(&perm, &lower, k).unwrap();
        let b = band_project(&perm, &evolve(&perm, &g, k).unwrap(), tau, &Band::new(-w, cut * w).unwrap()).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn cumulative_is_monotone(seed in any::<u64>(), q in 1usize..200, a in -3.2f64..3.2, b in -3.2f64..3.2) {
        let (perm, g) = sample(seed, q, 1.0);
        let s = compute_spectrum(&perm, &g, 1.0).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cumulative(&s, lo) <= cumulative(&s, hi) + 1e-15);
        prop_assert_eq!(cumulative(&s, -bandwidth(1.0)), 0.0);
        prop_assert!((cumulative(&s, 4.0) - s.total_weight()).abs() <= 1e-12);
    }

    #[test]
    fn density_is_nonnegative_and_linear(seed in any::<u64>(), q in 1usize..100, alpha in 0.05f64..1.0) {
        let (perm, g) = sample(seed, q, 1.0);
        let (_, h) = sample(seed ^ 1, q, 1.0);
        let mol = Mollifier::new(alpha).unwrap();
        let grid: Vec<f64> = (0..50).map(|i| -3.0 + 0.12 * i as f64).collect();
        let sg = compute_spectrum(&perm, &g, 1.0).unwrap();
        let sh = compute_spectrum(&perm, &h, 1.0).unwrap();
        let rg = density(&sg, &mol, &grid).unwrap();
        let rh = density(&sh, &mol, &grid).unwrap();
        prop_assert!(rg.iter().all(|&r| r >= 0.0));
        // Atoms from the same permutation line up, so weights add.
        let mut both = sg.clone();
        for (a, b) in both.atoms.iter_mut().zip(&sh.atoms) {
            a.weight += b.weight;
        }
        let sum = density(&both, &mol, &grid).unwrap();
        for i in 0..grid.len() {
            prop_assert!((sum[i] - rg[i] - rh[i]).abs() <= 1e-10 * (1.0 + sum[i].abs()));
        }
    }

    #[test]
    fn mollifier_vanishes_off_support(alpha in 0.01f64..2.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let m = Mollifier::new(alpha).unwrap();
        let v = m.phi(x, y);
        prop_assert!(v >= 0.0);
        if (x - y).abs() >= alpha {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn cache_bytes_round_trip(seed in any::<u64>(), q in 1usize..2000, tau in 0.001f64..10.0) {
        let (perm, _) = sample(seed, q, tau);
        let bytes = PermCache::from_perm(&perm).to_bytes();
        let back = PermCache::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        let p2 = back.into_perm(perm.partition().clone(), Method::Explicit).unwrap();
        prop_assert_eq!(p2.image(), perm.image());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn matching_is_deterministic_per_seed(seed in any::<u64>()) {
        let flow = FlowSpec::abc_default();
        let p = Arc::new(Partition::new(flow.domain().unwrap(), &[4, 4, 4]).unwrap());
        let map = |x: &[f64]| flow.integrate_tau(0.1, x, 2);
        let a = match_perm(&p, None, &map, 0.1, 2, seed).unwrap();
        let b = match_perm(&p, None, &map, 0.1, 2, seed).unwrap();
        prop_assert_eq!(a.image(), b.image());
        prop_assert!(a.validate().is_ok());
    }
}

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::approx::Permutation;
use crate::error::{Error, Result};
use crate::partition::{CellMask, Partition};

/// Piecewise-constant observable: one complex coefficient per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteObservable {
    partition: Arc<Partition>,
    coeffs: Vec<Complex64>,
    mask: Option<Arc<CellMask>>,
}

impl DiscreteObservable {
    pub fn new(partition: Arc<Partition>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != partition.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for {} cells",
                coeffs.len(),
                partition.len()
            )));
        }
        Ok(DiscreteObservable { partition, coeffs, mask: None })
    }

    /// Zeroes the coefficients of inactive cells and remembers the mask.
    pub fn with_mask(mut self, mask: Arc<CellMask>) -> Result<Self> {
        if mask.len() != self.coeffs.len() {
            return Err(Error::InvalidArgument("mask size does not match partition".into()));
        }
        for (c, &a) in self.coeffs.iter_mut().zip(mask.flags()) {
            if !a {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Indicator of a single cell.
    pub fn indicator(partition: Arc<Partition>, cell: usize) -> Result<Self> {
        if cell >= partition.len() {
            return Err(Error::IndexOutOfRange { index: cell, len: partition.len() });
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); partition.len()];
        coeffs[cell] = Complex64::new(1.0, 0.0);
        DiscreteObservable::new(partition, coeffs)
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mask(&self) -> Option<&CellMask> {
        self.mask.as_deref()
    }

    /// `mu(X)/q * sum |g_j|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.partition.cell_measure() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `<self, other> = mu(X)/q * sum conj(self_j) other_j`.
    pub fn inner(&self, other: &DiscreteObservable) -> Result<Complex64> {
        self.check_same(other.partition())?;
        let s: Complex64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.partition.cell_measure())
    }

    /// Mean coefficient over the active cells.
    pub fn mean(&self) -> Complex64 {
        let (sum, n) = match &self.mask {
            Some(m) => (m.active_indices().map(|j| self.coeffs[j]).sum::<Complex64>(), m.active_count()),
            None => (self.coeffs.iter().sum(), self.coeffs.len()),
        };
        if n == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            sum / n as f64
        }
    }

    /// Measure of the support region: the active cells, or the whole domain.
    pub fn support_measure(&self) -> f64 {
        let n = self.mask.as_ref().map_or(self.coeffs.len(), |m| m.active_count());
        n as f64 * self.partition.cell_measure()
    }

    pub fn max_abs_diff(&self, other: &DiscreteObservable) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub(crate) fn check_same(&self, p: &Arc<Partition>) -> Result<()> {
        if Arc::ptr_eq(&self.partition, p) || *self.partition == **p {
            Ok(())
        } else {
            Err(Error::PartitionMismatch)
        }
    }

    pub(crate) fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        DiscreteObservable { partition: self.partition.clone(), coeffs, mask: self.mask.clone() }
    }
}

/// Cell averages of `g` by the composite midpoint rule.
///
/// `points_per_axis` sub-boxes per axis are used in each cell; one point is
/// the plain midpoint rule. Inactive cells receive 0.
pub fn average_observable<G>(
    g: G,
    p: &Arc<Partition>,
    mask: Option<&Arc<CellMask>>,
    points_per_axis: usize,
) -> Result<DiscreteObservable>
where
    G: Fn(&[f64]) -> Complex64 + Sync,
{
    if points_per_axis == 0 {
        return Err(Error::InvalidArgument("quadrature points must be >= 1".into()));
    }
    let m = p.dim();
    let n = points_per_axis.pow(m as u32);
    let ext = p.cell_extent().to_vec();
    let coeffs: Vec<Complex64> = (0..p.len())
        .into_par_iter()
        .map(|j| -> Result<Complex64> {
            if mask.is_some_and(|mk| !mk.is_active(j)) {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let (lo, _) = p.cell_box(j)?;
            let mut x = vec![0.0; m];
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..n {
                let mut rem = s;
                for k in 0..m {
                    let i = rem % points_per_axis;
                    rem /= points_per_axis;
                    x[k] = lo[k] + ext[k] * (i as f64 + 0.5) / points_per_axis as f64;
                }
                let v = g(&x);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::Numerical(format!("observable is {v} in cell {j} at {x:?}")));
                }
                acc += v;
            }
            Ok(acc / n as f64)
        })
        .collect::<Result<_>>()?;
    let obs = DiscreteObservable::new(p.clone(), coeffs)?;
    match mask {
        Some(mk) => obs.with_mask(mk.clone()),
        None => Ok(obs),
    }
}

/// `U^k g`: coefficient `j` becomes `g` at the cell reached by `k` forward steps from `j`.
pub fn evolve(perm: &Permutation, g: &DiscreteObservable, k: i64) -> Result<DiscreteObservable> {
    g.check_same(perm.partition())?;
    let coeffs = if k == 1 {
        perm.image().iter().map(|&l| g.coeffs[l]).collect()
    } else {
        let cycles = perm.cycles();
        (0..g.coeffs.len()).map(|j| g.coeffs[cycles.advance(j, k)]).collect()
    };
    Ok(g.with_coeffs(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::Method;
    use crate::partition::Domain;

    fn circle(q: usize) -> Arc<Partition> {
        Arc::new(Partition::new(Domain::unit_circle(), &[q]).unwrap())
    }

    #[test]
    fn averaging_examples() {
        let p = Arc::new(Partition::new(Domain::unit_torus(2).unwrap(), &[3, 4]).unwrap());
        let one = average_observable(|_| Complex64::new(1.0, 0.0), &p, None, 2).unwrap();
        assert!(one.coeffs().iter().all(|&c| c == Complex64::new(1.0, 0.0)));

        let p1 = circle(2);
        let lin = average_observable(|x| Complex64::new(x[0], 0.0), &p1, None, 1).unwrap();
        assert_eq!(lin.coeffs(), &[Complex64::new(0.25, 0.0), Complex64::new(0.75, 0.0)]);

        let p4 = circle(4);
        let ind = average_observable(
            |x| Complex64::new(if (0.75..1.0).contains(&x[0]) { 1.0 } else { 0.0 }, 0.0),
            &p4,
            None,
            3,
        )
        .unwrap();
        assert_eq!(ind, DiscreteObservable::indicator(p4, 3).unwrap());
    }

    #[test]
    fn non_finite_values_name_the_cell() {
        let p = circle(4);
        let err = average_observable(
            |x| Complex64::new(if x[0] > 0.5 { f64::NAN } else { 0.0 }, 0.0),
            &p,
            None,
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("cell 2"), "{err}");
    }

    #[test]
    fn masked_cells_are_zero() {
        let p = circle(4);
        let mask = Arc::new(CellMask::from_flags(vec![true, false, true, false]));
        let g = average_observable(|_| Complex64::new(2.0, 1.0), &p, Some(&mask), 1).unwrap();
        assert_eq!(g.coeffs()[1], Complex64::new(0.0, 0.0));
        assert!((g.support_measure() - 0.5).abs() < 1e-15);
        assert_eq!(g.mean(), Complex64::new(2.0, 1.0));
    }

    #[test]
    fn evolve_examples() {
        let p = circle(2);
        let swap = Permutation::from_image(p.clone(), vec![1, 0], 1.0, Method::Explicit).unwrap();
        let g = DiscreteObservable::new(p.clone(), vec![Complex64::new(1.0, 0.0), Complex64::new(5.0, -1.0)]).unwrap();
        assert_eq!(evolve(&swap, &g, 0).unwrap(), g);
        let once = evolve(&swap, &g, 1).unwrap();
        assert_eq!(once.coeffs(), &[g.coeffs()[1], g.coeffs()[0]]);

        let p5 = circle(5);
        let perm = Permutation::from_image(p5.clone(), vec![1, 2, 0, 4, 3], 1.0, Method::Explicit).unwrap();
        let g5 = DiscreteObservable::new(p5, (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect()).unwrap();
        let zeta = perm.cycles().period().unwrap() as i64;
        assert_eq!(zeta, 6);
        assert_eq!(evolve(&perm, &g5, zeta).unwrap(), g5);
        assert_eq!(evolve(&perm, &g5, -1).unwrap(), evolve(&perm.inverse(), &g5, 1).unwrap());
        assert_eq!(evolve(&perm, &g5, 2).unwrap(), evolve(&perm, &evolve(&perm, &g5, 1).unwrap(), 1).unwrap());
    }

    #[test]
    fn mismatched_partition() {
        let perm = Permutation::identity(circle(3), 1.0);
        let g = DiscreteObservable::indicator(circle(4), 0).unwrap();
        assert!(matches!(evolve(&perm, &g, 1), Err(Error::PartitionMismatch)));
    }
}

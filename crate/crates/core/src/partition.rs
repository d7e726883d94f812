//! Equal-measure box partitions of rectangular domains.
//!
//! Cells are axis-aligned half-open boxes indexed row-major: the last axis
//! varies fastest, so in 2D the index of multi-index `(i1, i2)` is
//! `i1 * d2 + i2`. This ordering is frozen; permutation caches depend on it.

use crate::error::{Error, Result};

/// A compact box `[lo, hi]` per axis, optionally periodic per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    periodic: Vec<bool>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, periodic: Vec<bool>) -> Result<Self> {
        let m = lower.len();
        if m == 0 || m > 3 {
            return Err(Error::InvalidArgument(format!("dimension must be 1..=3, got {m}")));
        }
        if upper.len() != m || periodic.len() != m {
            return Err(Error::InvalidArgument(
                "lower, upper and periodic lists must have equal length".into(),
            ));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "axis {axis}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Domain { lower, upper, periodic })
    }

    /// The periodic unit interval `[0, 1)`.
    pub fn unit_circle() -> Self {
        Domain { lower: vec![0.0], upper: vec![1.0], periodic: vec![true] }
    }

    /// The unit `m`-torus `[0, 1)^m`.
    pub fn unit_torus(m: usize) -> Result<Self> {
        Domain::new(vec![0.0; m], vec![1.0; m], vec![true; m])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    /// Wraps periodic coordinates into `[lo, hi)` in place.
    pub fn wrap(&self, x: &mut [f64]) {
        for k in 0..self.dim() {
            if self.periodic[k] {
                x[k] = wrap_coord(x[k], self.lower[k], self.upper[k]);
            }
        }
    }

    /// Shortest distance between two points, measured around periodic axes.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.dim() {
            let mut d = (a[k] - b[k]).abs();
            if self.periodic[k] {
                let w = self.width(k);
                d %= w;
                d = d.min(w - d);
            }
            acc += d * d;
        }
        acc.sqrt()
    }
}

pub(crate) fn wrap_coord(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut y = lo + (x - lo).rem_euclid(w);
    // rem_euclid can round up to exactly w
    if y >= hi {
        y = lo;
    }
    y
}

/// Uniform grid partition of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: Domain,
    dims: Vec<usize>,
    strides: Vec<usize>,
    q: usize,
    cell_extent: Vec<f64>,
    diam_bound: f64,
    level: u32,
}

impl Partition {
    pub fn new(domain: Domain, dims: &[usize]) -> Result<Self> {
        Self::with_level(domain, dims, 0)
    }

    pub fn with_level(domain: Domain, dims: &[usize], level: u32) -> Result<Self> {
        if dims.len() != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} cell counts, got {}",
                domain.dim(),
                dims.len()
            )));
        }
        if let Some(axis) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("axis {axis}: cell count must be >= 1")));
        }
        let q = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument("cell count overflows usize".into()))?;
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let cell_extent: Vec<f64> =
            dims.iter().enumerate().map(|(k, &d)| domain.width(k) / d as f64).collect();
        let diam_bound = cell_extent.iter().map(|w| w * w).sum::<f64>().sqrt();
        Ok(Partition { domain, dims: dims.to_vec(), strides, q, cell_extent, diam_bound, level })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        self.q == 0
    }

    pub fn cell_extent(&self) -> &[f64] {
        &self.cell_extent
    }

    pub fn diam_bound(&self) -> f64 {
        self.diam_bound
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Measure of a single cell, `mu(X) / q`.
    pub fn cell_measure(&self) -> f64 {
        self.domain.volume() / self.q as f64
    }

    pub fn index_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, j: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        self.multi_index_into(j, &mut out);
        out
    }

    pub(crate) fn multi_index_into(&self, mut j: usize, out: &mut [usize]) {
        for k in 0..self.dim() {
            out[k] = j / self.strides[k];
            j %= self.strides[k];
        }
    }

    /// Lower corner coordinate of grid line `i` on `axis`.
    ///
    /// Computed as `lo + width * (i / d)` so that refined partitions reproduce
    /// the parent corners bit for bit.
    pub fn grid_line(&self, axis: usize, i: usize) -> f64 {
        let lo = self.domain.lower[axis];
        lo + self.domain.width(axis) * (i as f64 / self.dims[axis] as f64)
    }

    /// Box `[lower, upper)` of cell `j`.
    pub fn cell_box(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_index(j)?;
        let multi = self.multi_index(j);
        let lo = multi.iter().enumerate().map(|(k, &i)| self.grid_line(k, i)).collect();
        let hi = multi.iter().enumerate().map(|(k, &i)| self.grid_line(k, i + 1)).collect();
        Ok((lo, hi))
    }

    pub fn cell_center(&self, j: usize) -> Result<Vec<f64>> {
        self.check_index(j)?;
        let mut out = vec![0.0; self.dim()];
        self.cell_center_into(j, &mut out);
        Ok(out)
    }

    pub(crate) fn cell_center_into(&self, j: usize, out: &mut [f64]) {
        let mut rem = j;
        for k in 0..self.dim() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.domain.lower[k] + (i as f64 + 0.5) * self.cell_extent[k];
        }
    }

    /// Index of the cell containing `x`.
    ///
    /// Periodic axes are wrapped first. On a non-periodic axis the closed
    /// upper bound is accepted and assigned to the last cell.
    pub fn locate(&self, x: &[f64]) -> Result<usize> {
        let mut j = 0;
        for k in 0..self.dim() {
            let i = self.locate_axis(k, x[k]).ok_or_else(|| Error::OutOfDomain {
                point: x.to_vec(),
                axis: k,
            })?;
            j += i * self.strides[k];
        }
        Ok(j)
    }

    /// Grid index of coordinate `x` along `axis`, or `None` when outside.
    pub fn locate_axis(&self, axis: usize, x: f64) -> Option<usize> {
        let lo = self.domain.lower[axis];
        let hi = self.domain.upper[axis];
        let d = self.dims[axis];
        let x = if self.domain.periodic[axis] {
            wrap_coord(x, lo, hi)
        } else {
            if !(x >= lo && x <= hi) {
                return None;
            }
            x
        };
        let mut i = ((x - lo) / self.cell_extent[axis]).floor() as usize;
        // Correct for rounding so that grid_line(i) <= x < grid_line(i + 1).
        if i >= d {
            i = d - 1;
        }
        if x < self.grid_line(axis, i) && i > 0 {
            i -= 1;
        } else if i + 1 < d && x >= self.grid_line(axis, i + 1) {
            i += 1;
        }
        Some(i)
    }

    /// Multiplies the cell count of every axis by the given factor.
    pub fn refine(&self, factor: &[usize]) -> Result<Partition> {
        if factor.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} refinement factors, got {}",
                self.dim(),
                factor.len()
            )));
        }
        if factor.iter().any(|&f| f == 0) {
            return Err(Error::InvalidArgument("refinement factor must be >= 1".into()));
        }
        let dims: Vec<usize> = self.dims.iter().zip(factor).map(|(d, f)| d * f).collect();
        Partition::with_level(self.domain.clone(), &dims, self.level + 1)
    }

    /// Children of parent cell `j` in a partition refined by `factor`.
    pub fn children(&self, j: usize, factor: &[usize]) -> Result<Vec<usize>> {
        let fine = self.refine(factor)?;
        let parent = {
            self.check_index(j)?;
            self.multi_index(j)
        };
        let mut out = Vec::new();
        let count: usize = factor.iter().product();
        let mut local = vec![0usize; self.dim()];
        for c in 0..count {
            let mut rem = c;
            for k in (0..self.dim()).rev() {
                local[k] = rem % factor[k];
                rem /= factor[k];
            }
            let multi: Vec<usize> =
                (0..self.dim()).map(|k| parent[k] * factor[k] + local[k]).collect();
            out.push(fine.index_of(&multi));
        }
        Ok(out)
    }

    /// Flags cells whose centre satisfies `h(center) <= level`.
    pub fn mask_sublevel<F>(&self, h: F, level: f64) -> CellMask
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut center = vec![0.0; self.dim()];
        let active: Vec<bool> = (0..self.q)
            .map(|j| {
                self.cell_center_into(j, &mut center);
                h(&center) <= level
            })
            .collect();
        CellMask::from_flags(active)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.q {
            return Err(Error::IndexOutOfRange { index: j, len: self.q });
        }
        Ok(())
    }
}

/// Active-cell flags over a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    active: Vec<bool>,
    count: usize,
}

impl CellMask {
    pub fn from_flags(active: Vec<bool>) -> Self {
        let count = active.iter().filter(|&&a| a).count();
        CellMask { active, count }
    }

    pub fn all(q: usize) -> Self {
        CellMask { active: vec![true; q], count: q }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.count
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.active[j]
    }

    pub fn flags(&self) -> &[bool] {
        &self.active
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }

    /// The mask whose active cells are the images of this mask's active cells.
    pub fn pushforward(&self, image: &[usize]) -> CellMask {
        let mut out = vec![false; self.active.len()];
        for j in self.active_indices() {
            out[image[j]] = true;
        }
        CellMask::from_flags(out)
    }
}

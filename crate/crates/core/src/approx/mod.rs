//! Periodic approximations: tau-maps replaced by permutations of cells.
//!
//! A [`Permutation`] stores `image[j] = l` when the approximation sends cell
//! `j` onto cell `l`.

mod hausdorff;
mod lattice;
mod matching;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::partition::{CellMask, Partition};

pub use hausdorff::{set_evolution_error, ErrorTrace};
pub use lattice::{lattice_shear_perm, lattice_splitting_perm, round_half_up};
pub use matching::{hopcroft_karp, match_perm, match_perm_sliced, MatchGraph};

/// How a permutation was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lattice,
    Matching,
    Composed,
    /// Loaded from a cache or built by hand.
    Explicit,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Lattice => "lattice",
            Method::Matching => "matching",
            Method::Composed => "composed",
            Method::Explicit => "explicit",
        })
    }
}

/// Bijection of cell indices approximating a tau-map.
#[derive(Debug, Clone)]
pub struct Permutation {
    image: Vec<usize>,
    partition: Arc<Partition>,
    tau: f64,
    method: Method,
    mask: Option<Arc<CellMask>>,
}

impl PartialEq for Permutation {
    fn eq(&self, other: &Self) -> bool {
        self.image == other.image
            && self.tau.to_bits() == other.tau.to_bits()
            && *self.partition == *other.partition
    }
}

impl Permutation {
    /// Wraps an image array after checking it is a bijection.
    pub fn from_image(
        partition: Arc<Partition>,
        image: Vec<usize>,
        tau: f64,
        method: Method,
    ) -> Result<Self> {
        if image.len() != partition.len() {
            return Err(Error::InvalidArgument(format!(
                "image has {} entries, partition has {} cells",
                image.len(),
                partition.len()
            )));
        }
        let report = validate_image(&image, None);
        if !report.is_ok() {
            return Err(Error::InvalidArgument(format!("not a bijection: {report}")));
        }
        Ok(Permutation { image, partition, tau, method, mask: None })
    }

    pub(crate) fn from_parts(
        partition: Arc<Partition>,
        image: Vec<usize>,
        tau: f64,
        method: Method,
    ) -> Self {
        debug_assert!(validate_image(&image, None).is_ok());
        Permutation { image, partition, tau, method, mask: None }
    }

    pub fn identity(partition: Arc<Partition>, tau: f64) -> Self {
        let image = (0..partition.len()).collect();
        Permutation { image, partition, tau, method: Method::Explicit, mask: None }
    }

    /// Attaches the mask the permutation is expected to keep closed.
    pub fn with_mask(mut self, mask: Arc<CellMask>) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn mask(&self) -> Option<&CellMask> {
        self.mask.as_deref()
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(j, &l)| j == l)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.image.len()];
        for (j, &l) in self.image.iter().enumerate() {
            inv[l] = j;
        }
        Permutation {
            image: inv,
            partition: self.partition.clone(),
            tau: -self.tau,
            method: self.method,
            mask: self.mask.clone(),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if !Arc::ptr_eq(&self.partition, &other.partition) && *self.partition != *other.partition {
            return Err(Error::PartitionMismatch);
        }
        let image = other.image.iter().map(|&l| self.image[l]).collect();
        Ok(Permutation {
            image,
            partition: self.partition.clone(),
            tau: self.tau + other.tau,
            method: Method::Composed,
            mask: self.mask.clone().or_else(|| other.mask.clone()),
        })
    }

    pub fn cycles(&self) -> CycleSet {
        CycleSet::from_image(&self.image)
    }

    /// Cells reached from `cells` after `k` applications (negative `k` runs backwards).
    pub fn apply_power(&self, cells: &[usize], k: i64) -> Vec<usize> {
        let cycles = self.cycles();
        cells.iter().map(|&j| cycles.advance(j, k)).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_image(&self.image, self.mask.as_deref())
    }

    pub fn validate_with_mask(&self, mask: &CellMask) -> ValidationReport {
        validate_image(&self.image, Some(mask))
    }
}

/// Disjoint cycle decomposition, stored flat.
#[derive(Debug, Clone)]
pub struct CycleSet {
    order: Vec<usize>,
    starts: Vec<usize>,
    // cell -> (cycle id, position within cycle)
    position: Vec<(u32, u32)>,
}

impl CycleSet {
    pub fn from_image(image: &[usize]) -> Self {
        let q = image.len();
        let mut seen = vec![false; q];
        let mut order = Vec::with_capacity(q);
        let mut starts = vec![0];
        let mut position = vec![(0u32, 0u32); q];
        for start in 0..q {
            if seen[start] {
                continue;
            }
            let id = (starts.len() - 1) as u32;
            let mut j = start;
            let mut pos = 0u32;
            while !seen[j] {
                seen[j] = true;
                position[j] = (id, pos);
                order.push(j);
                pos += 1;
                j = image[j];
            }
            starts.push(order.len());
        }
        CycleSet { order, starts, position }
    }

    pub fn len(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells of cycle `id` in the order the permutation visits them.
    pub fn cycle(&self, id: usize) -> &[usize] {
        &self.order[self.starts[id]..self.starts[id + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.len()).map(move |id| self.cycle(id))
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.starts.windows(2).map(|w| w[1] - w[0])
    }

    /// Least common multiple of the cycle lengths, `None` on `u128` overflow.
    pub fn period(&self) -> Option<u128> {
        let mut distinct: Vec<usize> = self.lengths().collect();
        distinct.sort_unstable();
        distinct.dedup();
        distinct.into_iter().try_fold(1u128, |acc, len| {
            let len = len as u128;
            (acc / gcd(acc, len)).checked_mul(len)
        })
    }

    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for len in self.lengths() {
            *h.entry(len).or_insert(0) += 1;
        }
        h
    }

    pub fn cycle_of(&self, cell: usize) -> (usize, usize) {
        let (id, pos) = self.position[cell];
        (id as usize, pos as usize)
    }

    /// The cell `k` steps along the cycle through `cell`.
    pub fn advance(&self, cell: usize, k: i64) -> usize {
        let (id, pos) = self.cycle_of(cell);
        let cyc = self.cycle(id);
        let c = cyc.len() as i64;
        cyc[(pos as i64 + k).rem_euclid(c) as usize]
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Outcome of [`validate_image`]. Violations are collected, never raised.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// Targets hit by more than one cell.
    pub duplicate_targets: Vec<usize>,
    /// Entries pointing outside `0..q`.
    pub out_of_range: Vec<usize>,
    /// Active cells mapped onto inactive cells.
    pub mask_violations: Vec<usize>,
    /// Cycle length -> number of cycles; empty when the image is not a bijection.
    pub cycle_histogram: BTreeMap<usize, usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violation_count() == 0
    }

    pub fn violation_count(&self) -> usize {
        self.duplicate_targets.len() + self.out_of_range.len() + self.mask_violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok, cycle lengths {:?}", self.cycle_histogram);
        }
        write!(
            f,
            "{} duplicate targets {:?}, {} out-of-range entries, {} mask violations",
            self.duplicate_targets.len(),
            &self.duplicate_targets[..self.duplicate_targets.len().min(8)],
            self.out_of_range.len(),
            self.mask_violations.len()
        )
    }
}

/// Checks bijectivity and, when a mask is given, closure of the active set.
pub fn validate_image(image: &[usize], mask: Option<&CellMask>) -> ValidationReport {
    let q = image.len();
    let mut hits = vec![0u32; q];
    let mut report = ValidationReport::default();
    for (j, &l) in image.iter().enumerate() {
        if l >= q {
            report.out_of_range.push(j);
            continue;
        }
        hits[l] += 1;
        if hits[l] == 2 {
            report.duplicate_targets.push(l);
        }
    }
    if let Some(mask) = mask {
        if mask.len() == q {
            report.mask_violations = mask
                .active_indices()
                .filter(|&j| image[j] < q && !mask.is_active(image[j]))
                .collect();
        } else {
            report.mask_violations = (0..q).collect();
        }
    }
    if report.duplicate_targets.is_empty() && report.out_of_range.is_empty() {
        report.cycle_histogram = CycleSet::from_image(image).histogram();
    }
    report
}

use std::sync::Arc;

use rayon::prelude::*;

use super::{Method, Permutation};
use crate::error::{Error, Result};
use crate::flows::{ShearStep, SplittingScheme};
use crate::partition::{CellMask, Partition};

/// Nearest integer, rounding half-integers upwards.
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Exact lattice version of a shear.
///
/// Every fiber along the sheared axis moves by the integer shift nearest to
/// `delta(fiber centre) / cell width`, wrapping around the axis. A uniform
/// shift within a fiber is a bijection of that fiber, so the result is a
/// permutation by construction.
///
/// On a non-periodic axis the wrap is only admissible when no guarded cell
/// crosses the seam; `guard` defaults to every cell.
pub fn lattice_shear_perm(
    p: &Arc<Partition>,
    step: &ShearStep,
    tau: f64,
    guard: Option<&CellMask>,
) -> Result<Permutation> {
    let axis = step.axis();
    if axis >= p.dim() {
        return Err(Error::InvalidArgument(format!(
            "shear axis {axis} on a {}-dimensional partition",
            p.dim()
        )));
    }
    let d = p.dims()[axis];
    let stride = p.stride(axis);
    let width = p.cell_extent()[axis];
    let periodic = p.domain().is_periodic(axis);
    let n_fibers = p.len() / d;

    // fiber f <-> (outer, inner) with cell = outer * d * stride + i * stride + inner
    let fiber_base = |f: usize| (f / stride) * d * stride + f % stride;

    let shifts: Vec<i64> = (0..n_fibers)
        .into_par_iter()
        .map_init(
            || vec![0.0; p.dim()],
            |center, f| {
                p.cell_center_into(fiber_base(f), center);
                round_half_up(step.displacement(center) / width)
            },
        )
        .collect();

    if let Some((f, s)) = shifts.iter().enumerate().find(|(_, s)| s.unsigned_abs() as usize >= d) {
        return Err(Error::InvalidArgument(format!(
            "shear on axis {axis} shifts fiber {f} by {s} cells, exceeding the {d} cells of the axis"
        )));
    }

    if !periodic {
        for (f, &s) in shifts.iter().enumerate() {
            if s == 0 {
                continue;
            }
            let base = fiber_base(f);
            for i in 0..d {
                let cell = base + i * stride;
                if guard.is_some_and(|g| !g.is_active(cell)) {
                    continue;
                }
                let target = i as i64 + s;
                if target < 0 || target >= d as i64 {
                    return Err(Error::SeamViolation { axis, cell });
                }
            }
        }
    }

    let image: Vec<usize> = (0..p.len())
        .into_par_iter()
        .map(|j| {
            let outer = j / (d * stride);
            let i = (j / stride) % d;
            let inner = j % stride;
            let s = shifts[outer * stride + inner];
            let t = (i as i64 + s).rem_euclid(d as i64) as usize;
            j - i * stride + t * stride
        })
        .collect();

    Ok(Permutation::from_parts(p.clone(), image, tau, Method::Lattice))
}

/// Composes the lattice shears of a splitting in application order.
///
/// The guard mask is pushed forward through each step so that later shears
/// check the cells the active set actually occupies.
pub fn lattice_splitting_perm(
    p: &Arc<Partition>,
    scheme: &SplittingScheme,
    guard: Option<&CellMask>,
) -> Result<Permutation> {
    let mut current = guard.cloned();
    let mut total: Option<Permutation> = None;
    let share = scheme.tau / scheme.steps.len().max(1) as f64;
    for step in &scheme.steps {
        let perm = lattice_shear_perm(p, step, share, current.as_ref())?;
        if let Some(g) = current.as_mut() {
            *g = g.pushforward(perm.image());
        }
        total = Some(match total {
            None => perm,
            Some(acc) => perm.compose(&acc)?,
        });
    }
    let mut perm = total.unwrap_or_else(|| Permutation::identity(p.clone(), 0.0));
    perm.tau = scheme.tau;
    Ok(perm)
}

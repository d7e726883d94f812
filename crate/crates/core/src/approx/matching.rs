//! Periodic approximations from maximum-cardinality bipartite matching.
//!
//! Left vertices are source cells, right vertices are target cells. Cell `k`
//! is joined to cell `l` when a sample point of `k` lands in `l` under the
//! tau-map. Matching starts from the greedy assignment `k -> cell of
//! map(centre of k)` and is completed with Hopcroft-Karp augmenting phases.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Method, Permutation};
use crate::error::{Error, Result};
use crate::partition::{CellMask, Partition};

const NIL: u32 = u32::MAX;
const INF: u32 = u32::MAX;

/// Sampled bipartite graph between left cells and right cells.
#[derive(Debug, Clone)]
pub struct MatchGraph {
    /// Global cell index of each left vertex.
    pub left: Vec<usize>,
    /// Global cell index of each right vertex.
    pub right: Vec<usize>,
    /// CSR offsets into `targets`, length `left.len() + 1`.
    pub offsets: Vec<usize>,
    /// Local right-vertex ids.
    pub targets: Vec<u32>,
    /// Number of samples supporting each edge.
    pub counts: Vec<u32>,
    /// Right vertex hit by the image of each left cell's centre, if any.
    pub greedy: Vec<u32>,
}

impl MatchGraph {
    /// Builds the graph by pushing stratified samples through `map`.
    ///
    /// `samples_per_axis` strata per axis give `samples_per_axis^m` jittered
    /// points per cell. Images outside the domain or outside `right` add no edge.
    pub fn build<M, R>(
        p: &Partition,
        left: Vec<usize>,
        right: Vec<usize>,
        right_index: R,
        map: &M,
        samples_per_axis: usize,
        seed: u64,
    ) -> Result<MatchGraph>
    where
        M: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
        R: Fn(usize) -> Option<u32> + Sync,
    {
        if samples_per_axis == 0 {
            return Err(Error::InvalidArgument("samples per cell must be >= 1".into()));
        }
        let m = p.dim();
        let n_samples = samples_per_axis.pow(m as u32);
        let rows: Vec<(Vec<(u32, u32)>, u32)> = left
            .par_iter()
            .map(|&cell| -> Result<_> {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (cell as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut hits: Vec<u32> = Vec::with_capacity(n_samples + 1);
                let center = p.cell_center(cell)?;
                let greedy = p
                    .locate(&map(&center)?)
                    .ok()
                    .and_then(&right_index)
                    .unwrap_or(NIL);
                let (lo, _) = p.cell_box(cell)?;
                let ext = p.cell_extent();
                let mut x = vec![0.0; m];
                for s in 0..n_samples {
                    let mut rem = s;
                    for k in 0..m {
                        let stratum = rem % samples_per_axis;
                        rem /= samples_per_axis;
                        let u: f64 = rng.random();
                        x[k] = lo[k] + ext[k] * (stratum as f64 + u) / samples_per_axis as f64;
                    }
                    if let Some(r) = p.locate(&map(&x)?).ok().and_then(&right_index) {
                        hits.push(r);
                    }
                }
                if greedy != NIL {
                    hits.push(greedy);
                }
                hits.sort_unstable();
                let mut edges: Vec<(u32, u32)> = Vec::new();
                for r in hits {
                    match edges.last_mut() {
                        Some((t, c)) if *t == r => *c += 1,
                        _ => edges.push((r, 1)),
                    }
                }
                Ok((edges, greedy))
            })
            .collect::<Result<_>>()?;

        let mut offsets = Vec::with_capacity(left.len() + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut counts = Vec::new();
        let mut greedy = Vec::with_capacity(left.len());
        for (edges, g) in rows {
            for (t, c) in edges {
                targets.push(t);
                counts.push(c);
            }
            offsets.push(targets.len());
            greedy.push(g);
        }
        Ok(MatchGraph { left, right, offsets, targets, counts, greedy })
    }

    pub fn edges(&self, u: usize) -> &[u32] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }
}

/// Maximum-cardinality matching. Returns the right vertex matched to each
/// left vertex (`None` when unmatched).
pub fn hopcroft_karp(graph: &MatchGraph) -> Vec<Option<usize>> {
    let n_left = graph.left.len();
    let n_right = graph.right.len();
    let mut pair_u = vec![NIL; n_left];
    let mut pair_v = vec![NIL; n_right];

    // Greedy seed: the image of the cell centre, when free.
    for u in 0..n_left {
        let g = graph.greedy[u];
        if g != NIL && pair_v[g as usize] == NIL {
            pair_u[u] = g;
            pair_v[g as usize] = u as u32;
        }
    }
    // Then any free neighbour.
    for u in 0..n_left {
        if pair_u[u] == NIL {
            if let Some(&v) = graph.edges(u).iter().find(|&&v| pair_v[v as usize] == NIL) {
                pair_u[u] = v;
                pair_v[v as usize] = u as u32;
            }
        }
    }

    let mut dist = vec![INF; n_left];
    let mut cursor = vec![0usize; n_left];
    let mut queue = VecDeque::new();
    let mut stack: Vec<(u32, u32)> = Vec::new();
    loop {
        // BFS layers from free left vertices.
        queue.clear();
        for u in 0..n_left {
            if pair_u[u] == NIL {
                dist[u] = 0;
                queue.push_back(u as u32);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in graph.edges(u as usize) {
                let w = pair_v[v as usize];
                if w == NIL {
                    found = true;
                } else if dist[w as usize] == INF {
                    dist[w as usize] = dist[u as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }

        // Iterative DFS along the layered graph.
        for u in 0..n_left {
            cursor[u] = graph.offsets[u];
        }
        for root in 0..n_left {
            if pair_u[root] != NIL {
                continue;
            }
            stack.clear();
            stack.push((root as u32, NIL));
            while let Some(&(u, _)) = stack.last() {
                let u = u as usize;
                if cursor[u] == graph.offsets[u + 1] {
                    dist[u] = INF;
                    stack.pop();
                    continue;
                }
                let v = graph.targets[cursor[u]];
                cursor[u] += 1;
                let w = pair_v[v as usize];
                if w == NIL {
                    // Augment: each frame takes the vertex it advanced through.
                    stack.last_mut().unwrap().1 = v;
                    for &(fu, fv) in stack.iter() {
                        pair_u[fu as usize] = fv;
                        pair_v[fv as usize] = fu;
                    }
                    stack.clear();
                    break;
                } else if dist[w as usize] != INF && dist[w as usize] == dist[u] + 1 {
                    stack.last_mut().unwrap().1 = v;
                    stack.push((w, NIL));
                }
            }
        }
    }
    pair_u.into_iter().map(|v| (v != NIL).then_some(v as usize)).collect()
}

fn solve_block<M>(
    p: &Partition,
    left: Vec<usize>,
    right: Vec<usize>,
    local: &[u32],
    block_of: impl Fn(usize) -> usize + Sync,
    target_block: usize,
    map: &M,
    samples_per_axis: usize,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, usize)>
where
    M: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let right_index = |cell: usize| {
        let r = local[cell];
        (r != NIL && block_of(cell) == target_block).then_some(r)
    };
    let graph = MatchGraph::build(p, left, right, right_index, map, samples_per_axis, seed)?;
    let matching = hopcroft_karp(&graph);
    let mut pairs = Vec::with_capacity(matching.len());
    let mut unmatched = 0;
    for (u, m) in matching.into_iter().enumerate() {
        match m {
            Some(v) => pairs.push((graph.left[u], graph.right[v])),
            None => unmatched += 1,
        }
    }
    Ok((pairs, unmatched))
}

/// Periodic approximation of `map` by a perfect matching over the active cells.
///
/// Inactive cells map to themselves. The result is deterministic in `seed`.
pub fn match_perm<M>(
    p: &Arc<Partition>,
    mask: Option<&CellMask>,
    map: &M,
    tau: f64,
    samples_per_axis: usize,
    seed: u64,
) -> Result<Permutation>
where
    M: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let active: Vec<usize> = match mask {
        Some(mask) => mask.active_indices().collect(),
        None => (0..p.len()).collect(),
    };
    let mut local = vec![NIL; p.len()];
    for (i, &c) in active.iter().enumerate() {
        local[c] = i as u32;
    }
    let (pairs, unmatched) =
        solve_block(p, active.clone(), active, &local, |_| 0, 0, map, samples_per_axis, seed)?;
    finish(p, mask, pairs, unmatched, tau)
}

/// Matching split into independent slices along `axis`.
///
/// Slice `s` is matched onto slice `s + slice_shift` (mod the slice count),
/// which is exact for flows whose tau-map advances `axis` by a whole number
/// of cells. Each slice pair is solved on its own worker.
#[allow(clippy::too_many_arguments)]
pub fn match_perm_sliced<M>(
    p: &Arc<Partition>,
    mask: Option<&CellMask>,
    map: &M,
    tau: f64,
    axis: usize,
    slice_shift: i64,
    samples_per_axis: usize,
    seed: u64,
) -> Result<Permutation>
where
    M: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if axis >= p.dim() {
        return Err(Error::InvalidArgument(format!("slice axis {axis} out of range")));
    }
    let d = p.dims()[axis];
    let stride = p.stride(axis);
    let slice_of = |cell: usize| (cell / stride) % d;
    let is_active = |cell: usize| mask.is_none_or(|m| m.is_active(cell));

    let mut slices: Vec<Vec<usize>> = vec![Vec::new(); d];
    for cell in (0..p.len()).filter(|&c| is_active(c)) {
        slices[slice_of(cell)].push(cell);
    }
    let mut local = vec![NIL; p.len()];
    for slice in &slices {
        for (i, &c) in slice.iter().enumerate() {
            local[c] = i as u32;
        }
    }

    let results: Vec<(Vec<(usize, usize)>, usize)> = (0..d)
        .into_par_iter()
        .map(|s| {
            let t = (s as i64 + slice_shift).rem_euclid(d as i64) as usize;
            solve_block(
                p,
                slices[s].clone(),
                slices[t].clone(),
                &local,
                slice_of,
                t,
                map,
                samples_per_axis,
                seed.wrapping_add(s as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    let mut unmatched = 0;
    for (mut block, u) in results {
        pairs.append(&mut block);
        unmatched += u;
    }
    finish(p, mask, pairs, unmatched, tau)
}

fn finish(
    p: &Arc<Partition>,
    mask: Option<&CellMask>,
    pairs: Vec<(usize, usize)>,
    unmatched: usize,
    tau: f64,
) -> Result<Permutation> {
    if unmatched > 0 {
        return Err(Error::NoPerfectMatching { unmatched });
    }
    let mut image: Vec<usize> = (0..p.len()).collect();
    for (k, l) in pairs {
        image[k] = l;
    }
    let perm = Permutation::from_image(p.clone(), image, tau, Method::Matching)
        .map_err(|e| Error::Numerical(format!("matching produced a non-bijection: {e}")))?;
    Ok(match mask {
        Some(m) => perm.with_mask(Arc::new(m.clone())),
        None => perm,
    })
}

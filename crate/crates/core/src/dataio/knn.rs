//! Exact k-nearest-neighbor graphs with RBF weights.
//!
//! Candidate distances come from blocked matrix products
//! `‖x‖² + ‖y‖² − 2⟨x, y⟩`. Every point whose approximate distance could be
//! within the k-th smallest, given a rounding bound on the product, is
//! rescored with a direct difference sum, so the selected neighbors are the
//! exact ones.

use ndarray::{s, Array1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};

const BLOCK: usize = 256;
const MIN_WEIGHT: f64 = 1e-12;

/// A neighbor and its squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub sq_dist: f64,
}

fn exact_sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// The `k` nearest other points of each row, nearest first; equal distances
/// go to the lower index.
pub fn knn_neighbors(features: ArrayView2<'_, f32>, k: usize) -> Result<Vec<Vec<Neighbor>>> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, num_nodes: n });
    }
    let x = features.as_standard_layout();
    let d = x.ncols();
    let sq_norms: Array1<f64> = x
        .axis_iter(Axis(0))
        .map(|r| r.iter().map(|&v| f64::from(v) * f64::from(v)).sum())
        .collect();
    let norms = sq_norms.mapv(f64::sqrt);
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    // bound on |fl(⟨x, y⟩) − ⟨x, y⟩| relative to ‖x‖‖y‖ for f32 products of length d
    let unit = f64::from(f32::EPSILON) * 0.5;
    let gamma = 1.01 * (d as f64 + 2.0) * unit / (1.0 - (d as f64 + 2.0) * unit).max(0.5);
    let xt = x.t();
    let row = |u: usize| x.row(u).to_slice().expect("standard layout");

    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    let blocks: Vec<Vec<Vec<Neighbor>>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + BLOCK).min(n);
            let dots = x.slice(s![start..end, ..]).dot(&xt);
            let mut approx = vec![0.0f64; n];
            let mut out = Vec::with_capacity(end - start);
            for (i, u) in (start..end).enumerate() {
                let dr = dots.row(i);
                for v in 0..n {
                    approx[v] = sq_norms[u] + sq_norms[v] - 2.0 * f64::from(dr[v]);
                }
                approx[u] = f64::INFINITY;
                let mut sorted = approx.clone();
                sorted.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
                let kth = sorted[k - 1];
                let slack = 4.0 * gamma * norms[u] * max_norm + 1e-9;
                let mut cands: Vec<Neighbor> = (0..n)
                    .filter(|&v| v != u && approx[v] <= kth + slack)
                    .map(|v| Neighbor {
                        index: v,
                        sq_dist: exact_sq_dist(row(u), row(v)),
                    })
                    .collect();
                cands.sort_by(|a, b| a.sq_dist.total_cmp(&b.sq_dist).then(a.index.cmp(&b.index)));
                cands.truncate(k);
                out.push(cands);
            }
            out
        })
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

/// Median over nodes of the distance (not squared) to the k-th neighbor.
pub fn median_kth_distance(neighbors: &[Vec<Neighbor>]) -> f64 {
    let mut d: Vec<f64> = neighbors
        .iter()
        .filter_map(|list| list.last().map(|nb| nb.sq_dist.sqrt()))
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

/// Union of the neighbor relations with `w = exp(−d²/σ²)`, clamped to
/// `[1e-12, 1]`.
pub fn graph_from_neighbors(neighbors: &[Vec<Neighbor>], sigma: f64) -> Result<Graph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    let inv = 1.0 / (sigma * sigma);
    let triplets = neighbors.iter().enumerate().flat_map(|(u, list)| {
        list.iter().map(move |nb| {
            let w = (-nb.sq_dist * inv).exp().clamp(MIN_WEIGHT, 1.0);
            (u.min(nb.index), u.max(nb.index), w)
        })
    });
    build_graph(triplets.collect::<Vec<_>>(), neighbors.len())
}

pub fn build_knn_graph(features: ArrayView2<'_, f32>, k: usize, sigma: f64) -> Result<Graph> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    graph_from_neighbors(&knn_neighbors(features, k)?, sigma)
}

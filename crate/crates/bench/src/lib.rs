//! Synthetic inputs for the criterion benches.

use ghl_core::{build_graph, BoundarySpec, Graph, NodeSignal};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ring where each node also links to `extra` random nodes, roughly the
/// density of a knn graph with k = 2 + extra.
pub fn sparse_graph(n: usize, extra: usize, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::with_capacity(n * (extra + 1));
    for u in 0..n {
        edges.push((u, (u + 1) % n, r.random_range(0.1..1.0)));
        for _ in 0..extra {
            let v = r.random_range(0..n);
            if v != u {
                edges.push((u, v, r.random_range(0.1..1.0)));
            }
        }
    }
    // random picks can repeat a pair with a different weight; keep the first
    edges.sort_by_key(|&(u, v, _)| (u.min(v), u.max(v)));
    edges.dedup_by_key(|&mut (u, v, _)| (u.min(v), u.max(v)));
    build_graph(edges, n).expect("valid graph")
}

pub fn signal(n: usize, k: usize, seed: u64) -> NodeSignal {
    let mut r = rng(seed);
    NodeSignal::from_array(Array2::from_shape_fn((n, k), |_| r.random_range(-1.0..1.0))).expect("finite")
}

/// Every `stride`-th node labeled, classes cycling through `k`.
pub fn boundary(n: usize, k: usize, stride: usize) -> BoundarySpec {
    BoundarySpec::new(k, (0..n).step_by(stride).map(|u| (u, (u / stride) % k))).expect("valid labels")
}

pub fn pixels(n: usize, d: usize, seed: u64) -> Array2<f32> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, d), |_| r.random_range(0.0f32..1.0))
}

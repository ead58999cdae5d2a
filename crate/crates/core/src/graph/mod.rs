//! Symmetric weighted graphs and the normalized difference operators.
//!
//! Both orientations of every edge are stored explicitly in CSR order (sorted
//! by source, then target), so an [`EdgeSignal`] row index is a directed edge
//! index. The undirected view lists each edge once as `(u, v)` with `u < v`,
//! sorted by `(u, v)`; that order is the canonical one used by edge parameters,
//! checkpoints and fingerprints.

mod ops;
mod signal;

pub use ops::{dirichlet_energy, divergence, gradient, laplacian};
pub(crate) use ops::laplacian_into;
pub use signal::{EdgeSignal, NodeSignal};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    sources: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    reverse: Vec<usize>,
    to_undirected: Vec<usize>,
    canonical: Vec<usize>,
    degrees: Vec<f64>,
    inv_sqrt_degrees: Vec<f64>,
}

/// Builds a symmetric graph from `(u, v, w)` triplets.
///
/// A pair given in one orientation only is mirrored. Repeating a pair (in
/// either orientation) is allowed when the weight is identical.
pub fn build_graph<I>(triplets: I, num_nodes: usize) -> Result<Graph>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    let mut canonical: Vec<(usize, usize, f64)> = Vec::new();
    for (u, v, w) in triplets {
        for id in [u, v] {
            if id >= num_nodes {
                return Err(Error::NodeIdOutOfRange { id, num_nodes });
            }
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if !(w > 0.0) {
            return Err(Error::NonPositiveWeight { u, v, weight: w });
        }
        if w > 1.0 {
            return Err(Error::WeightAboveOne { u, v, weight: w });
        }
        canonical.push((u.min(v), u.max(v), w));
    }
    canonical.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut deduped: Vec<(usize, usize, f64)> = Vec::with_capacity(canonical.len());
    for (u, v, w) in canonical {
        match deduped.last() {
            Some(&(pu, pv, pw)) if pu == u && pv == v => {
                if pw != w {
                    return Err(Error::ConflictingWeight {
                        u,
                        v,
                        first: pw,
                        second: w,
                    });
                }
            }
            _ => deduped.push((u, v, w)),
        }
    }
    Ok(Graph::from_canonical(num_nodes, &deduped))
}

impl Graph {
    /// `edges` must be sorted, deduplicated, `u < v`, and already validated.
    fn from_canonical(num_nodes: usize, edges: &[(usize, usize, f64)]) -> Graph {
        let mut counts = vec![0usize; num_nodes + 1];
        for &(u, v, _) in edges {
            counts[u + 1] += 1;
            counts[v + 1] += 1;
        }
        for i in 0..num_nodes {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let m = offsets[num_nodes];
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; m];
        let mut weights = vec![0.0; m];
        let mut to_undirected = vec![0usize; m];
        // Canonical edges are sorted by (u, v), so each source's slots come out
        // sorted by target: for source x, targets below x arrive while scanning
        // edges (t, x) in increasing t, before any edge (x, t) with t > x.
        for (e, &(u, v, w)) in edges.iter().enumerate() {
            let iu = fill[u];
            fill[u] += 1;
            targets[iu] = v;
            weights[iu] = w;
            to_undirected[iu] = e;
            let iv = fill[v];
            fill[v] += 1;
            targets[iv] = u;
            weights[iv] = w;
            to_undirected[iv] = e;
        }
        let mut sources = vec![0usize; m];
        for u in 0..num_nodes {
            sources[offsets[u]..offsets[u + 1]].fill(u);
        }
        let mut canonical = vec![0usize; edges.len()];
        let mut reverse = vec![0usize; m];
        for i in 0..m {
            let (u, v) = (sources[i], targets[i]);
            if u < v {
                canonical[to_undirected[i]] = i;
            }
            let range = offsets[v]..offsets[v + 1];
            let j = targets[range.clone()]
                .binary_search(&u)
                .expect("mirrored edge present");
            reverse[i] = range.start + j;
        }
        let degrees: Vec<f64> = (0..num_nodes)
            .map(|u| weights[offsets[u]..offsets[u + 1]].iter().sum())
            .collect();
        let inv_sqrt_degrees = degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        Graph {
            num_nodes,
            offsets,
            sources,
            targets,
            weights,
            reverse,
            to_undirected,
            canonical,
            degrees,
            inv_sqrt_degrees,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of directed edges (twice the undirected count).
    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn num_undirected_edges(&self) -> usize {
        self.canonical.len()
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree(&self, u: usize) -> f64 {
        self.degrees[u]
    }

    pub(crate) fn inv_sqrt_degrees(&self) -> &[f64] {
        &self.inv_sqrt_degrees
    }

    /// Directed-edge index range of the edges leaving `u`.
    pub fn edge_range(&self, u: usize) -> std::ops::Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.edge_range(u);
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    pub fn source(&self, e: usize) -> usize {
        self.sources[e]
    }

    pub fn target(&self, e: usize) -> usize {
        self.targets[e]
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the opposite orientation of directed edge `e`.
    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }

    pub fn undirected_index(&self, e: usize) -> usize {
        self.to_undirected[e]
    }

    /// Directed edges `(u, v, w)` in storage order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_edges()).map(|e| (self.sources[e], self.targets[e], self.weights[e]))
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in canonical order.
    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.canonical
            .iter()
            .map(|&e| (self.sources[e], self.targets[e], self.weights[e]))
    }

    pub fn undirected_weights(&self) -> Vec<f64> {
        self.canonical.iter().map(|&e| self.weights[e]).collect()
    }

    /// Same topology with new weights, one per undirected edge in canonical order.
    pub fn with_undirected_weights(&self, weights: &[f64]) -> Result<Graph> {
        if weights.len() != self.num_undirected_edges() {
            return Err(Error::IndexMismatch {
                expected: self.num_undirected_edges(),
                actual: weights.len(),
            });
        }
        let edges: Vec<(usize, usize, f64)> = self
            .canonical
            .iter()
            .zip(weights)
            .map(|(&e, &w)| (self.sources[e], self.targets[e], w))
            .collect();
        for &(u, v, w) in &edges {
            if !(w > 0.0) {
                return Err(Error::NonPositiveWeight { u, v, weight: w });
            }
            if w > 1.0 {
                return Err(Error::WeightAboveOne { u, v, weight: w });
            }
        }
        Ok(Graph::from_canonical(self.num_nodes, &edges))
    }

    /// Connected-component id per node; ids are assigned in order of the
    /// smallest node of each component.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.num_nodes];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.num_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in &self.targets[self.edge_range(u)] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// First 128 bits of SHA-256 over the topology: `u64` LE node count, then
    /// `u32` LE `(u, v)` pairs of the canonical undirected edge list. Weights
    /// are not part of the fingerprint.
    pub fn fingerprint(&self) -> [u8; 16] {
        let mut hasher = Sha256::new();
        hasher.update((self.num_nodes as u64).to_le_bytes());
        for (u, v, _) in self.undirected_edges() {
            hasher.update((u as u32).to_le_bytes());
            hasher.update((v as u32).to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        out
    }

    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_is_mirrored() {
        let g = build_graph([(0, 1, 1.0)], 2).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(g.degrees(), &[1.0, 1.0]);
        assert_eq!(g.reverse(0), 1);
    }

    #[test]
    fn degrees_are_weight_sums() {
        let g = build_graph([(0, 1, 0.5), (1, 2, 0.5)], 3).unwrap();
        assert_eq!(g.degrees(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(matches!(build_graph([(0, 0, 1.0)], 1), Err(Error::SelfLoop(0))));
        assert!(matches!(
            build_graph([(0, 1, 0.0)], 2),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            build_graph([(0, 1, f64::NAN)], 2),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            build_graph([(0, 1, 1.5)], 2),
            Err(Error::WeightAboveOne { .. })
        ));
        assert!(matches!(
            build_graph([(0, 3, 1.0)], 2),
            Err(Error::NodeIdOutOfRange { id: 3, num_nodes: 2 })
        ));
        assert!(matches!(
            build_graph([(0, 1, 0.5), (1, 0, 0.25)], 2),
            Err(Error::ConflictingWeight { .. })
        ));
    }

    #[test]
    fn duplicate_with_same_weight_is_merged() {
        let g = build_graph([(0, 1, 0.5), (1, 0, 0.5), (0, 1, 0.5)], 2).unwrap();
        assert_eq!(g.num_undirected_edges(), 1);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn csr_order_and_reverse_links() {
        let g = build_graph([(2, 0, 0.3), (1, 2, 0.7), (0, 1, 0.1), (3, 1, 0.9)], 5).unwrap();
        let edges: Vec<_> = g.edges().map(|(u, v, _)| (u, v)).collect();
        let mut sorted = edges.clone();
        sorted.sort();
        assert_eq!(edges, sorted);
        for e in 0..g.num_edges() {
            let r = g.reverse(e);
            assert_eq!(g.source(r), g.target(e));
            assert_eq!(g.target(r), g.source(e));
            assert_eq!(g.weight(r), g.weight(e));
            assert_eq!(g.undirected_index(r), g.undirected_index(e));
        }
        let und: Vec<_> = g.undirected_edges().collect();
        assert_eq!(und, vec![(0, 1, 0.1), (0, 2, 0.3), (1, 2, 0.7), (1, 3, 0.9)]);
        assert_eq!(g.degree(4), 0.0);
    }

    #[test]
    fn reweighting_keeps_topology() {
        let g = build_graph([(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap();
        let h = g.with_undirected_weights(&[0.25, 0.5]).unwrap();
        assert_eq!(h.degrees(), &[0.25, 0.75, 0.5]);
        assert_eq!(g.fingerprint(), h.fingerprint());
        assert!(matches!(
            g.with_undirected_weights(&[0.5]),
            Err(Error::IndexMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn components_and_fingerprint() {
        let g = build_graph([(0, 1, 1.0), (3, 4, 1.0)], 5).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 2, 2]);
        let h = build_graph([(0, 1, 1.0), (2, 4, 1.0)], 5).unwrap();
        assert_ne!(g.fingerprint(), h.fingerprint());
        assert_eq!(g.fingerprint_hex().len(), 32);
    }
}

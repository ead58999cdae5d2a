use crate::error::{Error, Result};
use crate::graph::Graph;

const LOGIT_CLAMP: f64 = 1e-4;

pub(crate) fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // keep the weight strictly positive even when the logit underflows
    s.max(f64::MIN_POSITIVE)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One logit per undirected edge, in the graph's canonical order. Both
/// orientations of an edge share it, so materialized weights are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightParams {
    pub theta: Vec<f64>,
}

impl EdgeWeightParams {
    /// `θ = logit(w)` with `w` clamped to `[1e-4, 1 − 1e-4]`.
    pub fn from_graph(base: &Graph) -> Self {
        let theta = base
            .undirected_weights()
            .into_iter()
            .map(|w| logit(w.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP)))
            .collect();
        Self { theta }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.theta.iter().map(|&t| sigmoid(t)).collect()
    }
}

/// `base` with `w(u,v) = w(v,u) = sigmoid(θ_e)` on each undirected edge.
pub fn materialize_weights(theta: &EdgeWeightParams, base: &Graph) -> Result<Graph> {
    if theta.len() != base.num_undirected_edges() {
        return Err(Error::IndexMismatch {
            expected: base.num_undirected_edges(),
            actual: theta.len(),
        });
    }
    base.with_undirected_weights(&theta.weights())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn base() -> Graph {
        build_graph([(0, 1, 0.3), (1, 2, 1.0), (0, 2, 0.75)], 3).unwrap()
    }

    #[test]
    fn zero_logit_is_half() {
        let g = base();
        let t = EdgeWeightParams { theta: vec![0.0; 3] };
        let m = materialize_weights(&t, &g).unwrap();
        assert!(m.weights().iter().all(|&w| w == 0.5));
    }

    #[test]
    fn large_logit_saturates() {
        let g = base();
        let t = EdgeWeightParams { theta: vec![30.0; 3] };
        let m = materialize_weights(&t, &g).unwrap();
        assert!(m.weights().iter().all(|&w| (1.0 - w) < 1e-12 && w <= 1.0));
        let t = EdgeWeightParams { theta: vec![-800.0; 3] };
        assert!(materialize_weights(&t, &g).unwrap().weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn logit_round_trip_reproduces_base() {
        let g = base();
        let m = materialize_weights(&EdgeWeightParams::from_graph(&g), &g).unwrap();
        for ((_, _, a), (_, _, b)) in g.edges().zip(m.edges()) {
            let target = a.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
            assert!((target - b).abs() < 1e-10);
        }
        assert_eq!(m.fingerprint(), g.fingerprint());
    }

    #[test]
    fn wrong_length_is_rejected() {
        let t = EdgeWeightParams { theta: vec![0.0; 2] };
        assert!(matches!(
            materialize_weights(&t, &base()),
            Err(Error::IndexMismatch { expected: 3, actual: 2 })
        ));
    }
}

use rayon::prelude::*;

use super::{EdgeSignal, Graph, NodeSignal};
use crate::error::{Error, Result};

const PAR_THRESHOLD: usize = 1 << 16;

fn check_nodes(g: &Graph, f: &NodeSignal) -> Result<()> {
    if f.num_nodes() != g.num_nodes() {
        return Err(Error::shape(
            format!("{} node rows", g.num_nodes()),
            format!("{} rows", f.num_nodes()),
        ));
    }
    Ok(())
}

/// `∇f(u,v) = sqrt(w/δ(v))·f(v) − sqrt(w/δ(u))·f(u)` for every directed edge.
pub fn gradient(g: &Graph, f: &NodeSignal) -> Result<EdgeSignal> {
    check_nodes(g, f)?;
    let k = f.num_classes();
    let mut out = EdgeSignal::zeros(g.num_edges(), k);
    if k == 0 {
        return Ok(out);
    }
    let fs = f.as_slice();
    let degrees = g.degrees();
    for (e, row) in out.as_mut_slice().chunks_exact_mut(k).enumerate() {
        let (u, v, w) = (g.source(e), g.target(e), g.weight(e));
        let cu = (w / degrees[u]).sqrt();
        let cv = (w / degrees[v]).sqrt();
        for c in 0..k {
            row[c] = cv * fs[v * k + c] - cu * fs[u * k + c];
        }
    }
    Ok(out)
}

/// `div F(u) = Σ_v sqrt(w/δ(u))·(F(u,v) − F(v,u))`.
pub fn divergence(g: &Graph, field: &EdgeSignal) -> Result<NodeSignal> {
    if field.num_edges() != g.num_edges() {
        return Err(Error::shape(
            format!("{} directed edge rows", g.num_edges()),
            format!("{} rows", field.num_edges()),
        ));
    }
    let k = field.num_classes();
    let mut out = NodeSignal::zeros(g.num_nodes(), k);
    let fs = field.as_slice();
    for u in 0..g.num_nodes() {
        let du = g.degree(u);
        let row = out.row_mut(u);
        for e in g.edge_range(u) {
            let c = (g.weight(e) / du).sqrt();
            let r = g.reverse(e);
            for j in 0..k {
                row[j] += c * (fs[e * k + j] - fs[r * k + j]);
            }
        }
    }
    Ok(out)
}

/// `Δf(u) = Σ_v w(u,v)·(f(v)/sqrt(δ(u)δ(v)) − f(u)/δ(u))`; zero at isolated nodes.
pub fn laplacian(g: &Graph, f: &NodeSignal) -> Result<NodeSignal> {
    check_nodes(g, f)?;
    let k = f.num_classes();
    let mut out = NodeSignal::zeros(g.num_nodes(), k);
    laplacian_into(g, f.as_slice(), k, out.as_mut_slice());
    Ok(out)
}

/// Row-major kernel behind [`laplacian`]; `x` and `out` hold `num_nodes × k` values.
pub(crate) fn laplacian_into(g: &Graph, x: &[f64], k: usize, out: &mut [f64]) {
    debug_assert_eq!(x.len(), g.num_nodes() * k);
    debug_assert_eq!(out.len(), x.len());
    if k == 0 {
        return;
    }
    let isd = g.inv_sqrt_degrees();
    let targets = g.targets();
    let weights = g.weights();
    let node = |u: usize, row: &mut [f64]| {
        row.fill(0.0);
        let range = g.edge_range(u);
        if range.is_empty() {
            return;
        }
        let su = isd[u];
        let xu = &x[u * k..(u + 1) * k];
        let self_coef = su * su;
        for e in range {
            let v = targets[e];
            let w = weights[e];
            let cross = w * su * isd[v];
            let own = w * self_coef;
            let xv = &x[v * k..(v + 1) * k];
            for c in 0..k {
                row[c] += cross * xv[c] - own * xu[c];
            }
        }
    };
    if x.len() >= PAR_THRESHOLD {
        out.par_chunks_mut(k).enumerate().for_each(|(u, row)| node(u, row));
    } else {
        out.chunks_mut(k).enumerate().for_each(|(u, row)| node(u, row));
    }
}

/// `J(f) = ½ Σ_u Σ_{v∈N(u)} |∇f(u,v)|²`.
pub fn dirichlet_energy(g: &Graph, f: &NodeSignal) -> Result<f64> {
    let grad = gradient(g, f)?;
    Ok(0.5 * grad.as_slice().iter().map(|x| x * x).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn col(values: &[f64]) -> NodeSignal {
        NodeSignal::from_rows(&values.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn path3() -> Graph {
        build_graph([(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap()
    }

    #[test]
    fn gradient_on_unit_pair() {
        let g = build_graph([(0, 1, 1.0)], 2).unwrap();
        let grad = gradient(&g, &col(&[0.0, 1.0])).unwrap();
        assert_eq!(grad.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn sqrt_degree_profile_has_zero_gradient() {
        let g = build_graph([(0, 1, 0.3), (1, 2, 0.9), (0, 2, 0.5), (2, 3, 0.2)], 4).unwrap();
        let c = 2.5;
        let f = col(&g.degrees().iter().map(|d| c * d.sqrt()).collect::<Vec<_>>());
        let grad = gradient(&g, &f).unwrap();
        assert!(grad.as_slice().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn gradient_on_path() {
        let g = path3();
        let grad = gradient(&g, &col(&[1.0, 0.0, 0.0])).unwrap();
        // storage order: (0,1), (1,0), (1,2), (2,1)
        let expected = [-1.0, 1.0, 0.0, 0.0];
        for (a, b) in grad.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_examples() {
        let g = build_graph([(0, 1, 1.0)], 2).unwrap();
        let field = EdgeSignal::from_array(ndarray::array![[1.0], [-1.0]]).unwrap();
        assert_eq!(divergence(&g, &field).unwrap().as_slice(), &[2.0, -2.0]);
        let zero = EdgeSignal::zeros(2, 3);
        assert_eq!(divergence(&g, &zero).unwrap(), NodeSignal::zeros(2, 3));
    }

    #[test]
    fn laplacian_examples() {
        let g = build_graph([(0, 1, 1.0)], 2).unwrap();
        assert_eq!(laplacian(&g, &col(&[0.0, 1.0])).unwrap().as_slice(), &[1.0, -1.0]);
        let lap = laplacian(&path3(), &col(&[1.0, 2f64.sqrt(), 1.0])).unwrap();
        assert!(lap.max_abs() < 1e-15);
    }

    #[test]
    fn isolated_nodes_contribute_nothing() {
        let g = build_graph([(0, 1, 1.0)], 3).unwrap();
        let lap = laplacian(&g, &col(&[0.0, 1.0, 7.0])).unwrap();
        assert_eq!(lap.as_slice(), &[1.0, -1.0, 0.0]);
    }

    #[test]
    fn energy_examples() {
        let g = build_graph([(0, 1, 1.0)], 2).unwrap();
        assert_eq!(dirichlet_energy(&g, &col(&[0.0, 1.0])).unwrap(), 1.0);

        // Brute-force double loop over node pairs, evaluating the gradient
        // formula directly from weights and degrees.
        let g = path3();
        let f = [1.0, 0.0, 0.0];
        let w = |u: usize, v: usize| if u.abs_diff(v) == 1 { 1.0 } else { 0.0 };
        let deg = [1.0, 2.0, 1.0];
        let mut brute = 0.0;
        for u in 0..3 {
            for v in 0..3 {
                if w(u, v) > 0.0 {
                    let d: f64 = (w(u, v) / deg[v] as f64).sqrt() * f[v] - (w(u, v) / deg[u] as f64).sqrt() * f[u];
                    brute += d * d;
                }
            }
        }
        brute *= 0.5;
        assert!((dirichlet_energy(&g, &col(&f)).unwrap() - brute).abs() < 1e-15);
        assert!((brute - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = path3();
        assert!(matches!(gradient(&g, &col(&[1.0])), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(laplacian(&g, &col(&[1.0])), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(
            divergence(&g, &EdgeSignal::zeros(3, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}

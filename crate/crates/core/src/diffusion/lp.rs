use super::{check_signal, BoundarySpec};
use crate::error::Result;
use crate::graph::{Graph, NodeSignal};

/// One Jacobi sweep: unlabeled nodes take the weighted mean of their
/// neighbors, labeled nodes are reset to `g`. Isolated unlabeled nodes keep
/// their current row.
pub fn lp_step(g: &Graph, f: &NodeSignal, boundary: &BoundarySpec) -> Result<NodeSignal> {
    check_signal(g, f, boundary)?;
    let mut out = f.clone();
    sweep(g, f.as_slice(), f.num_classes(), boundary, out.as_mut_slice());
    Ok(out)
}

fn sweep(g: &Graph, x: &[f64], k: usize, boundary: &BoundarySpec, out: &mut [f64]) {
    for u in 0..g.num_nodes() {
        let deg = g.degree(u);
        if deg == 0.0 {
            continue;
        }
        let row = &mut out[u * k..(u + 1) * k];
        row.fill(0.0);
        for (v, w) in g.neighbors(u) {
            for c in 0..k {
                row[c] += w * x[v * k + c];
            }
        }
        for r in row.iter_mut() {
            *r /= deg;
        }
    }
    boundary.write_rows(k, out);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub signal: NodeSignal,
    pub iterations: usize,
    /// Whether the last sweep changed no entry by more than `tol`.
    pub converged: bool,
}

/// Iterates [`lp_step`] from `g` on `V₀` and zero elsewhere until the
/// largest entry change is at most `tol`, or `max_iters` sweeps.
pub fn lp_solve(g: &Graph, boundary: &BoundarySpec, max_iters: usize, tol: f64) -> Result<LpOutcome> {
    boundary.check_nodes(g.num_nodes())?;
    let k = boundary.num_classes();
    let n = g.num_nodes();
    let mut x = vec![0.0; n * k];
    boundary.write_rows(k, &mut x);
    let mut next = x.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        sweep(g, &x, k, boundary, &mut next);
        iterations += 1;
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change <= tol {
            converged = true;
            break;
        }
    }
    Ok(LpOutcome {
        signal: NodeSignal::from_flat(n, k, x),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::combinatorial_steady_state;
    use crate::graph::build_graph;

    fn path() -> (Graph, BoundarySpec) {
        let g = build_graph([(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap();
        (g, BoundarySpec::new(2, [(0, 0), (2, 1)]).unwrap())
    }

    #[test]
    fn midpoint_averages_neighbors() {
        let (g, b) = path();
        let f = NodeSignal::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = lp_step(&g, &f, &b).unwrap();
        assert_eq!(out.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn harmonic_extension_is_fixed_point() {
        let g = build_graph([(0, 1, 0.4), (1, 2, 0.9), (2, 3, 0.3), (1, 3, 0.6), (3, 4, 1.0)], 5).unwrap();
        let b = BoundarySpec::new(2, [(0, 0), (4, 1)]).unwrap();
        let fixed = combinatorial_steady_state(&g, &b).unwrap();
        let next = lp_step(&g, &fixed, &b).unwrap();
        assert!(next.max_abs_diff(&fixed) < 1e-12);
    }

    #[test]
    fn identical_labels_saturate() {
        let g = build_graph([(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], 3).unwrap();
        let b = BoundarySpec::new(1, [(0, 0)]).unwrap();
        let out = lp_solve(&g, &b, 10_000, 1e-14).unwrap();
        assert!(out.converged);
        for u in 0..3 {
            assert!((out.signal.row(u)[0] - 1.0).abs() < 1e-12);
        }
        let ones = NodeSignal::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(lp_step(&g, &ones, &b).unwrap(), ones);
    }

    #[test]
    fn infinite_tolerance_stops_after_one_sweep() {
        let (g, b) = path();
        let out = lp_solve(&g, &b, 100, f64::INFINITY).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        let mut init = NodeSignal::zeros(3, 2);
        b.write_rows(2, init.as_mut_slice());
        assert_eq!(out.signal, lp_step(&g, &init, &b).unwrap());
    }

    #[test]
    fn isolated_unlabeled_node_is_left_alone() {
        let g = build_graph([(0, 1, 1.0)], 3).unwrap();
        let b = BoundarySpec::new(1, [(0, 0)]).unwrap();
        let f = NodeSignal::from_rows(&[vec![1.0], vec![0.0], vec![0.25]]).unwrap();
        assert_eq!(lp_step(&g, &f, &b).unwrap().row(2), &[0.25]);
        let out = lp_solve(&g, &b, 1, 0.0).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 1);
        let out = lp_solve(&g, &b, 10, 0.0).unwrap();
        assert!(out.converged);
        assert_eq!(out.signal.row(2), &[0.0]);
    }
}

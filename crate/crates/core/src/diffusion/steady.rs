//! Harmonic extension by solving the boundary-restricted linear system.

use super::BoundarySpec;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSignal};

const REL_TOL: f64 = 1e-13;
const ACCEPT_REL: f64 = 1e-9;

/// Solves `Δ_w f = 0` on unlabeled nodes with `f = g` on `V₀`, using the
/// normalized Laplacian.
pub fn steady_state_solve(g: &Graph, boundary: &BoundarySpec) -> Result<NodeSignal> {
    let isd = g.inv_sqrt_degrees();
    solve_restricted(
        g,
        boundary,
        |u| g.neighbors(u).map(|(_, w)| w).sum::<f64>() * isd[u] * isd[u],
        |u, v, w| w * isd[u] * isd[v],
    )
}

/// Solves `Σ_v w(u,v)(f(v) − f(u)) = 0` on unlabeled nodes with `f = g` on
/// `V₀`: the fixed point of label propagation.
pub fn combinatorial_steady_state(g: &Graph, boundary: &BoundarySpec) -> Result<NodeSignal> {
    solve_restricted(g, boundary, |u| g.degree(u), |_, _, w| w)
}

fn check_solvable(g: &Graph, boundary: &BoundarySpec) -> Result<()> {
    boundary.check_nodes(g.num_nodes())?;
    let comp = g.components();
    let num_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut has_label = vec![false; num_comp];
    for u in boundary.nodes() {
        has_label[comp[u]] = true;
    }
    if let Some(u) = (0..g.num_nodes()).find(|&u| !has_label[comp[u]]) {
        return Err(Error::SingularSystem(u));
    }
    Ok(())
}

/// Row `u` of the system: `diag(u)·x_u − Σ_{v∉V₀} c(u,v,w)·x_v = Σ_{v∈V₀} c(u,v,w)·g_v`.
/// The matrix is symmetric positive definite once every component holds a
/// label; solved per class by Jacobi-preconditioned conjugate gradients.
fn solve_restricted<D, C>(g: &Graph, boundary: &BoundarySpec, diag: D, coef: C) -> Result<NodeSignal>
where
    D: Fn(usize) -> f64,
    C: Fn(usize, usize, f64) -> f64,
{
    check_solvable(g, boundary)?;
    let n = g.num_nodes();
    let k = boundary.num_classes();
    let mut out = NodeSignal::zeros(n, k);
    boundary.write_rows(k, out.as_mut_slice());

    let unlabeled: Vec<usize> = (0..n).filter(|&u| !boundary.contains(u)).collect();
    let m = unlabeled.len();
    if m == 0 {
        return Ok(out);
    }
    let mut local = vec![usize::MAX; n];
    for (i, &u) in unlabeled.iter().enumerate() {
        local[u] = i;
    }
    // Restricted off-diagonal entries in CSR form.
    let mut offsets = Vec::with_capacity(m + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diagonal = Vec::with_capacity(m);
    let mut rhs = vec![0.0; m * k];
    offsets.push(0);
    for (i, &u) in unlabeled.iter().enumerate() {
        diagonal.push(diag(u));
        for (v, w) in g.neighbors(u) {
            let c = coef(u, v, w);
            if local[v] == usize::MAX {
                let class = boundary.class_of(v).expect("labeled neighbor");
                rhs[i * k + class] += c;
            } else {
                cols.push(local[v]);
                vals.push(c);
            }
        }
        offsets.push(cols.len());
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..m {
            let mut s = diagonal[i] * x[i];
            for j in offsets[i]..offsets[i + 1] {
                s -= vals[j] * x[cols[j]];
            }
            y[i] = s;
        }
    };

    let max_iter = 10 * m + 100;
    let mut b = vec![0.0; m];
    let mut x = vec![0.0; m];
    let mut r = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut ap = vec![0.0; m];
    for c in 0..k {
        for i in 0..m {
            b[i] = rhs[i * k + c];
        }
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.fill(0.0);
        if b_norm > 0.0 {
            r.copy_from_slice(&b);
            for i in 0..m {
                z[i] = r[i] / diagonal[i];
            }
            p.copy_from_slice(&z);
            let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let mut res = b_norm;
            let mut iterations = 0;
            while res > REL_TOL * b_norm && iterations < max_iter {
                apply(&p, &mut ap);
                let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
                let alpha = rz / pap;
                for i in 0..m {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                }
                for i in 0..m {
                    z[i] = r[i] / diagonal[i];
                }
                let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
                for i in 0..m {
                    p[i] = z[i] + (rz_new / rz) * p[i];
                }
                rz = rz_new;
                res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                iterations += 1;
            }
            // recompute the true residual; the recursive one drifts
            apply(&x, &mut ap);
            let true_res = ap
                .iter()
                .zip(&b)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if !(true_res <= ACCEPT_REL * b_norm) {
                return Err(Error::LinearSolveStalled {
                    iterations,
                    residual: true_res / b_norm,
                });
            }
        }
        let values = out.as_mut_slice();
        for (i, &u) in unlabeled.iter().enumerate() {
            values[u * k + c] = x[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{rhs, ClampMode};
    use crate::graph::build_graph;

    #[test]
    fn pair_extends_the_label() {
        let g = build_graph([(0, 1, 1.0)], 2).unwrap();
        let b = BoundarySpec::new(1, [(1, 0)]).unwrap();
        let f = steady_state_solve(&g, &b).unwrap();
        assert!((f.row(0)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_midpoint_solves_one_by_one_system() {
        // Node 1: (1/√2)(f0 + f2) − f1 = 0 with f0 = 1, f2 = 0 → f1 = 1/√2.
        let g = build_graph([(0, 1, 1.0), (1, 2, 1.0)], 3).unwrap();
        let b = BoundarySpec::new(2, [(0, 0), (2, 1)]).unwrap();
        let f = steady_state_solve(&g, &b).unwrap();
        let expected = 1.0 / 2f64.sqrt();
        assert!((f.row(1)[0] - expected).abs() < 1e-12);
        assert!((f.row(1)[1] - expected).abs() < 1e-12);
        assert!(rhs(&g, &f, &b, ClampMode::Clamped).unwrap().max_abs() < 1e-12);

        let lp = combinatorial_steady_state(&g, &b).unwrap();
        assert!((lp.row(1)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unlabeled_component_is_singular() {
        let g = build_graph([(0, 1, 1.0), (2, 3, 1.0)], 4).unwrap();
        let b = BoundarySpec::new(1, [(0, 0)]).unwrap();
        assert!(matches!(steady_state_solve(&g, &b), Err(Error::SingularSystem(2))));
        let g = build_graph([(0, 1, 1.0)], 3).unwrap();
        assert!(matches!(steady_state_solve(&g, &b), Err(Error::SingularSystem(2))));
        assert!(matches!(
            steady_state_solve(&g, &BoundarySpec::empty(1)),
            Err(Error::SingularSystem(0))
        ));
    }
}

//! Random instances and dense reference solvers shared by the integration
//! tests. The oracles here only use the adjacency lists and plain Gaussian
//! elimination, not the library's operators.
#![allow(dead_code)]

use std::collections::BTreeSet;

use ghl_core::features::Features;
use ghl_core::learner::{EdgeWeightParams, FrontTransform, LossConfig, MlpParams, Model};
use ghl_core::{build_graph, BoundarySpec, Graph, NodeSignal, Scheme, SolverConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus each remaining pair with probability `p`;
/// weights uniform in [0.05, 1].
pub fn connected_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut pairs = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.insert((u, v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                pairs.insert((u, v));
            }
        }
    }
    let triplets: Vec<_> = pairs
        .into_iter()
        .map(|(u, v)| (u, v, rng.random_range(0.05..=1.0)))
        .collect();
    build_graph(triplets, n).unwrap()
}

pub fn signal(rng: &mut impl Rng, n: usize, k: usize) -> NodeSignal {
    NodeSignal::from_array(Array2::from_shape_fn((n, k), |_| rng.random_range(-1.0..1.0))).unwrap()
}

/// At least one and at most half of the nodes labeled, classes random.
pub fn boundary(rng: &mut impl Rng, n: usize, k: usize) -> BoundarySpec {
    let m = rng.random_range(1..=(n / 2).max(1));
    let mut nodes: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = rng.random_range(i..n);
        nodes.swap(i, j);
    }
    BoundarySpec::new(k, nodes[..m].iter().map(|&u| (u, rng.random_range(0..k)))).unwrap()
}

pub fn adjacency(g: &Graph) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); g.num_nodes()];
    for (u, v, w) in g.undirected_edges() {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    adj
}

/// Gaussian elimination with partial pivoting; `b` holds one column per
/// right-hand side.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f == 0.0 {
                continue;
            }
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            for j in 0..b[r].len() {
                b[r][j] -= f * b[c][j];
            }
        }
    }
    for c in (0..n).rev() {
        for j in 0..b[c].len() {
            let mut s = b[c][j];
            for i in c + 1..n {
                s -= a[c][i] * b[i][j];
            }
            b[c][j] = s / a[c][c];
        }
    }
    b
}

fn dirichlet_oracle(g: &Graph, bd: &BoundarySpec, normalized: bool) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    let k = bd.num_classes();
    let adj = adjacency(g);
    let deg: Vec<f64> = adj.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
    let mut f = vec![vec![0.0; k]; n];
    for &(u, c) in bd.labels() {
        f[u][c] = 1.0;
    }
    let free: Vec<usize> = (0..n).filter(|&u| !bd.contains(u)).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &u) in free.iter().enumerate() {
        slot[u] = i;
    }
    let m = free.len();
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![vec![0.0; k]; m];
    for (i, &u) in free.iter().enumerate() {
        a[i][i] = if normalized { 1.0 } else { deg[u] };
        for &(v, w) in &adj[u] {
            let c = if normalized { w / (deg[u] * deg[v]).sqrt() } else { w };
            if slot[v] == usize::MAX {
                for j in 0..k {
                    b[i][j] += c * f[v][j];
                }
            } else {
                a[i][slot[v]] -= c;
            }
        }
    }
    for (i, row) in dense_solve(a, b).into_iter().enumerate() {
        f[free[i]] = row;
    }
    f
}

/// Solution of `Σ_v w(f(v) − f(u)) = 0` off the boundary.
pub fn combinatorial_oracle(g: &Graph, bd: &BoundarySpec) -> Vec<Vec<f64>> {
    dirichlet_oracle(g, bd, false)
}

/// Solution of `f(u) = Σ_v w f(v)/√(δ_u δ_v)` off the boundary.
pub fn normalized_oracle(g: &Graph, bd: &BoundarySpec) -> Vec<Vec<f64>> {
    dirichlet_oracle(g, bd, true)
}

pub fn max_abs_diff(f: &NodeSignal, rows: &[Vec<f64>]) -> f64 {
    let mut m: f64 = 0.0;
    for (u, row) in rows.iter().enumerate() {
        for (a, b) in f.row(u).iter().zip(row) {
            m = m.max((a - b).abs());
        }
    }
    m
}

/// 5 nodes, 2 classes, one hidden unit, learned weights, t = 0.7 with RK4.
pub struct TinyInstance {
    pub graph: Graph,
    pub features: Features,
    pub boundary: BoundarySpec,
    pub model: Model,
    pub cfg: LossConfig,
}

pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut r = rng(seed);
    let graph = connected_graph(&mut r, 5, 0.4);
    let d = 3;
    let features = Features::Dense(Array2::from_shape_fn((5, d), |_| r.random_range(-1.0..1.0)));
    let boundary = boundary(&mut r, 5, 2);
    let mut mlp = MlpParams::init(d, &[1], 2, 0.0, seed).unwrap();
    // keep the unit away from its kink so finite differences are valid
    mlp.layers[0].bias.fill(r.random_range(2.5..3.5));
    let transform = if seed % 2 == 0 {
        FrontTransform::Softmax
    } else {
        FrontTransform::Identity
    };
    let model = Model {
        mlp,
        edges: Some(EdgeWeightParams::from_graph(&graph)),
    };
    TinyInstance {
        graph,
        features,
        boundary,
        model,
        cfg: LossConfig {
            solver: SolverConfig::fixed(Scheme::Rk4, 0.7, 20),
            transform,
            l2_penalty: 5e-4,
        },
    }
}

/// Largest violation of the finite-difference contract: relative error for
/// entries with |grad| ≥ 1e-8, absolute error scaled to its 1e-6 bound
/// otherwise. A value ≤ 1e-4 passes.
pub fn gradient_violation(inst: &TinyInstance) -> f64 {
    use ghl_core::learner::{gradients, objective};
    let TinyInstance {
        graph,
        features,
        boundary,
        model,
        cfg,
    } = inst;
    let (_, grads) = gradients(model, graph, features, boundary, cfg, None).unwrap();
    let analytic = grads.to_flat();
    let base = model.to_flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut m = model.clone();
        let mut p = base.clone();
        p[i] += h;
        m.set_flat(&p);
        let fp = objective(&m, graph, features, boundary, cfg, None).unwrap();
        p[i] -= 2.0 * h;
        m.set_flat(&p);
        let fm = objective(&m, graph, features, boundary, cfg, None).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        let v = if a.abs() < 1e-8 {
            (fd - a).abs() / 1e-6 * 1e-4
        } else {
            (fd - a).abs() / a.abs().max(fd.abs())
        };
        worst = worst.max(v);
    }
    worst
}

/// Clamped integration (tolerances 1e-9) continued in doubling horizons
/// until the unlabeled residual is at most `tol`. Returns the state and the total time.
pub fn integrate_to_residual(g: &Graph, psi0: &NodeSignal, bd: &BoundarySpec, tol: f64) -> (NodeSignal, f64) {
    use ghl_core::diffusion::unlabeled_residual;
    use ghl_core::{integrate, ClampMode};
    let mut f = psi0.clone();
    let mut t = 0.0;
    let mut dt = 8.0;
    loop {
        let cfg = SolverConfig {
            rtol: 1e-9,
            atol: 1e-9,
            max_steps: 10_000_000,
            ..SolverConfig::dopri5(dt)
        };
        f = integrate(g, &f, bd, ClampMode::Clamped, &cfg).unwrap();
        t += dt;
        if unlabeled_residual(g, &f, bd).unwrap() <= tol {
            return (f, t);
        }
        assert!(t < 1e7, "no steady state reached");
        dt *= 2.0;
    }
}

/// `psi` with the rows off the boundary replaced by random values.
pub fn rerandomize_free_rows(rng: &mut impl Rng, psi: &NodeSignal, bd: &BoundarySpec) -> NodeSignal {
    let mut a = psi.values().to_owned();
    for u in 0..psi.num_nodes() {
        if !bd.contains(u) {
            for c in 0..psi.num_classes() {
                a[[u, c]] = rng.random_range(-2.0..2.0);
            }
        }
    }
    NodeSignal::from_array(a).unwrap()
}

//! Training loss through a free heat-flow solve and its exact gradient by
//! reverse-mode differentiation of the fixed-step integrator.

use ndarray::Array2;

use super::front::{softmax_rows, softmax_rows_vjp, FrontTransform};
use super::mlp::{backward, forward_tape, LayerGrad, MlpParams};
use super::weights::{materialize_weights, EdgeWeightParams};
use crate::diffusion::{check_signal, fixed_step, integrate, BoundarySpec, ClampMode, Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::features::Features;
use crate::graph::{laplacian_into, Graph, NodeSignal};

/// Trainable state: the front MLP and, optionally, edge-weight logits.
/// Without logits the base graph is used unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub mlp: MlpParams,
    pub edges: Option<EdgeWeightParams>,
}

impl Model {
    pub fn graph(&self, base: &Graph) -> Result<Graph> {
        match &self.edges {
            Some(theta) => materialize_weights(theta, base),
            None => Ok(base.clone()),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.mlp.to_flat();
        if let Some(e) = &self.edges {
            out.extend_from_slice(&e.theta);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.mlp.num_params();
        self.mlp.set_flat(&flat[..n]);
        if let Some(e) = &mut self.edges {
            e.theta.copy_from_slice(&flat[n..]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub mlp: Vec<LayerGrad>,
    pub theta: Option<Vec<f64>>,
}

impl Gradients {
    /// Same order as [`Model::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = super::mlp::flatten_grads(&self.mlp);
        if let Some(t) = &self.theta {
            out.extend_from_slice(t);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Must use a fixed-step scheme.
    pub solver: SolverConfig,
    pub transform: FrontTransform,
    pub l2_penalty: f64,
}

/// Mean cross-entropy of `softmax(f(u))` against the label of each
/// `u ∈ V₀`, and its gradient with respect to `f`.
fn boundary_cross_entropy(f: &[f64], k: usize, boundary: &BoundarySpec) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; f.len()];
    if boundary.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / boundary.len() as f64;
    let mut loss = 0.0;
    for &(u, class) in boundary.labels() {
        let row = &f[u * k..(u + 1) * k];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&x| (x - m).exp()).sum();
        let log_z = m + sum.ln();
        loss += log_z - row[class];
        let g = &mut grad[u * k..(u + 1) * k];
        for c in 0..k {
            g[c] = scale * ((row[c] - log_z).exp() - if c == class { 1.0 } else { 0.0 });
        }
    }
    (loss * scale, grad)
}

/// Cross-entropy on `V₀` after evolving `psi_tilde` on every node, labeled
/// ones included, for `cfg.t_final`.
pub fn training_loss(g: &Graph, psi_tilde: &NodeSignal, boundary: &BoundarySpec, cfg: &SolverConfig) -> Result<f64> {
    let out = integrate(g, psi_tilde, boundary, ClampMode::Free, cfg)?;
    Ok(boundary_cross_entropy(out.as_slice(), out.num_classes(), boundary).0)
}

/// [`training_loss`] of the model's front plus `l2_penalty · ‖MLP params‖²`.
pub fn objective(
    model: &Model,
    base: &Graph,
    features: &Features,
    boundary: &BoundarySpec,
    cfg: &LossConfig,
    dropout_seed: Option<u64>,
) -> Result<f64> {
    let graph = model.graph(base)?;
    let (logits, _) = forward_tape(&model.mlp, features, dropout_seed.is_some(), dropout_seed.unwrap_or(0))?;
    let psi = front(&logits, cfg.transform)?;
    Ok(training_loss(&graph, &psi, boundary, &cfg.solver)? + cfg.l2_penalty * model.mlp.squared_norm())
}

fn front(logits: &Array2<f64>, transform: FrontTransform) -> Result<NodeSignal> {
    let values = match transform {
        FrontTransform::Softmax => softmax_rows(logits),
        FrontTransform::Identity => logits.clone(),
    };
    NodeSignal::from_array(values).map_err(|_| Error::NonFiniteState(0.0))
}

/// Accumulates `∂⟨ȳ, S x⟩ / ∂w` for `S = D^{-1/2} W D^{-1/2}`. The `−I` part
/// of the Laplacian does not depend on the weights because `Σ_v w(u,v) = δ(u)`.
/// `edge` collects the direct terms per undirected edge, `node` the terms
/// through the degrees.
struct WeightGrad {
    edge: Vec<f64>,
    node: Vec<f64>,
}

impl WeightGrad {
    fn new(g: &Graph) -> Self {
        Self {
            edge: vec![0.0; g.num_undirected_edges()],
            node: vec![0.0; g.num_nodes()],
        }
    }

    fn accumulate(&mut self, g: &Graph, ybar: &[f64], x: &[f64], k: usize) {
        let s = g.inv_sqrt_degrees();
        for u in 0..g.num_nodes() {
            let (yu, xu) = (&ybar[u * k..(u + 1) * k], &x[u * k..(u + 1) * k]);
            let mut t = 0.0;
            for e in g.edge_range(u) {
                let v = g.target(e);
                let (yv, xv) = (&ybar[v * k..(v + 1) * k], &x[v * k..(v + 1) * k]);
                let mut d1 = 0.0;
                let mut d2 = 0.0;
                for c in 0..k {
                    d1 += yu[c] * xv[c];
                    d2 += xu[c] * yv[c];
                }
                self.edge[g.undirected_index(e)] += s[u] * s[v] * d1;
                t += g.weight(e) * s[v] * (d1 + d2);
            }
            self.node[u] += -0.5 * s[u] * s[u] * s[u] * t;
        }
    }

    fn finish(self, g: &Graph) -> Vec<f64> {
        let mut out = self.edge;
        for (i, (u, v, _)) in g.undirected_edges().enumerate() {
            out[i] += self.node[u] + self.node[v];
        }
        out
    }
}

/// Loss value and gradients with respect to every MLP parameter and, when
/// present, every edge logit. Dropout is active iff `dropout_seed` is set.
pub fn gradients(
    model: &Model,
    base: &Graph,
    features: &Features,
    boundary: &BoundarySpec,
    cfg: &LossConfig,
    dropout_seed: Option<u64>,
) -> Result<(f64, Gradients)> {
    let scheme = cfg.solver.scheme;
    if scheme == Scheme::Dopri5 {
        return Err(Error::InvalidTrainConfig(
            "training solve must use a fixed-step scheme (rk4 or euler)".into(),
        ));
    }
    cfg.solver.validate()?;
    let graph = model.graph(base)?;
    let (logits, tape) = forward_tape(&model.mlp, features, dropout_seed.is_some(), dropout_seed.unwrap_or(0))?;
    let psi = front(&logits, cfg.transform)?;
    check_signal(&graph, &psi, boundary)?;
    let k = psi.num_classes();
    let len = psi.as_slice().len();

    let steps = if cfg.solver.t_final > 0.0 { cfg.solver.step_count() } else { 0 };
    let h = if steps > 0 { cfg.solver.t_final / steps as f64 } else { 0.0 };
    let apply = |x: &[f64], out: &mut [f64]| laplacian_into(&graph, x, k, out);

    let mut states = Vec::with_capacity(steps);
    let mut y = psi.as_slice().to_vec();
    for _ in 0..steps {
        states.push(y.clone());
        fixed_step(apply, &mut y, h, scheme, 1)?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState(h * states.len() as f64));
        }
    }
    let (ce, mut ybar) = boundary_cross_entropy(&y, k, boundary);

    let mut wgrad = model.edges.as_ref().map(|_| WeightGrad::new(&graph));
    let mut k1 = vec![0.0; len];
    let mut s2 = vec![0.0; len];
    let mut s3 = vec![0.0; len];
    let mut s4 = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    let mut kb = vec![0.0; len];
    let mut kb_next = vec![0.0; len];
    let mut kb_rest = [vec![0.0; len], vec![0.0; len]];
    let mut sbar = vec![0.0; len];
    for y in states.iter().rev() {
        match scheme {
            Scheme::Euler => {
                for i in 0..len {
                    kb[i] = h * ybar[i];
                }
                apply(&kb, &mut sbar);
                if let Some(w) = &mut wgrad {
                    w.accumulate(&graph, &kb, y, k);
                }
                for i in 0..len {
                    ybar[i] += sbar[i];
                }
            }
            Scheme::Rk4 | Scheme::Dopri5 => {
                apply(y, &mut k1);
                for i in 0..len {
                    s2[i] = y[i] + 0.5 * h * k1[i];
                }
                apply(&s2, &mut tmp);
                for i in 0..len {
                    s3[i] = y[i] + 0.5 * h * tmp[i];
                }
                apply(&s3, &mut tmp);
                for i in 0..len {
                    s4[i] = y[i] + h * tmp[i];
                }
                // adjoints of k4, k3, k2, k1 before the stage couplings
                for i in 0..len {
                    kb[i] = h / 6.0 * ybar[i];
                    kb_next[i] = h / 3.0 * ybar[i];
                    kb_rest[0][i] = h / 3.0 * ybar[i];
                    kb_rest[1][i] = h / 6.0 * ybar[i];
                }
                let stages: [(&[f64], f64); 4] = [(&s4, h), (&s3, 0.5 * h), (&s2, 0.5 * h), (y, 0.0)];
                for (j, &(stage, coupling)) in stages.iter().enumerate() {
                    apply(&kb, &mut sbar);
                    if let Some(w) = &mut wgrad {
                        w.accumulate(&graph, &kb, stage, k);
                    }
                    for i in 0..len {
                        ybar[i] += sbar[i];
                    }
                    if j < 3 {
                        for i in 0..len {
                            kb_next[i] += coupling * sbar[i];
                        }
                        std::mem::swap(&mut kb, &mut kb_next);
                        if j < 2 {
                            std::mem::swap(&mut kb_next, &mut kb_rest[j]);
                        }
                    }
                }
            }
        }
    }

    let psi_bar = Array2::from_shape_vec((graph.num_nodes(), k), ybar).expect("state shape");
    let logits_bar = match cfg.transform {
        FrontTransform::Softmax => softmax_rows_vjp(&psi.values().to_owned(), &psi_bar),
        FrontTransform::Identity => psi_bar,
    };
    let mut mlp = backward(&model.mlp, &tape, logits_bar);
    for (g, layer) in mlp.iter_mut().zip(&model.mlp.layers) {
        g.weight.scaled_add(2.0 * cfg.l2_penalty, &layer.weight);
        g.bias.scaled_add(2.0 * cfg.l2_penalty, &layer.bias);
    }
    for (i, g) in mlp.iter().enumerate() {
        if !g.weight.iter().chain(g.bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteGradient(format!("MLP layer {i}")));
        }
    }
    let theta = match (wgrad, &model.edges) {
        (Some(w), Some(params)) => {
            let mut dw = w.finish(&graph);
            for (d, &t) in dw.iter_mut().zip(&params.theta) {
                let s = super::weights::sigmoid(t);
                *d *= s * (1.0 - s);
            }
            if let Some(e) = dw.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("edge logit {e}")));
            }
            Some(dw)
        }
        _ => None,
    };
    let loss = ce + cfg.l2_penalty * model.mlp.squared_norm();
    Ok((loss, Gradients { mlp, theta }))
}

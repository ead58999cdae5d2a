use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::FrontCheckpoint;
use super::front::{assemble_front, front_from_logits, softmax_rows, FrontTransform};
use super::mlp::{mlp_forward, MlpParams};
use super::objective::{gradients, LossConfig, Model};
use super::optim::{Optimizer, OptimizerConfig};
use super::weights::EdgeWeightParams;
use crate::dataio::{Dataset, SplitSpec};
use crate::diffusion::{accuracy, integrate, predict_labels, BoundarySpec, ClampMode, Scheme, SolverConfig};
use crate::error::{Error, Result};
use crate::features::Features;
use crate::graph::{Graph, NodeSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub l2_penalty: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Horizon of both the training solve and the evaluation solve.
    pub t_final: f64,
    pub front_transform: FrontTransform,
    pub hidden: Vec<usize>,
    pub learn_weights: bool,
    /// Fixed-step scheme and step count of the differentiated training solve.
    pub train_scheme: Scheme,
    pub train_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            l2_penalty: 5e-4,
            dropout: 0.5,
            epochs: 200,
            seed: 0,
            t_final: 1.0,
            front_transform: FrontTransform::Softmax,
            hidden: vec![64],
            learn_weights: false,
            train_scheme: Scheme::Rk4,
            train_steps: 40,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        let bad = |msg: String| Err(Error::InvalidTrainConfig(msg));
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return bad(format!("l2 penalty {} must be finite and >= 0", self.l2_penalty));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final {} must be finite and >= 0", self.t_final));
        }
        if self.train_scheme == Scheme::Dopri5 {
            return bad("training solve must use a fixed-step scheme".into());
        }
        if self.train_steps == 0 {
            return bad("train_steps must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        Ok(())
    }

    fn loss_config(&self) -> LossConfig {
        LossConfig {
            solver: SolverConfig::fixed(self.train_scheme, self.t_final, self.train_steps),
            transform: self.front_transform,
            l2_penalty: self.l2_penalty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training objective of the step that produced this epoch's model
    /// (`None` for the initial model).
    pub train_loss: Option<f64>,
    pub val_accuracy: f64,
    pub val_loss: f64,
    pub best_val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: FrontCheckpoint,
    /// Epoch of the saved checkpoint; 0 is the initial model.
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

struct Evaluation {
    psi0: NodeSignal,
    weights: Vec<f64>,
    val_accuracy: f64,
    val_loss: f64,
}

/// Mean cross-entropy of `softmax(f(u))` over `nodes`.
fn node_cross_entropy(f: &NodeSignal, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let rows = ndarray::Array2::from_shape_fn((nodes.len(), f.num_classes()), |(i, c)| f.row(nodes[i])[c]);
    let p = softmax_rows(&rows);
    let total: f64 = nodes.iter().enumerate().map(|(i, &u)| -p[[i, labels[u]]].ln()).sum();
    total / nodes.len() as f64
}

struct Trainer<'a> {
    base: &'a Graph,
    features: Features,
    labels: &'a [usize],
    boundary: BoundarySpec,
    valid: &'a [usize],
    tcfg: &'a TrainConfig,
    eval_cfg: SolverConfig,
}

impl Trainer<'_> {
    fn evaluate(&self, model: &Model) -> Result<Evaluation> {
        let logits = mlp_forward(&model.mlp, &self.features, false, 0)?;
        let psi_tilde = front_from_logits(&logits, self.tcfg.front_transform)?;
        let psi0 = assemble_front(&psi_tilde, &self.boundary)?;
        let graph = model.graph(self.base)?;
        let f = integrate(&graph, &psi0, &self.boundary, ClampMode::Clamped, &self.eval_cfg)?;
        let predicted = predict_labels(&f);
        Ok(Evaluation {
            psi0,
            weights: graph.undirected_weights(),
            val_accuracy: accuracy(&predicted, self.labels, self.valid),
            val_loss: node_cross_entropy(&f, self.labels, self.valid),
        })
    }
}

/// Full-batch training of the front (and optionally the edge weights)
/// through the free training solve, selecting the epoch with the best
/// validation accuracy of the clamped evaluation solve. Ties go to the
/// lower validation loss, then to the earlier epoch.
///
/// `scfg` configures the evaluation integrator; its horizon is replaced by
/// `tcfg.t_final`.
pub fn train(dataset: &Dataset, split: &SplitSpec, tcfg: &TrainConfig, scfg: &SolverConfig) -> Result<TrainOutcome> {
    tcfg.validate()?;
    split.validate(dataset.num_nodes())?;
    let eval_cfg = scfg.with_t_final(tcfg.t_final);
    eval_cfg.validate()?;
    let trainer = Trainer {
        base: &dataset.graph,
        features: Features::from_f32(dataset.features.view()),
        labels: &dataset.labels,
        boundary: dataset.boundary(&split.train)?,
        valid: &split.valid,
        tcfg,
        eval_cfg,
    };
    let mlp = MlpParams::init(
        dataset.features.ncols(),
        &tcfg.hidden,
        dataset.num_classes,
        tcfg.dropout,
        tcfg.seed,
    )?;
    let edges = tcfg.learn_weights.then(|| EdgeWeightParams::from_graph(&dataset.graph));
    let mut model = Model { mlp, edges };
    let loss_cfg = tcfg.loss_config();
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    dropout_rng.set_stream(1);

    let first = trainer.evaluate(&model)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        val_accuracy: first.val_accuracy,
        val_loss: first.val_loss,
        best_val_accuracy: first.val_accuracy,
    }];
    let mut best = first;
    let mut best_epoch = 0;
    let mut params = model.to_flat();
    let mut opt = Optimizer::new(tcfg.optimizer, params.len());
    for epoch in 1..=tcfg.epochs {
        let seed = dropout_rng.next_u64();
        let (loss, grads) = gradients(
            &model,
            &dataset.graph,
            &trainer.features,
            &trainer.boundary,
            &loss_cfg,
            Some(seed),
        )?;
        let g = grads.to_flat();
        opt.step(&mut params, &g);
        model.set_flat(&params);
        let eval = trainer.evaluate(&model)?;
        let better = eval.val_accuracy > best.val_accuracy
            || (eval.val_accuracy == best.val_accuracy && eval.val_loss < best.val_loss);
        history.push(EpochRecord {
            epoch,
            train_loss: Some(loss),
            val_accuracy: eval.val_accuracy,
            val_loss: eval.val_loss,
            best_val_accuracy: best.val_accuracy.max(eval.val_accuracy),
        });
        if better {
            best = eval;
            best_epoch = epoch;
        }
    }
    Ok(TrainOutcome {
        checkpoint: FrontCheckpoint {
            psi0: best.psi0,
            weights: best.weights,
            fingerprint: dataset.graph.fingerprint(),
            dataset: dataset.name.clone(),
            t_final: tcfg.t_final,
            val_accuracy: best.val_accuracy,
        },
        best_epoch,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::Array2;

    /// Two classes of ten nodes: a ring per class plus two bridges, and
    /// one-hot features equal to the label.
    fn separable() -> (Dataset, SplitSpec) {
        let mut edges = Vec::new();
        for c in 0..2 {
            for i in 0..10 {
                edges.push((c * 10 + i, c * 10 + (i + 1) % 10, 1.0));
            }
        }
        edges.push((0, 10, 1.0));
        edges.push((5, 15, 1.0));
        let g = build_graph(edges, 20).unwrap();
        let labels: Vec<usize> = (0..20).map(|u| u / 10).collect();
        let x = Array2::from_shape_fn((20, 2), |(u, c)| if labels[u] == c { 1.0 } else { 0.0 });
        let ds = Dataset::new("separable", g, x, labels, 2).unwrap();
        let split = SplitSpec {
            train: vec![0, 3, 10, 13],
            valid: vec![1, 6, 11, 16],
            test: vec![2, 4, 5, 7, 8, 9, 12, 14, 15, 17, 18, 19],
        };
        (ds, split)
    }

    fn quick(epochs: usize, learn_weights: bool) -> TrainConfig {
        TrainConfig {
            epochs,
            hidden: vec![8],
            dropout: 0.1,
            t_final: 1.0,
            learn_weights,
            optimizer: OptimizerConfig::adam(0.05),
            train_steps: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_keeps_initial_front() {
        let (ds, split) = separable();
        let out = train(&ds, &split, &quick(0, false), &SolverConfig::default()).unwrap();
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.history.len(), 1);
        let mlp = MlpParams::init(2, &[8], 2, 0.1, 0).unwrap();
        let logits = mlp_forward(&mlp, &Features::from_f32(ds.features.view()), false, 0).unwrap();
        let boundary = ds.boundary(&split.train).unwrap();
        let expected = assemble_front(&front_from_logits(&logits, FrontTransform::Softmax).unwrap(), &boundary).unwrap();
        assert_eq!(out.checkpoint.psi0, expected);
        assert_eq!(out.checkpoint.val_accuracy, out.history[0].val_accuracy);
    }

    #[test]
    fn separable_features_are_learned() {
        let (ds, split) = separable();
        for learn in [false, true] {
            let out = train(&ds, &split, &quick(100, learn), &SolverConfig::default()).unwrap();
            let boundary = ds.boundary(&split.train).unwrap();
            let f = super::super::evaluate_checkpoint(&out.checkpoint, &ds.graph, &boundary, &SolverConfig::default()).unwrap();
            let acc = accuracy(&predict_labels(&f), &ds.labels, &split.test);
            assert_eq!(acc, 1.0, "learn_weights = {learn}");
        }
    }

    #[test]
    fn bookkeeping_is_monotone_and_deterministic() {
        let (ds, split) = separable();
        let cfg = quick(30, true);
        let a = train(&ds, &split, &cfg, &SolverConfig::default()).unwrap();
        let b = train(&ds, &split, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
        assert!(a.history.windows(2).all(|w| w[1].best_val_accuracy >= w[0].best_val_accuracy));
        let best = a.history[a.best_epoch];
        assert_eq!(best.val_accuracy, a.checkpoint.val_accuracy);
        assert_eq!(a.history.last().unwrap().best_val_accuracy, a.checkpoint.val_accuracy);
        assert!(a.checkpoint.weights.iter().all(|&w| w > 0.0 && w < 1.0));
    }

    #[test]
    fn frozen_weights_keep_the_base_graph() {
        let (ds, split) = separable();
        let out = train(&ds, &split, &quick(5, false), &SolverConfig::default()).unwrap();
        assert_eq!(out.checkpoint.weights, ds.graph.undirected_weights());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (ds, split) = separable();
        let mut cfg = quick(1, false);
        cfg.optimizer = OptimizerConfig::adam(0.0);
        assert!(matches!(
            train(&ds, &split, &cfg, &SolverConfig::default()),
            Err(Error::InvalidTrainConfig(_))
        ));
    }
}

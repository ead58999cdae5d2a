//! Heat diffusion with Dirichlet boundary data on labeled nodes, its
//! steady state, label propagation, and the argmax decision rule.

mod lp;
mod ode;
mod steady;

pub use lp::{lp_solve, lp_step, LpOutcome};
pub use ode::{
    integrate, integrate_samples, integrate_with_stats, IntegrationStats, Scheme, SolverConfig,
};
pub(crate) use ode::fixed_step;
pub use steady::{combinatorial_steady_state, steady_state_solve};

use crate::error::{Error, Result};
use crate::graph::{laplacian_into, Graph, NodeSignal};

/// Labeled nodes `V₀` with their classes; `g(u)` is the one-hot row of the class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySpec {
    num_classes: usize,
    labels: Vec<(usize, usize)>,
}

impl BoundarySpec {
    /// Repeated nodes must carry the same class.
    pub fn new<I>(num_classes: usize, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut labels: Vec<(usize, usize)> = labels.into_iter().collect();
        for &(_, class) in &labels {
            if class >= num_classes {
                return Err(Error::LabelOutOfRange { class, num_classes });
            }
        }
        labels.sort_unstable();
        labels.dedup();
        if let Some(w) = labels.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::AlreadyLabeled(w[0].0));
        }
        Ok(Self { num_classes, labels })
    }

    pub fn empty(num_classes: usize) -> Self {
        Self {
            num_classes,
            labels: Vec::new(),
        }
    }

    /// Labels the listed nodes with their classes from `labels`.
    pub fn from_nodes(num_classes: usize, nodes: &[usize], labels: &[usize]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(nodes.len());
        for &u in nodes {
            let class = *labels.get(u).ok_or(Error::NodeIdOutOfRange {
                id: u,
                num_nodes: labels.len(),
            })?;
            pairs.push((u, class));
        }
        Self::new(num_classes, pairs)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(node, class)` pairs sorted by node.
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().map(|&(u, _)| u)
    }

    pub fn class_of(&self, u: usize) -> Option<usize> {
        self.labels
            .binary_search_by_key(&u, |&(v, _)| v)
            .ok()
            .map(|i| self.labels[i].1)
    }

    pub fn contains(&self, u: usize) -> bool {
        self.class_of(u).is_some()
    }

    /// Adds new labels; any node already in `V₀` is an error.
    pub fn extended<I>(&self, new_labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut all = self.labels.clone();
        for (u, class) in new_labels {
            if self.contains(u) {
                return Err(Error::AlreadyLabeled(u));
            }
            all.push((u, class));
        }
        Self::new(self.num_classes, all)
    }

    pub(crate) fn check_nodes(&self, num_nodes: usize) -> Result<()> {
        match self.labels.last() {
            Some(&(u, _)) if u >= num_nodes => Err(Error::NodeIdOutOfRange { id: u, num_nodes }),
            _ => Ok(()),
        }
    }

    /// Writes the one-hot rows of `g` into a row-major `num_nodes × k` buffer.
    pub(crate) fn write_rows(&self, k: usize, buf: &mut [f64]) {
        for &(u, class) in &self.labels {
            let row = &mut buf[u * k..(u + 1) * k];
            row.fill(0.0);
            row[class] = 1.0;
        }
    }
}

/// Whether labeled nodes evolve (`Free`) or are held at `g` (`Clamped`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClampMode {
    Free,
    #[default]
    Clamped,
}

pub(crate) fn check_signal(g: &Graph, f: &NodeSignal, boundary: &BoundarySpec) -> Result<()> {
    if f.num_nodes() != g.num_nodes() {
        return Err(Error::shape(
            format!("{} node rows", g.num_nodes()),
            format!("{} rows", f.num_nodes()),
        ));
    }
    if f.num_classes() != boundary.num_classes() {
        return Err(Error::shape(
            format!("{} classes", boundary.num_classes()),
            format!("{} columns", f.num_classes()),
        ));
    }
    boundary.check_nodes(g.num_nodes())
}

/// Heat-flow vector field `Δ_w f`, with labeled rows zeroed when clamped.
pub(crate) struct HeatField<'a> {
    graph: &'a Graph,
    k: usize,
    clamped: Option<Vec<usize>>,
}

impl<'a> HeatField<'a> {
    pub(crate) fn new(graph: &'a Graph, k: usize, boundary: &BoundarySpec, mode: ClampMode) -> Self {
        let clamped = match mode {
            ClampMode::Free => None,
            ClampMode::Clamped => Some(boundary.nodes().collect()),
        };
        Self { graph, k, clamped }
    }

    pub(crate) fn eval(&self, x: &[f64], out: &mut [f64]) {
        laplacian_into(self.graph, x, self.k, out);
        if let Some(nodes) = &self.clamped {
            for &u in nodes {
                out[u * self.k..(u + 1) * self.k].fill(0.0);
            }
        }
    }
}

/// Right-hand side of the heat equation at state `f`.
pub fn rhs(g: &Graph, f: &NodeSignal, boundary: &BoundarySpec, mode: ClampMode) -> Result<NodeSignal> {
    check_signal(g, f, boundary)?;
    let k = f.num_classes();
    let mut out = NodeSignal::zeros(g.num_nodes(), k);
    HeatField::new(g, k, boundary, mode).eval(f.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Largest component per node; ties go to the lowest class index.
pub fn predict_labels(f: &NodeSignal) -> Vec<usize> {
    (0..f.num_nodes())
        .map(|u| {
            let row = f.row(u);
            let mut best = 0;
            for (c, &x) in row.iter().enumerate().skip(1) {
                if x > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `nodes` whose prediction matches `labels`; 0 for an empty set.
pub fn accuracy(predicted: &[usize], labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&u| predicted[u] == labels[u]).count();
    hits as f64 / nodes.len() as f64
}

/// `max |Δ_w f|` over unlabeled nodes.
pub fn unlabeled_residual(g: &Graph, f: &NodeSignal, boundary: &BoundarySpec) -> Result<f64> {
    Ok(rhs(g, f, boundary, ClampMode::Clamped)?.max_abs())
}

use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::diffusion::BoundarySpec;
use crate::error::{Error, Result};
use crate::graph::NodeSignal;

/// Map from MLP logits to the front estimate on every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontTransform {
    #[default]
    Softmax,
    Identity,
}

impl FromStr for FrontTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(Self::Softmax),
            "identity" => Ok(Self::Identity),
            other => Err(Error::InvalidTrainConfig(format!("unknown front transform {other:?}"))),
        }
    }
}

pub(crate) fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Vector-Jacobian product of the row-wise softmax: `s ⊙ (ḡ − ⟨ḡ, s⟩)`.
pub(crate) fn softmax_rows_vjp(s: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    for (mut o, srow) in out.axis_iter_mut(Axis(0)).zip(s.axis_iter(Axis(0))) {
        let inner: f64 = o.iter().zip(srow.iter()).map(|(a, b)| a * b).sum();
        for (v, &sv) in o.iter_mut().zip(srow.iter()) {
            *v = sv * (*v - inner);
        }
    }
    out
}

pub fn front_from_logits(logits: &Array2<f64>, transform: FrontTransform) -> Result<NodeSignal> {
    match transform {
        FrontTransform::Softmax => NodeSignal::from_array(softmax_rows(logits)),
        FrontTransform::Identity => NodeSignal::from_array(logits.clone()),
    }
}

/// Copy of `psi_tilde` with the labeled rows replaced by `g`.
pub fn assemble_front(psi_tilde: &NodeSignal, boundary: &BoundarySpec) -> Result<NodeSignal> {
    if psi_tilde.num_classes() != boundary.num_classes() {
        return Err(Error::shape(
            format!("{} classes", boundary.num_classes()),
            format!("{} columns", psi_tilde.num_classes()),
        ));
    }
    boundary.check_nodes(psi_tilde.num_nodes())?;
    let mut out = psi_tilde.clone();
    boundary.write_rows(out.num_classes(), out.as_mut_slice());
    Ok(out)
}

/// One-hot rows on labeled nodes, zeros elsewhere.
pub fn default_front(boundary: &BoundarySpec, num_nodes: usize, k: usize) -> NodeSignal {
    let mut out = NodeSignal::zeros(num_nodes, k);
    boundary.write_rows(k, out.as_mut_slice());
    out
}

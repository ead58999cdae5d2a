use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Per-node, per-class real values: one row per node, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignal {
    values: Array2<f64>,
}

impl NodeSignal {
    pub fn zeros(num_nodes: usize, num_classes: usize) -> Self {
        Self {
            values: Array2::zeros((num_nodes, num_classes)),
        }
    }

    /// Wraps a matrix, rejecting non-finite entries.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
            let (n, k) = values.dim();
            return Err(Error::Malformed {
                what: format!("{n}x{k} node signal"),
                reason: format!("non-finite value at flat index {bad}"),
            });
        }
        Ok(Self::from_array_unchecked(values))
    }

    pub(crate) fn from_array_unchecked(values: Array2<f64>) -> Self {
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Self { values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::shape(format!("rows of length {k}"), format!("row of length {}", r.len())));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_array(Array2::from_shape_vec((n, k), flat).expect("shape checked"))
    }

    pub(crate) fn from_flat(num_nodes: usize, num_classes: usize, flat: Vec<f64>) -> Self {
        Self {
            values: Array2::from_shape_vec((num_nodes, num_classes), flat).expect("flat length matches shape"),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values.as_slice_mut().expect("standard layout")
    }

    pub fn row(&self, u: usize) -> &[f64] {
        let k = self.num_classes();
        &self.as_slice()[u * k..(u + 1) * k]
    }

    pub(crate) fn row_mut(&mut self, u: usize) -> &mut [f64] {
        let k = self.num_classes();
        &mut self.as_mut_slice()[u * k..(u + 1) * k]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Inner product on node functions, summed over classes.
    pub fn dot(&self, other: &NodeSignal) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &NodeSignal) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Per-directed-edge values, in the same order as [`Graph`](super::Graph) stores edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSignal {
    values: Array2<f64>,
}

impl EdgeSignal {
    pub fn zeros(num_edges: usize, num_classes: usize) -> Self {
        Self {
            values: Array2::zeros((num_edges, num_classes)),
        }
    }

    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed {
                what: "edge signal".into(),
                reason: "non-finite value".into(),
            });
        }
        Ok(Self {
            values: values.as_standard_layout().into_owned(),
        })
    }

    pub fn num_edges(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values.as_slice_mut().expect("standard layout")
    }

    pub fn row(&self, e: usize) -> &[f64] {
        let k = self.num_classes();
        &self.as_slice()[e * k..(e + 1) * k]
    }

    pub fn dot(&self, other: &EdgeSignal) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| a * b).sum()
    }
}

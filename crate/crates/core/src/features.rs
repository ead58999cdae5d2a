//! Node feature matrices, stored densely or as CSR when mostly zero.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

/// Below this fraction of nonzeros, [`Features::from_dense`] switches to CSR.
const SPARSE_DENSITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_dense(m: ArrayView2<'_, f64>) -> Self {
        let (rows, cols) = m.dim();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in m.axis_iter(Axis(0)) {
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    indices.push(j);
                    values.push(x);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out[[i, self.indices[p]]] = self.values[p];
            }
        }
        out
    }

    fn matmul(&self, w: ArrayView2<'_, f64>) -> Array2<f64> {
        let out_cols = w.ncols();
        let w = w.as_standard_layout();
        let ws = w.as_slice().expect("standard layout");
        let mut out = Array2::<f64>::zeros((self.rows, out_cols));
        out.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(out_cols.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                for p in self.indptr[i]..self.indptr[i + 1] {
                    let x = self.values[p];
                    let wr = &ws[self.indices[p] * out_cols..(self.indices[p] + 1) * out_cols];
                    for (o, &wv) in row.iter_mut().zip(wr) {
                        *o += x * wv;
                    }
                }
            });
        out
    }

    fn t_matmul(&self, g: ArrayView2<'_, f64>) -> Array2<f64> {
        let out_cols = g.ncols();
        let g = g.as_standard_layout();
        let gs = g.as_slice().expect("standard layout");
        let mut out = Array2::<f64>::zeros((self.cols, out_cols));
        let os = out.as_slice_mut().expect("standard layout");
        for i in 0..self.rows {
            let gr = &gs[i * out_cols..(i + 1) * out_cols];
            for p in self.indptr[i]..self.indptr[i + 1] {
                let x = self.values[p];
                let orow = &mut os[self.indices[p] * out_cols..(self.indices[p] + 1) * out_cols];
                for (o, &gv) in orow.iter_mut().zip(gr) {
                    *o += x * gv;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Array2<f64>),
    Sparse(CsrMatrix),
}

impl Features {
    /// Picks CSR storage when fewer than 10% of entries are nonzero.
    pub fn from_dense(m: Array2<f64>) -> Self {
        let total = m.len().max(1);
        let nnz = m.iter().filter(|&&x| x != 0.0).count();
        if (nnz as f64) < SPARSE_DENSITY * total as f64 {
            Features::Sparse(CsrMatrix::from_dense(m.view()))
        } else {
            Features::Dense(m)
        }
    }

    pub fn from_f32(m: ArrayView2<'_, f32>) -> Self {
        Self::from_dense(m.mapv(f64::from))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Features::Dense(m) => m.nrows(),
            Features::Sparse(m) => m.rows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Features::Dense(m) => m.ncols(),
            Features::Sparse(m) => m.cols,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Features::Dense(m) => m.clone(),
            Features::Sparse(m) => m.to_dense(),
        }
    }

    /// `X · W`.
    pub fn matmul(&self, w: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Features::Dense(m) => m.dot(&w),
            Features::Sparse(m) => m.matmul(w),
        }
    }

    /// `Xᵀ · G`.
    pub fn t_matmul(&self, g: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Features::Dense(m) => m.t().dot(&g),
            Features::Sparse(m) => m.t_matmul(g),
        }
    }

    /// Inverted dropout: each stored entry is zeroed with probability `rate`
    /// and survivors are scaled by `1 / (1 − rate)`.
    pub fn dropout<R: Rng>(&self, rate: f64, rng: &mut R) -> Features {
        if rate <= 0.0 {
            return self.clone();
        }
        let scale = 1.0 / (1.0 - rate);
        match self {
            Features::Dense(m) => {
                Features::Dense(m.mapv(|x| if rng.random::<f64>() < rate { 0.0 } else { x * scale }))
            }
            Features::Sparse(m) => {
                let mut out = m.clone();
                for v in &mut out.values {
                    *v = if rng.random::<f64>() < rate { 0.0 } else { *v * scale };
                }
                Features::Sparse(out)
            }
        }
    }
}

//! Datasets in a neutral directory format, knn graphs over feature vectors,
//! per-class splits and IDX image files.
//!
//! A dataset directory holds `meta.json`, `edges.bin`, `features.bin`,
//! `labels.bin` and optionally `split.json`.

pub(crate) mod bytes;
mod idx;
mod knn;
mod split;

pub use idx::{load_idx, load_idx_pairs};
pub use knn::{build_knn_graph, graph_from_neighbors, knn_neighbors, median_kth_distance, Neighbor};
pub use split::make_split;

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diffusion::BoundarySpec;
use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph};
use bytes::{count_u32, read_file, Reader};

const EDGE_MAGIC: &[u8; 8] = b"GHLEDGE1";
const FEATURE_MAGIC: &[u8; 8] = b"GHLFEAT1";
const LABEL_MAGIC: &[u8; 8] = b"GHLLABL1";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: Graph, features: Array2<f32>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let n = graph.num_nodes();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {n} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(&class) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(Error::LabelOutOfRange { class, num_classes });
        }
        Ok(Self {
            name: name.into(),
            graph,
            features,
            labels,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Rescales each feature row to unit L1 norm; all-zero rows stay zero.
    pub fn normalize_rows_l1(&mut self) {
        for mut row in self.features.rows_mut() {
            let s: f64 = row.iter().map(|&x| f64::from(x).abs()).sum();
            if s > 0.0 {
                row.mapv_inplace(|x| (f64::from(x) / s) as f32);
            }
        }
    }

    /// Boundary formed by the labels of `nodes`.
    pub fn boundary(&self, nodes: &[usize]) -> Result<BoundarySpec> {
        BoundarySpec::from_nodes(self.num_classes, nodes, &self.labels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    /// Checks that the sets are in range, pairwise disjoint, and that the
    /// training set is nonempty.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::InvalidSplit("training set is empty".into()));
        }
        let mut owner = vec![None; num_nodes];
        for (name, set) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for &u in set {
                let slot = owner
                    .get_mut(u)
                    .ok_or_else(|| Error::InvalidSplit(format!("{name} node {u} out of range for {num_nodes} nodes")))?;
                if let Some(prev) = slot {
                    return Err(Error::InvalidSplit(format!("node {u} is in both {prev} and {name}")));
                }
                *slot = Some(name);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    name: String,
    num_nodes: usize,
    num_classes: usize,
    feature_dim: usize,
}

/// Reads a dataset directory; the split is `None` when `split.json` is absent.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, Option<SplitSpec>)> {
    let meta_path = dir.join("meta.json");
    let meta: Meta = serde_json::from_slice(&read_file(&meta_path)?)?;
    let n = meta.num_nodes;

    let path = dir.join("edges.bin");
    let buf = read_file(&path)?;
    let mut r = Reader::new(&buf, &path);
    r.expect_magic(EDGE_MAGIC)?;
    let count = r.u32_le()? as usize;
    let mut edges = Vec::with_capacity(count);
    for _ in 0..count {
        let u = r.u32_le()? as usize;
        let v = r.u32_le()? as usize;
        let w = r.f64_le()?;
        if u >= v {
            return Err(Error::Malformed {
                what: path.display().to_string(),
                reason: format!("edge ({u}, {v}) is not stored with u < v"),
            });
        }
        edges.push((u, v, w));
    }
    trailing(&r)?;
    let graph = build_graph(edges, n)?;

    let path = dir.join("features.bin");
    let buf = read_file(&path)?;
    let mut r = Reader::new(&buf, &path);
    r.expect_magic(FEATURE_MAGIC)?;
    let rows = r.u32_le()? as usize;
    let cols = r.u32_le()? as usize;
    if rows != n || cols != meta.feature_dim {
        return Err(Error::DimensionMismatch(format!(
            "features are {rows}×{cols}, metadata says {n}×{}",
            meta.feature_dim
        )));
    }
    let raw = r.take(rows * cols * 4)?;
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    trailing(&r)?;
    let features = Array2::from_shape_vec((rows, cols), values).expect("checked shape");

    let path = dir.join("labels.bin");
    let buf = read_file(&path)?;
    let mut r = Reader::new(&buf, &path);
    r.expect_magic(LABEL_MAGIC)?;
    let count = r.u32_le()? as usize;
    if count != n {
        return Err(Error::DimensionMismatch(format!("{count} labels for {n} nodes")));
    }
    let labels = (0..count).map(|_| r.u16_le().map(usize::from)).collect::<Result<Vec<_>>>()?;
    trailing(&r)?;

    let dataset = Dataset::new(meta.name, graph, features, labels, meta.num_classes)?;
    let split_path = dir.join("split.json");
    let split = if split_path.exists() {
        let s: SplitSpec = serde_json::from_slice(&read_file(&split_path)?)?;
        s.validate(n)?;
        Some(s)
    } else {
        None
    };
    Ok((dataset, split))
}

fn trailing(r: &Reader<'_>) -> Result<()> {
    if r.is_at_end() {
        Ok(())
    } else {
        Err(Error::Malformed {
            what: r.path().display().to_string(),
            reason: "trailing bytes".into(),
        })
    }
}

/// Writes `ds` (and `split`, if given) as a dataset directory, creating it
/// when needed.
pub fn save_dataset(dir: &Path, ds: &Dataset, split: Option<&SplitSpec>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = Meta {
        name: ds.name.clone(),
        num_nodes: ds.num_nodes(),
        num_classes: ds.num_classes,
        feature_dim: ds.features.ncols(),
    };
    std::fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;

    let mut out = Vec::with_capacity(12 + 16 * ds.graph.num_undirected_edges());
    out.extend_from_slice(EDGE_MAGIC);
    out.extend_from_slice(&count_u32(ds.graph.num_undirected_edges(), "edge")?.to_le_bytes());
    for (u, v, w) in ds.graph.undirected_edges() {
        out.extend_from_slice(&(u as u32).to_le_bytes());
        out.extend_from_slice(&(v as u32).to_le_bytes());
        out.extend_from_slice(&w.to_le_bytes());
    }
    std::fs::write(dir.join("edges.bin"), out)?;

    let mut file = std::io::BufWriter::new(std::fs::File::create(dir.join("features.bin"))?);
    file.write_all(FEATURE_MAGIC)?;
    file.write_all(&count_u32(ds.features.nrows(), "feature row")?.to_le_bytes())?;
    file.write_all(&count_u32(ds.features.ncols(), "feature column")?.to_le_bytes())?;
    for x in ds.features.iter() {
        file.write_all(&x.to_le_bytes())?;
    }
    file.flush()?;

    let mut out = Vec::with_capacity(12 + 2 * ds.labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&count_u32(ds.labels.len(), "label")?.to_le_bytes());
    for &c in &ds.labels {
        let c = u16::try_from(c).map_err(|_| Error::LabelOutOfRange {
            class: c,
            num_classes: u16::MAX as usize,
        })?;
        out.extend_from_slice(&c.to_le_bytes());
    }
    std::fs::write(dir.join("labels.bin"), out)?;

    let split_path = dir.join("split.json");
    match split {
        Some(s) => {
            s.validate(ds.num_nodes())?;
            std::fs::write(split_path, serde_json::to_vec(s)?)?;
        }
        None if split_path.exists() => std::fs::remove_file(split_path)?,
        None => {}
    }
    Ok(())
}

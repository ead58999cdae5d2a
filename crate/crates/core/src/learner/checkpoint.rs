//! Saved fronts with their edge weights, and evaluation from them without
//! retraining.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::bytes::{read_file, Reader};
use crate::diffusion::{integrate, BoundarySpec, ClampMode, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSignal};

const MAGIC: &[u8; 8] = b"GHLCHKP1";

/// Assembled front `ψ₀` and one weight per undirected edge, tied to a graph
/// topology by its fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontCheckpoint {
    pub psi0: NodeSignal,
    pub weights: Vec<f64>,
    pub fingerprint: [u8; 16],
    pub dataset: String,
    pub t_final: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    num_nodes: usize,
    num_classes: usize,
    num_undirected_edges: usize,
    dataset: String,
    t_final: f64,
    val_accuracy: f64,
    fingerprint: String,
}

impl FrontCheckpoint {
    /// Magic, `u32` LE header length, JSON header, then `ψ₀` and the weights
    /// as `f64` LE.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            num_nodes: self.psi0.num_nodes(),
            num_classes: self.psi0.num_classes(),
            num_undirected_edges: self.weights.len(),
            dataset: self.dataset.clone(),
            t_final: self.t_final,
            val_accuracy: self.val_accuracy,
            fingerprint: hex::encode(self.fingerprint),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + 8 * (self.psi0.as_slice().len() + self.weights.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.psi0.as_slice().iter().chain(&self.weights) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_file(path)?, path)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::parse(bytes, Path::new("<checkpoint>"))
    }

    fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::Malformed {
            what: format!("checkpoint {}", path.display()),
            reason,
        };
        let mut r = Reader::new(bytes, path);
        r.expect_magic(MAGIC)?;
        let len = r.u32_le()? as usize;
        let header: Header = serde_json::from_slice(r.take(len)?)?;
        let fp = hex::decode(&header.fingerprint).map_err(|e| malformed(format!("fingerprint: {e}")))?;
        let fingerprint: [u8; 16] = fp
            .try_into()
            .map_err(|_| malformed("fingerprint must be 16 bytes".into()))?;
        let count = header.num_nodes * header.num_classes;
        let psi = (0..count).map(|_| r.f64_le()).collect::<Result<Vec<_>>>()?;
        let weights = (0..header.num_undirected_edges)
            .map(|_| r.f64_le())
            .collect::<Result<Vec<_>>>()?;
        if !r.is_at_end() {
            return Err(malformed("trailing bytes".into()));
        }
        let psi0 = ndarray::Array2::from_shape_vec((header.num_nodes, header.num_classes), psi)
            .expect("checked length");
        Ok(Self {
            psi0: NodeSignal::from_array(psi0)?,
            weights,
            fingerprint,
            dataset: header.dataset,
            t_final: header.t_final,
            val_accuracy: header.val_accuracy,
        })
    }

    /// `g`'s topology with the saved weights, after checking the fingerprint.
    pub fn weighted_graph(&self, g: &Graph) -> Result<Graph> {
        let fp = g.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                checkpoint: hex::encode(self.fingerprint),
                graph: hex::encode(fp),
            });
        }
        g.with_undirected_weights(&self.weights)
    }
}

/// Clamped solve from the saved front on the saved weights, to the saved
/// horizon. `scfg` supplies the integrator settings.
pub fn evaluate_checkpoint(
    chk: &FrontCheckpoint,
    g: &Graph,
    boundary: &BoundarySpec,
    scfg: &SolverConfig,
) -> Result<NodeSignal> {
    let graph = chk.weighted_graph(g)?;
    integrate(&graph, &chk.psi0, boundary, ClampMode::Clamped, &scfg.with_t_final(chk.t_final))
}

/// Adds `new_labels` to the boundary, writes their one-hot rows into the
/// saved front and runs the clamped solve again. Nothing is retrained.
pub fn incorporate_labels(
    chk: &FrontCheckpoint,
    g: &Graph,
    boundary: &BoundarySpec,
    new_labels: &[(usize, usize)],
    scfg: &SolverConfig,
) -> Result<NodeSignal> {
    let extended = boundary.extended(new_labels.iter().copied())?;
    let mut updated = chk.clone();
    let k = updated.psi0.num_classes();
    extended.check_nodes(updated.psi0.num_nodes())?;
    extended.write_rows(k, updated.psi0.as_mut_slice());
    evaluate_checkpoint(&updated, g, &extended, scfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn setup() -> (Graph, FrontCheckpoint, BoundarySpec) {
        let g = build_graph([(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 4).unwrap();
        let psi0 = NodeSignal::from_rows(&[vec![1.0, 0.0], vec![0.6, 0.4], vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap();
        let chk = FrontCheckpoint {
            psi0,
            weights: vec![0.5, 0.25, 0.75],
            fingerprint: g.fingerprint(),
            dataset: "toy".into(),
            t_final: 2.0,
            val_accuracy: 0.5,
        };
        (g, chk, BoundarySpec::new(2, [(0, 0)]).unwrap())
    }

    #[test]
    fn bytes_round_trip_and_layout() {
        let (_, chk, _) = setup();
        let bytes = chk.to_bytes().unwrap();
        assert_eq!(&bytes[..8], b"GHLCHKP1");
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        assert_eq!(header["fingerprint"].as_str().unwrap().len(), 32);
        assert_eq!(bytes.len(), 12 + len + 8 * (8 + 3));
        assert_eq!(FrontCheckpoint::from_bytes(&bytes).unwrap(), chk);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.chk");
        chk.save(&path).unwrap();
        assert_eq!(FrontCheckpoint::load(&path).unwrap(), chk);
        assert!(matches!(
            FrontCheckpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::TruncatedFile(_))
        ));
    }

    #[test]
    fn fingerprint_must_match() {
        let (_, chk, b) = setup();
        let other = build_graph([(0, 1, 1.0), (1, 2, 1.0), (1, 3, 1.0)], 4).unwrap();
        assert!(matches!(
            evaluate_checkpoint(&chk, &other, &b, &SolverConfig::default()),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn empty_new_labels_is_plain_evaluation() {
        let (g, chk, b) = setup();
        let cfg = SolverConfig::default();
        assert_eq!(
            incorporate_labels(&chk, &g, &b, &[], &cfg).unwrap(),
            evaluate_checkpoint(&chk, &g, &b, &cfg).unwrap()
        );
    }

    #[test]
    fn labeling_everything_returns_g() {
        let (g, chk, b) = setup();
        let out = incorporate_labels(&chk, &g, &b, &[(1, 1), (2, 0), (3, 1)], &SolverConfig::default()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn relabeling_is_rejected() {
        let (g, chk, b) = setup();
        assert!(matches!(
            incorporate_labels(&chk, &g, &b, &[(0, 1)], &SolverConfig::default()),
            Err(Error::AlreadyLabeled(0))
        ));
    }
}

//! Semi-supervised node classification with the time-dependent Dirichlet
//! problem on weighted graphs.
//!
//! Labels on a seed set `V₀` act as Dirichlet boundary data for heat
//! diffusion under the normalized graph Laplacian. The initial condition
//! (the *front*) on unlabeled nodes can be the default zero vector or a
//! learned estimate produced by an MLP from node features; edge weights can
//! be learned alongside it.
//!
//! - [`graph`]: symmetric weighted graphs and the difference operators.
//! - [`diffusion`]: heat-flow integration, steady state, label propagation.
//! - [`learner`]: learned fronts and edge weights, checkpoints.
//! - [`dataio`]: dataset directories, knn graphs, splits, IDX files.

pub mod dataio;
pub mod diffusion;
pub mod error;
pub mod features;
pub mod graph;
pub mod learner;

pub use dataio::{load_dataset, save_dataset, Dataset, SplitSpec};
pub use diffusion::{
    integrate, predict_labels, steady_state_solve, BoundarySpec, ClampMode, Scheme, SolverConfig,
};
pub use error::{Error, Result};
pub use features::Features;
pub use graph::{build_graph, EdgeSignal, Graph, NodeSignal};
pub use learner::{train, FrontCheckpoint, TrainConfig};

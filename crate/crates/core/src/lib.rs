//! Graph classification on the hyperboloid.
//!
//! Node features are embedded on a Lorentz hyperboloid and refined by message
//! passing: distance-softmax attention, a cardinality-scaled Lorentz centroid,
//! parallel transport of each node's own tangent vector, and an injective
//! two-layer transform between hyperboloids of (possibly learned) curvature.
//! The crate carries its own reverse-mode differentiation, an Adam optimiser,
//! TU dataset loading, a Weisfeiler-Lehman expressivity harness and a
//! cross-validation driver.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod experiment;
pub mod lorentz;
pub mod model;
pub mod optim;
pub mod special;
pub mod stats;
pub mod wl;

pub use data::{Graph, GraphDataset};
pub use error::{Error, Result};
pub use lorentz::{Curvature, LorentzPoint, TangentVector};
pub use model::{GraphBatch, Model, ModelConfig};

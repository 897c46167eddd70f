//! On-disk model description: a single JSON document carrying the
//! network topology and the mfBm kernel parameters.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "nodes": [{"id": 0, "mu": 2.0, "lambda": 1.0, "sigma": 1.0, "hurst": 0.5}, ...],
//!   "edges": [{"from": 0, "to": 1, "p": 1.0}, ...],
//!   "rho": [[1.0, 0.0], [0.0, 1.0]],
//!   "eta": [[0.0, 0.0], [0.0, 0.0]]
//! }
//! ```
//!
//! `eta` is optional and defaults to zeros. Unknown fields are rejected
//! rather than ignored, so typos in hand-written model files surface as
//! parse errors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, MfBmKernel};
use crate::network::{Network, NetworkError};

/// The only schema version understood by this crate.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("node ids must be the dense range 0..{expected}, got {found:?}")]
    SparseNodeIds { expected: usize, found: Vec<usize> },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: usize,
    mu: f64,
    lambda: f64,
    sigma: f64,
    hurst: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    from: usize,
    to: usize,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema: u32,
    nodes: Vec<NodeEntry>,
    edges: Vec<EdgeEntry>,
    rho: Vec<Vec<f64>>,
    #[serde(default)]
    eta: Option<Vec<Vec<f64>>>,
}

/// A parsed network plus its input kernel.
#[derive(Debug, Clone)]
pub struct Model {
    pub net: Network,
    pub kernel: MfBmKernel,
}

/// Parses a model document from a JSON string.
pub fn parse_model(json: &str) -> Result<Model, ModelFileError> {
    let file: ModelFile = serde_json::from_str(json)?;
    if file.schema != SCHEMA_VERSION {
        return Err(ModelFileError::SchemaVersion {
            found: file.schema,
        });
    }
    let k = file.nodes.len();
    let mut ids: Vec<usize> = file.nodes.iter().map(|n| n.id).collect();
    ids.sort_unstable();
    if ids != (0..k).collect::<Vec<_>>() {
        return Err(ModelFileError::SparseNodeIds {
            expected: k,
            found: ids,
        });
    }

    let mut mu = vec![0.0; k];
    let mut lambda = vec![0.0; k];
    let mut sigma = vec![0.0; k];
    let mut hurst = vec![0.0; k];
    for n in &file.nodes {
        mu[n.id] = n.mu;
        lambda[n.id] = n.lambda;
        sigma[n.id] = n.sigma;
        hurst[n.id] = n.hurst;
    }
    let edges: Vec<(usize, usize, f64)> =
        file.edges.iter().map(|e| (e.from, e.to, e.p)).collect();
    let net = Network::new(mu, lambda, &edges)?;
    let eta = file.eta.unwrap_or_else(|| vec![vec![0.0; k]; k]);
    let kernel = MfBmKernel::new(hurst, sigma, file.rho, eta)?;
    Ok(Model { net, kernel })
}

/// Reads and parses a model document from disk.
pub fn load_model(path: &std::path::Path) -> Result<Model, ModelFileError> {
    let json = std::fs::read_to_string(path)?;
    parse_model(&json)
}

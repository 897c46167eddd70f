//! Multivariate fractional Brownian motion covariance kernel and the
//! covariances of path-weighted increment combinations that drive the
//! rate-function computations.
//!
//! The cross covariance of two coordinates with Hurst indices `H_i`,
//! `H_j`, correlation `rho`, and inter-correlation `eta` is
//!
//! ```text
//! Cov(X_i(t), X_j(s)) = sigma_i sigma_j / 2 [w(-t) + w(s) - w(s - t)]
//! ```
//!
//! with `w(h) = (rho - eta sign(h)) |h|^{H_i+H_j}` when `H_i + H_j != 1`
//! and `w(h) = rho |h| + eta h log|h|` when `H_i + H_j = 1` (the term
//! `0 log 0` is taken to be zero). This is well defined for all real
//! arguments and reduces to the familiar single-coordinate form on the
//! diagonal.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::network::{Network, NetworkError, PathSet};

/// Eigenvalue floor for the positive-semidefiniteness gate.
pub const PSD_EIGENVALUE_FLOOR: f64 = -1e-9;

/// Width around `H_i + H_j = 1` inside which the logarithmic branch of
/// the cross covariance applies.
const LOG_BRANCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KernelError {
    #[error("hurst index of node {node} must lie in (0,1) (got {value})")]
    BadHurst { node: usize, value: f64 },
    #[error("volatility of node {node} must be positive (got {value})")]
    BadVolatility { node: usize, value: f64 },
    #[error("rho must be symmetric with unit diagonal and entries in [-1,1]")]
    BadCorrelation,
    #[error("eta must be antisymmetric (eta[i][j] = -eta[j][i])")]
    BadInterCorrelation,
    #[error("matrix dimensions do not match the node count {k}")]
    DimensionMismatch { k: usize },
    #[error(
        "assembled covariance matrix is not positive semidefinite \
         (minimum eigenvalue {min_eigenvalue}); the (H, rho, eta) \
         combination is inadmissible"
    )]
    NotPsd { min_eigenvalue: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Parameters of a multivariate fractional Brownian motion: one Hurst
/// index and volatility per node, plus instantaneous correlation `rho`
/// and antisymmetric inter-correlation `eta`.
#[derive(Debug, Clone)]
pub struct MfBmKernel {
    hurst: Vec<f64>,
    sigma: Vec<f64>,
    rho: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
}

impl MfBmKernel {
    pub fn new(
        hurst: Vec<f64>,
        sigma: Vec<f64>,
        rho: Vec<Vec<f64>>,
        eta: Vec<Vec<f64>>,
    ) -> Result<Self, KernelError> {
        let k = hurst.len();
        for (node, &h) in hurst.iter().enumerate() {
            if !(h > 0.0 && h < 1.0) {
                return Err(KernelError::BadHurst { node, value: h });
            }
        }
        if sigma.len() != k {
            return Err(KernelError::DimensionMismatch { k });
        }
        for (node, &s) in sigma.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(KernelError::BadVolatility { node, value: s });
            }
        }
        if rho.len() != k || rho.iter().any(|row| row.len() != k) {
            return Err(KernelError::DimensionMismatch { k });
        }
        if eta.len() != k || eta.iter().any(|row| row.len() != k) {
            return Err(KernelError::DimensionMismatch { k });
        }
        for i in 0..k {
            if (rho[i][i] - 1.0).abs() > 1e-12 {
                return Err(KernelError::BadCorrelation);
            }
            for j in 0..k {
                if !(rho[i][j] >= -1.0 && rho[i][j] <= 1.0)
                    || (rho[i][j] - rho[j][i]).abs() > 1e-12
                {
                    return Err(KernelError::BadCorrelation);
                }
                if (eta[i][j] + eta[j][i]).abs() > 1e-12 || !eta[i][j].is_finite() {
                    return Err(KernelError::BadInterCorrelation);
                }
            }
        }
        Ok(MfBmKernel {
            hurst,
            sigma,
            rho,
            eta,
        })
    }

    /// Kernel with independent coordinates (`rho = I`, `eta = 0`).
    pub fn independent(hurst: Vec<f64>, sigma: Vec<f64>) -> Result<Self, KernelError> {
        let k = hurst.len();
        let mut rho = vec![vec![0.0; k]; k];
        for (i, row) in rho.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let eta = vec![vec![0.0; k]; k];
        MfBmKernel::new(hurst, sigma, rho, eta)
    }

    pub fn node_count(&self) -> usize {
        self.hurst.len()
    }

    pub fn hurst(&self, i: usize) -> f64 {
        self.hurst[i]
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigma[i]
    }

    pub fn rho(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn eta(&self) -> &[Vec<f64>] {
        &self.eta
    }

    /// Returns a copy with every volatility multiplied by `c`.
    pub fn scaled_sigma(&self, c: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.sigma {
            *s *= c;
        }
        out
    }

    fn weight_fn(&self, i: usize, j: usize, h: f64) -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        let hs = self.hurst[i] + self.hurst[j];
        let a = h.abs();
        if (hs - 1.0).abs() < LOG_BRANCH_EPS {
            self.rho[i][j] * a + self.eta[i][j] * h * a.ln()
        } else {
            (self.rho[i][j] - self.eta[i][j] * h.signum()) * a.powf(hs)
        }
    }

    /// Covariance of the standardized inputs, `Cov(A_i(t), A_j(s))`.
    pub fn cov(&self, i: usize, j: usize, t: f64, s: f64) -> f64 {
        0.5 * self.sigma[i]
            * self.sigma[j]
            * (self.weight_fn(i, j, -t) + self.weight_fn(i, j, s) - self.weight_fn(i, j, s - t))
    }

    /// Covariance of two path-weighted increment combinations.
    pub fn cov_combination(&self, a: &IncrementSpec, b: &IncrementSpec) -> f64 {
        let mut acc = 0.0;
        for p in 0..a.len() {
            let (ni, sp, tp, wp) = a.term(p);
            if wp == 0.0 || sp == tp {
                continue;
            }
            for q in 0..b.len() {
                let (nj, sq, tq, wq) = b.term(q);
                if wq == 0.0 || sq == tq {
                    continue;
                }
                let c = self.cov(ni, nj, tp, tq) - self.cov(ni, nj, tp, sq)
                    - self.cov(ni, nj, sp, tq)
                    + self.cov(ni, nj, sp, sq);
                acc += wp * wq * c;
            }
        }
        acc
    }

    /// Gram matrix of a family of increment combinations, gated on
    /// positive semidefiniteness up to [`PSD_EIGENVALUE_FLOOR`].
    pub fn gram_matrix(&self, specs: &[IncrementSpec]) -> Result<DMatrix<f64>, KernelError> {
        assert!(!specs.is_empty(), "gram_matrix requires at least one spec");
        let n = specs.len();
        let mut g = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = self.cov_combination(&specs[a], &specs[b]);
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        let min_eigenvalue = g
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eigenvalue < PSD_EIGENVALUE_FLOOR {
            return Err(KernelError::NotPsd { min_eigenvalue });
        }
        Ok(g)
    }
}

/// A weighted combination of increments, one term per path:
/// `sum_r weight_r [A_{node_r}(end_r) - A_{node_r}(start_r)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSpec {
    nodes: Vec<usize>,
    starts: Vec<f64>,
    ends: Vec<f64>,
    weights: Vec<f64>,
}

impl IncrementSpec {
    pub fn new(
        nodes: Vec<usize>,
        starts: Vec<f64>,
        ends: Vec<f64>,
        weights: Vec<f64>,
    ) -> Self {
        let n = nodes.len();
        assert!(starts.len() == n && ends.len() == n && weights.len() == n);
        assert!(
            starts.iter().chain(ends.iter()).all(|v| v.is_finite()),
            "increment times must be finite"
        );
        IncrementSpec {
            nodes,
            starts,
            ends,
            weights,
        }
    }

    /// Combination `sum_r [A_{r_1}(end_r) - A_{r_1}(start_r)] Pi_r` over a
    /// path set, with per-path start and end vectors.
    pub fn from_time_vectors(paths: &PathSet, starts: &[f64], ends: &[f64]) -> Self {
        let n = paths.len();
        assert!(starts.len() == n && ends.len() == n);
        IncrementSpec::new(
            (0..n).map(|idx| paths.first_node(idx)).collect(),
            starts.to_vec(),
            ends.to_vec(),
            (0..n).map(|idx| paths.weight(idx)).collect(),
        )
    }

    /// The increment of a single coordinate over `(start, end]`.
    pub fn single(node: usize, start: f64, end: f64) -> Self {
        IncrementSpec::new(vec![node], vec![start], vec![end], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn term(&self, idx: usize) -> (usize, f64, f64, f64) {
        (
            self.nodes[idx],
            self.starts[idx],
            self.ends[idx],
            self.weights[idx],
        )
    }
}

/// `Cov(A-bar from a, A-bar from b)` on a shared network; thin wrapper
/// over [`MfBmKernel::cov_combination`] matching the operation map.
pub fn cov_bar(
    _net: &Network,
    kernel: &MfBmKernel,
    a: &IncrementSpec,
    b: &IncrementSpec,
) -> f64 {
    kernel.cov_combination(a, b)
}

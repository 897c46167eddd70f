//! Asymptotic overflow exponents for acyclic networks of single-server
//! fluid queues fed by correlated Gaussian (multivariate fractional
//! Brownian motion) inputs, in the many-sources regime.
//!
//! The crate is organized around four subsystems:
//!
//! * [`network`] — the acyclic routing topology, path enumeration,
//!   effective rates, and stability validation;
//! * [`kernel`] — the mfBm covariance kernel and covariances of
//!   path-weighted increment combinations;
//! * [`deviations`] — the piecewise rate function, the inf-sup decay
//!   bound, tightness certificates, closed forms for the fBm case, and
//!   most probable overflow paths;
//! * [`montecarlo`] — a many-sources simulator used to validate the
//!   analytical results at desk scale.

pub mod deviations;
pub mod kernel;
pub mod montecarlo;
pub mod netfile;
pub mod network;
pub mod optim;

pub use kernel::{IncrementSpec, KernelError, MfBmKernel};
pub use netfile::{load_model, parse_model, Model};
pub use network::{Network, NetworkError, Path, PathSet, ValidationReport};

//! Effective-capacity analysis and licensed-bandwidth scheduling for LTE/WiFi
//! aggregation (LWA) base stations.
pub mod baselines;
pub mod capacity;
pub mod dcf;
pub mod error;
pub mod experiment;
pub mod quadrature;
pub mod scenario;
pub mod scheduler;
pub mod sim;
pub mod validation;
pub(crate) mod serde_util;

pub use error::{Error, Result};

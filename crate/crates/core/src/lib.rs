//! Index-based beamforming feedback codebooks.
//!
//! The crate covers the full desk-scale pipeline: synthesizing MIMO channel
//! soundings, learning candidate steering matrices with k-means over
//! serialized steering vectors, generating feedback under three schemes
//! (candidate index, compressed Givens angles, angle-index clustering), and
//! scoring the overhead / link-performance trade-off with KPI, PER, MCS, and
//! goodput models.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod feedback;
pub mod linkmodel;
pub mod metrics;
pub mod numerics;

pub use error::{Error, Result};

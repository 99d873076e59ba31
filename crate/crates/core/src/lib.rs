//! Decentralized proximal gradient methods in unified primal-dual form.
//!
//! Agents sit on a static undirected network; each holds a smooth cost `J_k`
//! and all share (or each hold) a non-smooth term `R`. Iterates are stored as
//! K×M blocks with one row per agent, and every consensus matrix is a K×K
//! matrix applied to those blocks.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod analysis;
pub mod costs;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod netgraph;
pub mod prox;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type BlockIterateF64 = engine::BlockIterate<f64>;
pub type BlockIterateF32 = engine::BlockIterate<f32>;
pub type CombinationMatrixF64 = netgraph::CombinationMatrix<f64>;
pub type CombinationMatrixF32 = netgraph::CombinationMatrix<f32>;
pub type ConsensusTripleF64 = netgraph::ConsensusTriple<f64>;
pub type ConsensusTripleF32 = netgraph::ConsensusTriple<f32>;
pub type SmoothCostSetF64 = costs::SmoothCostSet<f64>;
pub type SmoothCostSetF32 = costs::SmoothCostSet<f32>;
pub type ProxOperatorF64 = prox::ProxOperator<f64>;
pub type ProxOperatorF32 = prox::ProxOperator<f32>;
pub type AlgorithmSpecF64 = engine::AlgorithmSpec<f64>;
pub type AlgorithmSpecF32 = engine::AlgorithmSpec<f32>;
pub type RunRecordF64 = engine::RunRecord<f64>;
pub type RunRecordF32 = engine::RunRecord<f32>;

//! Greedy influence maximization on undirected graphs under the Independent
//! Cascade model, using hash-based fused sampling, lane-batched label
//! propagation and memoized CELF.
//!
//! The pipeline is:
//!
//! 1. [`graph::Graph`] — CSR storage, loading and edge weighting.
//! 2. [`hash::EdgeHashTable`] + [`hash::SimulationRandoms`] — the implicit
//!    Monte-Carlo samples: edge `{u,v}` is live in simulation `r` iff
//!    `X[r] ^ h(u,v) < floor(w * h_max)`.
//! 3. [`propagate::propagate`] — connected components of all samples at once,
//!    [`LANES`] simulations per batched step.
//! 4. [`select::select_seeds`] — CELF over the memoized labels.
//!
//! [`oracle`] holds slow, explicit reference implementations used to check the
//! fused path, and [`eval`] measures the result.

pub mod error;
pub mod eval;
pub mod graph;
pub mod hash;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod propagate;
pub mod select;

pub use error::{Error, Result};
pub use graph::{Graph, WeightScheme};
pub use hash::{EdgeHashTable, SimulationRandoms, HASH_MAX, LANES};
pub use pipeline::Algorithm;
pub use propagate::{ComponentSizeTable, LabelMatrix};
pub use select::Selection;

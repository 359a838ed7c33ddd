//! Ground-state search for classical spin Hamiltonians (QUBO/HUBO over
//! qudits) by powering a diagonal matrix product operator.
//!
//! The pipeline: encode the cost `C(z)` as a sparse expansion over diagonal
//! qudit generators ([`cost`]), shift it to a non-negative operator
//! `G = Lambda - C`, compile `G` into a diagonal MPO by sequential SVDs
//! ([`mpo`]), raise it to a large power `G^K` with truncated zip-up products
//! ([`power`]), embed the result into a matrix product state and draw perfect
//! samples whose probabilities concentrate on minimizers of `C` ([`sampler`]).
//! Benchmark instance generators live in [`instances`]; exhaustive search and
//! simulated annealing references in [`baselines`].

pub mod baselines;
pub mod cost;
pub mod error;
pub mod instances;
pub mod mpo;
pub mod power;
pub mod sampler;
pub mod tensor;

pub use error::{Error, Result};

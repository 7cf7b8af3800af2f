#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Almost-sure reachability for discrete-time stochastic systems
//! `x_{k+1} = f(x_k, w_k)`: spectral classification of linear systems,
//! explicit drift/variant certificate synthesis, sampling-based
//! certificate verification, and Monte-Carlo trajectory experiments.

pub mod classifier;
pub mod counterexamples;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod spectral;
pub mod synthesis;
pub mod system;
pub mod verifier;

pub use error::{Error, Result};

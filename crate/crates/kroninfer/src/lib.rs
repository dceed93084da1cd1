//! Random Kronecker multiplex graphs: generation, denoising, and inference.
//!
//! The library generates random Kronecker graphs over multiplex networks
//! (order-4 adjacency tensors), denoises them with a singular-value shrinkage
//! estimator calibrated by random-matrix asymptotics, and recovers the
//! generating parameters `(p, X)` by permuted linear regression.
//!
//! Module map:
//! - [`tensor`]: dense even-order tensor algebra over the flattening
//!   isomorphism, plus the KTEN1 binary format.
//! - [`graph`]: the graph model - initiator construction, Kronecker powers,
//!   Bernoulli sampling, the signal tensor `S_K`, and the implicit linear
//!   operator `theta` with `vec(S_K) = theta vec(X)`.
//! - [`rmt`]: quarter-circle bulk law, spike locations, singular-vector
//!   alignments, the optimal shrinker, and its asymptotic error.
//! - [`denoise`]: density estimation, centering, and shrinkage estimation of
//!   the permuted signal tensor.
//! - [`solve`]: iterative hard thresholding and l1 relaxation for the
//!   permuted regression, plus a tiny brute-force oracle.
//! - [`pipeline`]: the end-to-end estimate / denoise / solve meta-algorithm
//!   and evaluation metrics.
//! - [`cli`]: the command surface (gen, infer, fig-*) producing reproducible
//!   CSV and JSON artifacts.

pub mod cli;
pub mod denoise;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod rmt;
pub mod rng;
pub mod solve;
pub mod tensor;

pub use error::{KronError, Result};
pub use graph::{GraphSample, InitiatorParams, Permutation, ThetaOperator};
pub use pipeline::{infer, InferenceResult, RunParams};
pub use tensor::{DenseMatrix, DenseTensor, EvenTensor};

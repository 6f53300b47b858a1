//! Flop-minimizing optimizer for finite element integration loop nests.
//!
//! Kernels are loop nests over an element loop, a quadrature reduction loop
//! and a multilinear nest over test and trial functions. The optimizer
//! eliminates redundant operations by factorization and code motion,
//! pre-evaluates quadrature reductions into constant tables when the cost
//! model predicts a gain, skips zero blocks of padded tables and emits C.

pub mod backend;
pub mod corpus;
pub mod cost;
pub mod driver;
pub mod error;
pub mod ir;
pub mod oracle;
pub mod preeval;
pub mod rewrite;
pub mod scalar;
pub mod sharing;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Kernels over double precision values.
pub type Kernel64 = ir::Kernel<f64>;
/// Kernels over single precision values.
pub type Kernel32 = ir::Kernel<f32>;
/// Kernels over exact rationals.
pub type KernelQ = ir::Kernel<num_rational::BigRational>;

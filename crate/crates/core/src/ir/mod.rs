//! Loop-nest intermediate representation.

pub mod classify;
pub mod eval;
pub mod expr;
pub mod flops;
pub mod json;
pub mod kernel;

pub use classify::{classify_loop, is_multilinear, validate_fem_nest, NestRoles, ValidatedKernel};
pub use eval::{evaluate, Evaluator};
pub use expr::{Expr, Subscript, Symbol};
pub use flops::{flop_count, flop_count_with, FlopModel};
pub use json::{kernel_to_json, parse_kernel};
pub use kernel::{Index, Kernel, Local, LocalKind, Loop, LoopClass, LoopCtx, Node, Op, Provenance, Statement, Table};

//! Expression rewrite operators: reassociation, expansion, factorization and
//! code motion.

pub mod expand;
pub mod factorize;
pub mod motion;
pub mod reassociate;

pub use expand::{expand, expand_with, expansion_cost, target_matcher};
pub use factorize::{extract_common, factorize, factorize_syms};
pub use motion::{code_motion, code_motion_with, Frame, HoistedTemp, Hoister, Mode};
pub use reassociate::reassociate;

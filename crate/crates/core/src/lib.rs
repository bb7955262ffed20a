//! Bound states of a planar strip split by a semitransparent delta barrier
//! of position-dependent strength.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values;
// banded solvers read clearer with explicit indices
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod oracle;
pub mod pairs;
pub mod profile;
pub mod quad;
pub mod spectrum;
pub mod transverse;

pub use error::{Error, Result};
pub use grid::Grid;
pub use kernel::{assemble, DiscretizedOperator, OperatorKind};
pub use profile::{CouplingProfile, Perturbation};
pub use transverse::{Geometry, ModeBasis};

//! Numerical (f,g)-calculus over complex doubles.
//!
//! The crate provides: kernel pairs (two-variable function pairs satisfying
//! the defining three-term identity), the generalized n-th order difference
//! operator built on such pairs, the associated triangular matrix inversion
//! pairs, series-expansion machinery with interpolation and convergence
//! diagnostics, and a numeric verification corpus of q-series summation and
//! transformation identities.

mod dd;
pub mod diff;
pub mod error;
pub mod expand;
pub mod invert;
pub mod kernel;
pub mod nodes;
pub mod operand;
pub mod qcore;
pub mod ser;

pub use diff::{DiffMethod, DifferenceResult};
pub use error::{FgError, Result};
pub use expand::{ExpansionReport, ExpansionSpec, IsmailReport, Verdict};
pub use invert::{InversionReport, TriangularPair};
pub use kernel::{FGPair, PairParams};
pub use nodes::{Generator, NodeSystem};
pub use operand::Operand;
pub use qcore::{QBase, SeriesValue};

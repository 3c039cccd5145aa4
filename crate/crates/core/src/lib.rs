//! Moduli of families of legendrian curves in the Heisenberg group computed
//! from quadratic differentials in the kernel of `B₂`, together with the
//! planar analogue for holomorphic quadratic differentials.

// `!(x > 0.0)` is used on purpose so that NaN is rejected; the Kronrod
// tables are quoted to full published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::should_implement_trait)]

pub mod catalog;
pub mod error;
pub mod expr;
pub mod foliation;
pub mod heis;
pub mod modulus;
pub mod planar;
pub mod qdiff;
pub mod quad;

pub use error::{Error, Result};
pub use expr::{Binding, Expr, Field, Var};
pub use heis::{group_inv, group_mul, koranyi_norm, legendrian_residual, HPoint, HTangent};

//! Numerical laboratory for the weighted extension problem
//! `div(y^a ∇u) = 0`, `-y^a ∂_y u = λ₊ u₊^(q-1) - λ₋ u₋^(q-1)` on the trace,
//! with its Almgren, Weiss and Monneau functionals, the angular construction
//! of homogeneous solutions, and nodal-set blow-up analysis.

// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

pub mod angular;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod functionals;
pub mod homogeneous;
pub mod io;
pub mod mesh;
pub mod nodal;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use field::{Field, FieldSource, QuadratureOptions};
pub use mesh::Mesh;
pub use params::{critical_constant, derive_exponents, DerivedExponents, Parameters};

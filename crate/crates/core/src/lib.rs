//! Generalized flows and transport equations for bounded velocity fields
//! satisfying a one-sided Lipschitz condition (OSLC).
//!
//! The crate builds the transport flow of a (possibly discontinuous)
//! compressive field as the limit of classical flows of mollified fields,
//! solves the backward conservative equation by pushforward along that flow
//! and the forward nonconservative equation by backward characteristics, and
//! measures the structural invariants of those solutions against closed-form
//! references.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod error;
pub mod fields;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod jacobian;
pub mod linalg;
pub mod oracles;
pub mod quadrature;
pub mod scalar;
pub mod shapes;
pub mod testfn;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instances of the generic types.
pub type Field = fields::CoefficientField<f64>;
pub type Grid = grid::SpaceTimeGrid<f64>;
pub type Flow = flow::FlowMap<f64>;
pub type Scalar = jacobian::ScalarField<f64>;
pub type Options = flow::ConvergenceOptions<f64>;
pub type Region = grid::BoxRegion<f64>;

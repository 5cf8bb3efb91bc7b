//! Parametrised polyconvex hyperelastic constitutive models built from
//! partially input-convex neural networks.
//!
//! The crate provides:
//! - tensor algebra and strain invariants with exact derivatives
//!   ([`tensor`], [`kinematics`]),
//! - four partially input-convex feed-forward architectures with exact
//!   input, parameter and mixed second derivatives ([`picnn`]),
//! - the physics-augmented potential and first Piola-Kirchhoff stress
//!   ([`pann`]),
//! - analytical Neo-Hookean ground truth and dataset construction
//!   ([`matgen`], [`dataset`]),
//! - Sobolev calibration of stresses ([`calib`]),
//! - executable property suites for the constitutive conditions
//!   ([`verify`]).
//!
//! The numeric core is generic over the scalar type ([`float::Real`]);
//! the aliases below fix the double precision instantiation used by the
//! calibration pipeline and the file formats.

pub mod calib;
pub mod dataset;
pub mod dual;
pub mod float;
pub mod kinematics;
pub mod matgen;
pub mod pann;
pub mod picnn;
pub mod tensor;

pub use dual::{Dual, Scalar};
pub use float::Real;
pub use kinematics::{
    invariant_gradients, invariants, poly_invariants, random_deformation, random_rotation,
    DeformationGradient, DomainError, InvariantGradients, InvariantSet, PolyArgs,
};
pub use tensor::Tensor2;

/// Double precision aliases used by the pipeline crates.
pub type Tensor2F64 = Tensor2<f64>;
pub type DeformationGradientF64 = DeformationGradient<f64>;
pub type InvariantSetF64 = InvariantSet<f64>;

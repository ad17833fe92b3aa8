//! Numerical laboratory for the p-Laplace equation in the plane.
//!
//! The crate solves `div(|grad u|^{p-2} grad u) = 0` on triangulated discs and
//! annuli by minimizing the regularized energy `sum |T| (|grad u|^2 + eps)^{p/2}`
//! with continuation in `eps`, and evaluates the frequency function
//! `F_p(r) = r D(r) / I(r)` together with the identities and inequalities
//! that surround it: the p-Dirichlet energy identity, the derivative formula
//! for `I(r)`, the weak doubling scan, and the ellipticity structure of the
//! linearized equation.
//!
//! Module map:
//!
//! * [`exact`]: closed-form p-harmonic reference solutions.
//! * [`mesh`]: polar triangulations, P1 fields, circle sampling.
//! * [`solver`]: regularized energy, Kačanov iteration, weak residual.
//! * [`frequency`]: `I`, `D`, `F_p`, `I'`, doubling scan, probes.
//! * [`linearize`]: quadratic form, drift coefficients, nondivergence residuals.

pub mod error;
pub mod exact;
pub mod field;
pub mod frequency;
pub mod linearize;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use exact::ExactSolution;
pub use field::{Field, Point};
pub use mesh::{Domain, ScalarField, TriMesh};

/// Spatial dimension used by every numerical routine.
///
/// Formulas that carry the dimension symbolically (radial exponents, the
/// `(n-1)/r` term of `I'`) take it from here.
pub const DIM: usize = 2;

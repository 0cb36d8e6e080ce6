//! Geodesics, cut and conjugate loci, singularity types and small-time heat
//! kernels of two-dimensional almost-Riemannian structures near a Grushin
//! point, in the normal form `(∂x, x f(x, y) ∂y)`.

// Negated float comparisons are used so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod exact;
pub mod frame;
pub mod heat;
pub mod integrator;
pub mod jet;
pub mod loci;
pub mod ode;
pub mod report;
pub mod solve;
pub mod stats;

pub use error::{Error, Result};
pub use exact::SingularityClass;
pub use frame::{Covector, FrameSpec, GeodesicState, HamiltonianFlow, Monomial, Point};
pub use integrator::{RayEnd, SensitivityTrajectory, Trajectory, DEFAULT_TOL};

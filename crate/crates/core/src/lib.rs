//! Monte Carlo laboratory for expected norms of weighted sums of random
//! vectors drawn uniformly from convex bodies.
//!
//! The central quantity is the multi-integral norm
//!
//! ```text
//! ‖t‖ = E ‖ t_1 x_1 + … + t_s x_s ‖_K ,   x_j uniform on C_j ,
//! ```
//!
//! where the `C_j` and `K` are symmetric convex bodies (here: scaled,
//! optionally rotated `ℓp` balls) and `‖·‖_K` is the gauge of `K`. The crate
//! provides
//!
//! * exact geometry for the `ℓp` family ([`bodies`]): gauges, support
//!   functions, volumes, isotropic constants, circumradii,
//! * exact uniform samplers and reproducible, splittable random streams
//!   ([`sampling`]),
//! * estimators for the global invariants of a body: mean gauge on the
//!   sphere, power means, mean width, Gaussian median, critical dimensions
//!   ([`functionals`]),
//! * estimators for the multi-integral norm itself along two independent
//!   routes, plus closed forms used as cross-checks ([`norms`]),
//! * checkers that confront the estimates with the inequalities they are
//!   expected to satisfy and report margins in combined standard errors
//!   ([`bounds`]),
//! * sign-balancing algorithms and randomized balancing experiments
//!   ([`balancing`]).
//!
//! All estimators take an explicit [`RngStream`] and produce results that are
//! byte-for-byte reproducible for a fixed `(seed, stream)` pair, independent
//! of the number of worker threads.

pub mod balancing;
pub mod bodies;
pub mod bounds;
pub mod error;
pub mod functionals;
mod mat;
pub mod norms;
pub mod sampling;
pub mod stats;

pub use bodies::{BodyFamily, BodySpec, Exponent, MetaConstants, TaggedConstant};
pub use error::Error;
pub use sampling::{BodyTuple, Pattern, PushforwardMeasure, WeightVector};
pub use stats::{CensoredEstimate, Estimate, RngStream};

/// Version stamp embedded in serialized outputs.
pub const SCHEMA_VERSION: u32 = 1;

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

//! Analysis and numerical solution of switching problems with controlled
//! randomisation.
//!
//! The library is organised around the pipeline:
//!
//! 1. [`markov`]: per-control Markov-chain analytics: invariant measures,
//!    excursion costs and the identities they satisfy.
//! 2. [`geometry`]: the convex reflection domain cut out by the switching
//!    obstacles: membership, non-emptiness certificates, slice vertices,
//!    projections and the positive-cost translation.
//! 3. [`reflection`]: oblique reflection operators mapping normal-cone
//!    vectors into the switching cone, with verification certificates.
//! 4. [`lattice`]: a backward-induction lattice solver for the obliquely
//!    reflected backward SDE driving the value field.
//! 5. [`simulate`]: strategy simulation: randomised mode transitions,
//!    Monte Carlo reward estimates, the threshold strategy read off a solved
//!    lattice, and an independent dynamic-programming oracle.

// Index loops over several same-length arrays at once read better than
// zipped iterator chains in this kind of numeric code.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod geometry;
pub mod lattice;
pub mod linalg;
pub mod markov;
pub mod reflection;
pub mod simplex;
pub mod simulate;

pub use error::{GeometryError, LatticeError, ModelError, ReflectionError, SimulationError};

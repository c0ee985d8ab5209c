//! Crate-wide error types.

use thiserror::Error;

/// Errors raised by model validation and Markov-chain analytics.
#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mode count must be at least 2, got {0}")]
    TooFewModes(usize),
    #[error("non-finite entry at {0}")]
    NonFinite(String),
    #[error("transition matrix is reducible: excursion costs undefined")]
    Reducible,
    #[error("substochastic matrix is not absorbing (spectral radius {rho:.6} >= 1)")]
    NotAbsorbing { rho: f64 },
    #[error("adjugate identity requires three distinct indices (d >= 3), got d = {0}")]
    NeedsThreeIndices(usize),
    #[error("internal cross-check failed: {0}")]
    InternalCheck(String),
}

/// Errors raised by domain-geometry operations.
#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("domain is empty")]
    EmptyDomain,
    #[error("interior empty; vertex characterization unavailable")]
    EmptyInterior,
    #[error("operation requires an uncontrolled model (single control)")]
    NotUncontrolled,
    #[error("point outside slice: barycentric coordinate {coord} = {value:.3e}")]
    OutsideSlice { coord: usize, value: f64 },
    #[error("shift point is not strictly interior (worst slack {slack:.3e})")]
    NotInterior { slack: f64 },
    #[error("oblique projection did not converge after {sweeps} sweeps (residual {residual:.3e}); check that minimal costs are positive and the domain is nonempty")]
    ProjectionStalled { sweeps: usize, residual: f64 },
    #[error("classical embedding requires zero diagonal costs, got c[{i}][{i}] = {value}")]
    NonzeroDiagonalCost { i: usize, value: f64 },
    #[error("operation requires d = 3, got d = {0}")]
    NotDimensionThree(usize),
}

/// Errors raised when constructing or verifying reflection operators.
#[derive(Debug, Clone, Error)]
pub enum ReflectionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("matrix Q^({index},{index}) is not certified strictly copositive")]
    NotCopositive { index: usize },
    #[error("construction requires 0 < p,q,r < 1, got ({p}, {q}, {r})")]
    DegenerateTransition { p: f64, q: f64, r: f64 },
    #[error("symmetric family requires d >= 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("field verification failed: {0}")]
    VerificationFailed(String),
}

/// Errors raised by the lattice solver.
#[derive(Debug, Clone, Error)]
pub enum LatticeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("grid too coarse for gaussian quadrature: sigma*sqrt(dt) = {sigma_dt:.3e} < spacing {spacing:.3e}; use spacing <= {suggested:.3e}")]
    GridTooCoarse {
        sigma_dt: f64,
        spacing: f64,
        suggested: f64,
    },
    #[error("trinomial branch weights invalid at node {node} (stay weight {weight:.3e}); widen spacing to >= {suggested:.3e} or reduce dt")]
    TrinomialUnstable {
        node: usize,
        weight: f64,
        suggested: f64,
    },
    #[error("Picard iteration not contracting: L*dt = {l_dt:.3e} >= 1; use dt <= {max_dt:.3e}")]
    NotContracting { l_dt: f64, max_dt: f64 },
    #[error("signed costs (min {c_hat:.3e} <= 0) and no strictly interior anchor found")]
    NoInteriorAnchor { c_hat: f64 },
    #[error("refinement needs at least 3 lattice resolutions, got {0}")]
    TooFewResolutions(usize),
    #[error("volatility {sigma:.3e} at grid node {node} is not bounded away from zero")]
    DegenerateVolatility { node: usize, sigma: f64 },
}

/// Errors raised by the strategy simulator.
#[derive(Debug, Clone, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("strategy evaluation requires a driver independent of (y, z); solve the reflected system instead")]
    DriverDependsOnYz,
    #[error("solution lattice does not match the model ({0})")]
    MismatchedSolution(String),
}

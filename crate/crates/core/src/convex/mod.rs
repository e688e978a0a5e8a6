//! Convex calculus: Fenchel conjugates and the convexity constants of a function.

mod conjugate;
mod constants;

pub use conjugate::{conjugate_gradient, fenchel_conjugate, Conjugate, ConjugatePoint, MAX_EXPANSIONS};
pub use constants::{
    convexity_report, estimate_semiconcavity, estimate_uniform_convexity, is_strictly_convex, is_superlinear,
    midpoint_violation, ConvexityReport, Semiconcavity,
};

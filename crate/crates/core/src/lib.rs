//! Viscosity solutions of `u_t + H(D_x u) = 0`, `u(0, ·) = σ` through the
//! Hopf-Lax formula, together with the convex-analysis toolkit around it:
//! Fenchel conjugates, semidifferentials, generalized characteristics,
//! regularity diagnostics, viscosity verification and backward-forward
//! reconstruction.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod backward;
pub mod characteristics;
pub mod convex;
pub mod error;
pub mod expr;
pub mod function;
pub mod hopf_lax;
pub mod io;
mod numeric;
pub mod regularity;
pub mod scalar;
mod search;
pub mod semidiff;
pub mod viscosity;

pub use error::{Error, Result};
pub use numeric::{linspace, log_spaced};
pub use scalar::Real;
pub use function::{Expression, ScalarFunction};
pub use hopf_lax::{ConcaveProblem, Problem, SolverSettings};

pub type Problem64 = hopf_lax::Problem<f64>;
pub type ConcaveProblem64 = hopf_lax::ConcaveProblem<f64>;
pub type TerminalProblem64 = backward::TerminalProblem<f64>;
pub type Function64 = function::ScalarFunction<f64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_precision_smoke() {
        let h = ScalarFunction::<f32>::parse("0.5*p^2", 1).unwrap();
        let s = ScalarFunction::<f32>::parse("-abs(x)", 1).unwrap();
        let prob = Problem::new(h, s, 1.0f32).unwrap();
        let u = prob.evaluate(1.0, &[0.5]).unwrap();
        assert!((u + 1.0).abs() < 1e-3, "{u}");
    }
}

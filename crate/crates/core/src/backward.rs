//! Backward solutions from terminal data, the reachability condition
//! `g(x) = min_z max_y {g(y) - T H*((y-z)/T) + T H*((x-z)/T)}` and the
//! backward/forward round trip.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{Axis, Grid, ScalarFunction};
use crate::hopf_lax::{ConcaveProblem, Problem, Regime, SolverSettings};
use crate::scalar::Real;

/// `H`, terminal data `g` and horizon `T`.
#[derive(Clone, Debug)]
pub struct TerminalProblem<T> {
    hamiltonian: ScalarFunction<T>,
    terminal: ScalarFunction<T>,
    horizon: T,
    backward: ConcaveProblem<T>,
}

/// Outcome of the reachability test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BfReport<T> {
    pub holds: bool,
    pub max_deviation: T,
    pub tolerance: T,
    /// `(x, outer(x) - g(x))`.
    pub profile: Vec<(T, T)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundtripReport<T> {
    pub bf: BfReport<T>,
    /// `max_x |u(T,x) - g(x)|`.
    pub sup_error: T,
    /// `max |u(t,x) - w(t,x)|` over the sampled `(t,x)`.
    pub equality_error: T,
    /// The forward solution had a singleton minimizer set at every sampled `(t,x)`.
    pub strip_verdict: bool,
    /// `g` is C¹ and Lipschitz, where `bf` holding is equivalent to `u(T,·) = g`.
    pub within_hypotheses: bool,
}

/// Nodes of the tabulated `w(0,·)`.
pub const DEFAULT_INNER_NODES: usize = 4097;

impl<T: Real> TerminalProblem<T> {
    pub fn new(hamiltonian: ScalarFunction<T>, terminal: ScalarFunction<T>, horizon: T) -> Result<Self> {
        let settings = SolverSettings::new(hamiltonian.dim());
        Self::with_settings(hamiltonian, terminal, horizon, settings)
    }

    pub fn with_settings(
        hamiltonian: ScalarFunction<T>,
        terminal: ScalarFunction<T>,
        horizon: T,
        settings: SolverSettings<T>,
    ) -> Result<Self> {
        if hamiltonian.dim() != 1 {
            return Err(Error::Unsupported("backward/forward analysis is implemented on a line".into()));
        }
        let backward = ConcaveProblem::with_settings(hamiltonian.negated(), terminal.clone(), horizon, settings)?;
        Ok(TerminalProblem {
            hamiltonian,
            terminal,
            horizon,
            backward,
        })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn terminal(&self) -> &ScalarFunction<T> {
        &self.terminal
    }

    /// `w(t,x) = max_y g(y) - (T-t) H*((y-x)/(T-t))`.
    pub fn backward_solve(&self, t: T, x: &[T]) -> Result<T> {
        if !(t >= T::zero() && t <= self.horizon) {
            return Err(Error::OutOfRange(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        self.backward.evaluate(self.horizon - t, x)
    }

    /// `w(0,·)` on `[lo, hi]` as a Hermite table whose node slopes are the
    /// one-sided derivatives carried by the maximizers.
    pub fn initial_profile(&self, lo: T, hi: T, nodes: usize) -> Result<ScalarFunction<T>> {
        let axis = Axis::new(lo, hi, nodes)?;
        let convex = self.backward.convex();
        let t = self.horizon;
        let rows: Vec<(T, T, T)> = axis
            .nodes()
            .par_iter()
            .map(|&z| {
                let set = convex.minimizer_set(t, &[z])?;
                if set.regime == Regime::Initial {
                    let (l, r) = self.terminal.one_sided(z).unwrap_or((T::nan(), T::nan()));
                    return Ok((-set.value, l, r));
                }
                // v = -w is a minimum of smooth functions of z: right slope is
                // the smallest carried gradient, left slope the largest
                let mut lo_q = T::infinity();
                let mut hi_q = T::neg_infinity();
                for y in &set.points {
                    let q = convex.gradient_from(t, &[z], y)?.space[0];
                    lo_q = lo_q.min(q);
                    hi_q = hi_q.max(q);
                }
                Ok((-set.value, -hi_q, -lo_q))
            })
            .collect::<Result<_>>()?;
        let values = rows.iter().map(|r| r.0).collect();
        let left = rows.iter().map(|r| r.1).collect();
        let right = rows.iter().map(|r| r.2).collect();
        let grid = Grid::line(axis, values)?.with_slopes(left, right)?;
        Ok(ScalarFunction::from_grid(grid))
    }

    fn inner_span(&self, xs: &[T]) -> Result<(T, T)> {
        if xs.is_empty() || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("need finite sample points"));
        }
        let lo = xs.iter().copied().fold(T::infinity(), T::min);
        let hi = xs.iter().copied().fold(T::neg_infinity(), T::max);
        let pad = T::lit(2.0) * self.backward.convex().search().radius(self.horizon) + T::one();
        Ok((lo - pad, hi + pad))
    }

    fn forward(&self, sigma: ScalarFunction<T>, span: (T, T)) -> Result<Problem<T>> {
        let settings = SolverSettings {
            window: vec![span],
            ..self.backward.convex().settings().clone()
        };
        Problem::with_settings(self.hamiltonian.clone(), sigma, self.horizon, settings)
    }

    /// Reachability test on `xs`: tabulate `inner = w(0,·)`, sweep it forward
    /// to `T` and compare with `g`.
    pub fn bf_condition(&self, xs: &[T], tol: T) -> Result<BfReport<T>> {
        let span = self.inner_span(xs)?;
        let inner = self.initial_profile(span.0, span.1, DEFAULT_INNER_NODES)?;
        let forward = self.forward(inner, span)?;
        self.compare(&forward, xs, tol)
    }

    fn compare(&self, forward: &Problem<T>, xs: &[T], tol: T) -> Result<BfReport<T>> {
        let profile: Vec<(T, T)> = xs
            .par_iter()
            .map(|&x| Ok((x, forward.evaluate(self.horizon, &[x])? - self.terminal.eval1(x))))
            .collect::<Result<_>>()?;
        let max_deviation = profile.iter().fold(T::zero(), |m, p| m.max(p.1.abs()));
        Ok(BfReport {
            holds: max_deviation <= tol,
            max_deviation,
            tolerance: tol,
            profile,
        })
    }

    /// Backward solve to `t = 0`, forward solve from there, and compare.
    pub fn roundtrip(&self, xs: &[T], ts: &[T], tol: T) -> Result<RoundtripReport<T>> {
        if ts.iter().any(|t| !(*t > T::zero() && *t <= self.horizon)) {
            return Err(Error::OutOfRange("round-trip times must lie in (0, T]".into()));
        }
        let span = self.inner_span(xs)?;
        let inner = self.initial_profile(span.0, span.1, DEFAULT_INNER_NODES)?;
        let forward = self.forward(inner, span)?;
        let bf = self.compare(&forward, xs, tol)?;
        let x_nodes: Vec<Vec<T>> = xs.iter().map(|x| vec![*x]).collect();
        let solved = forward.solve_grid(ts, &x_nodes);
        let mut equality_error = T::zero();
        let mut strip_verdict = true;
        for cell in &solved.cells {
            let u = cell
                .value
                .ok_or_else(|| Error::Numerical(format!("forward solve failed at t = {}, x = {:?}", cell.t, cell.x)))?;
            let w = self.backward_solve(cell.t, &cell.x)?;
            equality_error = equality_error.max((u - w).abs());
            strip_verdict &= cell.singleton;
        }
        let within_hypotheses = self.terminal.is_exact()
            && self.terminal.kinks(span.0, span.1).is_empty()
            && self.backward.convex().search().lipschitz.is_finite();
        Ok(RoundtripReport {
            sup_error: bf.max_deviation,
            bf,
            equality_error,
            strip_verdict,
            within_hypotheses,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linspace;

    fn terminal(g: &str) -> TerminalProblem<f64> {
        TerminalProblem::new(
            ScalarFunction::parse("0.5*p^2", 1).unwrap(),
            ScalarFunction::parse(g, 1).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn backward_values() {
        let a = terminal("x");
        assert!((a.backward_solve(0.0, &[0.0]).unwrap() - 0.5).abs() < 1e-12);
        let k = terminal("-abs(x)");
        for x in [-2.0f64, -0.5, 0.0, 0.3, 1.7] {
            let want: f64 = if x.abs() <= 1.0 { -x * x / 2.0 } else { -x.abs() + 0.5 };
            assert!((k.backward_solve(0.0, &[x]).unwrap() - want).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn reachability() {
        let xs = linspace(-2.0, 2.0, 9);
        assert!(terminal("-abs(x)").bf_condition(&xs, 1e-5).unwrap().holds);
        let bad = terminal("abs(x)").bf_condition(&xs, 1e-5).unwrap();
        assert!(!bad.holds);
        assert!((bad.profile[4].1 - 0.5).abs() < 1e-4, "{:?}", bad.profile[4]);
    }
}

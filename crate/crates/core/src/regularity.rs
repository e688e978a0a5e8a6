//! Differentiability of the Hopf-Lax solution: pointwise verdicts, the
//! strip `(0, t*) × window` on which it is C¹, and the semiconvexity bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::convex::{estimate_semiconcavity, Semiconcavity};
use crate::error::{Error, Result};
use crate::function::{Axis, Grid, ScalarFunction};
use crate::hopf_lax::{GradientPair, MinimizerSet, Problem};
use crate::numeric::linspace;
use crate::scalar::Real;

/// Constants entering the semiconvexity-preservation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegularityParams<T> {
    /// Uniform convexity of `H*`: `H*'' >= θ`, i.e. `H'' <= 1/θ`.
    pub theta: T,
    /// Semiconvexity of σ: `σ'' >= -B`; infinite for a concave kink.
    pub b: T,
    pub horizon: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemiconvexityBound<T> {
    /// `min(T, θ/B)`.
    pub t_star_bound: T,
    /// Bound `θB/(θ - B t0)` on the semiconvexity constant of `u(t0, ·)`.
    pub constant: Option<T>,
}

/// `θ/γ`-optimal bound. The constant is only reported for `t0 < t_star_bound`.
pub fn semiconvexity_bound<T: Real>(params: &RegularityParams<T>, t0: Option<T>) -> Result<SemiconvexityBound<T>> {
    let RegularityParams { theta, b, horizon } = *params;
    if !(theta > T::zero()) {
        return Err(Error::NotApplicable(format!("H* is not uniformly convex (θ = {theta})")));
    }
    if b < T::zero() || b.is_nan() {
        return Err(Error::invalid("semiconvexity constant must be nonnegative"));
    }
    let t_star_bound = if b == T::zero() { horizon } else { horizon.min(theta / b) };
    let constant = t0.and_then(|t0| {
        if !(t0 > T::zero()) || t0 >= t_star_bound {
            return None;
        }
        Some(if b == T::zero() { T::zero() } else { theta * b / (theta - b * t0) })
    });
    Ok(SemiconvexityBound { t_star_bound, constant })
}

/// Estimates `θ` from the semiconcavity of `H` near the reachable gradients
/// and `B` from the semiconcavity of `-σ` on the sampling window.
pub fn estimate_params<T: Real>(prob: &Problem<T>) -> RegularityParams<T> {
    let n = prob.dim();
    let reach = T::lit(2.0) * (prob.search().lipschitz + T::one());
    let tol = prob.settings().tol;
    let theta = match estimate_semiconcavity(prob.hamiltonian(), &vec![(-reach, reach); n], tol) {
        Semiconcavity::Finite(c) if c > T::zero() => T::one() / c,
        _ => T::zero(),
    };
    let b = match estimate_semiconcavity(&prob.sigma().negated(), &prob.settings().window, tol) {
        Semiconcavity::Finite(c) => c,
        Semiconcavity::Infinite => T::infinity(),
    };
    RegularityParams {
        theta,
        b,
        horizon: prob.horizon(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointVerdict<T> {
    pub differentiable: bool,
    pub gradient: Option<GradientPair<T>>,
    pub minimizers: MinimizerSet<T>,
}

/// `u` is differentiable at `(t,x)` iff `ℓ(t,x)` is a single cluster.
pub fn is_differentiable_at<T: Real>(prob: &Problem<T>, t: T, x: &[T]) -> Result<PointVerdict<T>> {
    let set = prob.minimizer_set(t, x)?;
    let gradient = if set.is_singleton() {
        Some(prob.gradient_from(t, x, &set.points[0])?)
    } else {
        None
    };
    Ok(PointVerdict {
        differentiable: set.is_singleton(),
        gradient,
        minimizers: set,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StripWitness<T> {
    pub t: T,
    pub x: Vec<T>,
    /// `ℓ(t,x)`, empty when the query itself failed.
    pub points: Vec<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeVerdict<T> {
    pub t: T,
    pub differentiable: bool,
    /// Scanned points with a non-singleton minimizer set.
    pub kinks: usize,
    pub witness: Option<StripWitness<T>>,
}

/// Which regularity hypotheses hold for the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypotheses {
    pub sigma_lipschitz: bool,
    /// `None` where kinks cannot be listed exactly (planar or sampled σ).
    pub sigma_c1: Option<bool>,
    pub sigma_semiconvex: bool,
    pub conjugate_uniformly_convex: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StripReport<T> {
    /// Largest scanned `t` with a singleton `ℓ` at every scanned point of
    /// every scanned time up to `t`; zero if the first time already fails.
    pub t_star_numeric: T,
    pub t_star_bound: Option<T>,
    pub scan_step: T,
    pub params: RegularityParams<T>,
    pub per_time: Vec<TimeVerdict<T>>,
    pub first_failure: Option<StripWitness<T>>,
    pub hypotheses: Hypotheses,
}

/// Default strip scan: 32 times in `(0, T]` and 513 points per axis.
pub fn default_strip_scan<T: Real>(horizon: T) -> Vec<T> {
    linspace(horizon / T::lit(32.0), horizon, 32)
}

/// Points of the window lattice with `resolution` nodes per axis.
pub fn window_points<T: Real>(window: &[(T, T)], resolution: usize) -> Vec<Vec<T>> {
    let axes: Vec<Vec<T>> = window.iter().map(|&(a, b)| linspace(a, b, resolution)).collect();
    match axes.len() {
        1 => axes[0].iter().map(|x| vec![*x]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|a| axes[1].iter().map(move |b| vec![*a, *b]))
            .collect(),
    }
}

/// Scans every `(t, x)` of `t_scan × window lattice` for differentiability.
pub fn differentiability_strip<T: Real>(
    prob: &Problem<T>,
    t_scan: &[T],
    window: &[(T, T)],
    resolution: usize,
) -> Result<StripReport<T>> {
    if t_scan.is_empty() || t_scan.windows(2).any(|w| !(w[1] > w[0])) || !(t_scan[0] > T::zero()) {
        return Err(Error::invalid("strip scan times must be positive and increasing"));
    }
    if window.len() != prob.dim() || resolution < 2 {
        return Err(Error::invalid("strip window does not match the problem"));
    }
    let xs = window_points(window, resolution);
    let nx = xs.len();
    let flags: Vec<std::result::Result<(bool, Vec<Vec<T>>), ()>> = (0..t_scan.len() * nx)
        .into_par_iter()
        .map(|k| match prob.minimizer_set(t_scan[k / nx], &xs[k % nx]) {
            Ok(s) => Ok((s.is_singleton(), s.points)),
            Err(_) => Err(()),
        })
        .collect();
    let mut per_time = Vec::with_capacity(t_scan.len());
    for (i, &t) in t_scan.iter().enumerate() {
        let row = &flags[i * nx..(i + 1) * nx];
        let mut kinks = 0;
        let mut witness = None;
        for (j, f) in row.iter().enumerate() {
            let bad = match f {
                Ok((single, _)) => !single,
                Err(()) => true,
            };
            if bad {
                kinks += 1;
                if witness.is_none() {
                    witness = Some(StripWitness {
                        t,
                        x: xs[j].clone(),
                        points: f.as_ref().map(|p| p.1.clone()).unwrap_or_default(),
                    });
                }
            }
        }
        per_time.push(TimeVerdict {
            t,
            differentiable: kinks == 0,
            kinks,
            witness,
        });
    }
    let good = per_time.iter().take_while(|v| v.differentiable).count();
    let t_star_numeric = if good == 0 { T::zero() } else { t_scan[good - 1] };
    let first_failure = per_time.get(good).and_then(|v| v.witness.clone());
    let params = estimate_params(prob);
    let t_star_bound = semiconvexity_bound(&params, None).ok().map(|b| b.t_star_bound);
    let sigma_c1 = (prob.dim() == 1 && prob.sigma().is_exact()).then(|| prob.sigma_kinks().is_empty());
    let scan_step = if t_scan.len() > 1 { t_scan[1] - t_scan[0] } else { t_scan[0] };
    Ok(StripReport {
        t_star_numeric,
        t_star_bound,
        scan_step,
        hypotheses: Hypotheses {
            sigma_lipschitz: prob.search().lipschitz.is_finite(),
            sigma_c1,
            sigma_semiconvex: params.b.is_finite(),
            conjugate_uniformly_convex: params.theta > T::zero(),
        },
        params,
        per_time,
        first_failure,
    })
}

/// Semiconvexity constant of `x ↦ u(t0, x)` sampled on the window
/// (1025 nodes on a line, 65² in the plane).
pub fn semiconvexity_observed<T: Real>(prob: &Problem<T>, t0: T, window: &[(T, T)]) -> Result<Semiconcavity<T>> {
    if window.len() != prob.dim() {
        return Err(Error::invalid("window does not match the problem"));
    }
    let n = if prob.dim() == 1 { 1025 } else { 65 };
    let axes: Vec<Axis<T>> = window.iter().map(|&(a, b)| Axis::new(a, b, n)).collect::<Result<_>>()?;
    let pts = window_points(window, n);
    let values: Vec<T> = pts
        .par_iter()
        .map(|x| prob.evaluate(t0, x).map(|v| -v))
        .collect::<Result<_>>()?;
    let grid = if prob.dim() == 1 {
        Grid::line(axes[0], values)?
    } else {
        Grid::plane(axes[0], axes[1], values)?
    };
    Ok(estimate_semiconcavity(
        &ScalarFunction::from_grid(grid),
        window,
        prob.settings().tol,
    ))
}

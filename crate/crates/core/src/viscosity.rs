//! Viscosity sub/supersolution checks for the Hopf-Lax solution and for
//! external candidates `v(t,x)` on a line.

use rayon::prelude::*;
use serde::Serialize;

use crate::characteristics::reachable_gradients;
use crate::error::{Error, Result};
use crate::function::Axis;
use crate::hopf_lax::{Differentiability, Problem};
use crate::numeric::{golden_min, linspace};
use crate::scalar::Real;

/// A function of `(t, x)` to be tested against `u_t + H(Du) = 0`.
pub trait Candidate<T>: Sync {
    fn value(&self, t: T, x: T) -> T;

    /// Natural difference step at `(t, x)`.
    fn step(&self, t: T, x: T) -> T;
}

/// Candidate given by a closure.
pub struct FnCandidate<F> {
    f: F,
}

impl<F> FnCandidate<F> {
    pub fn new(f: F) -> Self {
        FnCandidate { f }
    }
}

impl<T: Real, F: Fn(T, T) -> T + Sync> Candidate<T> for FnCandidate<F> {
    fn value(&self, t: T, x: T) -> T {
        (self.f)(t, x)
    }

    fn step(&self, t: T, x: T) -> T {
        T::lit(1e-3) * (T::one() + x.abs()).min(T::one() + t.abs())
    }
}

/// Candidate sampled on a `(t, x)` lattice, bilinear between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCandidate<T> {
    t_axis: Axis<T>,
    x_axis: Axis<T>,
    /// Time-major values.
    values: Vec<T>,
}

impl<T: Real> GridCandidate<T> {
    pub fn new(t_axis: Axis<T>, x_axis: Axis<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != t_axis.len * x_axis.len || t_axis.len < 2 || x_axis.len < 2 {
            return Err(Error::invalid("candidate grid values do not match its axes"));
        }
        Ok(GridCandidate { t_axis, x_axis, values })
    }

    /// From scattered `(t, x, v)` rows that fill a regular lattice.
    pub fn from_rows(rows: &[(T, T, T)]) -> Result<Self> {
        let mut ts: Vec<T> = rows.iter().map(|r| r.0).collect();
        let mut xs: Vec<T> = rows.iter().map(|r| r.1).collect();
        let sort = |v: &mut Vec<T>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            v.dedup();
        };
        sort(&mut ts);
        sort(&mut xs);
        if ts.len() * xs.len() != rows.len() || ts.len() < 2 || xs.len() < 2 {
            return Err(Error::invalid("candidate rows do not form a full lattice"));
        }
        let t_axis = Axis::new(ts[0], ts[ts.len() - 1], ts.len())?;
        let x_axis = Axis::new(xs[0], xs[xs.len() - 1], xs.len())?;
        let regular = |v: &[T], a: &Axis<T>| {
            v.iter()
                .enumerate()
                .all(|(i, p)| (*p - a.node(i)).abs() <= T::lit(1e-9) * (T::one() + p.abs()))
        };
        if !regular(&ts, &t_axis) || !regular(&xs, &x_axis) {
            return Err(Error::invalid("candidate lattice is not uniformly spaced"));
        }
        let mut values = vec![T::nan(); rows.len()];
        let index = |v: T, a: &Axis<T>| ((v - a.start) / a.step).round().to_usize().unwrap_or(0).min(a.len - 1);
        for &(t, x, v) in rows {
            values[index(t, &t_axis) * x_axis.len + index(x, &x_axis)] = v;
        }
        Self::new(t_axis, x_axis, values)
    }

    pub fn t_axis(&self) -> Axis<T> {
        self.t_axis
    }

    pub fn x_axis(&self) -> Axis<T> {
        self.x_axis
    }
}

impl<T: Real> Candidate<T> for GridCandidate<T> {
    fn value(&self, t: T, x: T) -> T {
        let locate = |v: T, a: &Axis<T>| {
            let u = ((v - a.start) / a.step).floor();
            let i = u.to_usize().unwrap_or(0).min(a.len - 2);
            let i = if u < T::zero() { 0 } else { i };
            (i, (v - a.node(i)) / a.step)
        };
        let (i, s) = locate(t, &self.t_axis);
        let (j, r) = locate(x, &self.x_axis);
        let n = self.x_axis.len;
        let v = |a: usize, b: usize| self.values[a * n + b];
        let one = T::one();
        (one - s) * ((one - r) * v(i, j) + r * v(i, j + 1)) + s * ((one - r) * v(i + 1, j) + r * v(i + 1, j + 1))
    }

    fn step(&self, _t: T, _x: T) -> T {
        self.t_axis.step.min(self.x_axis.step)
    }
}

/// Outcome of both viscosity inequalities at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCheck<T> {
    pub t: T,
    pub x: Vec<T>,
    /// `max p_t + H(p)` over `D⁺`; `None` when `D⁺` is empty.
    pub sub_margin: Option<T>,
    /// Maximizing `(p_t, p)` for `sub_margin`.
    pub sub_witness: Option<(T, Vec<T>)>,
    /// `min p_t + H(p)` over `D⁻`; `None` when `D⁻` is empty.
    pub super_margin: Option<T>,
    pub super_witness: Option<(T, Vec<T>)>,
    /// `|p_t + H(p)|` where the candidate is differentiable.
    pub residual: Option<T>,
    /// Difference quotients did not settle at the sample scale.
    pub unreliable: bool,
}

/// `|u_t + H(D_x u)|` at a point of differentiability of the Hopf-Lax solution.
pub fn residual_at<T: Real>(prob: &Problem<T>, t: T, x: &[T]) -> Result<T> {
    match prob.gradient_at(t, x)? {
        Differentiability::Differentiable(g) => Ok((g.time + prob.hamiltonian().eval(&g.space)).abs()),
        Differentiability::NotDifferentiable(_) => Err(Error::NotApplicable(format!(
            "u is not differentiable at t = {t}, x = {x:?}"
        ))),
    }
}

/// Viscosity check of the Hopf-Lax solution from its reachable gradients:
/// `D⁺u` is their convex hull and `D⁻u` is empty at a kink.
pub fn check_solution_at<T: Real>(prob: &Problem<T>, t: T, x: &[T]) -> Result<PointCheck<T>> {
    let set = reachable_gradients(prob, t, x)?;
    let h = prob.hamiltonian();
    let mut check = PointCheck {
        t,
        x: x.to_vec(),
        sub_margin: None,
        sub_witness: None,
        super_margin: None,
        super_witness: None,
        residual: None,
        unreliable: false,
    };
    if set.pairs.len() == 1 {
        let g = &set.pairs[0];
        let m = g.time + h.eval(&g.space);
        check.residual = Some(m.abs());
        check.sub_margin = Some(m);
        check.super_margin = Some(m);
        check.sub_witness = Some((g.time, g.space.clone()));
        check.super_witness = check.sub_witness.clone();
        return Ok(check);
    }
    // p_t + H(p) is convex, so its maximum over the hull sits at a vertex;
    // interior samples of each edge are kept as a cross-check.
    let mut best: Option<(T, (T, Vec<T>))> = None;
    let k = set.pairs.len();
    for i in 0..k {
        for j in i..k {
            let (a, b) = (&set.pairs[i], &set.pairs[j]);
            let steps = if i == j { 1 } else { 9 };
            for s in 0..steps {
                let w = T::count(s) / T::lit(8.0);
                let pt = a.time + w * (b.time - a.time);
                let p: Vec<T> = a.space.iter().zip(&b.space).map(|(u, v)| *u + w * (*v - *u)).collect();
                let m = pt + h.eval(&p);
                if best.as_ref().is_none_or(|(bm, _)| m > *bm) {
                    best = Some((m, (pt, p)));
                }
            }
        }
    }
    if let Some((m, w)) = best {
        check.sub_margin = Some(m);
        check.sub_witness = Some(w);
    }
    Ok(check)
}

/// Number of directions in the `(t, x)` plane for candidate semidifferentials.
const DIRECTIONS: usize = 32;

/// Clips a convex polygon to `a·p <= c`.
fn clip<T: Real>(poly: &[[T; 2]], a: [T; 2], c: T) -> Vec<[T; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    let side = |p: &[T; 2]| a[0] * p[0] + a[1] * p[1] - c;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (sp, sq) = (side(&p), side(&q));
        if sp <= T::zero() {
            out.push(p);
        }
        if (sp < T::zero() && sq > T::zero()) || (sp > T::zero() && sq < T::zero()) {
            let w = sp / (sp - sq);
            out.push([p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])]);
        }
    }
    out
}

/// Semidifferentials of a candidate at `(t, x)` as polygons in `(p_t, p)`,
/// from Richardson-extrapolated one-sided directional derivatives.
fn candidate_polygons<T: Real>(cand: &dyn Candidate<T>, t: T, x: T) -> (Vec<[T; 2]>, Vec<[T; 2]>, bool) {
    let h0 = cand.step(t, x);
    let v0 = cand.value(t, x);
    let mut unreliable = !v0.is_finite();
    let mut derivs = Vec::with_capacity(DIRECTIONS);
    for k in 0..DIRECTIONS {
        let th = T::PI() * T::count(k) / T::lit(16.0);
        let d = [th.cos(), th.sin()];
        let q = |h: T| (cand.value(t + h * d[0], x + h * d[1]) - v0) / h;
        let (q0, q1, q2) = (q(h0), q(h0 / T::lit(2.0)), q(h0 / T::lit(4.0)));
        let r1 = T::lit(2.0) * q1 - q0;
        let r2 = T::lit(2.0) * q2 - q1;
        let spread = (r2 - r1).abs();
        if !r2.is_finite() || spread > T::lit(1e-2) * (T::one() + r2.abs()) {
            unreliable = true;
        }
        derivs.push((d, r2, spread));
    }
    let big = T::lit(1e3) * (T::one() + derivs.iter().fold(T::zero(), |m, v| m.max(v.1.abs())));
    let square = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
    let mut sup = square.clone();
    let mut sub = square;
    for (d, dv, spread) in &derivs {
        let infl = T::lit(1e-9) * (T::one() + dv.abs()) + *spread;
        // D⁺: <p, d> >= D(d);  D⁻: <p, d> <= D(d)
        sup = clip(&sup, [-d[0], -d[1]], -(*dv - infl));
        sub = clip(&sub, *d, *dv + infl);
    }
    (sup, sub, unreliable)
}

/// Viscosity check of an external candidate on a line.
pub fn check_candidate_at<T: Real>(prob: &Problem<T>, cand: &dyn Candidate<T>, t: T, x: T) -> Result<PointCheck<T>> {
    if prob.dim() != 1 {
        return Err(Error::Unsupported("candidate checks are implemented on a line".into()));
    }
    if !(t > T::zero()) {
        return Err(Error::OutOfRange("candidate checks need t > 0".into()));
    }
    let h = prob.hamiltonian();
    let form = |p: &[T; 2]| p[0] + h.eval(&[p[1]]);
    let (sup, sub, unreliable) = candidate_polygons(cand, t, x);
    let mut check = PointCheck {
        t,
        x: vec![x],
        sub_margin: None,
        sub_witness: None,
        super_margin: None,
        super_witness: None,
        residual: None,
        unreliable,
    };
    if !sup.is_empty() {
        let (m, p) = sup
            .iter()
            .map(|p| (form(p), *p))
            .fold((T::neg_infinity(), sup[0]), |acc, c| if c.0 > acc.0 { c } else { acc });
        check.sub_margin = Some(m);
        check.sub_witness = Some((p[0], vec![p[1]]));
    }
    if !sub.is_empty() {
        // no interior minimum: the form is strictly increasing in p_t
        let n = sub.len();
        let mut best = (T::infinity(), sub[0]);
        for i in 0..n {
            let (a, b) = (sub[i], sub[(i + 1) % n]);
            let at = |w: T| [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])];
            let (w, m) = golden_min(|w| form(&at(w)), T::zero(), T::one(), T::lit(1e-12), 200);
            let end = form(&a);
            let (m, p) = if end < m { (end, a) } else { (m, at(w)) };
            if m < best.0 {
                best = (m, p);
            }
        }
        check.super_margin = Some(best.0);
        check.super_witness = Some((best.1[0], vec![best.1[1]]));
    }
    if let (Some(a), Some(b)) = (check.sub_margin, check.super_margin) {
        let diam = sup
            .iter()
            .chain(&sub)
            .fold(T::zero(), |m, p| m.max((p[0] - sup[0][0]).abs()).max((p[1] - sup[0][1]).abs()));
        if diam <= T::lit(1e-6) * (T::one() + sup[0][0].abs() + sup[0][1].abs()) {
            check.residual = Some(a.abs().max(b.abs()));
        }
    }
    Ok(check)
}

/// What [`verify_region`] checks.
pub enum Subject<'a, T> {
    /// The Hopf-Lax solution of the problem.
    Solution,
    Candidate(&'a dyn Candidate<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Direction<T> {
    pub pass: bool,
    /// Largest sub margin or smallest super margin; `None` if vacuous everywhere.
    pub worst_margin: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness<T> {
    pub t: T,
    pub x: Vec<T>,
    pub gradient: (T, Vec<T>),
    pub margin: T,
    pub subsolution: bool,
}

/// Bounded evidence for the initial trace `u(t,·) -> σ` as `t -> 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialTrace<T> {
    /// `(t, max_x |u(t,x) - σ(x)|)` at `t = 0.1, 0.01, 0.001`.
    pub deviations: Vec<(T, T)>,
    pub decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViscosityVerdict<T> {
    pub subsolution: Direction<T>,
    pub supersolution: Direction<T>,
    pub residual_max: Option<T>,
    /// Failing points, worst first (at most 16).
    pub witnesses: Vec<Witness<T>>,
    pub unreliable: bool,
    pub points: usize,
    pub initial_trace: InitialTrace<T>,
}

impl<T> ViscosityVerdict<T> {
    pub fn passes(&self) -> bool {
        self.subsolution.pass && self.supersolution.pass
    }
}

/// Checks both inequalities on the `t_window × x_window` lattice.
pub fn verify_region<T: Real>(
    prob: &Problem<T>,
    subject: Subject<'_, T>,
    t_window: (T, T),
    x_window: (T, T),
    samples: (usize, usize),
    tol: T,
) -> Result<ViscosityVerdict<T>> {
    if prob.dim() != 1 {
        return Err(Error::Unsupported("region verification is implemented on a line".into()));
    }
    if !(t_window.0 > T::zero()) || t_window.1 < t_window.0 || samples.0 == 0 || samples.1 == 0 {
        return Err(Error::invalid("verification window must lie in t > 0"));
    }
    let ts = linspace(t_window.0, t_window.1, samples.0);
    let xs = linspace(x_window.0, x_window.1, samples.1);
    let nx = xs.len();
    let checks: Vec<PointCheck<T>> = (0..ts.len() * nx)
        .into_par_iter()
        .map(|k| {
            let (t, x) = (ts[k / nx], xs[k % nx]);
            match &subject {
                Subject::Solution => check_solution_at(prob, t, &[x]),
                Subject::Candidate(c) => check_candidate_at(prob, *c, t, x),
            }
        })
        .collect::<Result<_>>()?;
    let mut witnesses = Vec::new();
    let mut sub_worst: Option<T> = None;
    let mut super_worst: Option<T> = None;
    let mut residual_max: Option<T> = None;
    for c in &checks {
        if let (Some(m), Some(w)) = (c.sub_margin, &c.sub_witness) {
            sub_worst = Some(sub_worst.map_or(m, |s| s.max(m)));
            if m > tol {
                witnesses.push(Witness {
                    t: c.t,
                    x: c.x.clone(),
                    gradient: w.clone(),
                    margin: m,
                    subsolution: true,
                });
            }
        }
        if let (Some(m), Some(w)) = (c.super_margin, &c.super_witness) {
            super_worst = Some(super_worst.map_or(m, |s| s.min(m)));
            if m < -tol {
                witnesses.push(Witness {
                    t: c.t,
                    x: c.x.clone(),
                    gradient: w.clone(),
                    margin: m,
                    subsolution: false,
                });
            }
        }
        if let Some(r) = c.residual {
            residual_max = Some(residual_max.map_or(r, |s| s.max(r)));
        }
    }
    witnesses.sort_by(|a, b| {
        b.margin
            .abs()
            .partial_cmp(&a.margin.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    witnesses.truncate(16);
    let trace_value = |t: T, x: T| match &subject {
        Subject::Solution => prob.evaluate(t, &[x]).unwrap_or(T::nan()),
        Subject::Candidate(c) => c.value(t, x),
    };
    let trace_x = linspace(x_window.0, x_window.1, 33);
    let deviations: Vec<(T, T)> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&t| {
            let t = T::lit(t);
            let d = trace_x
                .iter()
                .fold(T::zero(), |m, &x| m.max((trace_value(t, x) - prob.sigma().eval1(x)).abs()));
            (t, d)
        })
        .collect();
    let decreasing = deviations.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(ViscosityVerdict {
        subsolution: Direction {
            pass: sub_worst.is_none_or(|m| m <= tol),
            worst_margin: sub_worst,
        },
        supersolution: Direction {
            pass: super_worst.is_none_or(|m| m >= -tol),
            worst_margin: super_worst,
        },
        residual_max,
        witnesses,
        unreliable: checks.iter().any(|c| c.unreliable),
        points: checks.len(),
        initial_trace: InitialTrace { deviations, decreasing },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::ScalarFunction;

    fn problem(sigma: &str) -> Problem<f64> {
        Problem::new(
            ScalarFunction::parse("0.5*p^2", 1).unwrap(),
            ScalarFunction::parse(sigma, 1).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn kink_of_the_solution() {
        let p = problem("-abs(x)");
        let c = check_solution_at(&p, 1.0, &[0.0]).unwrap();
        assert!(c.sub_margin.unwrap().abs() < 1e-12);
        assert!(c.super_margin.is_none());
        assert!(residual_at(&p, 1.0, &[3.0]).unwrap() < 1e-14);
    }

    #[test]
    fn false_candidate_fails_at_origin() {
        let p = problem("abs(x)");
        let v = FnCandidate::new(|t: f64, x: f64| x.abs() - t / 2.0);
        let c = check_candidate_at(&p, &v, 1.0, 0.0).unwrap();
        assert!((c.super_margin.unwrap() + 0.5).abs() < 1e-6, "{c:?}");
        assert!(c.sub_margin.is_none());
        let r = verify_region(&p, Subject::Candidate(&v), (0.5, 1.0), (-1.0, 1.0), (3, 5), 1e-6).unwrap();
        assert!(r.subsolution.pass && !r.supersolution.pass);
        assert_eq!(r.witnesses[0].x, vec![0.0]);
    }

    #[test]
    fn smooth_candidate_residual() {
        let p = problem("0.5*x^2");
        let v = FnCandidate::new(|t: f64, x: f64| x * x / (2.0 * (1.0 + t)));
        let c = check_candidate_at(&p, &v, 0.5, 0.7).unwrap();
        assert!(c.residual.unwrap() < 1e-6, "{c:?}");
    }

    #[test]
    fn grid_candidate_interpolates() {
        let rows: Vec<(f64, f64, f64)> = (0..3)
            .flat_map(|i| (0..4).map(move |j| (i as f64 * 0.5, j as f64, i as f64 + 10.0 * j as f64)))
            .collect();
        let g = GridCandidate::from_rows(&rows).unwrap();
        assert!((g.value(0.25, 1.5) - (0.5 + 15.0)).abs() < 1e-12);
    }
}

//! Generalized characteristics `x(t) = y + t H_p(q)`, `q ∈ D#σ(y)`, the
//! preimage set `ℓ*(t,x)` and reachable gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::ScalarFunction;
use crate::hopf_lax::{GradientPair, Problem, Regime, SolverSettings};
use crate::numeric::{log_spaced, sign_change, x_tol};
use crate::scalar::Real;
use crate::semidiff::{d_sharp, Branch};

/// Straight line from `(0, origin)` with velocity `H_p(slope)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Characteristic<T> {
    pub origin: Vec<T>,
    pub slope: Vec<T>,
    pub velocity: Vec<T>,
    pub branch: Branch,
}

impl<T: Real> Characteristic<T> {
    pub fn position(&self, t: T) -> Vec<T> {
        self.origin.iter().zip(&self.velocity).map(|(y, v)| *y + t * *v).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CurveType {
    /// The origin minimizes `ζ(t,x,·)`.
    I,
    /// The curve reaches `(t,x)` but its origin is not a minimizer.
    II,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    TypeI,
    TypeII,
    NotThroughPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreimagePoint<T> {
    pub origin: Vec<T>,
    pub slope: Vec<T>,
    pub branch: Branch,
    pub kind: CurveType,
}

/// `ℓ*(t,x)` with each origin typed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreimageSet<T> {
    pub t: T,
    pub x: Vec<T>,
    pub points: Vec<PreimagePoint<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanPoint<T> {
    pub t: T,
    pub x: Vec<T>,
    pub kind: CurveType,
    pub singleton: bool,
}

/// Classification of one curve along increasing times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlongReport<T> {
    pub samples: Vec<ScanPoint<T>>,
    /// Largest scanned time at which the curve is type I.
    pub last_type_one: Option<T>,
    /// Scanned times around the first switch from type I to type II.
    pub switch_bracket: Option<(T, T)>,
    /// Times breaking persistence: type I after a type II sample, or a
    /// non-singleton minimizer set before a later type I sample.
    pub violations: Vec<T>,
}

impl<T: Real> AlongReport<T> {
    pub fn ensure_monotone(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(t) => Err(Error::InvariantViolation(format!(
                "type-I persistence fails along the curve at t = {t}"
            ))),
        }
    }
}

/// `D*u(t,x) = {(-H(q), q)}` over the minimizers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReachableGradients<T> {
    pub t: T,
    pub x: Vec<T>,
    pub pairs: Vec<GradientPair<T>>,
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (u, v)| s + (*u - *v) * (*u - *v)).sqrt()
}

fn membership_tol<T: Real>(q: &[T]) -> T {
    T::lit(1e-6) * (T::one() + q.iter().fold(T::zero(), |m, v| m.max(v.abs())))
}

/// `H_p(q)`; at a kink of `H` the mean of the one-sided partials.
pub fn hamiltonian_velocity<T: Real>(h: &ScalarFunction<T>, q: &[T]) -> Result<Vec<T>> {
    let n = q.len();
    (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            let r = h.directional(q, &e);
            e[i] = -T::one();
            let l = h.directional(q, &e).map(|v| -v);
            match (l, r) {
                (Some(l), Some(r)) => Ok((l + r) / T::lit(2.0)),
                _ => Err(Error::Numerical(format!("H_p undefined at {q:?}"))),
            }
        })
        .collect()
}

/// The characteristic from `y` with datum `q`, which must lie in `D#σ(y)`.
pub fn forward_curve<T: Real>(prob: &Problem<T>, y: &[T], q: &[T]) -> Result<Characteristic<T>> {
    if y.len() != prob.dim() || q.len() != prob.dim() {
        return Err(Error::invalid("origin or datum has the wrong dimension"));
    }
    let d = d_sharp(prob.sigma(), y)?;
    let branch = d
        .locate(q, membership_tol(q))
        .ok_or_else(|| Error::InvalidDatum(format!("q = {q:?} is not in D#σ({y:?})")))?;
    Ok(Characteristic {
        origin: y.to_vec(),
        slope: q.to_vec(),
        velocity: hamiltonian_velocity(prob.hamiltonian(), q)?,
        branch,
    })
}

fn in_set<T: Real>(points: &[Vec<T>], y: &[T]) -> bool {
    points
        .iter()
        .any(|p| dist(p, y) <= T::lit(1e-5) * (T::one() + y.iter().fold(T::zero(), |m, v| m.max(v.abs()))))
}

/// Type of the curve at `(t0, x0)`.
pub fn classify_curve<T: Real>(prob: &Problem<T>, curve: &Characteristic<T>, t0: T, x0: &[T]) -> Result<Classification> {
    let at = curve.position(t0);
    if dist(&at, x0) > T::lit(1e-6) * (T::one() + x0.iter().fold(T::zero(), |m, v| m.max(v.abs()))) {
        return Ok(Classification::NotThroughPoint);
    }
    let set = prob.minimizer_set(t0, x0)?;
    Ok(if in_set(&set.points, &curve.origin) {
        Classification::TypeI
    } else {
        Classification::TypeII
    })
}

/// 64 log-spaced times in `[T/1000, T]`.
pub fn default_scan<T: Real>(horizon: T) -> Vec<T> {
    log_spaced(horizon * T::lit(1e-3), horizon, 64)
}

/// Classifies the curve at each scan time and checks type-I persistence.
pub fn classify_along<T: Real>(prob: &Problem<T>, curve: &Characteristic<T>, t_scan: &[T]) -> Result<AlongReport<T>> {
    if t_scan.windows(2).any(|w| !(w[1] > w[0])) || t_scan.first().is_some_and(|t| !(*t > T::zero())) {
        return Err(Error::invalid("scan times must be positive and strictly increasing"));
    }
    let mut samples = Vec::with_capacity(t_scan.len());
    for &t in t_scan {
        let x = curve.position(t);
        let set = prob.minimizer_set(t, &x)?;
        let kind = if in_set(&set.points, &curve.origin) { CurveType::I } else { CurveType::II };
        samples.push(ScanPoint {
            t,
            x,
            kind,
            singleton: set.is_singleton(),
        });
    }
    let last_i = samples.iter().rposition(|s| s.kind == CurveType::I);
    let mut violations = Vec::new();
    if let Some(last) = last_i {
        for s in &samples[..last] {
            if s.kind == CurveType::II || !s.singleton {
                violations.push(s.t);
            }
        }
    }
    let switch_bracket = samples
        .windows(2)
        .find(|w| w[0].kind == CurveType::I && w[1].kind == CurveType::II)
        .map(|w| (w[0].t, w[1].t));
    Ok(AlongReport {
        last_type_one: last_i.map(|i| samples[i].t),
        samples,
        switch_bracket,
        violations,
    })
}

fn axis_problem<T: Real>(prob: &Problem<T>, h: ScalarFunction<T>, sigma: ScalarFunction<T>, window: (T, T)) -> Result<Problem<T>> {
    let base = prob.settings();
    let settings = SolverSettings {
        window: vec![window],
        epsilon: base.epsilon,
        cluster_steps: base.cluster_steps,
        initial_time: base.initial_time,
        tol: base.tol,
        ..SolverSettings::new(1)
    };
    Problem::with_settings(h, sigma, prob.horizon(), settings)
}

/// `ℓ*(t,x)`.
///
/// In two variables only separable `H` and `σ`, or isotropic `H` with
/// radial `σ` at `x ≠ 0`, are handled.
pub fn preimage_set<T: Real>(prob: &Problem<T>, t: T, x: &[T]) -> Result<PreimageSet<T>> {
    if !(t > T::zero()) || t > prob.horizon() {
        return Err(Error::OutOfRange(format!("t = {t} outside (0, {}]", prob.horizon())));
    }
    if x.len() != prob.dim() {
        return Err(Error::invalid("query point has the wrong dimension"));
    }
    if prob.dim() == 1 {
        return preimage_line(prob, t, x[0]);
    }
    let w = prob.settings().window.clone();
    let span = w.iter().fold(T::one(), |m, (a, b)| m.max(a.abs()).max(b.abs()));
    let probe = [(-span, span), (-span, span)];
    if let (Some([h1, h2]), Some([s1, s2])) = (
        prob.hamiltonian().separable_parts(&probe),
        prob.sigma().separable_parts(&probe),
    ) {
        let a = preimage_line(&axis_problem(prob, h1, s1, w[0])?, t, x[0])?;
        let b = preimage_line(&axis_problem(prob, h2, s2, w[1])?, t, x[1])?;
        let mut points = Vec::new();
        for p in &a.points {
            for r in &b.points {
                let branch = match (p.branch, r.branch) {
                    (Branch::Smooth, o) | (o, Branch::Smooth) => o,
                    (u, v) if u == v => u,
                    _ => continue,
                };
                let kind = if p.kind == CurveType::I && r.kind == CurveType::I {
                    CurveType::I
                } else {
                    CurveType::II
                };
                points.push(PreimagePoint {
                    origin: vec![p.origin[0], r.origin[0]],
                    slope: vec![p.slope[0], r.slope[0]],
                    branch,
                    kind,
                });
            }
        }
        return Ok(PreimageSet { t, x: x.to_vec(), points });
    }
    let radial = prob.sigma().radial_profile(span).is_some() && prob.hamiltonian().radial_profile(span).is_some();
    if !radial {
        return Err(Error::Unsupported(
            "preimage sets in two variables need separable or radial data".into(),
        ));
    }
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == T::zero() {
        return Err(Error::Unsupported("radial preimage at the origin is a continuum".into()));
    }
    let e = [x[0] / r, x[1] / r];
    let line_h = prob.hamiltonian().along_line(e).ok_or_else(|| Error::Unsupported("sampled H".into()))?;
    let line_s = prob.sigma().along_line(e).ok_or_else(|| Error::Unsupported("sampled σ".into()))?;
    let line = preimage_line(&axis_problem(prob, line_h, line_s, (-span, span))?, t, r)?;
    let points = line
        .points
        .into_iter()
        .map(|p| PreimagePoint {
            origin: vec![p.origin[0] * e[0], p.origin[0] * e[1]],
            slope: vec![p.slope[0] * e[0], p.slope[0] * e[1]],
            branch: p.branch,
            kind: p.kind,
        })
        .collect();
    Ok(PreimageSet { t, x: x.to_vec(), points })
}

fn preimage_line<T: Real>(prob: &Problem<T>, t: T, x: T) -> Result<PreimageSet<T>> {
    let sigma = prob.sigma();
    let conj = prob.conjugate();
    let q_of = |y: T| conj.exact(&[(x - y) / t]).map(|c| c.argmax[0]);
    let phi = |y: T| -> T {
        match (q_of(y), sigma.one_sided(y)) {
            (Ok(q), Some((_, r))) => q - r,
            _ => T::nan(),
        }
    };
    let set = prob.minimizer_set(t, &[x])?;
    let radius = prob.search().radius(t).max(set.radius);
    let n = prob.settings().search_nodes;
    let ys = crate::linspace(x - radius, x + radius, n);
    let vals: Vec<T> = ys.iter().map(|&y| phi(y)).collect();
    let mut roots: Vec<T> = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        if a == T::zero() {
            roots.push(ys[i]);
            continue;
        }
        if !(a.is_finite() && b.is_finite()) || a.signum() == b.signum() {
            continue;
        }
        let flip = if a < T::zero() { T::one() } else { -T::one() };
        roots.push(sign_change(|y| flip * phi(y), ys[i], ys[i + 1], x_tol(ys[i]), 200));
    }
    if vals[n - 1] == T::zero() {
        roots.push(ys[n - 1]);
    }
    let kinks: Vec<T> = prob
        .sigma_kinks()
        .iter()
        .copied()
        .filter(|k| *k >= x - radius && *k <= x + radius)
        .collect();
    for r in &mut roots {
        if let Some(k) = kinks.iter().find(|k| (**k - *r).abs() <= T::lit(1e-8) * (T::one() + k.abs())) {
            *r = *k;
        }
    }
    roots.extend(kinks.iter().copied());
    roots.extend(set.points.iter().map(|p| p[0]));
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    roots.dedup_by(|a, b| (*a - *b).abs() <= T::lit(1e-8) * (T::one() + a.abs()));
    let h = ys[1] - ys[0];
    let mut points = Vec::new();
    for y in roots {
        let q = q_of(y)?;
        let slack = (q_of(y + h)? - q).abs();
        let d = d_sharp(sigma, &[y])?;
        let kind = if in_set(&set.points, &[y]) { CurveType::I } else { CurveType::II };
        let branch = match d.locate(&[q], membership_tol(&[q]) + slack) {
            Some(b) => b,
            // minimizers belong to ℓ* even where the slack is too tight
            None if kind == CurveType::I => Branch::Sub,
            None => continue,
        };
        points.push(PreimagePoint {
            origin: vec![y],
            slope: vec![q],
            branch,
            kind,
        });
    }
    Ok(PreimageSet {
        t,
        x: vec![x],
        points,
    })
}

/// `{(-H(q), q)}` with `q = H*_z((x - y)/t)` over `y ∈ ℓ(t,x)`.
pub fn reachable_gradients<T: Real>(prob: &Problem<T>, t: T, x: &[T]) -> Result<ReachableGradients<T>> {
    let set = prob.minimizer_set(t, x)?;
    let qs: Vec<Vec<T>> = if set.regime == Regime::Initial {
        match (prob.sigma_gradient(x), prob.dim()) {
            (Some(q), _) => vec![q],
            (None, 1) => {
                let (l, r) = prob
                    .sigma()
                    .one_sided(x[0])
                    .ok_or_else(|| Error::Numerical("σ has no one-sided derivatives".into()))?;
                vec![vec![l], vec![r]]
            }
            _ => return Err(Error::Unsupported("reachable gradients of kinked planar data at t = 0".into())),
        }
    } else {
        set.points
            .iter()
            .map(|y| prob.gradient_from(t, x, y).map(|g| g.space))
            .collect::<Result<_>>()?
    };
    let mut pairs: Vec<GradientPair<T>> = Vec::new();
    for q in qs {
        if pairs.iter().any(|p| dist(&p.space, &q) <= T::lit(1e-9) * (T::one() + q.iter().fold(T::zero(), |m, v| m.max(v.abs())))) {
            continue;
        }
        pairs.push(GradientPair {
            time: -prob.hamiltonian().eval(&q),
            space: q,
        });
    }
    Ok(ReachableGradients { t, x: x.to_vec(), pairs })
}

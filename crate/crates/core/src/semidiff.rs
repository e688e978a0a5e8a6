//! Super- and subdifferentials (`D⁺`, `D⁻`) and their union `D#`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::ScalarFunction;
use crate::scalar::Real;

/// Closed convex set of (co)vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConvexSet<T> {
    Empty,
    Interval { lo: T, hi: T },
    /// Axis-aligned box `[lo_i, hi_i]`.
    Box { lo: Vec<T>, hi: Vec<T> },
    Segment { a: Vec<T>, b: Vec<T> },
    Ball { center: Vec<T>, radius: T },
    /// Convex polygon with counter-clockwise vertices.
    Polygon { vertices: Vec<Vec<T>> },
}

fn dist_segment<T: Real>(q: &[T], a: &[T], b: &[T]) -> T {
    let d: Vec<T> = a.iter().zip(b).map(|(x, y)| *y - *x).collect();
    let len2 = d.iter().fold(T::zero(), |s, v| s + *v * *v);
    let s = if len2 > T::zero() {
        let proj = q.iter().zip(a).zip(&d).fold(T::zero(), |s, ((qi, ai), di)| s + (*qi - *ai) * *di);
        (proj / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    q.iter()
        .zip(a)
        .zip(&d)
        .fold(T::zero(), |acc, ((qi, ai), di)| {
            let r = *qi - (*ai + s * *di);
            acc + r * r
        })
        .sqrt()
}

impl<T: Real> ConvexSet<T> {
    pub fn point(p: Vec<T>) -> Self {
        if p.len() == 1 {
            ConvexSet::Interval { lo: p[0], hi: p[0] }
        } else {
            ConvexSet::Box { lo: p.clone(), hi: p }
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ConvexSet::Empty)
    }

    /// Euclidean distance from `q` to the set, `+inf` for the empty set.
    pub fn distance(&self, q: &[T]) -> T {
        match self {
            ConvexSet::Empty => T::infinity(),
            ConvexSet::Interval { lo, hi } => (*lo - q[0]).max(q[0] - *hi).max(T::zero()),
            ConvexSet::Box { lo, hi } => q
                .iter()
                .zip(lo.iter().zip(hi))
                .fold(T::zero(), |s, (v, (a, b))| {
                    let d = (*a - *v).max(*v - *b).max(T::zero());
                    s + d * d
                })
                .sqrt(),
            ConvexSet::Segment { a, b } => dist_segment(q, a, b),
            ConvexSet::Ball { center, radius } => {
                let d = q
                    .iter()
                    .zip(center)
                    .fold(T::zero(), |s, (v, c)| s + (*v - *c) * (*v - *c))
                    .sqrt();
                (d - *radius).max(T::zero())
            }
            ConvexSet::Polygon { vertices } => {
                let n = vertices.len();
                match n {
                    0 => T::infinity(),
                    1 => dist_segment(q, &vertices[0], &vertices[0]),
                    2 => dist_segment(q, &vertices[0], &vertices[1]),
                    _ => {
                        let inside = (0..n).all(|i| {
                            let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
                            (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]) >= T::zero()
                        });
                        if inside {
                            T::zero()
                        } else {
                            (0..n).fold(T::infinity(), |m, i| {
                                m.min(dist_segment(q, &vertices[i], &vertices[(i + 1) % n]))
                            })
                        }
                    }
                }
            }
        }
    }

    pub fn contains(&self, q: &[T], tol: T) -> bool {
        self.distance(q) <= tol
    }

    /// Minkowski sum of two 1-D intervals (empty if either is empty).
    pub fn sum_1d(&self, other: &Self) -> Option<Self> {
        match (self, other) {
            (ConvexSet::Empty, _) | (_, ConvexSet::Empty) => Some(ConvexSet::Empty),
            (ConvexSet::Interval { lo: a, hi: b }, ConvexSet::Interval { lo: c, hi: d }) => {
                Some(ConvexSet::Interval { lo: *a + *c, hi: *b + *d })
            }
            _ => None,
        }
    }

    /// Lower and upper end of a 1-D interval.
    pub fn bounds_1d(&self) -> Option<(T, T)> {
        match self {
            ConvexSet::Interval { lo, hi } => Some((*lo, *hi)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `D⁺`: `limsup (f(z) - f(y) - <p, z - y>) / |z - y| <= 0`.
    Super,
    /// `D⁻`: `liminf (f(z) - f(y) - <p, z - y>) / |z - y| >= 0`.
    Sub,
}

/// A semidifferential together with how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemidiffSet<T> {
    pub side: Side,
    pub set: ConvexSet<T>,
    /// Spread of the extrapolated difference quotients; zero for exact derivatives.
    pub uncertainty: T,
}

/// Which part of `D#` produced a datum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Both semidifferentials are the same singleton.
    Smooth,
    Super,
    Sub,
    /// Both semidifferentials empty, `D# = {0}`.
    Fallback,
}

/// `D# f(y)`: `D⁺ ∪ D⁻`, or `{0}` when both are empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DSharp<T> {
    pub sup: SemidiffSet<T>,
    pub sub: SemidiffSet<T>,
}

impl<T: Real> DSharp<T> {
    pub fn is_fallback(&self) -> bool {
        self.sup.set.is_empty() && self.sub.set.is_empty()
    }

    /// Branch containing `q` within `tol`, if any.
    pub fn locate(&self, q: &[T], tol: T) -> Option<Branch> {
        if self.is_fallback() {
            let n = q.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
            return (n <= tol).then_some(Branch::Fallback);
        }
        let tol_sup = tol + self.sup.uncertainty;
        let tol_sub = tol + self.sub.uncertainty;
        match (self.sup.set.contains(q, tol_sup), self.sub.set.contains(q, tol_sub)) {
            (true, true) => Some(Branch::Smooth),
            (true, false) => Some(Branch::Super),
            (false, true) => Some(Branch::Sub),
            (false, false) => None,
        }
    }

    pub fn contains(&self, q: &[T], tol: T) -> bool {
        self.locate(q, tol).is_some()
    }
}

fn interval_from<T: Real>(lo: T, hi: T, tol: T) -> ConvexSet<T> {
    if lo <= hi + tol {
        if lo > hi {
            let m = (lo + hi) / T::lit(2.0);
            ConvexSet::Interval { lo: m, hi: m }
        } else {
            ConvexSet::Interval { lo, hi }
        }
    } else {
        ConvexSet::Empty
    }
}

/// Sets from exact one-sided derivatives `l = f'(y-)`, `r = f'(y+)` on the line.
fn from_one_sided<T: Real>(l: T, r: T, side: Side) -> ConvexSet<T> {
    let tol = T::lit(1e-12) * (T::one() + l.abs() + r.abs());
    match side {
        Side::Super => interval_from(r, l, tol),
        Side::Sub => interval_from(l, r, tol),
    }
}

/// Halving step sequence used for closed forms without exact derivatives.
pub fn default_steps<T: Real>(f: &ScalarFunction<T>) -> Vec<T> {
    match f.grid_step() {
        Some(h) => [8.0, 4.0, 2.0, 1.0].iter().map(|k| h[0] * T::lit(*k)).collect(),
        None => (0..14).map(|k| T::lit(1e-2 * 0.5f64.powi(k))).collect(),
    }
}

/// Semidifferential from difference quotients at decreasing `steps`.
///
/// Consecutive quotients are Richardson-extrapolated; when the last
/// extrapolations agree the one-sided derivatives exist and the sets follow
/// from them, otherwise they are bracketed by the extreme quotients over the
/// finer half of the steps (`D⁺ = [limsup r₊, liminf r₋]`,
/// `D⁻ = [limsup r₋, liminf r₊]`).
pub fn numeric_semidiff<T: Real>(f: impl Fn(T) -> T, y: T, steps: &[T], side: Side) -> SemidiffSet<T> {
    let fy = f(y);
    let right: Vec<T> = steps.iter().map(|&h| (f(y + h) - fy) / h).collect();
    let left: Vec<T> = steps.iter().map(|&h| (fy - f(y - h)) / h).collect();
    let extrapolate = |q: &[T]| -> Option<(T, T)> {
        let k = q.len();
        if k < 3 {
            return None;
        }
        let rich = |i: usize| {
            let (h0, h1) = (steps[i], steps[i + 1]);
            (h0 * q[i + 1] - h1 * q[i]) / (h0 - h1)
        };
        let (a, b) = (rich(k - 3), rich(k - 2));
        let spread = (a - b).abs();
        let scale = T::one() + a.abs().max(b.abs());
        let raw_spread = (q[k - 1] - q[k - 2]).abs();
        (spread <= T::lit(1e-5) * scale || raw_spread <= T::lit(1e-9) * scale).then_some((b, spread))
    };
    let fine = steps.len() / 2;
    let extremes = |q: &[T]| {
        q[fine..]
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
    };
    match (extrapolate(&left), extrapolate(&right)) {
        (Some((l, ul)), Some((r, ur))) => {
            let unc = ul.max(ur);
            let tol = unc + T::lit(1e-9) * (T::one() + l.abs() + r.abs());
            let set = match side {
                Side::Super => interval_from(r, l, tol),
                Side::Sub => interval_from(l, r, tol),
            };
            SemidiffSet {
                side,
                set,
                uncertainty: unc,
            }
        }
        _ => {
            let (rmin, rmax) = extremes(&right);
            let (lmin, lmax) = extremes(&left);
            let set = match side {
                Side::Super => interval_from(rmax, lmin, T::zero()),
                Side::Sub => interval_from(lmax, rmin, T::zero()),
            };
            SemidiffSet {
                side,
                set,
                uncertainty: T::zero(),
            }
        }
    }
}

/// `D⁺f(y)` or `D⁻f(y)`.
///
/// Exact for closed forms on the line and, in the plane, for separable sums,
/// radial functions and points of differentiability. Sampled grids go
/// through [`numeric_semidiff`].
pub fn semidiff_at<T: Real>(f: &ScalarFunction<T>, y: &[T], side: Side) -> Result<SemidiffSet<T>> {
    if y.len() != f.dim() {
        return Err(Error::invalid("point has the wrong dimension"));
    }
    if f.dim() == 1 {
        if !f.is_exact() {
            return Ok(numeric_semidiff(|v| f.eval1(v), y[0], &default_steps(f), side));
        }
        return Ok(match f.one_sided(y[0]) {
            Some((l, r)) => SemidiffSet {
                side,
                set: from_one_sided(l, r, side),
                uncertainty: T::zero(),
            },
            None => numeric_semidiff(|v| f.eval1(v), y[0], &default_steps(f), side),
        });
    }
    let exact = |set| SemidiffSet {
        side,
        set,
        uncertainty: T::zero(),
    };
    let span = y.iter().fold(T::one(), |m, v| m.max(v.abs())) * T::lit(2.0);
    let window = [(-span, span), (-span, span)];
    if let Some([a, b]) = f.separable_parts(&window) {
        let sa = semidiff_at(&a, &y[..1], side)?;
        let sb = semidiff_at(&b, &y[1..], side)?;
        return Ok(match (sa.set.bounds_1d(), sb.set.bounds_1d()) {
            (Some((a0, a1)), Some((b0, b1))) => SemidiffSet {
                side,
                set: ConvexSet::Box {
                    lo: vec![a0, b0],
                    hi: vec![a1, b1],
                },
                uncertainty: sa.uncertainty.max(sb.uncertainty),
            },
            _ => exact(ConvexSet::Empty),
        });
    }
    let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
    if let Some(profile) = f.radial_profile(span) {
        if r > T::zero() {
            let e = [y[0] / r, y[1] / r];
            let line = f.along_line(e).expect("radial functions are closed forms");
            let s = semidiff_at(&line, &[r], side)?;
            return Ok(match s.set.bounds_1d() {
                Some((lo, hi)) => SemidiffSet {
                    side,
                    set: ConvexSet::Segment {
                        a: vec![lo * e[0], lo * e[1]],
                        b: vec![hi * e[0], hi * e[1]],
                    },
                    uncertainty: s.uncertainty,
                },
                None => exact(ConvexSet::Empty),
            });
        }
        // forward-mode slopes lose the kink of forms like sqrt(x1^2 + x2^2) at 0
        let slope = right_slope(|v| profile.eval1(v));
        if !slope.is_finite() {
            return Err(Error::Unsupported("radial profile without a finite slope at the origin".into()));
        }
        let radius = match side {
            Side::Sub => slope,
            Side::Super => -slope,
        };
        return Ok(if radius >= T::zero() {
            exact(ConvexSet::Ball {
                center: vec![T::zero(), T::zero()],
                radius,
            })
        } else {
            exact(ConvexSet::Empty)
        });
    }
    // differentiable points: one-sided partials must be linear
    let mut g = [T::zero(); 2];
    for i in 0..2 {
        let mut e = [T::zero(); 2];
        e[i] = T::one();
        let plus = f.directional(y, &e);
        e[i] = -T::one();
        let minus = f.directional(y, &e);
        match (plus, minus) {
            (Some(p), Some(m)) if (p + m).abs() <= T::lit(1e-12) * (T::one() + p.abs()) => g[i] = p,
            _ => {
                return Err(Error::Unsupported(
                    "semidifferential of a non-separable, non-radial kink in two variables".into(),
                ))
            }
        }
    }
    Ok(exact(ConvexSet::point(g.to_vec())))
}

/// Right derivative at 0 by repeated Richardson extrapolation.
fn right_slope<T: Real>(p: impl Fn(T) -> T) -> T {
    let p0 = p(T::zero());
    let mut q: Vec<T> = (0..4)
        .map(|k| {
            let h = T::lit(1e-3 * 0.5f64.powi(k));
            (p(h) - p0) / h
        })
        .collect();
    let mut factor = T::lit(2.0);
    while q.len() > 1 {
        q = q.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - T::one())).collect();
        factor = factor * T::lit(2.0);
    }
    q[0]
}

/// `D# f(y)`.
pub fn d_sharp<T: Real>(f: &ScalarFunction<T>, y: &[T]) -> Result<DSharp<T>> {
    Ok(DSharp {
        sup: semidiff_at(f, y, Side::Super)?,
        sub: semidiff_at(f, y, Side::Sub)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(src: &str) -> ScalarFunction<f64> {
        ScalarFunction::parse(src, 1).unwrap()
    }

    #[test]
    fn concave_kink() {
        let g = f("-abs(x)");
        assert_eq!(semidiff_at(&g, &[0.0], Side::Super).unwrap().set, ConvexSet::Interval { lo: -1.0, hi: 1.0 });
        assert_eq!(semidiff_at(&g, &[0.0], Side::Sub).unwrap().set, ConvexSet::Empty);
        let d = d_sharp(&g, &[0.0]).unwrap();
        assert_eq!(d.locate(&[0.3], 1e-9), Some(Branch::Super));
        assert_eq!(d.locate(&[1.3], 1e-9), None);
    }

    #[test]
    fn oscillating_function_has_empty_semidifferentials() {
        let osc = |x: f64| if x == 0.0 { 0.0 } else { x * (1.0 / x).sin() };
        let steps: Vec<f64> = (0..40).map(|k| 0.1 * 0.83f64.powi(k)).collect();
        let sup = numeric_semidiff(osc, 0.0, &steps, Side::Super);
        let sub = numeric_semidiff(osc, 0.0, &steps, Side::Sub);
        assert!(sup.set.is_empty() && sub.set.is_empty(), "{sup:?} {sub:?}");
        let d = DSharp { sup, sub };
        assert_eq!(d.locate(&[0.0], 1e-12), Some(Branch::Fallback));
        assert_eq!(d.locate(&[0.5], 1e-12), None);
    }

    #[test]
    fn numeric_matches_exact_on_smooth_and_kinked() {
        for (src, y) in [("x^3 - x", 0.7), ("abs(x - 0.2) + x^2", 0.2), ("-abs(x)", 0.0)] {
            let g = f(src);
            for side in [Side::Super, Side::Sub] {
                let ex = semidiff_at(&g, &[y], side).unwrap();
                let nu = numeric_semidiff(|v| g.eval1(v), y, &default_steps(&g), side);
                match (ex.set.bounds_1d(), nu.set.bounds_1d()) {
                    (Some((a, b)), Some((c, d))) => assert!((a - c).abs() < 1e-6 && (b - d).abs() < 1e-6, "{src}"),
                    (None, None) => {}
                    other => panic!("{src} {side:?}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn radial_and_separable_in_plane() {
        let cone = ScalarFunction::<f64>::parse("sqrt(x1^2 + x2^2)", 2).unwrap();
        let sub = semidiff_at(&cone, &[0.0, 0.0], Side::Sub).unwrap();
        assert_eq!(
            sub.set,
            ConvexSet::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0
            }
        );
        assert!(semidiff_at(&cone, &[0.0, 0.0], Side::Super).unwrap().set.is_empty());
        let at = semidiff_at(&cone, &[3.0, 4.0], Side::Sub).unwrap();
        assert!(at.set.contains(&[0.6, 0.8], 1e-12));
        let sep = ScalarFunction::<f64>::parse("-abs(x1) + x2^2", 2).unwrap();
        let s = semidiff_at(&sep, &[0.0, 1.0], Side::Super).unwrap();
        assert_eq!(
            s.set,
            ConvexSet::Box {
                lo: vec![-1.0, 2.0],
                hi: vec![1.0, 2.0]
            }
        );
    }
}

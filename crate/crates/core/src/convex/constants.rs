use serde::Serialize;

use crate::function::ScalarFunction;
use crate::numeric::linspace;
use crate::scalar::Real;

/// Samples per axis for 1-D and 2-D second-difference scans.
const SAMPLES_1D: usize = 1025;
const SAMPLES_2D: usize = 65;

/// Semiconcavity constant, or `Infinite` when second differences blow up as
/// the gap shrinks (a concave-up kink).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Semiconcavity<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Semiconcavity<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Semiconcavity::Finite(v) => Some(v),
            Semiconcavity::Infinite => None,
        }
    }
}

/// Extreme normalized second differences `(f(a) + f(b) - 2 f(m)) / |a - b|^2`
/// over all sampled midpoint triples whose half-gap is `2^level` samples.
#[derive(Clone, Debug)]
struct Level<T> {
    max_ratio: T,
    min_ratio: T,
    /// Most negative raw second difference and its triple.
    worst: (T, [Vec<T>; 3]),
}

fn sample_nodes<T: Real>(f: &ScalarFunction<T>, lo: T, hi: T, n: usize) -> Vec<T> {
    if let Some(g) = f.grid() {
        if g.dim() == 1 {
            let nodes: Vec<T> = g.axes()[0].nodes().into_iter().filter(|x| *x >= lo && *x <= hi).collect();
            if nodes.len() >= 5 {
                return nodes;
            }
        }
    }
    linspace(lo, hi, n)
}

fn levels<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)]) -> Vec<Level<T>> {
    let mut out: Vec<Level<T>> = Vec::new();
    let mut record = |level: usize, a: Vec<T>, m: Vec<T>, b: Vec<T>, fa: T, fm: T, fb: T, gap2: T| {
        let s = fa + fb - fm - fm;
        let r = s / gap2;
        if !r.is_finite() {
            return;
        }
        while out.len() <= level {
            out.push(Level {
                max_ratio: T::neg_infinity(),
                min_ratio: T::infinity(),
                worst: (T::infinity(), [Vec::new(), Vec::new(), Vec::new()]),
            });
        }
        let l = &mut out[level];
        l.max_ratio = l.max_ratio.max(r);
        l.min_ratio = l.min_ratio.min(r);
        let scale = T::lit(1e-9) * (fa.abs() + fb.abs() + fm.abs() + fm.abs()) + T::lit(1e-12);
        if s + scale < l.worst.0 {
            l.worst = (s + scale, [a, m, b]);
        }
    };
    if f.dim() == 1 {
        let xs = sample_nodes(f, window[0].0, window[0].1, SAMPLES_1D);
        let fs: Vec<T> = xs.iter().map(|&x| f.eval1(x)).collect();
        let n = xs.len();
        let mut k = 1;
        let mut level = 0;
        while 2 * k < n {
            for i in k..n - k {
                let gap = xs[i + k] - xs[i - k];
                record(
                    level,
                    vec![xs[i - k]],
                    vec![xs[i]],
                    vec![xs[i + k]],
                    fs[i - k],
                    fs[i],
                    fs[i + k],
                    gap * gap,
                );
            }
            k *= 2;
            level += 1;
        }
    } else {
        let xs = linspace(window[0].0, window[0].1, SAMPLES_2D);
        let ys = linspace(window[1].0, window[1].1, SAMPLES_2D);
        let n = SAMPLES_2D;
        let fs: Vec<T> = xs
            .iter()
            .flat_map(|&a| ys.iter().map(move |&b| (a, b)))
            .map(|(a, b)| f.eval(&[a, b]))
            .collect();
        let at = |i: usize, j: usize| fs[i * n + j];
        let mut k = 1usize;
        let mut level = 0;
        while 2 * k < n {
            for (di, dj) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
                for i in 0..n as i64 {
                    for j in 0..n as i64 {
                        let (ka, kb) = (di * k as i64, dj * k as i64);
                        let (ia, ja, ib, jb) = (i - ka, j - kb, i + ka, j + kb);
                        let inside = |v: i64| v >= 0 && v < n as i64;
                        if !(inside(ia) && inside(ja) && inside(ib) && inside(jb)) {
                            continue;
                        }
                        let (ia, ja, ib, jb, iu, ju) =
                            (ia as usize, ja as usize, ib as usize, jb as usize, i as usize, j as usize);
                        let dx = xs[ib] - xs[ia];
                        let dy = ys[jb] - ys[ja];
                        record(
                            level,
                            vec![xs[ia], ys[ja]],
                            vec![xs[iu], ys[ju]],
                            vec![xs[ib], ys[jb]],
                            at(ia, ja),
                            at(iu, ju),
                            at(ib, jb),
                            dx * dx + dy * dy,
                        );
                    }
                }
            }
            k *= 2;
            level += 1;
        }
    }
    out
}

/// Largest `Λ` with `f(a) + f(b) - 2 f((a+b)/2) >= (Λ/2) |a-b|^2` on the
/// sampled triples, refined by Richardson extrapolation over the two finest
/// gaps and snapped to zero below `tol`.
pub fn estimate_uniform_convexity<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)], tol: T) -> T {
    let lv = levels(f, window);
    if lv.is_empty() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let mut lambda = lv.iter().fold(T::infinity(), |m, l| m.min(two * l.min_ratio));
    if lv.len() >= 2 {
        let (l0, l1) = (two * lv[0].min_ratio, two * lv[1].min_ratio);
        if l1 >= l0 {
            lambda = lambda.min(l0 - (l1 - l0) / T::lit(3.0));
        }
    }
    if !(lambda > tol) {
        T::zero()
    } else {
        lambda
    }
}

/// Smallest `C` with `f(a)/2 + f(b)/2 - f((a+b)/2) <= (C/8) |a-b|^2` on the
/// sampled triples.
///
/// When the finest-gap constant exceeds four times the constant at a gap
/// sixteen times wider, the differences are scaling like `1/gap` and the
/// result is `Infinite`.
pub fn estimate_semiconcavity<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)], tol: T) -> Semiconcavity<T> {
    let lv = levels(f, window);
    if lv.is_empty() {
        return Semiconcavity::Finite(T::zero());
    }
    let four = T::lit(4.0);
    let cs: Vec<T> = lv.iter().map(|l| four * l.max_ratio).collect();
    let coarse = cs[4.min(cs.len() - 1)];
    if cs.len() >= 5 && cs[0] > tol && cs[0] >= four * coarse.max(tol) {
        return Semiconcavity::Infinite;
    }
    let mut c = cs.iter().fold(T::zero(), |m, v| m.max(*v));
    if cs.len() >= 2 && cs[0] >= cs[1] {
        c = c.max(cs[0] + (cs[0] - cs[1]) / T::lit(3.0));
    }
    if c > tol {
        Semiconcavity::Finite(c)
    } else {
        Semiconcavity::Finite(T::zero())
    }
}

/// A sampled triple `(a, (a+b)/2, b)` violating midpoint convexity, if any.
pub fn midpoint_violation<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)]) -> Option<[Vec<T>; 3]> {
    levels(f, window)
        .into_iter()
        .filter(|l| l.worst.0 < T::zero())
        .min_by(|a, b| a.worst.0.partial_cmp(&b.worst.0).unwrap_or(std::cmp::Ordering::Equal))
        .map(|l| l.worst.1)
}

/// Subgradient test on a coarse lattice: `f(q) - f(p) - f'(p; q - p) > 0`
/// for every pair of distinct lattice points.
pub fn is_strictly_convex<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)]) -> bool {
    let strict = |fp: T, fq: T, lin: T| {
        let gap = fq - fp - lin;
        gap > T::lit(1e-12) * (T::one() + fp.abs() + fq.abs())
    };
    if f.dim() == 1 {
        let xs = linspace(window[0].0, window[0].1, 65);
        let fs: Vec<T> = xs.iter().map(|&x| f.eval1(x)).collect();
        if !f.is_exact() {
            return (1..xs.len() - 1).all(|i| {
                (1..=i.min(xs.len() - 1 - i)).all(|k| fs[i - k] + fs[i + k] - fs[i] - fs[i] > T::lit(1e-12) * (T::one() + fs[i].abs()))
            });
        }
        for (i, &p) in xs.iter().enumerate() {
            let Some((l, r)) = f.one_sided(p) else {
                return false;
            };
            for (j, &q) in xs.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = q - p;
                let lin = if d > T::zero() { r * d } else { l * d };
                if !strict(fs[i], fs[j], lin) {
                    return false;
                }
            }
        }
        true
    } else {
        let xs = linspace(window[0].0, window[0].1, 17);
        let ys = linspace(window[1].0, window[1].1, 17);
        let pts: Vec<[T; 2]> = xs.iter().flat_map(|&a| ys.iter().map(move |&b| [a, b])).collect();
        let fs: Vec<T> = pts.iter().map(|p| f.eval(p)).collect();
        for (i, p) in pts.iter().enumerate() {
            for (j, q) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = [q[0] - p[0], q[1] - p[1]];
                let Some(lin) = f.directional(p, &d) else {
                    return false;
                };
                if !strict(fs[i], fs[j], lin) {
                    return false;
                }
            }
        }
        true
    }
}

/// Growth test: `(f(r u) - f(0)) / r` must keep increasing along each sampled
/// direction `u` as `r` doubles from the window radius, without the
/// increments collapsing.
pub fn is_superlinear<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)]) -> bool {
    let radius = window
        .iter()
        .fold(T::one(), |m, (lo, hi)| m.max(lo.abs()).max(hi.abs()));
    let dirs: Vec<Vec<T>> = if f.dim() == 1 {
        vec![vec![T::one()], vec![-T::one()]]
    } else {
        (0..8)
            .map(|k| {
                let th = T::lit(k as f64 * std::f64::consts::FRAC_PI_4);
                vec![th.cos(), th.sin()]
            })
            .collect()
    };
    let origin = vec![T::zero(); f.dim()];
    let f0 = f.eval(&origin);
    dirs.iter().all(|u| {
        let q: Vec<T> = (0..5)
            .map(|k| {
                let r = radius * T::lit(2f64.powi(k));
                let x: Vec<T> = u.iter().map(|c| *c * r).collect();
                (f.eval(&x) - f0) / r
            })
            .collect();
        if q.iter().any(|v| *v == T::infinity()) {
            return true;
        }
        let inc: Vec<T> = q.windows(2).map(|w| w[1] - w[0]).collect();
        inc.iter().all(|d| *d > T::zero()) && inc[3] >= T::lit(0.75) * inc[2]
    })
}

/// Convexity diagnostics of a Hamiltonian on a window.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport<T> {
    pub uniform_convexity: T,
    pub semiconcavity: Semiconcavity<T>,
    pub strictly_convex: bool,
    pub superlinear: bool,
    /// Sampled triple `[a, m, b]` violating midpoint convexity.
    pub midpoint_violation: Option<[Vec<T>; 3]>,
}

impl<T: Real> ConvexityReport<T> {
    pub fn is_convex(&self) -> bool {
        self.midpoint_violation.is_none()
    }
}

pub fn convexity_report<T: Real>(f: &ScalarFunction<T>, window: &[(T, T)], tol: T) -> ConvexityReport<T> {
    ConvexityReport {
        uniform_convexity: estimate_uniform_convexity(f, window, tol),
        semiconcavity: estimate_semiconcavity(f, window, tol),
        strictly_convex: is_strictly_convex(f, window),
        superlinear: is_superlinear(f, window),
        midpoint_violation: midpoint_violation(f, window),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(src: &str) -> ScalarFunction<f64> {
        ScalarFunction::parse(src, 1).unwrap()
    }

    const W: [(f64, f64); 1] = [(-2.0, 2.0)];

    #[test]
    fn quadratic_constants() {
        assert!((estimate_uniform_convexity(&f("x^2"), &W, 1e-6) - 1.0).abs() < 1e-9);
        let c = estimate_semiconcavity(&f("x^2"), &W, 1e-6).finite().unwrap();
        assert!((c - 2.0).abs() < 1e-9);
    }

    #[test]
    fn quartic_is_not_uniformly_convex() {
        assert_eq!(estimate_uniform_convexity(&f("x^4"), &W, 1e-6), 0.0);
        let lam = estimate_uniform_convexity(&f("0.25*x^4 + 0.5*x^2"), &W, 1e-6);
        assert!((lam - 0.5).abs() < 1e-6, "{lam}");
    }

    #[test]
    fn convex_kink_has_infinite_semiconcavity() {
        assert_eq!(estimate_semiconcavity(&f("abs(x)"), &W, 1e-6), Semiconcavity::Infinite);
        assert_eq!(estimate_semiconcavity(&f("abs(x - 0.0013)"), &W, 1e-6), Semiconcavity::Infinite);
        assert_eq!(estimate_semiconcavity(&f("-abs(x)"), &W, 1e-6), Semiconcavity::Finite(0.0));
        let c = estimate_semiconcavity(&f("cos(x)"), &[(-4.0, 4.0)], 1e-6).finite().unwrap();
        assert!((c - 1.0).abs() < 1e-6, "{c}");
    }

    #[test]
    fn convexity_verdicts() {
        assert!(is_strictly_convex(&f("0.25*x^4"), &W));
        assert!(!is_strictly_convex(&f("max(x, 0)^2"), &W));
        assert!(is_superlinear(&f("0.5*x^2"), &W));
        assert!(!is_superlinear(&f("sqrt(1 + x^2)"), &W));
        assert!(!is_superlinear(&f("abs(x)"), &W));
        let w = midpoint_violation(&f("sin(x)"), &W).unwrap();
        let fx = |v: f64| v.sin();
        assert!(fx(w[0][0]) + fx(w[2][0]) < 2.0 * fx(w[1][0]));
        assert!(midpoint_violation(&f("x"), &W).is_none());
    }

    #[test]
    fn two_dimensional_constants() {
        let g = ScalarFunction::<f64>::parse("0.5*(p1^2 + p2^2)", 2).unwrap();
        let w = [(-1.0, 1.0), (-1.0, 1.0)];
        let lam = estimate_uniform_convexity(&g, &w, 1e-6);
        assert!((lam - 0.5).abs() < 1e-9, "{lam}");
        assert!(is_strictly_convex(&g, &w));
        assert!(is_superlinear(&g, &w));
    }
}

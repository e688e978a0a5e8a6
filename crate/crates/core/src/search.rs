//! Global minimization of one-dimensional and planar objectives over a box:
//! a uniform scan with a cheap objective, then local polishing of every
//! near-optimal discrete local minimum with an accurate one.

use crate::numeric::{golden_min, linspace, nan_to_inf, x_tol};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Scan<T> {
    pub nodes: usize,
    /// Candidates closer than this many steps to the edge force an expansion.
    pub margin: usize,
    /// Discrete local minima within `slack` of the scan minimum are polished.
    pub slack: T,
    pub max_candidates: usize,
}

pub(crate) enum Outcome<T, P> {
    Found { candidates: Vec<(P, T)>, step: T },
    Boundary,
}

fn select<T: Real>(values: &[T], slack: T, is_local_min: impl Fn(usize) -> bool, max: usize) -> Option<Vec<usize>> {
    let vmin = values.iter().copied().fold(T::infinity(), T::min);
    if !vmin.is_finite() {
        return None;
    }
    let mut picks: Vec<usize> = (0..values.len())
        .filter(|&j| values[j] <= vmin + slack && is_local_min(j))
        .collect();
    picks.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    picks.truncate(max);
    Some(picks)
}

pub(crate) fn scan_line<T: Real>(
    coarse: impl Fn(T) -> T,
    fine: impl Fn(T) -> T,
    center: T,
    radius: T,
    cfg: &Scan<T>,
) -> Outcome<T, T> {
    let n = cfg.nodes;
    let ys = linspace(center - radius, center + radius, n);
    let vs: Vec<T> = ys.iter().map(|&y| nan_to_inf(coarse(y))).collect();
    let h = ys[1] - ys[0];
    let local = |j: usize| {
        (j == 0 || vs[j] <= vs[j - 1]) && (j + 1 == n || vs[j] <= vs[j + 1])
    };
    let Some(picks) = select(&vs, cfg.slack, local, cfg.max_candidates) else {
        return Outcome::Boundary;
    };
    let mut out = Vec::with_capacity(picks.len());
    for j in picks {
        let a = ys[j.saturating_sub(1)];
        let b = ys[(j + 1).min(n - 1)];
        let (mut y, mut v) = golden_min(&fine, a, b, x_tol(a.abs().max(b.abs())), 200);
        let vj = nan_to_inf(fine(ys[j]));
        if vj < v {
            y = ys[j];
            v = vj;
        }
        out.push((y, v));
    }
    let best = out.iter().fold(T::infinity(), |m, c| m.min(c.1));
    let edge = h * T::count(cfg.margin);
    let lo = center - radius + edge;
    let hi = center + radius - edge;
    if out.iter().any(|&(y, v)| v <= best + cfg.slack && (y < lo || y > hi)) {
        return Outcome::Boundary;
    }
    Outcome::Found { candidates: out, step: h }
}

/// Descent along the axes and both diagonals with shrinking golden brackets.
pub(crate) fn polish_plane<T: Real>(f: impl Fn(&[T; 2]) -> T, start: [T; 2], width: T) -> ([T; 2], T) {
    let mut p = start;
    let mut v = nan_to_inf(f(&p));
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let dirs = [[T::one(), T::zero()], [T::zero(), T::one()], [s, s], [s, -s]];
    let mut w = width;
    let floor = x_tol(p[0].abs().max(p[1].abs()));
    for _ in 0..200 {
        let before = v;
        for d in &dirs {
            let base = p;
            let (a, fa) = golden_min(
                |r| f(&[base[0] + r * d[0], base[1] + r * d[1]]),
                -w,
                w,
                floor,
                120,
            );
            if fa < v {
                v = fa;
                p = [base[0] + a * d[0], base[1] + a * d[1]];
            }
        }
        let gain = before - v;
        if gain <= T::zero() {
            w = w / T::lit(4.0);
            if w <= floor {
                break;
            }
        } else {
            w = w.min(width);
        }
    }
    (p, v)
}

pub(crate) fn scan_plane<T: Real>(
    coarse: impl Fn(&[T; 2]) -> T,
    fine: impl Fn(&[T; 2]) -> T,
    center: [T; 2],
    radius: T,
    cfg: &Scan<T>,
) -> Outcome<T, [T; 2]> {
    let n = cfg.nodes;
    let xs = linspace(center[0] - radius, center[0] + radius, n);
    let ys = linspace(center[1] - radius, center[1] + radius, n);
    let mut vs = Vec::with_capacity(n * n);
    for &a in &xs {
        for &b in &ys {
            vs.push(nan_to_inf(coarse(&[a, b])));
        }
    }
    let h = xs[1] - xs[0];
    let local = |k: usize| {
        let (i, j) = (k / n, k % n);
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= n as i64 || jj >= n as i64 {
                    continue;
                }
                if vs[ii as usize * n + jj as usize] < vs[k] {
                    return false;
                }
            }
        }
        true
    };
    let Some(picks) = select(&vs, cfg.slack, local, cfg.max_candidates) else {
        return Outcome::Boundary;
    };
    let mut out: Vec<([T; 2], T)> = Vec::with_capacity(picks.len());
    for k in picks {
        let start = [xs[k / n], ys[k % n]];
        // neighbouring plateau nodes polish to the same point
        if out.iter().any(|(p, _)| (p[0] - start[0]).abs() <= h && (p[1] - start[1]).abs() <= h) {
            continue;
        }
        out.push(polish_plane(&fine, start, h * T::lit(1.5)));
    }
    let best = out.iter().fold(T::infinity(), |m, c| m.min(c.1));
    let edge = h * T::count(cfg.margin);
    let near_edge = |p: &[T; 2]| {
        (0..2).any(|i| p[i] < center[i] - radius + edge || p[i] > center[i] + radius - edge)
    };
    if out.iter().any(|(p, v)| *v <= best + cfg.slack && near_edge(p)) {
        return Outcome::Boundary;
    }
    Outcome::Found { candidates: out, step: h }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Scan<f64> {
        Scan {
            nodes: 257,
            margin: 4,
            slack: 0.1,
            max_candidates: 16,
        }
    }

    #[test]
    fn finds_both_wells() {
        let f = |y: f64| (y * y - 1.0).powi(2);
        let Outcome::Found { candidates, .. } = scan_line(f, f, 0.0, 3.0, &cfg()) else {
            panic!("boundary");
        };
        let mut ys: Vec<f64> = candidates.iter().filter(|c| c.1 < 1e-12).map(|c| c.0).collect();
        ys.sort_by(f64::total_cmp);
        assert_eq!(ys.len(), 2);
        assert!((ys[0] + 1.0).abs() < 1e-7 && (ys[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn reports_boundary_minimum() {
        let f = |y: f64| -y;
        assert!(matches!(scan_line(f, f, 0.0, 1.0, &cfg()), Outcome::Boundary));
    }

    #[test]
    fn planar_kinked_minimum() {
        let f = |p: &[f64; 2]| (p[0] - 0.3).abs() + 2.0 * (p[1] + 0.2).abs() + (p[0] - p[1] - 0.5).abs();
        let c = Scan { nodes: 65, ..cfg() };
        let Outcome::Found { candidates, .. } = scan_plane(f, f, [0.0, 0.0], 2.0, &c) else {
            panic!("boundary");
        };
        let best = candidates.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((best.0[0] - 0.3).abs() < 1e-9 && (best.0[1] + 0.2).abs() < 1e-9, "{best:?}");
    }
}

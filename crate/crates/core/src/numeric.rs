//! Small one-dimensional numerical kernels shared by the solvers.

use crate::scalar::Real;

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::count(n - 1);
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * T::count(i) })
                .collect()
        }
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive (`0 < lo < hi`).
pub fn log_spaced<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .enumerate()
        .map(|(i, v)| if i == 0 { lo } else if i == n - 1 { hi } else { v.exp() })
        .collect()
}

#[inline]
pub(crate) fn nan_to_inf<T: Real>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Returns the best point seen and its value. NaN values count as `+inf`.
pub(crate) fn golden_min<T: Real>(mut f: impl FnMut(T) -> T, mut a: T, mut b: T, tol: T, max_iter: usize) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = nan_to_inf(f(c));
    let mut fd = nan_to_inf(f(d));
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = nan_to_inf(f(c));
            if fc < best_f {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = nan_to_inf(f(d));
            if fd < best_f {
                best_x = d;
                best_f = fd;
            }
        }
    }
    (best_x, best_f)
}

/// Locates a sign change of `g` in `[lo, hi]` by Illinois false position
/// with periodic bisection. Returns `lo` if `g(lo) >= 0` and `hi` if `g(hi) <= 0`.
///
/// For a jump through zero the returned point is the jump location.
pub(crate) fn sign_change<T: Real>(mut g: impl FnMut(T) -> T, mut lo: T, mut hi: T, tol: T, max_iter: usize) -> T {
    let mut glo = g(lo);
    let mut ghi = g(hi);
    if glo >= T::zero() {
        return lo;
    }
    if ghi <= T::zero() {
        return hi;
    }
    let two = T::lit(2.0);
    let mut side = 0i8;
    for it in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / two;
        let mut x = if it % 3 == 2 || !glo.is_finite() || !ghi.is_finite() {
            mid
        } else {
            (lo * ghi - hi * glo) / (ghi - glo)
        };
        if !(x > lo && x < hi) {
            x = mid;
        }
        let gx = g(x);
        if gx.is_nan() {
            return x;
        }
        if gx == T::zero() {
            return x;
        }
        if gx < T::zero() {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi = ghi / two;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo = glo / two;
            }
            side = 1;
        }
    }
    lo + (hi - lo) / two
}

/// Default absolute bracketing tolerance near `x`.
#[inline]
pub(crate) fn x_tol<T: Real>(x: T) -> T {
    T::epsilon() * T::lit(8.0) * (T::one() + x.abs())
}

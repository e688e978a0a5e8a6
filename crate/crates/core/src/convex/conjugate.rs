use crate::error::{Error, Result};
use crate::function::{Axis, Grid, ScalarFunction};
use crate::numeric::{golden_min, linspace, sign_change, x_tol};
use crate::scalar::Real;

/// Window doublings attempted before declaring a conjugate undefined.
pub const MAX_EXPANSIONS: usize = 6;

/// Conjugate value and a maximizer at one dual point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConjugatePoint<T> {
    pub value: T,
    pub argmax: Vec<T>,
}

/// Tabulated conjugate on one axis with access to the primal function for
/// exact evaluation anywhere.
#[derive(Clone, Debug)]
struct LineTable<T> {
    z0: T,
    dz: T,
    values: Vec<T>,
    argmax: Vec<T>,
    primal: ScalarFunction<T>,
    /// Spacing of the primal sweep grid, used to bracket maximizers of sampled primals.
    primal_step: T,
}

fn undefined<T: Real>(z: T) -> Error {
    Error::ConjugateUndefined { z: z.as_f64() }
}

impl<T: Real> LineTable<T> {
    fn build(f: &ScalarFunction<T>, lo: T, hi: T, n: usize) -> Result<Self> {
        let zs = linspace(lo, hi, n);
        let (ps, fs, idx) = match f.domain() {
            Some(_) => {
                let g = f.grid().expect("domain implies grid");
                let ps = g.axes()[0].nodes();
                let fs = g.values().to_vec();
                let idx = sweep(&zs, &ps, &fs);
                if let Some(i) = idx.iter().position(|&j| j == 0 || j == ps.len() - 1) {
                    return Err(undefined(zs[i]));
                }
                (ps, fs, idx)
            }
            None => {
                let zmax = lo.abs().max(hi.abs());
                let mut radius = T::one() + zmax;
                let m = (2 * n).max(1025);
                let mut found = None;
                let mut bad = lo;
                for _ in 0..=MAX_EXPANSIONS {
                    let ps = linspace(-radius, radius, m);
                    let fs: Vec<T> = ps.iter().map(|&p| f.eval1(p)).collect();
                    let idx = sweep(&zs, &ps, &fs);
                    match idx.iter().position(|&j| j == 0 || j == m - 1) {
                        Some(i) => {
                            bad = zs[i];
                            radius = radius * T::lit(2.0);
                        }
                        None => {
                            found = Some((ps, fs, idx));
                            break;
                        }
                    }
                }
                found.ok_or_else(|| undefined(bad))?
            }
        };
        let primal_step = ps[1] - ps[0];
        let mut table = LineTable {
            z0: lo,
            dz: (hi - lo) / T::count(n - 1),
            values: Vec::with_capacity(n),
            argmax: Vec::with_capacity(n),
            primal: f.clone(),
            primal_step,
        };
        for (i, &z) in zs.iter().enumerate() {
            let j = idx[i];
            let (p, v) = table.polish(z, ps[j - 1], ps[j + 1], fs[j], ps[j]);
            table.argmax.push(p);
            table.values.push(v);
        }
        Ok(table)
    }

    /// Maximizes `z p - f(p)` on `[a, b]`, returning the maximizer and value.
    fn polish(&self, z: T, a: T, b: T, f_hint: T, p_hint: T) -> (T, T) {
        let f = &self.primal;
        let p = if f.is_exact() {
            sign_change(
                |p| match f.one_sided(p) {
                    Some((_, r)) => r - z,
                    None => T::nan(),
                },
                a,
                b,
                x_tol(a.abs().max(b.abs())),
                200,
            )
        } else {
            golden_min(|p| f.eval1(p) - z * p, a, b, x_tol(a.abs().max(b.abs())), 200).0
        };
        let v = z * p - f.eval1(p);
        let v_hint = z * p_hint - f_hint;
        if v.is_finite() && v >= v_hint {
            (p, v)
        } else {
            (p_hint, v_hint)
        }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn z_end(&self) -> T {
        self.z0 + self.dz * T::count(self.len() - 1)
    }

    #[inline]
    fn cell(&self, z: T) -> Option<(usize, T)> {
        if !(z >= self.z0 && z <= self.z_end()) {
            return None;
        }
        let u = ((z - self.z0) / self.dz).floor();
        let i = u.to_usize().unwrap_or(0).min(self.len() - 2);
        Some((i, z - (self.z0 + self.dz * T::count(i))))
    }

    /// Cubic Hermite interpolation of the table (the argmax is the derivative).
    #[inline]
    fn value(&self, z: T) -> T {
        match self.cell(z) {
            Some((i, d)) => {
                let h = self.dz;
                let s = d / h;
                let (s2, s3) = (s * s, s * s * s);
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                (two * s3 - three * s2 + T::one()) * self.values[i]
                    + (s3 - two * s2 + s) * h * self.argmax[i]
                    + (three * s2 - two * s3) * self.values[i + 1]
                    + (s3 - s2) * h * self.argmax[i + 1]
            }
            None => self.exact(z).map(|(v, _)| v).unwrap_or(T::nan()),
        }
    }

    /// Exact value and maximizer, bracketing from the table.
    fn exact(&self, z: T) -> Result<(T, T)> {
        let f = &self.primal;
        let n = self.len();
        let (a, b) = match self.cell(z) {
            Some((i, _)) => {
                let slack = T::lit(1e-9) * (T::one() + self.argmax[i].abs() + self.argmax[i + 1].abs())
                    + if f.is_exact() { T::zero() } else { self.primal_step * T::lit(2.0) };
                (self.argmax[i] - slack, self.argmax[i + 1] + slack)
            }
            None => {
                if !f.is_exact() {
                    return Err(undefined(z));
                }
                let slope = |p: T| f.one_sided(p).map(|(_, r)| r).unwrap_or(T::nan());
                let upward = z > self.z_end();
                let base = if upward { self.argmax[n - 1] } else { self.argmax[0] };
                let mut step = T::one() + base.abs();
                let mut near = base;
                let mut far = if upward { base + step } else { base - step };
                let mut ok = false;
                for _ in 0..64 {
                    let s = slope(far);
                    if (upward && s >= z) || (!upward && s <= z) {
                        ok = true;
                        break;
                    }
                    near = far;
                    step = step * T::lit(2.0);
                    far = if upward { far + step } else { far - step };
                }
                if !ok {
                    return Err(undefined(z));
                }
                if upward {
                    (near, far)
                } else {
                    (far, near)
                }
            }
        };
        let mid = (a + b) / T::lit(2.0);
        let (p, v) = self.polish(z, a, b, f.eval1(mid), mid);
        if !v.is_finite() {
            return Err(undefined(z));
        }
        Ok((v, p))
    }

    fn nodes(&self) -> Vec<T> {
        linspace(self.z0, self.z_end(), self.len())
    }
}

/// Linear-time maximizer sweep: argmax of `z p_j - f_j` is nondecreasing in `z`.
fn sweep<T: Real>(zs: &[T], ps: &[T], fs: &[T]) -> Vec<usize> {
    let m = ps.len();
    let mut j = 0usize;
    zs.iter()
        .map(|&z| {
            while j + 1 < m && z * ps[j + 1] - fs[j + 1] >= z * ps[j] - fs[j] {
                j += 1;
            }
            while j > 0 && z * ps[j - 1] - fs[j - 1] > z * ps[j] - fs[j] {
                j -= 1;
            }
            j
        })
        .collect()
}

#[derive(Clone, Debug)]
struct DenseTable<T> {
    axes: [Axis<T>; 2],
    values: Vec<T>,
    argmax: Vec<[T; 2]>,
    primal: ScalarFunction<T>,
}

#[derive(Clone, Debug)]
enum Kind<T> {
    Line(LineTable<T>),
    Separable(Box<[LineTable<T>; 2]>),
    Dense(Box<DenseTable<T>>),
}

/// Fenchel conjugate `f*(z) = sup_p <z, p> - f(p)` tabulated on a dual window.
#[derive(Clone, Debug)]
pub struct Conjugate<T> {
    kind: Kind<T>,
    window: Vec<(T, T)>,
    resolution: usize,
}

/// Tabulates the conjugate of `f` on `dual_window` with `resolution` nodes per axis.
///
/// Closed-form primals are maximized on a window that doubles (up to six
/// times) until no maximizer touches its boundary, then every maximizer is
/// polished by root-finding on the right derivative. Sampled primals use
/// their own grid; a boundary maximizer there means the conjugate is not
/// determined by the data.
pub fn fenchel_conjugate<T: Real>(f: &ScalarFunction<T>, dual_window: &[(T, T)], resolution: usize) -> Result<Conjugate<T>> {
    if dual_window.len() != f.dim() {
        return Err(Error::invalid("dual window dimension does not match the function"));
    }
    if dual_window.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::invalid("empty or non-finite dual window"));
    }
    if resolution < 2 {
        return Err(Error::invalid("dual resolution must be at least 2"));
    }
    let kind = if f.dim() == 1 {
        Kind::Line(LineTable::build(f, dual_window[0].0, dual_window[0].1, resolution)?)
    } else {
        let probe: Vec<(T, T)> = dual_window
            .iter()
            .map(|&(lo, hi)| {
                let r = T::one() + lo.abs().max(hi.abs());
                (-r, r)
            })
            .collect();
        match f.separable_parts(&probe) {
            Some([a, b]) => Kind::Separable(Box::new([
                LineTable::build(&a, dual_window[0].0, dual_window[0].1, resolution)?,
                LineTable::build(&b, dual_window[1].0, dual_window[1].1, resolution)?,
            ])),
            None => Kind::Dense(Box::new(DenseTable::build(f, dual_window, resolution)?)),
        }
    };
    Ok(Conjugate {
        kind,
        window: dual_window.to_vec(),
        resolution,
    })
}

/// Maximizer of `<z, p> - f(p)`, the gradient of the conjugate at `z`.
pub fn conjugate_gradient<T: Real>(conj: &Conjugate<T>, z: &[T]) -> Result<Vec<T>> {
    if z.len() != conj.dim() {
        return Err(Error::invalid("dual point has the wrong dimension"));
    }
    if z.iter().zip(&conj.window).any(|(v, (lo, hi))| !(*v >= *lo && *v <= *hi)) {
        return Err(Error::OutOfRange(format!("dual point {z:?} lies outside the dual window")));
    }
    Ok(conj.exact(z)?.argmax)
}

impl<T: Real> Conjugate<T> {
    pub fn dim(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &[(T, T)] {
        &self.window
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Whether the conjugate splits as a sum over coordinates.
    pub fn is_separable(&self) -> bool {
        !matches!(self.kind, Kind::Dense(_))
    }

    /// Fast interpolated value; exact evaluation outside the table.
    /// NaN where the conjugate cannot be evaluated.
    #[inline]
    pub fn value(&self, z: &[T]) -> T {
        match &self.kind {
            Kind::Line(t) => t.value(z[0]),
            Kind::Separable(ts) => ts[0].value(z[0]) + ts[1].value(z[1]),
            Kind::Dense(d) => d.value(z),
        }
    }

    #[inline]
    pub fn value1(&self, z: T) -> T {
        match &self.kind {
            Kind::Line(t) => t.value(z),
            _ => T::nan(),
        }
    }

    /// Exact value and maximizer anywhere the supremum is attained.
    pub fn exact(&self, z: &[T]) -> Result<ConjugatePoint<T>> {
        match &self.kind {
            Kind::Line(t) => {
                let (value, p) = t.exact(z[0])?;
                Ok(ConjugatePoint { value, argmax: vec![p] })
            }
            Kind::Separable(ts) => {
                let (v0, p0) = ts[0].exact(z[0])?;
                let (v1, p1) = ts[1].exact(z[1])?;
                Ok(ConjugatePoint {
                    value: v0 + v1,
                    argmax: vec![p0, p1],
                })
            }
            Kind::Dense(d) => d.exact(z),
        }
    }

    /// Tabulated nodes, values and maximizers of a 1-D conjugate.
    pub fn table(&self) -> Option<(Vec<T>, &[T], &[T])> {
        match &self.kind {
            Kind::Line(t) => Some((t.nodes(), &t.values, &t.argmax)),
            _ => None,
        }
    }

    /// The table as a sampled function: Hermite cells with the maximizers as
    /// slopes in 1-D, bilinear in 2-D.
    pub fn as_function(&self) -> Result<ScalarFunction<T>> {
        match &self.kind {
            Kind::Line(t) => {
                let axis = Axis::new(t.z0, t.z_end(), t.len())?;
                let g = Grid::line(axis, t.values.clone())?.with_slopes(t.argmax.clone(), t.argmax.clone())?;
                Ok(ScalarFunction::from_grid(g))
            }
            Kind::Separable(ts) => {
                let a0 = Axis::new(ts[0].z0, ts[0].z_end(), ts[0].len())?;
                let a1 = Axis::new(ts[1].z0, ts[1].z_end(), ts[1].len())?;
                let mut values = Vec::with_capacity(a0.len * a1.len);
                for v0 in &ts[0].values {
                    for v1 in &ts[1].values {
                        values.push(*v0 + *v1);
                    }
                }
                Ok(ScalarFunction::from_grid(Grid::plane(a0, a1, values)?))
            }
            Kind::Dense(d) => Ok(ScalarFunction::from_grid(Grid::plane(d.axes[0], d.axes[1], d.values.clone())?)),
        }
    }
}

fn solve2<T: Real>(h: [[T; 2]; 2], g: [T; 2]) -> Option<[T; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(det > T::zero()) || !(h[0][0] > T::zero()) {
        return None;
    }
    Some([(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det])
}

/// Damped Newton ascent on `<z, p> - f(p)` from `start`.
fn newton_argmax<T: Real>(f: &ScalarFunction<T>, z: &[T], start: [T; 2]) -> Option<[T; 2]> {
    let objective = |p: [T; 2]| z[0] * p[0] + z[1] * p[1] - f.eval(&p);
    let grad = |p: [T; 2]| -> Option<[T; 2]> {
        let g = f.gradient(&p)?;
        Some([g[0], g[1]])
    };
    let mut p = start;
    let mut phi = objective(p);
    for _ in 0..200 {
        let g = grad(p)?;
        let r = [z[0] - g[0], z[1] - g[1]];
        let rn = (r[0] * r[0] + r[1] * r[1]).sqrt();
        if rn <= T::lit(1e-13) * (T::one() + z[0].abs() + z[1].abs()) {
            return Some(p);
        }
        let delta = T::lit(1e-6) * (T::one() + p[0].abs().max(p[1].abs()));
        let mut hess = [[T::zero(); 2]; 2];
        for j in 0..2 {
            let mut up = p;
            let mut dn = p;
            up[j] = up[j] + delta;
            dn[j] = dn[j] - delta;
            let (gu, gd) = (grad(up)?, grad(dn)?);
            for i in 0..2 {
                hess[i][j] = (gu[i] - gd[i]) / (delta + delta);
            }
        }
        let sym = (hess[0][1] + hess[1][0]) / T::lit(2.0);
        hess[0][1] = sym;
        hess[1][0] = sym;
        let dir = solve2(hess, r).unwrap_or(r);
        let mut step = T::one();
        let mut moved = false;
        for _ in 0..60 {
            let q = [p[0] + step * dir[0], p[1] + step * dir[1]];
            let v = objective(q);
            if v.is_finite() && v >= phi {
                p = q;
                phi = v;
                moved = true;
                break;
            }
            step = step / T::lit(2.0);
        }
        if !moved {
            return Some(p);
        }
        if !(p[0].abs() < T::lit(1e12) && p[1].abs() < T::lit(1e12)) {
            return None;
        }
    }
    Some(p)
}

impl<T: Real> DenseTable<T> {
    fn build(f: &ScalarFunction<T>, window: &[(T, T)], n: usize) -> Result<Self> {
        let axes = [
            Axis::new(window[0].0, window[0].1, n)?,
            Axis::new(window[1].0, window[1].1, n)?,
        ];
        let z_first = [axes[0].start, axes[1].start];
        let mut start = coarse_argmax(f, &z_first)?;
        let mut values = vec![T::zero(); n * n];
        let mut argmax = vec![[T::zero(); 2]; n * n];
        for i in 0..n {
            for jj in 0..n {
                let j = if i % 2 == 0 { jj } else { n - 1 - jj };
                let z = [axes[0].node(i), axes[1].node(j)];
                let p = newton_argmax(f, &z, start).ok_or_else(|| undefined(z[0]))?;
                values[i * n + j] = z[0] * p[0] + z[1] * p[1] - f.eval(&p);
                argmax[i * n + j] = p;
                start = p;
            }
        }
        Ok(DenseTable {
            axes,
            values,
            argmax,
            primal: f.clone(),
        })
    }

    fn locate(&self, z: &[T]) -> Option<(usize, usize, T, T)> {
        let n0 = self.axes[0].len;
        let n1 = self.axes[1].len;
        let u = (z[0] - self.axes[0].start) / self.axes[0].step;
        let v = (z[1] - self.axes[1].start) / self.axes[1].step;
        let (lo, hi0, hi1) = (T::zero(), T::count(n0 - 1), T::count(n1 - 1));
        if !(u >= lo && u <= hi0 && v >= lo && v <= hi1) {
            return None;
        }
        let i = u.floor().to_usize().unwrap_or(0).min(n0 - 2);
        let j = v.floor().to_usize().unwrap_or(0).min(n1 - 2);
        Some((i, j, u - T::count(i), v - T::count(j)))
    }

    fn value(&self, z: &[T]) -> T {
        match self.locate(z) {
            Some((i, j, s, r)) => {
                // first-order expansions from the four corners, blended bilinearly
                let n1 = self.axes[1].len;
                let one = T::one();
                let mut acc = T::zero();
                for (di, dj, w) in [
                    (0, 0, (one - s) * (one - r)),
                    (0, 1, (one - s) * r),
                    (1, 0, s * (one - r)),
                    (1, 1, s * r),
                ] {
                    let k = (i + di) * n1 + j + dj;
                    let zn = [self.axes[0].node(i + di), self.axes[1].node(j + dj)];
                    let p = self.argmax[k];
                    acc = acc + w * (self.values[k] + p[0] * (z[0] - zn[0]) + p[1] * (z[1] - zn[1]));
                }
                acc
            }
            None => self.exact(z).map(|c| c.value).unwrap_or(T::nan()),
        }
    }

    fn exact(&self, z: &[T]) -> Result<ConjugatePoint<T>> {
        let start = match self.locate(z) {
            Some((i, j, s, r)) => {
                let n1 = self.axes[1].len;
                let one = T::one();
                let mut p = [T::zero(); 2];
                for (di, dj, w) in [
                    (0, 0, (one - s) * (one - r)),
                    (0, 1, (one - s) * r),
                    (1, 0, s * (one - r)),
                    (1, 1, s * r),
                ] {
                    let a = self.argmax[(i + di) * n1 + j + dj];
                    p[0] = p[0] + w * a[0];
                    p[1] = p[1] + w * a[1];
                }
                p
            }
            None => coarse_argmax(&self.primal, z)?,
        };
        let p = newton_argmax(&self.primal, z, start).ok_or_else(|| undefined(z[0]))?;
        Ok(ConjugatePoint {
            value: z[0] * p[0] + z[1] * p[1] - self.primal.eval(&p),
            argmax: p.to_vec(),
        })
    }
}

/// Grid search for a starting maximizer, doubling the box while it touches the boundary.
fn coarse_argmax<T: Real>(f: &ScalarFunction<T>, z: &[T]) -> Result<[T; 2]> {
    let mut r = T::one() + z[0].abs().max(z[1].abs());
    let m = 65;
    for _ in 0..=MAX_EXPANSIONS {
        let xs = linspace(-r, r, m);
        let mut best = (T::neg_infinity(), 0usize, 0usize);
        for (i, &a) in xs.iter().enumerate() {
            for (j, &b) in xs.iter().enumerate() {
                let v = z[0] * a + z[1] * b - f.eval(&[a, b]);
                if v > best.0 {
                    best = (v, i, j);
                }
            }
        }
        let (_, i, j) = best;
        if i == 0 || j == 0 || i == m - 1 || j == m - 1 {
            r = r * T::lit(2.0);
            continue;
        }
        return Ok([xs[i], xs[j]]);
    }
    Err(undefined(z[0]))
}

//! Scalar functions on the line or the plane: closed-form expressions,
//! piecewise expressions with explicit breakpoints, and sampled grids.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{self, var_slot, BinOp, Expr, Program};
use crate::numeric::{linspace, sign_change};
use crate::scalar::Real;

/// Parsed expression together with its compiled form.
#[derive(Clone, Debug)]
pub struct Expression {
    ast: Expr,
    program: Program,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        Self::new(expr::parse(src)?)
    }

    pub fn new(ast: Expr) -> Result<Self> {
        let program = Program::compile(&ast)?;
        Ok(Expression { ast, program })
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    #[inline]
    pub fn value<T: Real>(&self, x: &[T]) -> T {
        self.program.value(x)
    }

    /// One-sided derivative at `x` along `dir`.
    #[inline]
    pub fn directional<T: Real>(&self, x: &[T], dir: &[T]) -> T {
        self.program.directional(x, dir).slope
    }

    /// Highest argument slot used plus one.
    pub fn slots(&self) -> usize {
        self.program.slots()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

/// Expressions glued at increasing breakpoints on the line.
#[derive(Clone, Debug)]
pub struct Piecewise<T> {
    breakpoints: Vec<T>,
    pieces: Vec<Expression>,
}

impl<T: Real> Piecewise<T> {
    pub fn new(breakpoints: Vec<T>, pieces: Vec<Expression>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::invalid("piecewise function needs one more piece than breakpoints"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("breakpoints must be finite and strictly increasing"));
        }
        if pieces.iter().any(|p| p.slots() > 1) {
            return Err(Error::invalid("piecewise functions are one-dimensional"));
        }
        Ok(Piecewise { breakpoints, pieces })
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Expression] {
        &self.pieces
    }

    fn piece_index(&self, x: T) -> usize {
        self.breakpoints.partition_point(|b| *b < x)
    }

    fn value(&self, x: T) -> T {
        self.pieces[self.piece_index(x)].value(&[x])
    }

    fn one_sided(&self, x: T) -> (T, T) {
        let k = self.piece_index(x);
        let one = [T::one()];
        let minus = [-T::one()];
        let left = -self.pieces[k].directional(&[x], &minus);
        let right_piece = if k < self.breakpoints.len() && self.breakpoints[k] == x {
            k + 1
        } else {
            k
        };
        let right = self.pieces[right_piece].directional(&[x], &one);
        (left, right)
    }
}

/// Uniform axis `start + i * step`, `i < len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis<T> {
    pub start: T,
    pub step: T,
    pub len: usize,
}

impl<T: Real> Axis<T> {
    pub fn new(start: T, end: T, len: usize) -> Result<Self> {
        if len < 2 || !(end > start) {
            return Err(Error::invalid("axis needs at least two nodes and end > start"));
        }
        Ok(Axis {
            start,
            step: (end - start) / T::count(len - 1),
            len,
        })
    }

    pub fn node(&self, i: usize) -> T {
        self.start + self.step * T::count(i)
    }

    pub fn end(&self) -> T {
        self.node(self.len - 1)
    }

    pub fn nodes(&self) -> Vec<T> {
        linspace(self.start, self.end(), self.len)
    }

    fn cell(&self, x: T) -> (usize, T) {
        let u = ((x - self.start) / self.step).floor();
        let i = if u < T::zero() {
            0
        } else {
            u.to_usize().unwrap_or(usize::MAX).min(self.len - 2)
        };
        (i, x - self.node(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CellShape {
    Linear,
    Hermite,
    /// Slope jumps upward inside the cell: the larger of the two one-sided branches.
    ConvexKink,
    /// Slope jumps downward inside the cell: the smaller of the two branches.
    ConcaveKink,
}

#[derive(Clone, Debug)]
struct Slopes<T> {
    left: Vec<T>,
    right: Vec<T>,
    cells: Vec<CellShape>,
}

/// Sampled function: 1-D grids interpolate with cubic Hermite cells when
/// one-sided slopes are known (with kink cells resolved as the max or min of
/// the two neighbouring branches), otherwise linearly; 2-D grids interpolate
/// bilinearly.
#[derive(Clone, Debug)]
pub struct Grid<T> {
    axes: Vec<Axis<T>>,
    values: Vec<T>,
    slopes: Option<Slopes<T>>,
}

impl<T: Real> Grid<T> {
    pub fn line(axis: Axis<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != axis.len {
            return Err(Error::invalid("grid values do not match the axis length"));
        }
        Ok(Grid {
            axes: vec![axis],
            values,
            slopes: None,
        })
    }

    /// Row-major values, the first axis varying slowest.
    pub fn plane(first: Axis<T>, second: Axis<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != first.len * second.len {
            return Err(Error::invalid("grid values do not match the axis lengths"));
        }
        Ok(Grid {
            axes: vec![first, second],
            values,
            slopes: None,
        })
    }

    /// Attaches left and right derivatives at the nodes of a 1-D grid.
    /// NaN marks an unknown slope; cells touching it interpolate linearly.
    pub fn with_slopes(mut self, left: Vec<T>, right: Vec<T>) -> Result<Self> {
        let n = self.values.len();
        if self.axes.len() != 1 || left.len() != n || right.len() != n {
            return Err(Error::invalid("slopes need a 1-D grid and one left/right pair per node"));
        }
        let h = self.axes[0].step;
        let jumps: Vec<Option<T>> = (0..n - 1)
            .map(|i| {
                let (a, b) = (right[i], left[i + 1]);
                (a.is_finite() && b.is_finite()).then(|| b - a)
            })
            .collect();
        let cells = (0..n - 1)
            .map(|i| {
                let Some(jump) = jumps[i] else {
                    return CellShape::Linear;
                };
                let near = [i.checked_sub(1), Some(i + 1)]
                    .into_iter()
                    .flatten()
                    .filter_map(|k| jumps.get(k).copied().flatten())
                    .fold(T::zero(), |m, j| m.max(j.abs()));
                let floor = T::lit(1e-9) * (T::one() + right[i].abs() + left[i + 1].abs());
                let secant = (self.values[i + 1] - self.values[i]) / h;
                // a kink leaves the secant strictly inside the slope range but far from both ends
                let inside = (secant - right[i]) * (left[i + 1] - secant) > T::zero();
                if jump.abs() > T::lit(4.0) * near + floor && inside && jump.abs() > T::lit(1e-7) {
                    if jump > T::zero() {
                        CellShape::ConvexKink
                    } else {
                        CellShape::ConcaveKink
                    }
                } else {
                    CellShape::Hermite
                }
            })
            .collect();
        self.slopes = Some(Slopes { left, right, cells });
        Ok(self)
    }

    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn has_slopes(&self) -> bool {
        self.slopes.is_some()
    }

    pub fn domain(&self) -> Vec<(T, T)> {
        self.axes.iter().map(|a| (a.start, a.end())).collect()
    }

    /// Value and derivative of the interpolant of cell `i` at offset `d`.
    fn cell_eval(&self, i: usize, d: T) -> (T, T) {
        let ax = self.axes[0];
        let h = ax.step;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let Some(sl) = &self.slopes else {
            let m = (v1 - v0) / h;
            return (v0 + m * d, m);
        };
        let (m0, m1) = (sl.right[i], sl.left[i + 1]);
        match sl.cells[i] {
            CellShape::Linear => {
                let m = (v1 - v0) / h;
                (v0 + m * d, m)
            }
            CellShape::Hermite => {
                let s = d / h;
                let (s2, s3) = (s * s, s * s * s);
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                let six = T::lit(6.0);
                let val = (two * s3 - three * s2 + T::one()) * v0
                    + (s3 - two * s2 + s) * h * m0
                    + (three * s2 - two * s3) * v1
                    + (s3 - s2) * h * m1;
                let der = (six * s2 - six * s) / h * v0
                    + (three * s2 - T::lit(4.0) * s + T::one()) * m0
                    + (six * s - six * s2) / h * v1
                    + (three * s2 - two * s) * m1;
                (val, der)
            }
            shape => {
                let half = T::lit(0.5);
                let curvature = |k: usize| -> T {
                    if sl.cells.get(k) == Some(&CellShape::Hermite) {
                        (sl.left[k + 1] - sl.right[k]) / h
                    } else {
                        T::zero()
                    }
                };
                let ca = if i >= 1 { curvature(i - 1) } else { T::zero() };
                let cb = curvature(i + 1);
                let e = d - h;
                let left = (v0 + m0 * d + half * ca * d * d, m0 + ca * d);
                let right = (v1 + m1 * e + half * cb * e * e, m1 + cb * e);
                let take_left = if shape == CellShape::ConvexKink {
                    left.0 >= right.0
                } else {
                    left.0 <= right.0
                };
                if take_left {
                    left
                } else {
                    right
                }
            }
        }
    }

    fn value_1d(&self, x: T) -> T {
        let ax = self.axes[0];
        let n = ax.len;
        if x < ax.start {
            let s = self.end_slope(0);
            return self.values[0] + s * (x - ax.start);
        }
        let end = ax.end();
        if x > end {
            let s = self.end_slope(n - 1);
            return self.values[n - 1] + s * (x - end);
        }
        let (i, d) = ax.cell(x);
        self.cell_eval(i, d).0
    }

    fn end_slope(&self, node: usize) -> T {
        let n = self.values.len();
        let h = self.axes[0].step;
        let secant = if node == 0 {
            (self.values[1] - self.values[0]) / h
        } else {
            (self.values[n - 1] - self.values[n - 2]) / h
        };
        match &self.slopes {
            Some(s) => {
                let v = if node == 0 { s.right[0] } else { s.left[n - 1] };
                if v.is_finite() {
                    v
                } else {
                    secant
                }
            }
            None => secant,
        }
    }

    /// Left and right derivatives of the 1-D interpolant.
    fn one_sided(&self, x: T) -> (T, T) {
        let ax = self.axes[0];
        let n = ax.len;
        if x <= ax.start {
            let s = self.end_slope(0);
            return (s, if x < ax.start { s } else { self.cell_eval(0, T::zero()).1 });
        }
        if x >= ax.end() {
            let s = self.end_slope(n - 1);
            return (if x > ax.end() { s } else { self.cell_eval(n - 2, ax.step).1 }, s);
        }
        let (i, d) = ax.cell(x);
        let right = self.cell_eval(i, d).1;
        let left = if d == T::zero() && i > 0 {
            self.cell_eval(i - 1, ax.step).1
        } else {
            right
        };
        (left, right)
    }

    fn value_2d(&self, x: &[T]) -> T {
        let (a, b) = (self.axes[0], self.axes[1]);
        let (i, di) = a.cell(x[0]);
        let (j, dj) = b.cell(x[1]);
        let (s, r) = (di / a.step, dj / b.step);
        let m = b.len;
        let v00 = self.values[i * m + j];
        let v01 = self.values[i * m + j + 1];
        let v10 = self.values[(i + 1) * m + j];
        let v11 = self.values[(i + 1) * m + j + 1];
        let one = T::one();
        v00 * (one - s) * (one - r) + v01 * (one - s) * r + v10 * s * (one - r) + v11 * s * r
    }

    fn kinks(&self, lo: T, hi: T) -> Vec<T> {
        let Some(sl) = &self.slopes else {
            return Vec::new();
        };
        let ax = self.axes[0];
        let mut out = Vec::new();
        for k in 0..ax.len {
            let x = ax.node(k);
            if x < lo || x > hi {
                continue;
            }
            let (l, r) = (sl.left[k], sl.right[k]);
            if l.is_finite() && r.is_finite() && (l - r).abs() > T::lit(1e-9) * (T::one() + l.abs()) {
                out.push(x);
            }
            if k + 1 < ax.len && matches!(sl.cells[k], CellShape::ConvexKink | CellShape::ConcaveKink) {
                let h = ax.step;
                let gap = |d: T| {
                    let half = T::lit(0.5);
                    let e = d - h;
                    let ca = if k >= 1 && sl.cells[k - 1] == CellShape::Hermite {
                        (sl.left[k] - sl.right[k - 1]) / h
                    } else {
                        T::zero()
                    };
                    let cb = if sl.cells.get(k + 1) == Some(&CellShape::Hermite) {
                        (sl.left[k + 2] - sl.right[k + 1]) / h
                    } else {
                        T::zero()
                    };
                    let left = self.values[k] + sl.right[k] * d + half * ca * d * d;
                    let right = self.values[k + 1] + sl.left[k + 1] * e + half * cb * e * e;
                    let g = left - right;
                    if sl.cells[k] == CellShape::ConvexKink {
                        -g
                    } else {
                        g
                    }
                };
                let d = sign_change(gap, T::zero(), h, T::epsilon() * h, 200);
                let xk = x + d;
                if xk >= lo && xk <= hi {
                    out.push(xk);
                }
            }
        }
        out
    }
}

/// Storage behind a [`ScalarFunction`].
#[derive(Clone, Debug)]
pub enum Representation<T> {
    Expression(Expression),
    Piecewise(Piecewise<T>),
    Grid(Grid<T>),
}

/// Real-valued function of one or two variables.
#[derive(Clone, Debug)]
pub struct ScalarFunction<T> {
    dim: usize,
    repr: Representation<T>,
    lipschitz: Option<T>,
}

const KINK_SAMPLES: usize = 2049;

impl<T: Real> ScalarFunction<T> {
    /// Parses an expression in `dim` variables (`x`/`x1`, `x2` or `p`/`p1`, `p2`).
    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        Self::from_expression(Expression::parse(src)?, dim)
    }

    pub fn from_expression(e: Expression, dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid("dimension must be 1 or 2"));
        }
        let names = e.ast().variables();
        let mut letters = Vec::new();
        for n in &names {
            let slot = var_slot(n).unwrap_or(usize::MAX);
            if slot >= dim {
                return Err(Error::invalid(format!("variable `{n}` is not allowed in {dim} dimension(s)")));
            }
            let letter = &n[..1];
            if !letters.contains(&letter) {
                letters.push(letter);
            }
        }
        if letters.len() > 1 {
            return Err(Error::invalid("expression mixes `x` and `p` variables"));
        }
        if dim == 2 && e.ast().has_piecewise() {
            return Err(Error::Unsupported("piecewise guards in two variables".into()));
        }
        Ok(ScalarFunction {
            dim,
            repr: Representation::Expression(e),
            lipschitz: None,
        })
    }

    pub fn from_piecewise(p: Piecewise<T>) -> Self {
        ScalarFunction {
            dim: 1,
            repr: Representation::Piecewise(p),
            lipschitz: None,
        }
    }

    pub fn from_grid(g: Grid<T>) -> Self {
        ScalarFunction {
            dim: g.dim(),
            repr: Representation::Grid(g),
            lipschitz: None,
        }
    }

    /// Samples `f` on a 1-D axis with linear interpolation.
    pub fn sampled(axis: Axis<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = axis.nodes().into_iter().map(f).collect();
        Ok(Self::from_grid(Grid::line(axis, values)?))
    }

    /// Supplies a Lipschitz bound instead of estimating one.
    pub fn with_lipschitz(mut self, bound: T) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    pub fn lipschitz_bound(&self) -> Option<T> {
        self.lipschitz
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    pub fn expression(&self) -> Option<&Expression> {
        match &self.repr {
            Representation::Expression(e) => Some(e),
            _ => None,
        }
    }

    pub fn grid(&self) -> Option<&Grid<T>> {
        match &self.repr {
            Representation::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Whether one-sided derivatives are exact rather than taken from an interpolant.
    pub fn is_exact(&self) -> bool {
        !matches!(self.repr, Representation::Grid(_))
    }

    /// Sampling domain for grids, `None` for closed forms.
    pub fn domain(&self) -> Option<Vec<(T, T)>> {
        self.grid().map(Grid::domain)
    }

    /// Grid spacing per axis, `None` for closed forms.
    pub fn grid_step(&self) -> Option<Vec<T>> {
        self.grid().map(|g| g.axes.iter().map(|a| a.step).collect())
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        match &self.repr {
            Representation::Expression(e) => e.value(x),
            Representation::Piecewise(p) => p.value(x[0]),
            Representation::Grid(g) => {
                if g.dim() == 1 {
                    g.value_1d(x[0])
                } else {
                    g.value_2d(x)
                }
            }
        }
    }

    #[inline]
    pub fn eval1(&self, x: T) -> T {
        self.eval(&[x])
    }

    /// Left and right derivatives of a 1-D function; `None` when infinite or undefined.
    pub fn one_sided(&self, x: T) -> Option<(T, T)> {
        if self.dim != 1 {
            return None;
        }
        let (l, r) = match &self.repr {
            Representation::Expression(e) => {
                let r = e.directional(&[x], &[T::one()]);
                let l = -e.directional(&[x], &[-T::one()]);
                (l, r)
            }
            Representation::Piecewise(p) => p.one_sided(x),
            Representation::Grid(g) => g.one_sided(x),
        };
        (l.is_finite() && r.is_finite()).then_some((l, r))
    }

    /// One-sided directional derivative `lim (f(x + h d) - f(x)) / h`, `h -> 0+`.
    pub fn directional(&self, x: &[T], dir: &[T]) -> Option<T> {
        let v = match &self.repr {
            Representation::Expression(e) => e.directional(x, dir),
            _ if self.dim == 1 => {
                let (l, r) = self.one_sided(x[0])?;
                if dir[0] >= T::zero() {
                    r * dir[0]
                } else {
                    l * dir[0]
                }
            }
            _ => return None,
        };
        v.is_finite().then_some(v)
    }

    /// Right partial derivatives; the gradient wherever the function is differentiable.
    pub fn gradient(&self, x: &[T]) -> Option<Vec<T>> {
        (0..self.dim)
            .map(|i| {
                let mut e = vec![T::zero(); self.dim];
                e[i] = T::one();
                self.directional(x, &e)
            })
            .collect()
    }

    /// Points in `[lo, hi]` where the 1-D function has unequal one-sided derivatives.
    pub fn kinks(&self, lo: T, hi: T) -> Vec<T> {
        if self.dim != 1 || !(hi > lo) {
            return Vec::new();
        }
        let mut out = match &self.repr {
            Representation::Expression(e) => expression_kinks(e, lo, hi),
            Representation::Piecewise(p) => {
                let mut v: Vec<T> = p
                    .breakpoints
                    .iter()
                    .copied()
                    .filter(|b| *b >= lo && *b <= hi)
                    .collect();
                for (k, piece) in p.pieces.iter().enumerate() {
                    let a = if k == 0 { lo } else { p.breakpoints[k - 1].max(lo) };
                    let b = if k == p.breakpoints.len() { hi } else { p.breakpoints[k].min(hi) };
                    if b > a {
                        v.extend(expression_kinks(piece, a, b));
                    }
                }
                v
            }
            Representation::Grid(g) => g.kinks(lo, hi),
        };
        out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        out.dedup_by(|a, b| (*a - *b).abs() <= T::lit(1e-12) * (T::one() + b.abs()));
        if !self.is_exact() {
            return out;
        }
        out.retain(|&y| match self.one_sided(y) {
            Some((l, r)) => (l - r).abs() > T::lit(1e-10) * (T::one() + l.abs() + r.abs()),
            None => true,
        });
        out
    }

    /// Supplied Lipschitz bound, or an estimate from one-sided derivatives
    /// sampled over `window` (the grid's own nodes for grids).
    pub fn lipschitz(&self, window: &[(T, T)]) -> T {
        if let Some(l) = self.lipschitz {
            return l;
        }
        match &self.repr {
            Representation::Grid(g) => grid_lipschitz(g),
            _ if self.dim == 1 => {
                let (lo, hi) = window[0];
                let mut pts = linspace(lo, hi, 4097);
                pts.extend(self.kinks(lo, hi));
                pts.iter()
                    .filter_map(|&y| self.one_sided(y))
                    .fold(T::zero(), |m, (l, r)| m.max(l.abs()).max(r.abs()))
            }
            _ => {
                let xs = linspace(window[0].0, window[0].1, 129);
                let ys = linspace(window[1].0, window[1].1, 129);
                let mut m = T::zero();
                for &a in &xs {
                    for &b in &ys {
                        let p = [a, b];
                        let mut sq = T::zero();
                        for axis in 0..2 {
                            let mut e = [T::zero(); 2];
                            e[axis] = T::one();
                            let r = self.directional(&p, &e).unwrap_or(T::zero());
                            e[axis] = -T::one();
                            let l = self.directional(&p, &e).unwrap_or(T::zero());
                            let c = r.abs().max(l.abs());
                            sq = sq + c * c;
                        }
                        m = m.max(sq.sqrt());
                    }
                }
                m
            }
        }
    }

    /// `-f`.
    pub fn negated(&self) -> Self {
        let repr = match &self.repr {
            Representation::Expression(e) => {
                Representation::Expression(Expression::new(e.ast().negated()).expect("negation compiles"))
            }
            Representation::Piecewise(p) => Representation::Piecewise(Piecewise {
                breakpoints: p.breakpoints.clone(),
                pieces: p
                    .pieces
                    .iter()
                    .map(|e| Expression::new(e.ast().negated()).expect("negation compiles"))
                    .collect(),
            }),
            Representation::Grid(g) => Representation::Grid(Grid {
                axes: g.axes.clone(),
                values: g.values.iter().map(|v| -*v).collect(),
                slopes: g.slopes.as_ref().map(|s| Slopes {
                    left: s.left.iter().map(|v| -*v).collect(),
                    right: s.right.iter().map(|v| -*v).collect(),
                    cells: s
                        .cells
                        .iter()
                        .map(|c| match c {
                            CellShape::ConvexKink => CellShape::ConcaveKink,
                            CellShape::ConcaveKink => CellShape::ConvexKink,
                            other => *other,
                        })
                        .collect(),
                }),
            }),
        };
        ScalarFunction {
            dim: self.dim,
            repr,
            lipschitz: self.lipschitz,
        }
    }

    /// `x -> f(-x)`.
    pub fn reflected(&self) -> Self {
        let repr = match &self.repr {
            Representation::Expression(e) => {
                Representation::Expression(Expression::new(e.ast().reflected()).expect("reflection compiles"))
            }
            Representation::Piecewise(p) => Representation::Piecewise(Piecewise {
                breakpoints: p.breakpoints.iter().rev().map(|b| -*b).collect(),
                pieces: p
                    .pieces
                    .iter()
                    .rev()
                    .map(|e| Expression::new(e.ast().reflected()).expect("reflection compiles"))
                    .collect(),
            }),
            Representation::Grid(g) => {
                let axes: Vec<Axis<T>> = g
                    .axes
                    .iter()
                    .map(|a| Axis {
                        start: -a.end(),
                        step: a.step,
                        len: a.len,
                    })
                    .collect();
                let values = g.values.iter().rev().copied().collect();
                let slopes = g.slopes.as_ref().map(|s| Slopes {
                    left: s.right.iter().rev().map(|v| -*v).collect(),
                    right: s.left.iter().rev().map(|v| -*v).collect(),
                    cells: s.cells.iter().rev().copied().collect(),
                });
                Representation::Grid(Grid { axes, values, slopes })
            }
        };
        ScalarFunction {
            dim: self.dim,
            repr,
            lipschitz: self.lipschitz,
        }
    }

    /// Pointwise sum of two closed-form functions.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::invalid("cannot add functions of different dimension"));
        }
        match (&self.repr, &other.repr) {
            (Representation::Expression(a), Representation::Expression(b)) => {
                let e = Expression::new(Expr::bin(BinOp::Add, a.ast().clone(), b.ast().clone()))?;
                Ok(ScalarFunction {
                    dim: self.dim,
                    repr: Representation::Expression(e),
                    lipschitz: None,
                })
            }
            (Representation::Grid(_), _) | (_, Representation::Grid(_)) => {
                Err(Error::Unsupported("sums of sampled grids".into()))
            }
            _ => {
                let (a, b) = (self.as_piecewise(), other.as_piecewise());
                let mut bps: Vec<T> = a.breakpoints.iter().chain(&b.breakpoints).copied().collect();
                bps.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
                bps.dedup();
                let mut pieces = Vec::with_capacity(bps.len() + 1);
                for k in 0..=bps.len() {
                    let probe = match (k.checked_sub(1).map(|i| bps[i]), bps.get(k)) {
                        (None, Some(&r)) => r - T::one(),
                        (Some(l), None) => l + T::one(),
                        (Some(l), Some(&r)) => (l + r) / T::lit(2.0),
                        (None, None) => T::zero(),
                    };
                    let pa = &a.pieces[a.piece_index(probe)];
                    let pb = &b.pieces[b.piece_index(probe)];
                    pieces.push(Expression::new(Expr::bin(BinOp::Add, pa.ast().clone(), pb.ast().clone()))?);
                }
                Ok(Self::from_piecewise(Piecewise::new(bps, pieces)?))
            }
        }
    }

    fn as_piecewise(&self) -> Piecewise<T> {
        match &self.repr {
            Representation::Piecewise(p) => p.clone(),
            Representation::Expression(e) => Piecewise {
                breakpoints: Vec::new(),
                pieces: vec![e.clone()],
            },
            Representation::Grid(_) => unreachable!("grids are rejected before conversion"),
        }
    }

    /// Variable letter used by an expression (`x` or `p`).
    fn letter(&self) -> &'static str {
        match self.expression() {
            Some(e) if e.ast().variables().iter().any(|v| v.starts_with('p')) => "p",
            _ => "x",
        }
    }

    /// `s -> f(s * dir)` for a closed-form function of two variables.
    pub fn along_line(&self, dir: [T; 2]) -> Option<Self> {
        let e = self.expression()?;
        if self.dim != 2 {
            return None;
        }
        let letter = self.letter();
        let scaled = |c: T| Expr::bin(BinOp::Mul, Expr::num(c.as_f64()), Expr::var(letter));
        let sub = e.ast().map_vars(&mut |name| match var_slot(name) {
            Some(0) => Some(scaled(dir[0])),
            Some(1) => Some(scaled(dir[1])),
            _ => None,
        });
        Self::from_expression(Expression::new(sub).ok()?, 1).ok()
    }

    /// Splits `f(a, b) = f1(a) + f2(b)` when the sampled mixed differences vanish.
    pub fn separable_parts(&self, window: &[(T, T)]) -> Option<[Self; 2]> {
        let e = self.expression()?;
        if self.dim != 2 {
            return None;
        }
        let xs = linspace(window[0].0, window[0].1, 9);
        let ys = linspace(window[1].0, window[1].1, 9);
        let scale = xs
            .iter()
            .flat_map(|&a| ys.iter().map(move |&b| (a, b)))
            .fold(T::one(), |m, (a, b)| m.max(e.value(&[a, b]).abs()));
        let (a0, b0) = (xs[1], ys[2]);
        for &a in &xs {
            for &b in &ys {
                let mixed = e.value(&[a, b]) + e.value(&[a0, b0]) - e.value(&[a, b0]) - e.value(&[a0, b]);
                if mixed.abs() > T::lit(1e-10) * scale {
                    return None;
                }
            }
        }
        let letter = self.letter();
        let zero = Expr::num(0.0);
        let first = e.ast().substitute(1, &zero);
        let first = first.map_vars(&mut |n| (var_slot(n) == Some(0)).then(|| Expr::var(letter)));
        let origin = e.value(&[T::zero(), T::zero()]);
        let second = e.ast().substitute(0, &zero);
        let second = second.map_vars(&mut |n| (var_slot(n) == Some(1)).then(|| Expr::var(letter)));
        let second = Expr::bin(BinOp::Sub, second, Expr::num(origin.as_f64()));
        let f1 = Self::from_expression(Expression::new(first).ok()?, 1).ok()?;
        let f2 = Self::from_expression(Expression::new(second).ok()?, 1).ok()?;
        Some([f1, f2])
    }

    /// Profile `s -> f(s, 0)` when `f` is invariant under rotations about the origin.
    pub fn radial_profile(&self, radius: T) -> Option<Self> {
        let e = self.expression()?;
        if self.dim != 2 {
            return None;
        }
        let radii = linspace(radius / T::lit(16.0), radius, 9);
        let scale = radii.iter().fold(T::one(), |m, &r| m.max(e.value(&[r, T::zero()]).abs()));
        for &r in &radii {
            let base = e.value(&[r, T::zero()]);
            for k in 1..12 {
                let th = T::lit(k as f64 * std::f64::consts::PI / 6.0 + 0.1);
                let v = e.value(&[r * th.cos(), r * th.sin()]);
                if (v - base).abs() > T::lit(1e-10) * scale {
                    return None;
                }
            }
        }
        self.along_line([T::one(), T::zero()])
    }
}

fn grid_lipschitz<T: Real>(g: &Grid<T>) -> T {
    if g.dim() == 1 {
        let h = g.axes[0].step;
        let mut m = g
            .values
            .windows(2)
            .fold(T::zero(), |m, w| m.max(((w[1] - w[0]) / h).abs()));
        if let Some(s) = &g.slopes {
            for v in s.left.iter().chain(&s.right) {
                if v.is_finite() {
                    m = m.max(v.abs());
                }
            }
        }
        m
    } else {
        let (a, b) = (g.axes[0], g.axes[1]);
        let mut m = T::zero();
        for i in 0..a.len - 1 {
            for j in 0..b.len - 1 {
                let v = g.values[i * b.len + j];
                let dx = (g.values[(i + 1) * b.len + j] - v) / a.step;
                let dy = (g.values[i * b.len + j + 1] - v) / b.step;
                m = m.max((dx * dx + dy * dy).sqrt());
            }
        }
        m
    }
}

fn expression_kinks<T: Real>(e: &Expression, lo: T, hi: T) -> Vec<T> {
    let mut out: Vec<T> = e
        .ast()
        .guard_points()
        .into_iter()
        .map(T::lit)
        .filter(|g| *g >= lo && *g <= hi)
        .collect();
    let xs = linspace(lo, hi, KINK_SAMPLES);
    for src in e.ast().kink_sources() {
        let Ok(prog) = Program::compile(&src) else {
            continue;
        };
        let vals: Vec<T> = xs.iter().map(|&x| prog.value(&[x])).collect();
        if vals.iter().all(|v| *v == T::zero()) {
            continue;
        }
        for k in 0..xs.len() {
            if vals[k] == T::zero() {
                out.push(xs[k]);
                continue;
            }
            if k + 1 < xs.len() && vals[k + 1] != T::zero() && (vals[k] < T::zero()) != (vals[k + 1] < T::zero()) {
                let flip = if vals[k] < T::zero() { T::one() } else { -T::one() };
                let root = sign_change(
                    |x| flip * prog.value(&[x]),
                    xs[k],
                    xs[k + 1],
                    T::epsilon() * (T::one() + xs[k].abs()),
                    200,
                );
                out.push(root);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_derivatives_of_expression() {
        let f = ScalarFunction::<f64>::parse("-abs(x) + 0.5*x^2", 1).unwrap();
        assert_eq!(f.one_sided(0.0), Some((1.0, -1.0)));
        assert_eq!(f.kinks(-1.0, 1.0), vec![0.0]);
    }

    #[test]
    fn kinks_of_shifted_abs_are_located() {
        let f = ScalarFunction::<f64>::parse("abs(x - 0.3) + max(x, 2*x - 1)", 1).unwrap();
        let k = f.kinks(-2.0, 2.0);
        assert_eq!(k.len(), 2);
        assert!((k[0] - 0.3).abs() < 1e-14);
        assert!((k[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_roots_are_not_kinks() {
        let f = ScalarFunction::<f64>::parse("abs(x)^2 + sqrt(x^2 + 1)", 1).unwrap();
        assert!(f.kinks(-2.0, 2.0).is_empty());
    }

    #[test]
    fn reflect_and_negate_grid() {
        let axis = Axis::new(-1.0, 1.0, 5).unwrap();
        let f = ScalarFunction::sampled(axis, |x: f64| x * x + x).unwrap();
        let r = f.reflected();
        for x in [-0.9, -0.3, 0.2, 0.75] {
            assert!((r.eval1(x) - f.eval1(-x)).abs() < 1e-12);
            assert!((f.negated().eval1(x) + f.eval1(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn kink_cells_reproduce_abs_exactly() {
        let axis = Axis::new(-1.05, 0.95, 21).unwrap();
        let nodes = axis.nodes();
        let values = nodes.iter().map(|x: &f64| x.abs() + 0.5).collect();
        let left: Vec<f64> = nodes.iter().map(|x| if *x > 0.0 { 1.0 } else { -1.0 }).collect();
        let right = left.clone();
        let g = Grid::line(axis, values).unwrap().with_slopes(left, right).unwrap();
        let f = ScalarFunction::from_grid(g);
        for x in [-0.02, 0.0, 0.01, 0.04, 0.3] {
            assert!((f.eval1(x) - (x.abs() + 0.5)).abs() < 1e-14, "{x}");
        }
        let k = f.kinks(-1.0, 0.9);
        assert_eq!(k.len(), 1);
        assert!(k[0].abs() < 1e-12);
    }

    #[test]
    fn hermite_grid_is_fourth_order() {
        let err = |n: usize| {
            let axis = Axis::new(-1.0, 1.0, n).unwrap();
            let nodes = axis.nodes();
            let values = nodes.iter().map(|x: &f64| x.sin()).collect();
            let d: Vec<f64> = nodes.iter().map(|x| x.cos()).collect();
            let f = ScalarFunction::from_grid(Grid::line(axis, values).unwrap().with_slopes(d.clone(), d).unwrap());
            linspace(-1.0, 1.0, 999)
                .into_iter()
                .map(|x| (f.eval1(x) - x.sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(21) / err(41);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn separable_and_radial_detection() {
        let f = ScalarFunction::<f64>::parse("0.5*p1^2 + 0.25*p2^4 + 1", 2).unwrap();
        let w = [(-2.0, 2.0), (-2.0, 2.0)];
        let [a, b] = f.separable_parts(&w).unwrap();
        for (x, y) in [(0.3, -1.2), (1.5, 0.7)] {
            assert!((a.eval1(x) + b.eval1(y) - f.eval(&[x, y])).abs() < 1e-12);
        }
        let g = ScalarFunction::<f64>::parse("-sqrt(x1^2 + x2^2)", 2).unwrap();
        assert!(g.separable_parts(&w).is_none());
        let prof = g.radial_profile(2.0).unwrap();
        assert!((prof.eval1(-1.5) + 1.5).abs() < 1e-12);
        assert!(f.radial_profile(2.0).is_none());
    }

    #[test]
    fn piecewise_sum_merges_breakpoints() {
        let a = ScalarFunction::from_piecewise(
            Piecewise::new(vec![0.0], vec![Expression::parse("-x").unwrap(), Expression::parse("x").unwrap()]).unwrap(),
        );
        let b = ScalarFunction::<f64>::parse("abs(x - 1)", 1).unwrap();
        let s = a.add(&b).unwrap();
        for x in [-1.0, 0.5, 2.0] {
            assert!((s.eval1(x) - (x.abs() + (x - 1.0).abs())).abs() < 1e-14);
        }
        assert_eq!(s.one_sided(0.0), Some((-2.0, 0.0)));
    }

    #[test]
    fn mixed_roles_are_rejected() {
        assert!(ScalarFunction::<f64>::parse("x + p", 1).is_err());
        assert!(ScalarFunction::<f64>::parse("x2", 1).is_err());
        assert!(ScalarFunction::<f64>::parse("t*x", 1).is_err());
    }
}

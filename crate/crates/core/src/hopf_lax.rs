//! The Hopf-Lax solution `u(t,x) = min_y σ(y) + t H*((x - y)/t)` of
//! `u_t + H(Du) = 0, u(0,·) = σ`, its minimizer set `ℓ(t,x)` and gradients.

use rayon::prelude::*;
use serde::Serialize;

use crate::convex::{convexity_report, fenchel_conjugate, Conjugate, ConvexityReport, MAX_EXPANSIONS};
use crate::error::{Error, Result};
use crate::function::ScalarFunction;
use crate::numeric::{nan_to_inf, sign_change, x_tol};
use crate::scalar::Real;
use crate::search::{scan_line, scan_plane, Outcome, Scan};

/// Numerical knobs shared by every query against a [`Problem`].
#[derive(Clone, Debug, Serialize)]
pub struct SolverSettings<T> {
    /// Box on which Lipschitz constants of σ are sampled.
    pub window: Vec<(T, T)>,
    /// Scan nodes per axis of the minimizer search.
    pub search_nodes: usize,
    /// Nodes per axis of the conjugate table.
    pub dual_nodes: usize,
    /// Minimizers closer than this many scan steps to the edge trigger an expansion.
    pub margin: usize,
    /// Relative tie tolerance: `y` joins `ℓ(t,x)` if `ζ(y) <= u + ε (1 + |u|)`.
    pub epsilon: T,
    /// Minimizers closer than this many scan steps are merged.
    pub cluster_steps: T,
    /// Queries with `t` at or below this are answered by `σ(x)`.
    pub initial_time: T,
    /// Tolerance for the convexity verdicts on `H`.
    pub tol: T,
}

impl<T: Real> SolverSettings<T> {
    pub fn new(dim: usize) -> Self {
        let planar = dim == 2;
        SolverSettings {
            window: vec![(T::lit(-10.0), T::lit(10.0)); dim],
            search_nodes: if planar { 256 } else { 2048 },
            dual_nodes: if planar { 129 } else { 4097 },
            margin: 4,
            epsilon: T::lit(1e-6),
            cluster_steps: T::lit(3.0),
            initial_time: T::lit(1e-4),
            tol: T::lit(1e-6),
        }
    }
}

/// Radius rule for the minimizer search: every minimizer satisfies
/// `|x - y| <= t V` with `V = max |H_p(q)|` over `|q| <= Lip(σ) + 1`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SearchBall<T> {
    pub lipschitz: T,
    pub velocity: T,
    pub margin: usize,
    pub nodes: usize,
}

impl<T: Real> SearchBall<T> {
    /// Half-width at time `t` such that `tV` stays `margin` steps inside.
    pub fn radius(&self, t: T) -> T {
        let shrink = T::one() - T::count(2 * self.margin) / T::count(self.nodes - 1);
        (t * self.velocity / shrink).max(T::lit(1e-9))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Interior,
    /// `t <= initial_time`: the value is `σ(x)`.
    Initial,
}

/// `ℓ(t,x)` as found by the search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizerSet<T> {
    pub t: T,
    pub x: Vec<T>,
    /// Cluster representatives ordered by coordinate.
    pub points: Vec<Vec<T>>,
    /// `ζ` at each point.
    pub values: Vec<T>,
    /// `u(t,x)`.
    pub value: T,
    pub tolerance: T,
    pub step: T,
    pub radius: T,
    pub regime: Regime,
}

impl<T: Real> MinimizerSet<T> {
    pub fn is_singleton(&self) -> bool {
        self.points.len() == 1
    }
}

/// `(u_t, D_x u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientPair<T> {
    pub time: T,
    pub space: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Differentiability<T> {
    Differentiable(GradientPair<T>),
    NotDifferentiable(MinimizerSet<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// `ℓ(t,x)` has several points.
    Kink,
    Initial,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell<T> {
    pub t: T,
    pub x: Vec<T>,
    pub value: Option<T>,
    pub gradient: Option<GradientPair<T>>,
    pub singleton: bool,
    pub status: CellStatus,
}

/// Cells of [`Problem::solve_grid`], time-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolvedGrid<T> {
    pub t_nodes: Vec<T>,
    pub x_nodes: Vec<Vec<T>>,
    pub cells: Vec<GridCell<T>>,
}

impl<T> SolvedGrid<T> {
    pub fn cell(&self, ti: usize, xi: usize) -> &GridCell<T> {
        &self.cells[ti * self.x_nodes.len() + xi]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemigroupReport<T> {
    pub s: T,
    pub t: T,
    pub x: Vec<T>,
    pub direct: T,
    pub composed: T,
    pub residual: T,
}

/// Convex Hamiltonian, initial datum and horizon, with the conjugate
/// tabulated once. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Problem<T> {
    hamiltonian: ScalarFunction<T>,
    sigma: ScalarFunction<T>,
    horizon: T,
    conjugate: Conjugate<T>,
    search: SearchBall<T>,
    /// Bound on `|∂_y ζ|` inside the search window.
    zeta_lipschitz: T,
    /// Kinks of σ on the sampling window (1-D).
    sigma_kinks: Vec<T>,
    settings: SolverSettings<T>,
    report: ConvexityReport<T>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (u, v)| s + *u * *v)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

impl<T: Real> Problem<T> {
    pub fn new(hamiltonian: ScalarFunction<T>, sigma: ScalarFunction<T>, horizon: T) -> Result<Self> {
        let settings = SolverSettings::new(hamiltonian.dim());
        Self::with_settings(hamiltonian, sigma, horizon, settings)
    }

    pub fn with_settings(
        hamiltonian: ScalarFunction<T>,
        sigma: ScalarFunction<T>,
        horizon: T,
        settings: SolverSettings<T>,
    ) -> Result<Self> {
        let n = hamiltonian.dim();
        if sigma.dim() != n {
            return Err(Error::invalid("H and σ have different dimensions"));
        }
        if !(1..=2).contains(&n) {
            return Err(Error::Unsupported(format!("dimension {n}")));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::invalid("horizon must be finite and positive"));
        }
        if settings.window.len() != n || settings.search_nodes <= 2 * settings.margin + 2 || settings.dual_nodes < 3 {
            return Err(Error::invalid("inconsistent solver settings"));
        }
        let lipschitz = sigma.lipschitz(&settings.window);
        if !lipschitz.is_finite() {
            return Err(Error::Hypothesis("σ is not Lipschitz on the sampling window".into()));
        }
        let reach = T::lit(2.0) * (lipschitz + T::one());
        let h_window = vec![(-reach, reach); n];
        let report = convexity_report(&hamiltonian, &h_window, settings.tol);
        if let Some([a, m, b]) = &report.midpoint_violation {
            return Err(Error::Hypothesis(format!(
                "H is not convex: H({m:?}) exceeds the mean of H({a:?}) and H({b:?})"
            )));
        }
        if !report.strictly_convex {
            return Err(Error::Hypothesis(format!("H is not strictly convex on [{}, {}]", -reach, reach)));
        }
        if !report.superlinear {
            return Err(Error::Hypothesis("H is not superlinear".into()));
        }
        let q = lipschitz + T::one();
        let velocity = hamiltonian.lipschitz(&vec![(-q, q); n]);
        if !(velocity > T::zero()) || !velocity.is_finite() {
            return Err(Error::Hypothesis("H_p vanishes or is unbounded near the origin".into()));
        }
        let search = SearchBall {
            lipschitz,
            velocity,
            margin: settings.margin,
            nodes: settings.search_nodes,
        };
        let z = T::lit(2.5) * velocity;
        let conjugate = fenchel_conjugate(&hamiltonian, &vec![(-z, z); n], settings.dual_nodes)?;
        let mut reach_p = T::zero();
        for corner in 0..(1usize << n) {
            let zc: Vec<T> = (0..n).map(|i| if corner >> i & 1 == 1 { z } else { -z }).collect();
            reach_p = reach_p.max(norm(&conjugate.exact(&zc)?.argmax));
        }
        let sigma_kinks = if n == 1 {
            sigma.kinks(settings.window[0].0, settings.window[0].1)
        } else {
            Vec::new()
        };
        Ok(Problem {
            sigma_kinks,
            hamiltonian,
            sigma,
            horizon,
            conjugate,
            search,
            zeta_lipschitz: lipschitz + reach_p,
            settings,
            report,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn hamiltonian(&self) -> &ScalarFunction<T> {
        &self.hamiltonian
    }

    pub fn sigma(&self) -> &ScalarFunction<T> {
        &self.sigma
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn conjugate(&self) -> &Conjugate<T> {
        &self.conjugate
    }

    pub fn search(&self) -> &SearchBall<T> {
        &self.search
    }

    /// Kinks of σ on the sampling window (1-D only).
    pub fn sigma_kinks(&self) -> &[T] {
        &self.sigma_kinks
    }

    pub fn settings(&self) -> &SolverSettings<T> {
        &self.settings
    }

    pub fn hamiltonian_report(&self) -> &ConvexityReport<T> {
        &self.report
    }

    fn check_query(&self, t: T, x: &[T]) -> Result<()> {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("bad query point {x:?}")));
        }
        let limit = self.horizon * (T::one() + T::lit(1e-12));
        if !(t >= T::zero() && t <= limit) {
            return Err(Error::OutOfRange(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    fn ratio(t: T, x: &[T], y: &[T]) -> Vec<T> {
        x.iter().zip(y).map(|(a, b)| (*a - *b) / t).collect()
    }

    /// `ζ(t,x,y) = σ(y) + t H*((x - y)/t)` from the conjugate table.
    fn zeta_fast(&self, t: T, x: &[T], y: &[T]) -> T {
        self.sigma.eval(y) + t * self.conjugate.value(&Self::ratio(t, x, y))
    }

    /// `ζ(t,x,y)` with the conjugate solved exactly; NaN where it is undefined.
    pub fn objective(&self, t: T, x: &[T], y: &[T]) -> T {
        match self.conjugate.exact(&Self::ratio(t, x, y)) {
            Ok(c) => self.sigma.eval(y) + t * c.value,
            Err(_) => T::nan(),
        }
    }

    fn scan_cfg(&self, nodes: usize, step_guess: T) -> Scan<T> {
        Scan {
            nodes,
            margin: self.settings.margin,
            slack: self.zeta_lipschitz * step_guess + T::lit(1e-12),
            max_candidates: 64,
        }
    }

    /// Right slope of `ζ` in `y` (1-D).
    fn zeta_slope(&self, t: T, x: T, y: T) -> T {
        let q = match self.conjugate.exact(&[(x - y) / t]) {
            Ok(c) => c.argmax[0],
            Err(_) => return T::nan(),
        };
        match self.sigma.one_sided(y) {
            Some((_, r)) => r - q,
            None => T::nan(),
        }
    }

    /// Sharpens a polished minimizer to the zero (or jump through zero) of
    /// the slope, snapping onto a nearby kink of σ.
    fn refine(&self, t: T, x: T, y: T, v: T) -> (T, T) {
        let (y, v) = self.refine_slope(t, x, y, v);
        for &k in &self.sigma_kinks {
            if (k - y).abs() <= T::lit(1e-8) * (T::one() + k.abs()) {
                let vk = nan_to_inf(self.objective(t, &[x], &[k]));
                if vk <= v + x_tol(v) {
                    return (k, vk.min(v));
                }
            }
        }
        (y, v)
    }

    fn refine_slope(&self, t: T, x: T, y: T, v: T) -> (T, T) {
        for w in [1e-8, 1e-6, 1e-4] {
            let w = T::lit(w) * (T::one() + y.abs());
            let (lo, hi) = (y - w, y + w);
            let (gl, gh) = (self.zeta_slope(t, x, lo), self.zeta_slope(t, x, hi));
            if !(gl < T::zero() && gh > T::zero()) {
                continue;
            }
            let root = sign_change(|s| self.zeta_slope(t, x, s), lo, hi, x_tol(y), 200);
            let vr = nan_to_inf(self.objective(t, &[x], &[root]));
            if vr <= v + x_tol(v) {
                return (root, vr.min(v));
            }
            break;
        }
        (y, v)
    }

    /// `ℓ(t,x)` with `u(t,x)`.
    pub fn minimizer_set(&self, t: T, x: &[T]) -> Result<MinimizerSet<T>> {
        self.check_query(t, x)?;
        if t <= self.settings.initial_time {
            return Ok(MinimizerSet {
                t,
                x: x.to_vec(),
                points: vec![x.to_vec()],
                values: vec![self.sigma.eval(x)],
                value: self.sigma.eval(x),
                tolerance: T::zero(),
                step: T::zero(),
                radius: T::zero(),
                regime: Regime::Initial,
            });
        }
        let base = self.search.radius(t);
        for k in 0..=MAX_EXPANSIONS {
            let radius = base * T::lit(2f64.powi(k as i32));
            let found = if self.dim() == 1 {
                self.scan_1d(t, x[0], radius)
            } else {
                self.scan_2d(t, [x[0], x[1]], radius)
            };
            if let Some((cands, step)) = found {
                return Ok(self.collect(t, x, cands, step, radius));
            }
        }
        Err(Error::WindowEscape {
            t: t.as_f64(),
            x: x.iter().map(|v| v.as_f64()).collect(),
            expansions: MAX_EXPANSIONS,
        })
    }

    fn scan_1d(&self, t: T, x: T, radius: T) -> Option<(Vec<(Vec<T>, T)>, T)> {
        let n = self.settings.search_nodes;
        let cfg = self.scan_cfg(n, T::lit(2.0) * radius / T::count(n - 1));
        let fast = |y: T| self.zeta_fast(t, &[x], &[y]);
        let exact = |y: T| self.objective(t, &[x], &[y]);
        match scan_line(fast, exact, x, radius, &cfg) {
            Outcome::Boundary => None,
            Outcome::Found { candidates, step } => Some((
                candidates
                    .into_iter()
                    .map(|(y, v)| {
                        let (y, v) = self.refine(t, x, y, v);
                        (vec![y], v)
                    })
                    .collect(),
                step,
            )),
        }
    }

    fn scan_2d(&self, t: T, x: [T; 2], radius: T) -> Option<(Vec<(Vec<T>, T)>, T)> {
        let n = self.settings.search_nodes;
        let cfg = self.scan_cfg(n, T::lit(2.0) * radius / T::count(n - 1));
        let fast = |y: &[T; 2]| self.zeta_fast(t, &x, y);
        match scan_plane(fast, fast, x, radius, &cfg) {
            Outcome::Boundary => None,
            Outcome::Found { candidates, step } => Some((
                candidates
                    .into_iter()
                    .map(|(y, v)| {
                        let e = self.objective(t, &x, &y);
                        (y.to_vec(), if e.is_finite() { e } else { v })
                    })
                    .collect(),
                step,
            )),
        }
    }

    fn collect(&self, t: T, x: &[T], mut cands: Vec<(Vec<T>, T)>, step: T, radius: T) -> MinimizerSet<T> {
        let u = cands.iter().fold(T::infinity(), |m, c| m.min(c.1));
        let tolerance = self.settings.epsilon * (T::one() + u.abs());
        cands.retain(|c| c.1 <= u + tolerance);
        cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let reach = self.settings.cluster_steps * step * if self.dim() == 2 { T::lit(2f64.sqrt()) } else { T::one() };
        let mut kept: Vec<(Vec<T>, T)> = Vec::new();
        for (y, v) in cands {
            let close = kept.iter().any(|(k, _)| {
                let d: Vec<T> = k.iter().zip(&y).map(|(a, b)| *a - *b).collect();
                norm(&d) <= reach
            });
            if !close {
                kept.push((y, v));
            }
        }
        kept.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(p, q)| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        MinimizerSet {
            t,
            x: x.to_vec(),
            values: kept.iter().map(|k| k.1).collect(),
            points: kept.into_iter().map(|k| k.0).collect(),
            value: u,
            tolerance,
            step,
            radius,
            regime: Regime::Interior,
        }
    }

    /// `u(t,x)`.
    pub fn evaluate(&self, t: T, x: &[T]) -> Result<T> {
        Ok(self.minimizer_set(t, x)?.value)
    }

    /// `(H*(v) - <v, H*_z(v)>, H*_z(v))` with `v = (x - y)/t`: the gradient
    /// carried by the characteristic from `y` to `(t,x)`.
    pub fn gradient_from(&self, t: T, x: &[T], y: &[T]) -> Result<GradientPair<T>> {
        let v = Self::ratio(t, x, y);
        let c = self.conjugate.exact(&v)?;
        Ok(GradientPair {
            time: c.value - dot(&v, &c.argmax),
            space: c.argmax,
        })
    }

    /// `Dσ(x)` where σ is differentiable.
    pub fn sigma_gradient(&self, x: &[T]) -> Option<Vec<T>> {
        let n = self.dim();
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            let r = self.sigma.directional(x, &e)?;
            e[i] = -T::one();
            let l = -self.sigma.directional(x, &e)?;
            if (r - l).abs() > T::lit(1e-9) * (T::one() + r.abs()) {
                return None;
            }
            g.push(r);
        }
        Some(g)
    }

    /// Gradient where `ℓ(t,x)` is a singleton, otherwise the whole set.
    pub fn gradient_at(&self, t: T, x: &[T]) -> Result<Differentiability<T>> {
        let set = self.minimizer_set(t, x)?;
        if set.regime == Regime::Initial {
            return Ok(match self.sigma_gradient(x) {
                Some(q) => Differentiability::Differentiable(GradientPair {
                    time: -self.hamiltonian.eval(&q),
                    space: q,
                }),
                None => Differentiability::NotDifferentiable(set),
            });
        }
        if set.is_singleton() {
            Ok(Differentiability::Differentiable(self.gradient_from(t, x, &set.points[0])?))
        } else {
            Ok(Differentiability::NotDifferentiable(set))
        }
    }

    fn cell(&self, t: T, x: &[T]) -> GridCell<T> {
        let mut cell = GridCell {
            t,
            x: x.to_vec(),
            value: None,
            gradient: None,
            singleton: false,
            status: CellStatus::Ok,
        };
        let set = match self.minimizer_set(t, x) {
            Ok(s) => s,
            Err(e) => {
                cell.status = CellStatus::Failed(e.to_string());
                return cell;
            }
        };
        cell.value = Some(set.value);
        cell.singleton = set.is_singleton();
        if set.regime == Regime::Initial {
            cell.status = CellStatus::Initial;
            cell.gradient = self.sigma_gradient(x).map(|q| GradientPair {
                time: -self.hamiltonian.eval(&q),
                space: q,
            });
        } else if set.is_singleton() {
            match self.gradient_from(t, x, &set.points[0]) {
                Ok(g) => cell.gradient = Some(g),
                Err(e) => cell.status = CellStatus::Failed(e.to_string()),
            }
        } else {
            cell.status = CellStatus::Kink;
        }
        cell
    }

    /// Values, gradients and singleton flags on a product grid. Failures are
    /// recorded in the cells; results do not depend on the thread count.
    pub fn solve_grid(&self, t_nodes: &[T], x_nodes: &[Vec<T>]) -> SolvedGrid<T> {
        let nx = x_nodes.len();
        let cells = (0..t_nodes.len() * nx)
            .into_par_iter()
            .map(|k| self.cell(t_nodes[k / nx], &x_nodes[k % nx]))
            .collect();
        SolvedGrid {
            t_nodes: t_nodes.to_vec(),
            x_nodes: x_nodes.to_vec(),
            cells,
        }
    }

    /// `u(t,x)` computed from the table alone, without exact polishing.
    fn value_fast(&self, t: T, x: &[T]) -> T {
        if t <= self.settings.initial_time {
            return self.sigma.eval(x);
        }
        let base = self.search.radius(t);
        let n = self.settings.search_nodes;
        for k in 0..=MAX_EXPANSIONS {
            let radius = base * T::lit(2f64.powi(k as i32));
            let cfg = self.scan_cfg(n, T::lit(2.0) * radius / T::count(n - 1));
            let out = if self.dim() == 1 {
                let f = |y: T| self.zeta_fast(t, x, &[y]);
                match scan_line(f, f, x[0], radius, &cfg) {
                    Outcome::Found { candidates, .. } => Some(candidates.iter().fold(T::infinity(), |m, c| m.min(c.1))),
                    Outcome::Boundary => None,
                }
            } else {
                let f = |y: &[T; 2]| self.zeta_fast(t, x, y);
                match scan_plane(f, f, [x[0], x[1]], radius, &cfg) {
                    Outcome::Found { candidates, .. } => Some(candidates.iter().fold(T::infinity(), |m, c| m.min(c.1))),
                    Outcome::Boundary => None,
                }
            };
            if let Some(v) = out {
                return v;
            }
        }
        T::nan()
    }

    /// `|u(t,x) - min_y u(s,y) + (t-s) H*((x-y)/(t-s))|`.
    pub fn semigroup_check(&self, s: T, t: T, x: &[T]) -> Result<SemigroupReport<T>> {
        if !(s > T::zero() && s < t) {
            return Err(Error::invalid("semigroup check needs 0 < s < t"));
        }
        self.check_query(t, x)?;
        let direct = self.evaluate(t, x)?;
        let dt = t - s;
        let inner = |y: &[T]| self.value_fast(s, y) + dt * self.conjugate.value(&Self::ratio(dt, x, y));
        let precise = |y: &[T]| match (self.evaluate(s, y), self.conjugate.exact(&Self::ratio(dt, x, y))) {
            (Ok(u), Ok(c)) => u + dt * c.value,
            _ => T::nan(),
        };
        let base = self.search.radius(dt);
        let mut composed = None;
        for k in 0..=MAX_EXPANSIONS {
            let radius = base * T::lit(2f64.powi(k as i32));
            let out = if self.dim() == 1 {
                let cfg = self.scan_cfg(256, T::lit(2.0) * radius / T::lit(255.0));
                let f = |y: T| inner(&[y]);
                let g = |y: T| precise(&[y]);
                match scan_line(f, g, x[0], radius, &cfg) {
                    Outcome::Found { candidates, .. } => Some(candidates.iter().fold(T::infinity(), |m, c| m.min(c.1))),
                    Outcome::Boundary => None,
                }
            } else {
                let cfg = self.scan_cfg(33, T::lit(2.0) * radius / T::lit(32.0));
                let f = |y: &[T; 2]| inner(y);
                match scan_plane(f, f, [x[0], x[1]], radius, &cfg) {
                    Outcome::Found { candidates, .. } => Some(candidates.iter().fold(T::infinity(), |m, c| m.min(c.1))),
                    Outcome::Boundary => None,
                }
            };
            if out.is_some() {
                composed = out;
                break;
            }
        }
        let composed = composed.ok_or_else(|| Error::WindowEscape {
            t: t.as_f64(),
            x: x.iter().map(|v| v.as_f64()).collect(),
            expansions: MAX_EXPANSIONS,
        })?;
        Ok(SemigroupReport {
            s,
            t,
            x: x.to_vec(),
            direct,
            composed,
            residual: (direct - composed).abs(),
        })
    }
}

/// Max-form solution `u(t,x) = max_y σ(y) - t (-K)*((y - x)/t)` of
/// `u_t + K(Du) = 0` for concave `K`, computed as `-v` where `v` solves the
/// convex problem with `H(p) = -K(-p)` and data `-σ`.
#[derive(Clone, Debug)]
pub struct ConcaveProblem<T> {
    inner: Problem<T>,
}

impl<T: Real> ConcaveProblem<T> {
    pub fn new(k: ScalarFunction<T>, sigma: ScalarFunction<T>, horizon: T) -> Result<Self> {
        let settings = SolverSettings::new(k.dim());
        Self::with_settings(k, sigma, horizon, settings)
    }

    pub fn with_settings(k: ScalarFunction<T>, sigma: ScalarFunction<T>, horizon: T, settings: SolverSettings<T>) -> Result<Self> {
        let h = k.reflected().negated();
        Ok(ConcaveProblem {
            inner: Problem::with_settings(h, sigma.negated(), horizon, settings)?,
        })
    }

    pub fn evaluate(&self, t: T, x: &[T]) -> Result<T> {
        Ok(-self.inner.evaluate(t, x)?)
    }

    /// Maximizers of the max-form objective; values carry the max-form sign.
    pub fn maximizer_set(&self, t: T, x: &[T]) -> Result<MinimizerSet<T>> {
        let mut s = self.inner.minimizer_set(t, x)?;
        s.value = -s.value;
        for v in &mut s.values {
            *v = -*v;
        }
        Ok(s)
    }

    /// The convex problem whose negated solution this is.
    pub fn convex(&self) -> &Problem<T> {
        &self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(h: &str, sigma: &str) -> Problem<f64> {
        Problem::new(
            ScalarFunction::parse(h, 1).unwrap(),
            ScalarFunction::parse(sigma, 1).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn kinked_concave_data() {
        let p = problem("0.5*p^2", "-abs(x)");
        assert!((p.evaluate(1.0, &[0.5]).unwrap() + 1.0).abs() < 1e-12);
        let set = p.minimizer_set(1.0, &[0.0]).unwrap();
        assert_eq!(set.points.len(), 2);
        assert!((set.points[0][0] + 1.0).abs() < 1e-8 && (set.points[1][0] - 1.0).abs() < 1e-8);
        assert!(matches!(p.gradient_at(1.0, &[0.0]).unwrap(), Differentiability::NotDifferentiable(_)));
    }

    #[test]
    fn kinked_convex_data() {
        let p = problem("0.5*p^2", "abs(x)");
        assert!((p.evaluate(1.0, &[0.5]).unwrap() - 0.125).abs() < 1e-12);
        let set = p.minimizer_set(1.0, &[0.0]).unwrap();
        assert_eq!(set.points, vec![vec![0.0]]);
        let Differentiability::Differentiable(g) = p.gradient_at(1.0, &[2.0]).unwrap() else {
            panic!()
        };
        assert!((g.space[0] - 1.0).abs() < 1e-12 && (g.time + 0.5).abs() < 1e-12);
        let Differentiability::Differentiable(g) = p.gradient_at(1.0, &[0.5]).unwrap() else {
            panic!()
        };
        assert!((g.space[0] - 0.5).abs() < 1e-10 && (g.time + 0.125).abs() < 1e-10);
    }

    #[test]
    fn affine_and_constant_data() {
        let p = problem("0.5*p^2", "x");
        assert!((p.evaluate(1.0, &[2.0]).unwrap() - 1.5).abs() < 1e-12);
        let set = p.minimizer_set(1.0, &[0.0]).unwrap();
        assert!((set.points[0][0] + 1.0).abs() < 1e-9);
        let z = problem("0.5*p^2", "0");
        assert!(z.evaluate(0.7, &[3.0]).unwrap().abs() < 1e-14);
        assert_eq!(z.evaluate(0.0, &[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonconvex_hamiltonian() {
        let e = Problem::new(
            ScalarFunction::<f64>::parse("-0.5*p^2", 1).unwrap(),
            ScalarFunction::parse("x", 1).unwrap(),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(e, Error::Hypothesis(_)), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn escaping_minimizer() {
        let p = problem("0.5*p^2", "-0.5*x^2");
        assert!(matches!(p.evaluate(1.0, &[0.3]), Err(Error::WindowEscape { .. })));
    }

    #[test]
    fn semigroup_on_kinked_data() {
        let p = problem("0.5*p^2", "-abs(x)");
        let r = p.semigroup_check(0.5, 1.0, &[0.0]).unwrap();
        assert!((r.composed + 0.5).abs() < 1e-6 && r.residual < 1e-6, "{r:?}");
    }

    #[test]
    fn concave_max_form() {
        let c = ConcaveProblem::new(
            ScalarFunction::<f64>::parse("-0.5*p^2", 1).unwrap(),
            ScalarFunction::parse("-abs(x)", 1).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(c.evaluate(1.0, &[0.0]).unwrap().abs() < 1e-12);
        let a = ConcaveProblem::new(
            ScalarFunction::<f64>::parse("-0.5*p^2", 1).unwrap(),
            ScalarFunction::parse("x", 1).unwrap(),
            1.0,
        )
        .unwrap();
        assert!((a.evaluate(1.0, &[1.0]).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn planar_separable() {
        let p = Problem::new(
            ScalarFunction::<f64>::parse("0.5*p1^2 + 0.5*p2^2", 2).unwrap(),
            ScalarFunction::parse("-abs(x1) + abs(x2)", 2).unwrap(),
            1.0,
        )
        .unwrap();
        let u = p.evaluate(1.0, &[0.5, 0.25]).unwrap();
        assert!((u - (-1.0 + 0.03125)).abs() < 1e-8, "{u}");
        let set = p.minimizer_set(1.0, &[0.0, 0.5]).unwrap();
        assert_eq!(set.points.len(), 2, "{set:?}");
    }
}

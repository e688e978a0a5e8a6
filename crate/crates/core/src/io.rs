//! Problem files, CSV/JSON emission and candidate tables.
//!
//! A problem file is TOML:
//!
//! ```toml
//! hamiltonian = "0.5*p^2"
//! sigma = "-abs(x)"        # or `terminal = "..."` for backward problems
//! horizon = 1.0
//! dimension = 1
//!
//! [grid]
//! x = [-2.0, 2.0]          # `x2 = [...]` adds the second axis
//! t = [0.0, 1.0]
//! resolution = 257
//! time_steps = 33
//!
//! [queries]
//! points = [[1.0, 0.0]]    # (t, x...) pairs; replaces the grid for `solve`
//! origins = [-1.0, 0.0, 1.0]
//! candidate = "candidate.csv"
//!
//! [tolerance]
//! solver = 1e-6
//! bf = 1e-5
//! ```

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backward::TerminalProblem;
use crate::characteristics::Characteristic;
use crate::error::{Error, Result};
use crate::function::ScalarFunction;
use crate::hopf_lax::{CellStatus, Problem, SolvedGrid, SolverSettings};
use crate::linspace;
use crate::viscosity::GridCandidate;

pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub hamiltonian: String,
    #[serde(default)]
    pub sigma: Option<String>,
    #[serde(default)]
    pub terminal: Option<String>,
    pub horizon: f64,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub queries: Queries,
    #[serde(default)]
    pub tolerance: Tolerances,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub x2: Option<[f64; 2]>,
    /// Defaults to `[0, T]`.
    pub t: Option<[f64; 2]>,
    pub resolution: usize,
    pub time_steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x: [-2.0, 2.0],
            x2: None,
            t: None,
            resolution: 257,
            time_steps: 33,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Queries {
    pub points: Option<Vec<Vec<f64>>>,
    pub origins: Vec<f64>,
    pub candidate: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solver: f64,
    pub bf: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { solver: 1e-6, bf: 1e-5 }
    }
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ProblemSpec = toml::from_str(text).map_err(|e| {
            let (line, column, offset) = match e.span() {
                Some(span) => {
                    let before = &text[..span.start];
                    let line = before.matches('\n').count() + 1;
                    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    (line, column, span.start)
                }
                None => (0, 0, 0),
            };
            Error::Parse {
                line,
                column,
                offset,
                message: e.message().to_string(),
            }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        if self.sigma.is_none() && self.terminal.is_none() {
            return Err(Error::invalid("missing `sigma` (or `terminal`)"));
        }
        if self.grid.resolution < MIN_RESOLUTION || self.grid.time_steps < 1 {
            return Err(Error::invalid(format!("resolution must be at least {MIN_RESOLUTION}")));
        }
        for (lo, hi) in self.space_window() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid("empty or non-finite window"));
            }
        }
        let [t0, t1] = self.time_window();
        if !(t0 >= 0.0 && t1 >= t0 && t1 <= self.horizon) {
            return Err(Error::invalid("time window must lie in [0, T]"));
        }
        if let Some(points) = &self.queries.points {
            if points.iter().any(|p| p.len() != self.dimension + 1) {
                return Err(Error::invalid("query points are (t, x...) tuples"));
            }
        }
        Ok(())
    }

    pub fn space_window(&self) -> Vec<(f64, f64)> {
        let mut w = vec![(self.grid.x[0], self.grid.x[1])];
        if self.dimension == 2 {
            let [lo, hi] = self.grid.x2.unwrap_or(self.grid.x);
            w.push((lo, hi));
        }
        w
    }

    pub fn time_window(&self) -> [f64; 2] {
        self.grid.t.unwrap_or([0.0, self.horizon])
    }

    pub fn with_resolution(mut self, resolution: usize) -> Result<Self> {
        self.grid.resolution = resolution;
        self.validate()?;
        Ok(self)
    }

    pub fn settings(&self) -> SolverSettings<f64> {
        let mut s = SolverSettings::<f64>::new(self.dimension);
        for ((lo, hi), w) in self.space_window().into_iter().zip(s.window.iter_mut()) {
            *w = (w.0.min(lo), w.1.max(hi));
        }
        s.tol = self.tolerance.solver;
        s
    }

    pub fn hamiltonian(&self) -> Result<ScalarFunction<f64>> {
        ScalarFunction::parse(&self.hamiltonian, self.dimension)
    }

    /// Forward problem from `sigma`.
    pub fn problem(&self) -> Result<Problem<f64>> {
        let src = self
            .sigma
            .as_deref()
            .ok_or_else(|| Error::invalid("missing `sigma`"))?;
        let sigma = ScalarFunction::parse(src, self.dimension)?;
        Problem::with_settings(self.hamiltonian()?, sigma, self.horizon, self.settings())
    }

    /// Backward problem from `terminal`.
    pub fn terminal_problem(&self) -> Result<TerminalProblem<f64>> {
        let src = self
            .terminal
            .as_deref()
            .ok_or_else(|| Error::invalid("missing `terminal`"))?;
        let g = ScalarFunction::parse(src, self.dimension)?;
        TerminalProblem::with_settings(self.hamiltonian()?, g, self.horizon, self.settings())
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        let [t0, t1] = self.time_window();
        if self.grid.time_steps == 1 {
            return vec![t1];
        }
        linspace(t0, t1, self.grid.time_steps)
    }

    /// Spatial nodes, row-major over `(x1, x2)` in 2-D.
    pub fn x_nodes(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .space_window()
            .into_iter()
            .map(|(lo, hi)| linspace(lo, hi, self.grid.resolution))
            .collect();
        match axes.as_slice() {
            [a] => a.iter().map(|x| vec![*x]).collect(),
            [a, b] => a.iter().flat_map(|x| b.iter().map(move |y| vec![*x, *y])).collect(),
            _ => Vec::new(),
        }
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem<f64>> {
    ProblemSpec::load(path)?.problem()
}

/// Seventeen significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn status_label(s: &CellStatus) -> String {
    match s {
        CellStatus::Ok => "ok".into(),
        CellStatus::Kink => "kink".into(),
        CellStatus::Initial => "initial".into(),
        CellStatus::Failed(m) => format!("failed: {m}"),
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

/// Row-major grid table. `dim` fixes the header when there are no cells.
pub fn grid_csv(grid: &SolvedGrid<f64>, dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    let axis = |k: usize| if dim == 1 { String::new() } else { (k + 1).to_string() };
    header.extend((0..dim).map(|k| format!("x{}", axis(k))));
    header.push("u".into());
    header.push("u_t".into());
    header.extend((0..dim).map(|k| format!("u_x{}", axis(k))));
    header.push("singleton".into());
    header.push("status".into());
    w.write_record(&header).map_err(csv_error)?;
    for cell in &grid.cells {
        let mut row = vec![fmt_real(cell.t)];
        row.extend(cell.x.iter().map(|v| fmt_real(*v)));
        row.push(cell.value.map(fmt_real).unwrap_or_default());
        match &cell.gradient {
            Some(g) => {
                row.push(fmt_real(g.time));
                row.extend(g.space.iter().map(|v| fmt_real(*v)));
            }
            None => row.extend(std::iter::repeat_n(String::new(), dim + 1)),
        }
        row.push(cell.singleton.to_string());
        row.push(status_label(&cell.status));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| csv_error(e.into_error().into()))
}

/// Per-curve polyline blocks: a `# curve k` comment line, then `t,x...` rows.
pub fn polylines_csv(curves: &[Characteristic<f64>], times: &[f64]) -> String {
    let mut out = String::new();
    for (k, c) in curves.iter().enumerate() {
        let origin: Vec<String> = c.origin.iter().map(|v| fmt_real(*v)).collect();
        let slope: Vec<String> = c.slope.iter().map(|v| fmt_real(*v)).collect();
        let _ = writeln!(out, "# curve {k} origin={} slope={}", origin.join(" "), slope.join(" "));
        let names: Vec<String> = (0..c.origin.len())
            .map(|i| if c.origin.len() == 1 { "x".into() } else { format!("x{}", i + 1) })
            .collect();
        let _ = writeln!(out, "t,{}", names.join(","));
        for &t in times {
            let xs: Vec<String> = c.position(t).iter().map(|v| fmt_real(*v)).collect();
            let _ = writeln!(out, "{},{}", fmt_real(t), xs.join(","));
        }
        out.push('\n');
    }
    out
}

pub fn to_json<S: Serialize>(value: &S) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Numerical(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `bytes` to `path`, or to stdout when `path` is `None`.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

#[derive(Deserialize)]
struct CandidateRow {
    t: f64,
    x: f64,
    v: f64,
}

/// Candidate table with columns `t,x,v` on a full uniform lattice.
pub fn read_candidate(path: impl AsRef<Path>) -> Result<GridCandidate<f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_candidate(file)
}

pub fn parse_candidate(reader: impl std::io::Read) -> Result<GridCandidate<f64>> {
    let mut rows = Vec::new();
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (i, row) in r.deserialize::<CandidateRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            column: 1,
            offset: e.position().map_or(0, |p| p.byte() as usize),
            message: e.to_string(),
        })?;
        rows.push((row.t, row.x, row.v));
    }
    GridCandidate::from_rows(&rows)
}

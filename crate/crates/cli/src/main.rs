use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hopflax::characteristics::{
    classify_along, default_scan, forward_curve, preimage_set, reachable_gradients, AlongReport, Characteristic,
    PreimageSet, ReachableGradients,
};
use hopflax::convex::{fenchel_conjugate, ConvexityReport};
use hopflax::hopf_lax::{CellStatus, SolvedGrid};
use hopflax::io::{self, ProblemSpec};
use hopflax::regularity::{
    default_strip_scan, differentiability_strip, estimate_params, semiconvexity_bound, SemiconvexityBound,
    StripReport,
};
use hopflax::viscosity::{verify_region, Subject};
use hopflax::{Error, Result};

#[derive(Parser)]
#[command(name = "hopflax", version, about = "Hopf-Lax solutions of u_t + H(Du) = 0")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args)]
struct Common {
    /// Problem file (TOML).
    #[arg(long, global = true)]
    problem: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the solver tolerance (the bf tolerance for `roundtrip`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Overrides the spatial resolution.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Value and gradient on the grid or at the query points.
    Solve,
    /// Tabulated H* and the convexity constants of H.
    Conjugate,
    /// Preimage sets, curve families and their classification.
    Characteristics,
    /// Differentiability strip and semiconvexity bound.
    Regularity,
    /// Viscosity sub/supersolution verdicts.
    Verify {
        /// Candidate table with columns t,x,v; the Hopf-Lax solution when omitted.
        #[arg(long)]
        candidate: Option<PathBuf>,
    },
    /// Backward solve from `terminal`, forward solve back, and the bf condition.
    Roundtrip,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(jobs) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("--jobs: {e}")))?;
    }
    let path = c
        .problem
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--problem <path> is required".into()))?;
    let mut spec = ProblemSpec::load(path)?;
    if let Some(r) = c.resolution {
        spec = spec.with_resolution(r)?;
    }
    if let (Some(tol), false) = (c.tol, matches!(cli.command, Command::Roundtrip)) {
        spec.tolerance.solver = tol;
    }
    let mut failure = None;
    let bytes = match &cli.command {
        Command::Solve => {
            let (bytes, failed) = solve(&spec, c.format)?;
            failure = failed;
            bytes
        }
        Command::Conjugate => conjugate(&spec, c.format)?,
        Command::Characteristics => characteristics(&spec, c.format)?,
        Command::Regularity => regularity(&spec, c.format)?,
        Command::Verify { candidate } => {
            let candidate = candidate.clone().or_else(|| {
                spec.queries.candidate.as_ref().map(|p| path.parent().unwrap_or(path).join(p))
            });
            verify(&spec, candidate, c.tol)?
        }
        Command::Roundtrip => roundtrip(&spec, c.tol)?,
    };
    io::emit(&bytes, c.out.as_deref())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// The table is written even when some cells fail; the first failure then
/// sets the exit status.
fn solve(spec: &ProblemSpec, format: Option<Format>) -> Result<(Vec<u8>, Option<Error>)> {
    let prob = spec.problem()?;
    let grid = match &spec.queries.points {
        Some(points) => {
            let mut out = SolvedGrid {
                t_nodes: Vec::new(),
                x_nodes: Vec::new(),
                cells: Vec::new(),
            };
            for p in points {
                let one = prob.solve_grid(&p[..1], &[p[1..].to_vec()]);
                out.cells.extend(one.cells);
            }
            out
        }
        None => prob.solve_grid(&spec.t_nodes(), &spec.x_nodes()),
    };
    let failed = grid.cells.iter().find_map(|c| match &c.status {
        CellStatus::Failed(m) => Some(Error::Numerical(format!("t = {}, x = {:?}: {m}", c.t, c.x))),
        _ => None,
    });
    let bytes = match format.unwrap_or(Format::Csv) {
        Format::Csv => io::grid_csv(&grid, spec.dimension)?,
        Format::Json => io::to_json(&grid)?,
    };
    Ok((bytes, failed))
}

#[derive(Serialize)]
struct ConjugateOut {
    hamiltonian: String,
    dual_window: Vec<(f64, f64)>,
    constants: ConvexityReport<f64>,
    table: Vec<(f64, f64, f64)>,
}

fn conjugate(spec: &ProblemSpec, format: Option<Format>) -> Result<Vec<u8>> {
    let prob = spec.problem()?;
    let window = prob.conjugate().window().to_vec();
    let h = spec.hamiltonian()?;
    let conj = fenchel_conjugate(&h, &window, spec.grid.resolution)?;
    let table: Vec<(f64, f64, f64)> = match conj.table() {
        Some((z, v, a)) => (0..z.len()).map(|i| (z[i], v[i], a[i])).collect(),
        None => return Err(Error::Unsupported("conjugate tables are emitted in one dimension".into())),
    };
    let out = ConjugateOut {
        hamiltonian: spec.hamiltonian.clone(),
        dual_window: window,
        constants: prob.hamiltonian_report().clone(),
        table,
    };
    match format.unwrap_or(Format::Json) {
        Format::Json => io::to_json(&out),
        Format::Csv => {
            let mut s = String::from("z,h_star,argmax\n");
            for (z, v, a) in &out.table {
                s += &format!("{},{},{}\n", io::fmt_real(*z), io::fmt_real(*v), io::fmt_real(*a));
            }
            Ok(s.into_bytes())
        }
    }
}

#[derive(Serialize)]
struct CurveOut {
    curve: Characteristic<f64>,
    along: AlongReport<f64>,
}

#[derive(Serialize)]
struct CharacteristicsOut {
    preimages: Vec<PreimageSet<f64>>,
    reachable: Vec<ReachableGradients<f64>>,
    curves: Vec<CurveOut>,
}

fn characteristics(spec: &ProblemSpec, format: Option<Format>) -> Result<Vec<u8>> {
    let prob = spec.problem()?;
    let mut curves = Vec::new();
    if !spec.queries.origins.is_empty() && spec.dimension != 1 {
        return Err(Error::Unsupported("curve origins are read in one dimension".into()));
    }
    for &y in &spec.queries.origins {
        let (l, r) = prob
            .sigma()
            .one_sided(y)
            .ok_or_else(|| Error::InvalidInput(format!("σ has no one-sided slopes at {y}")))?;
        curves.push(forward_curve(&prob, &[y], &[l])?);
        if r != l {
            curves.push(forward_curve(&prob, &[y], &[r])?);
        }
    }
    let scan = default_scan(spec.horizon);
    if format == Some(Format::Csv) {
        return Ok(io::polylines_csv(&curves, &scan).into_bytes());
    }
    let mut preimages = Vec::new();
    let mut reachable = Vec::new();
    for p in spec.queries.points.iter().flatten() {
        preimages.push(preimage_set(&prob, p[0], &p[1..])?);
        reachable.push(reachable_gradients(&prob, p[0], &p[1..])?);
    }
    let curves = curves
        .into_iter()
        .map(|curve| {
            let along = classify_along(&prob, &curve, &scan)?;
            Ok(CurveOut { curve, along })
        })
        .collect::<Result<_>>()?;
    io::to_json(&CharacteristicsOut {
        preimages,
        reachable,
        curves,
    })
}

#[derive(Serialize)]
struct RegularityOut {
    bound: Option<SemiconvexityBound<f64>>,
    strip: StripReport<f64>,
}

fn regularity(spec: &ProblemSpec, format: Option<Format>) -> Result<Vec<u8>> {
    let prob = spec.problem()?;
    let scan = match spec.grid.t {
        Some(_) => spec.t_nodes().into_iter().filter(|t| *t > 0.0).collect(),
        None => default_strip_scan(spec.horizon),
    };
    let strip = differentiability_strip(&prob, &scan, &spec.space_window(), spec.grid.resolution)?;
    let bound = semiconvexity_bound(&estimate_params(&prob), None).ok();
    match format.unwrap_or(Format::Json) {
        Format::Json => io::to_json(&RegularityOut { bound, strip }),
        Format::Csv => {
            let mut s = String::from("t,differentiable,kinks\n");
            for v in &strip.per_time {
                s += &format!("{},{},{}\n", io::fmt_real(v.t), v.differentiable, v.kinks);
            }
            Ok(s.into_bytes())
        }
    }
}

fn verify(spec: &ProblemSpec, candidate: Option<PathBuf>, tol: Option<f64>) -> Result<Vec<u8>> {
    let prob = spec.problem()?;
    let [t0, t1] = spec.time_window();
    let t0 = if t0 > 0.0 { t0 } else { (t1 - t0) / spec.grid.time_steps as f64 };
    let (lo, hi) = spec.space_window()[0];
    let samples = (spec.grid.time_steps, spec.grid.resolution);
    let tol = tol.unwrap_or(spec.tolerance.solver);
    let verdict = match candidate {
        Some(p) => {
            let cand = io::read_candidate(&p)?;
            verify_region(&prob, Subject::Candidate(&cand), (t0, t1), (lo, hi), samples, tol)?
        }
        None => verify_region(&prob, Subject::Solution, (t0, t1), (lo, hi), samples, tol)?,
    };
    io::to_json(&verdict)
}

fn roundtrip(spec: &ProblemSpec, tol: Option<f64>) -> Result<Vec<u8>> {
    let tp = spec.terminal_problem()?;
    let xs: Vec<f64> = spec.x_nodes().into_iter().map(|x| x[0]).collect();
    let ts: Vec<f64> = spec.t_nodes().into_iter().filter(|t| *t > 0.0).collect();
    let report = tp.roundtrip(&xs, &ts, tol.unwrap_or(spec.tolerance.bf))?;
    io::to_json(&report)
}

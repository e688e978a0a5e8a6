use hopflax::function::ScalarFunction;
use hopflax::semidiff::{numeric_semidiff, semidiff_at, ConvexSet, Side};
use proptest::prelude::*;

/// `b x + s sin(x) + sum a_k |x - c_k|` with kinks on a quarter lattice so
/// that the two summands often share a kink.
#[derive(Clone, Debug)]
struct Piecewise {
    slope: f64,
    wave: f64,
    kinks: Vec<(f64, f64)>,
}

impl Piecewise {
    fn source(&self) -> String {
        let mut s = format!("{} * x + {} * sin(x)", self.slope, self.wave);
        for (a, c) in &self.kinks {
            s += &format!(" + {a} * abs(x - {c})");
        }
        s
    }

    fn function(&self) -> ScalarFunction<f64> {
        ScalarFunction::parse(&self.source(), 1).unwrap()
    }

    /// One-sided derivatives from the definition, as an oracle.
    fn slopes(&self, y: f64) -> (f64, f64) {
        let base = self.slope + self.wave * y.cos();
        self.kinks.iter().fold((base, base), |(l, r), (a, c)| {
            let (dl, dr) = if y > *c {
                (*a, *a)
            } else if y < *c {
                (-a, -a)
            } else {
                (-a, *a)
            };
            (l + dl, r + dr)
        })
    }
}

fn coefficient() -> impl Strategy<Value = f64> {
    (-8i32..=8).prop_map(|k| k as f64 / 4.0)
}

fn piecewise() -> impl Strategy<Value = Piecewise> {
    (
        coefficient(),
        coefficient(),
        prop::collection::vec((coefficient(), (-8i32..=8).prop_map(|k| k as f64 / 4.0)), 0..4),
    )
        .prop_map(|(slope, wave, kinks)| Piecewise { slope, wave, kinks })
}

fn interval(s: &ConvexSet<f64>) -> Option<(f64, f64)> {
    match s {
        ConvexSet::Empty => None,
        other => other.bounds_1d(),
    }
}

fn expected(l: f64, r: f64, side: Side) -> Option<(f64, f64)> {
    let tol = 1e-12;
    match side {
        Side::Super if r <= l + tol => Some((r, l)),
        Side::Sub if l <= r + tol => Some((l, r)),
        _ => None,
    }
}

fn close(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9,
        _ => false,
    }
}

fn pair_points() -> impl Strategy<Value = (Piecewise, Piecewise, Vec<f64>)> {
    (piecewise(), piecewise(), prop::collection::vec(-2.5f64..2.5, 2)).prop_map(|(f, g, mut ys)| {
        ys.extend(f.kinks.iter().chain(&g.kinks).map(|k| k.1));
        (f, g, ys)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// `D±f + D±g ⊆ D±(f+g)`, with equality when either summand is
    /// differentiable at the point.
    #[test]
    fn sum_rule((f, g, ys) in pair_points()) {
        let (ff, gf) = (f.function(), g.function());
        let sum = ff.add(&gf).unwrap();
        for &y in &ys {
            let (fl, fr) = f.slopes(y);
            let (gl, gr) = g.slopes(y);
            for side in [Side::Super, Side::Sub] {
                let df = semidiff_at(&ff, &[y], side).unwrap().set;
                let dg = semidiff_at(&gf, &[y], side).unwrap().set;
                let ds = semidiff_at(&sum, &[y], side).unwrap().set;
                prop_assert!(close(interval(&df), expected(fl, fr, side)), "f {} at {y}: {:?}", f.source(), df);
                prop_assert!(close(interval(&ds), expected(fl + gl, fr + gr, side)), "sum at {y}: {:?}", ds);
                let lhs = df.sum_1d(&dg).unwrap();
                if let Some((lo, hi)) = interval(&lhs) {
                    prop_assert!(ds.contains(&[lo], 1e-9) && ds.contains(&[hi], 1e-9), "{:?} ⊄ {:?} at {y}", lhs, ds);
                }
                let smooth = (fl - fr).abs() < 1e-12 || (gl - gr).abs() < 1e-12;
                if smooth {
                    prop_assert!(close(interval(&lhs), interval(&ds)), "equality fails at {y}: {:?} vs {:?}", lhs, ds);
                }
            }
        }
    }

    /// Difference-quotient extrapolation agrees with the exact rule away from
    /// coincident kink cancellations.
    #[test]
    fn numeric_matches_exact(f in piecewise(), y in -2.5f64..2.5) {
        let ff = f.function();
        let (l, r) = f.slopes(y);
        for side in [Side::Super, Side::Sub] {
            let steps: Vec<f64> = (0..12).map(|k| 1e-2 * 0.5f64.powi(k)).collect();
            let num = numeric_semidiff(|x| ff.eval1(x), y, &steps, side);
            let want = expected(l, r, side);
            match (interval(&num.set), want) {
                (Some(a), Some(b)) => prop_assert!((a.0 - b.0).abs() < 1e-4 && (a.1 - b.1).abs() < 1e-4, "{:?} vs {:?}", a, b),
                (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }
}

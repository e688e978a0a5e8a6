use hopflax::convex::{
    conjugate_gradient, estimate_semiconcavity, estimate_uniform_convexity, fenchel_conjugate, Semiconcavity,
};
use hopflax::function::ScalarFunction;
use hopflax::linspace;
use proptest::prelude::*;

const CONVEX_SET: [&str; 6] = [
    "0.5*p^2",
    "0.25*p^4",
    "0.5*p^2 + p",
    "0.25*p^4 + 0.5*p^2",
    "p^2 + 0.1*p^4 - 0.5*p",
    "0.125*p^6 + p^2",
];

fn f(src: &str) -> ScalarFunction<f64> {
    ScalarFunction::parse(src, 1).unwrap()
}

#[test]
fn biconjugate_recovers_primal() {
    let primal = [(-2.0, 2.0)];
    for src in CONVEX_SET {
        let h = f(src);
        let lip = h.lipschitz(&primal);
        let reach = lip + 1.0;
        let nodes = 2049;
        let conj = fenchel_conjugate(&h, &[(-reach, reach)], nodes).unwrap();
        let step = 2.0 * reach / (nodes - 1) as f64;
        let back = fenchel_conjugate(&conj.as_function().unwrap(), &primal, 257).unwrap();
        let worst = linspace(-2.0, 2.0, 257)
            .into_iter()
            .map(|p| (back.value1(p) - h.eval1(p)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 5.0 * step * lip, "{src}: {worst} > {}", 5.0 * step * lip);
    }
}

#[test]
fn quartic_conjugate_value() {
    let conj = fenchel_conjugate(&f("0.25*p^4"), &[(-4.0, 4.0)], 129).unwrap();
    assert!((conj.value1(1.0) - 0.75).abs() < 1e-6);
    assert!((conj.exact(&[1.0]).unwrap().value - 0.75).abs() < 1e-12);
    let z = conjugate_gradient(&conj, &[2.0]).unwrap()[0];
    assert!((z.powi(3) - 2.0).abs() < 1e-9);
}

#[test]
fn semiconcavity_of_conjugate_is_bounded_by_uniform_convexity() {
    let primal = [(-2.0, 2.0)];
    for src in CONVEX_SET {
        let h = f(src);
        let lambda = estimate_uniform_convexity(&h, &primal, 1e-6);
        if !(lambda > 0.0) {
            continue;
        }
        let lip = h.lipschitz(&primal);
        let conj = fenchel_conjugate(&h, &[(-lip, lip)], 1025).unwrap();
        let c = match estimate_semiconcavity(&conj.as_function().unwrap(), &[(-0.9 * lip, 0.9 * lip)], 1e-6) {
            Semiconcavity::Finite(c) => c,
            other => panic!("{src}: {other:?}"),
        };
        assert!(c <= 1.0 / lambda + 1e-3, "{src}: C = {c}, Λ = {lambda}");
    }
}

proptest! {
    #[test]
    fn fenchel_young(i in 0usize..6, p in -3.0f64..3.0, z in -3.0f64..3.0) {
        let h = f(CONVEX_SET[i]);
        let conj = fenchel_conjugate(&h, &[(-4.0, 4.0)], 257).unwrap();
        let star = conj.exact(&[z]).unwrap();
        prop_assert!(h.eval1(p) + star.value >= p * z - 1e-9);
        let q = star.argmax[0];
        prop_assert!((h.eval1(q) + star.value - q * z).abs() < 1e-9);
    }
}

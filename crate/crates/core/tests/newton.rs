use std::sync::Arc;

use ddebif::corrector::{correct, CorrectOptions};
use ddebif::linalg::{Mat, Vector};
use ddebif::{
    assemble_problem, default_point_method, DelaySpec, EventKind, Point, PointKind, PointMethod, ProblemFunctions,
    ProblemOptions, SteadyState,
};

fn scalar(f: fn(f64) -> f64) -> ProblemFunctions {
    let rhs = Arc::new(move |xx: &Mat, _: &[f64]| Vector::from_element(1, f(xx[(0, 0)]) + 0.0 * xx[(0, 1)]));
    assemble_problem(1, 1, rhs, DelaySpec::ConstantIndices(vec![1]), ProblemOptions::default()).unwrap()
}

fn start(x: f64) -> Point {
    Point::Stst(SteadyState { parameter: vec![1.0], x: Vector::from_element(1, x), stability: None })
}

fn method(max_it: usize, halt: f64, min_acc: f64) -> PointMethod {
    let mut m = default_point_method(PointKind::Stst);
    m.newton_max_iterations = max_it;
    m.halting_accuracy = halt;
    m.minimal_accuracy = min_acc;
    m.print_residual_info = true;
    m
}

/// Newton on x³ contracts by 2/3 per step, so the residual sequence is
/// 1e-3 · (8/27)^k from x0 = 0.1.
fn cubic_residual(k: i32) -> f64 {
    1e-3 * (8.0f64 / 27.0).powi(k)
}

#[test]
fn residual_sequence_follows_the_contraction() {
    let pr = scalar(|x| x * x * x);
    let r = correct(&pr, &start(0.1), &[], &[], &method(5, 0.0, 1.0), &CorrectOptions::default()).unwrap();
    assert_eq!(r.trace.len(), 5);
    for (k, t) in r.trace.iter().enumerate() {
        assert!((t - cubic_residual(k as i32)).abs() < 1e-6 * cubic_residual(k as i32) + 1e-15, "step {}", k);
    }
    assert_eq!(r.events.iter().filter(|e| e.kind == EventKind::Residual).count(), 5);
}

#[test]
fn success_iff_final_residual_below_minimal_accuracy() {
    let pr = scalar(|x| x * x * x);
    let last = cubic_residual(4);
    let ok = correct(&pr, &start(0.1), &[], &[], &method(5, 0.0, last * 1.01), &CorrectOptions::default()).unwrap();
    assert!(ok.success);
    assert!((ok.residual - last).abs() < 1e-12);
    let bad = correct(&pr, &start(0.1), &[], &[], &method(5, 0.0, last * 0.99), &CorrectOptions::default()).unwrap();
    assert!(!bad.success);
    assert_eq!(bad.iterations, 5);
}

#[test]
fn halts_early_once_below_halting_accuracy() {
    let pr = scalar(|x| x * x * x);
    let halt = cubic_residual(2) * 1.01;
    let r = correct(&pr, &start(0.1), &[], &[], &method(20, halt, 1e-3), &CorrectOptions::default()).unwrap();
    assert_eq!(r.trace.len(), 3);
    assert_eq!(r.iterations, 2);
    assert!(r.success);
}

#[test]
fn growing_residual_stops_the_iteration() {
    // Newton on atan diverges from |x0| > 1.3917
    let pr = scalar(f64::atan);
    let m = method(20, 1e-12, 1e-10);
    let r = correct(&pr, &start(1.5), &[], &[], &m, &CorrectOptions::default()).unwrap();
    assert!(!r.success);
    assert_eq!(r.trace.len(), m.newton_nmon_iterations + 2);
    assert!(r.trace.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn exact_start_needs_no_update() {
    let pr = scalar(|x| x - 0.25);
    let r = correct(&pr, &start(0.25), &[], &[], &method(5, 1e-10, 1e-8), &CorrectOptions::default()).unwrap();
    assert!(r.success);
    assert_eq!(r.iterations, 0);
    assert_eq!(r.trace, vec![0.0]);
}

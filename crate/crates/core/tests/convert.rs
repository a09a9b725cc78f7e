mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use ddebif::convert::{to_hopf, to_psol, to_stst};
use ddebif::{default_stability_method, Point, PointKind, SteadyState};
use ddebif::linalg::Vector;
use num_complex::Complex64;
use proptest::prelude::*;

fn hayes_root(a: f64, mut l: Complex64) -> Complex64 {
    for _ in 0..60 {
        let e = (-l).exp();
        l -= (l + a * e) / (1.0 - a * e);
    }
    l
}

fn hayes_stst(a: f64) -> Point {
    Point::Stst(SteadyState { parameter: vec![a, 1.0], x: Vector::from_element(1, 0.0), stability: None })
}

fn hopf_of(p: &Point) -> &ddebif::HopfPoint {
    match p {
        Point::Hopf(h) => h,
        _ => panic!("not a Hopf point"),
    }
}

#[test]
fn hopf_seed_picks_the_imaginary_pair() {
    let prob = common::hayes();
    let m = default_stability_method(PointKind::Stst);
    let p = to_hopf(&prob, &hayes_stst(FRAC_PI_2), &[], &m).unwrap();
    let h = hopf_of(&p);
    assert!((h.omega - FRAC_PI_2).abs() < 1e-8, "omega {}", h.omega);
    // Δ(iω)v = (iω + a e^{-iω}) v
    let l = Complex64::new(0.0, h.omega);
    let r = (l + FRAC_PI_2 * (-l).exp()) * h.v[0];
    assert!(r.norm() < 1e-8 && h.v[0].norm() > 0.1);
}

#[test]
fn excluded_frequency_moves_to_next_pair() {
    let prob = common::hayes();
    let mut m = default_stability_method(PointKind::Stst);
    m.minimal_real_part = Some(-5.0);
    let p = to_hopf(&prob, &hayes_stst(FRAC_PI_2), &[FRAC_PI_2], &m).unwrap();
    let h = hopf_of(&p);
    let oracle = hayes_root(FRAC_PI_2, Complex64::new(-1.5, 7.5));
    println!("omega {} oracle {}", h.omega, oracle);
    assert!((h.omega - FRAC_PI_2).abs() > 1.0);
    assert!((h.omega - oracle.im).abs() < 1e-6);

    // a Hopf input excludes its own frequency
    let first = to_hopf(&prob, &hayes_stst(FRAC_PI_2), &[], &m).unwrap();
    let again = to_hopf(&prob, &first, &[], &m).unwrap();
    assert!((hopf_of(&again).omega - oracle.im).abs() < 1e-6);
}

#[test]
fn zero_amplitude_orbit_is_the_steady_state() {
    let prob = common::hayes();
    let m = default_stability_method(PointKind::Stst);
    let mut hp = to_hopf(&prob, &hayes_stst(FRAC_PI_2), &[], &m).unwrap();
    if let Point::Hopf(h) = &mut hp {
        h.x[0] = 0.7;
    }
    let (psol, step) = to_psol(&hp, 0.0, 4, 10).unwrap();
    let Point::Psol(o) = psol else { panic!() };
    assert!(o.profile.values().iter().all(|&v| v == 0.7));
    assert!((o.period - 2.0 * PI / hopf_of(&hp).omega).abs() < 1e-12, "period {}", o.period);
    assert!((o.period - 4.0).abs() < 1e-6);
    let Point::Psol(s) = step else { panic!() };
    assert!(s.profile.values().iter().any(|v| v.abs() > 1e-3));
    assert_eq!(s.period, 0.0);
}

#[test]
fn steady_state_of_a_steady_state() {
    let p = hayes_stst(1.0);
    assert_eq!(to_stst(&p).unwrap().len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    /// Profile = x* + A·Re(v e^{2πit}) at every mesh point.
    #[test]
    fn psol_seed_is_linear_in_amplitude(amp in -0.5f64..0.5, d in 2usize..5, l in 3usize..12) {
        let prob = common::hayes();
        let m = default_stability_method(PointKind::Stst);
        let hp = to_hopf(&prob, &hayes_stst(FRAC_PI_2), &[], &m).unwrap();
        let (psol, step) = to_psol(&hp, amp, d, l).unwrap();
        let (Point::Psol(o), Point::Psol(s)) = (&psol, &step) else { panic!() };
        let v = hopf_of(&psol_source(&hp)).v[0];
        let mesh = o.profile.explicit_mesh().unwrap();
        prop_assert_eq!(mesh.len(), d * l + 1);
        for (j, &t) in mesh.iter().enumerate() {
            let want = (v * Complex64::new(0.0, 2.0 * PI * t).exp()).re;
            prop_assert!((s.profile.values()[(0, j)] - want).abs() < 1e-12);
            prop_assert!((o.profile.values()[(0, j)] - amp * want).abs() < 1e-12);
        }
    }
}

fn psol_source(p: &Point) -> Point {
    ddebif::point_normalize(p).unwrap()
}

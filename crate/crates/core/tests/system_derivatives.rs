mod common;

use common::*;
use ddebif::linalg::{CVec, Mat};
use ddebif::{Complex, DerivativeRequest, Error};
use proptest::prelude::*;

const H: f64 = 1e-6;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn states(n: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-1.5f64..1.5, n * cols).prop_map(move |v| Mat::from_vec(n, cols, v))
}

fn params() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 3).prop_map(|mut v| {
        v.extend([0.7, 1.3]);
        v
    })
}

/// ∂f/∂x^i by central differences of the right-hand side.
fn fd_state(xx: &Mat, p: &[f64], i: usize) -> Mat {
    let n = xx.nrows();
    let mut out = Mat::zeros(n, n);
    for c in 0..n {
        let col = central(
            |h| {
                let mut y = xx.clone();
                y[(c, i)] += h;
                two_delay_rhs(&y, p)
            },
            0.0,
            H,
        );
        out.set_column(c, &col);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn state_and_parameter_jacobians_match_differences(xx in states(2, 3), p in params()) {
        let pr = two_delay();
        for i in 0..3 {
            let a = pr.dfdx(&xx, &p, i).unwrap();
            let d = fd_state(&xx, &p, i);
            for (x, y) in a.iter().zip(d.iter()) {
                prop_assert!(close(*x, *y, 1e-7), "block {}: {} vs {}", i, x, y);
            }
        }
        for k in 1..=5 {
            let a = pr.dfdp(&xx, &p, k).unwrap();
            let d = central(|h| { let mut q = p.clone(); q[k - 1] += h; two_delay_rhs(&xx, &q) }, 0.0, H);
            for (x, y) in a.iter().zip(d.iter()) {
                prop_assert!(close(*x, *y, 1e-7));
            }
        }
    }

    #[test]
    fn mixed_and_second_derivatives_match_differences(xx in states(2, 3), p in params(), v0 in -1.0f64..1.0, v1 in -1.0f64..1.0) {
        let pr = two_delay();
        let v = CVec::from_vec(vec![Complex::new(v0, 0.3), Complex::new(v1, -0.2)]);
        for i in 0..3 {
            for k in 1..=5 {
                let a = pr.dfdxdp(&xx, &p, i, k).unwrap();
                let plus = { let mut q = p.clone(); q[k - 1] += 1e-5; fd_state(&xx, &q, i) };
                let minus = { let mut q = p.clone(); q[k - 1] -= 1e-5; fd_state(&xx, &q, i) };
                let d = (plus - minus) / 2e-5;
                for (x, y) in a.iter().zip(d.iter()) {
                    prop_assert!((x - y).abs() < 1e-4, "mixed {} {}: {} vs {}", i, k, x, y);
                }
            }
            for j in 0..3 {
                let a = pr.dfdxdx_v(&xx, &p, i, j, &v).unwrap();
                for c in 0..2 {
                    let av = |h: f64| {
                        let mut y = xx.clone();
                        y[(c, j)] += h;
                        pr.dfdx(&y, &p, i).unwrap().map(|x| Complex::new(x, 0.0)) * &v
                    };
                    let d = (av(1e-5) - av(-1e-5)) / Complex::new(2e-5, 0.0);
                    for r in 0..2 {
                        prop_assert!((a[(r, c)] - d[r]).norm() < 1e-5, "second {} {}", i, j);
                    }
                }
            }
        }
    }

    #[test]
    fn difference_fallback_agrees_with_analytic(xx in states(2, 3), p in params()) {
        let (an, fd) = (two_delay(), two_delay_fd());
        for i in 0..3 {
            let (a, b) = (an.dfdx(&xx, &p, i).unwrap(), fd.dfdx(&xx, &p, i).unwrap());
            prop_assert!((a - b).amax() < 1e-6);
        }
        for k in 1..=5 {
            let (a, b) = (an.dfdp(&xx, &p, k).unwrap(), fd.dfdp(&xx, &p, k).unwrap());
            prop_assert!((a - b).amax() < 1e-6);
        }
        for i in 0..3 {
            for k in 1..=3 {
                let (a, b) = (an.dfdxdp(&xx, &p, i, k).unwrap(), fd.dfdxdp(&xx, &p, i, k).unwrap());
                prop_assert!((a - b).amax() < 1e-4);
            }
        }
    }

    #[test]
    fn delay_derivatives_match_differences(xx in states(1, 2), a in 0.1f64..1.0, tau0 in 0.5f64..2.0, c in -0.5f64..0.5) {
        let pr = sd_scalar();
        let p = vec![a, 0.5, tau0, c];
        for ind in 1..=2usize {
            let head = xx.columns(0, ind).into_owned();
            for j in 0..ind {
                let g = pr.dtau_dx(ind, &head, &p, j).unwrap();
                let d = central(|h| { let mut y = head.clone(); y[(0, j)] += h; ddebif::linalg::Vector::from_element(1, sd_tau(ind, &y, &p)) }, 0.0, H);
                prop_assert!(close(g[0], d[0], 1e-7));
            }
            for k in 1..=4 {
                let g = pr.dtau_dp(ind, &head, &p, k).unwrap();
                let d = central(|h| { let mut q = p.clone(); q[k - 1] += h; ddebif::linalg::Vector::from_element(1, sd_tau(ind, &head, &q)) }, 0.0, H);
                prop_assert!(close(g, d[0], 1e-7));
            }
        }
    }
}

#[test]
fn malformed_requests_are_rejected() {
    let pr = two_delay();
    let xx = Mat::zeros(2, 3);
    let p = [1.0, 1.0, 1.0, 1.0, 1.0];
    assert!(matches!(pr.dfdx(&xx, &p, 3), Err(Error::Request(_))));
    assert!(matches!(pr.dfdp(&xx, &p, 0), Err(Error::Request(_))));
    assert!(matches!(pr.dfdp(&xx, &p, 6), Err(Error::Request(_))));
    let both = DerivativeRequest { nx: vec![0, 1], np: vec![1], v: None };
    assert!(matches!(both.kind(2, 5), Err(Error::Request(_))));
}

#[test]
fn constant_delays_read_from_parameters() {
    let pr = two_delay();
    assert_eq!(pr.delay_count(), 2);
    assert!(!pr.state_dependent);
    let x = ddebif::linalg::Vector::from_vec(vec![0.1, 0.2]);
    let d = pr.steady_delays(&x, &[0.0, 0.0, 0.0, 0.7, 1.3]).unwrap();
    assert_eq!(d, vec![0.7, 1.3]);
}

#[test]
fn bad_delay_slot_is_a_config_error() {
    let r = ddebif::assemble_problem(
        1,
        2,
        std::sync::Arc::new(|xx: &Mat, _: &[f64]| ddebif::linalg::Vector::from_element(1, xx[(0, 0)])),
        ddebif::DelaySpec::ConstantIndices(vec![3]),
        ddebif::ProblemOptions::default(),
    );
    assert!(matches!(r, Err(Error::Config(_))));
}

#![allow(dead_code)]

use std::sync::Arc;

use ddebif::linalg::{CMat, Mat, Vector};
use ddebif::system::{Derivative, DelayFn, RequestKind};
use ddebif::{assemble_problem, DelaySpec, DerivativeRequest, Error, ProblemFunctions, ProblemOptions, Result};

pub fn sech2(x: f64) -> f64 {
    1.0 / x.cosh().powi(2)
}

pub fn sech2_prime(x: f64) -> f64 {
    -2.0 * sech2(x) * x.tanh()
}

/// Two components, constant delays in slots 4 and 5:
/// x1' = -x1 + a tanh(x2(t-τ1)), x2' = -b x2 + sin(x1(t-τ2)) + c x1 x2.
pub fn two_delay_rhs(xx: &Mat, p: &[f64]) -> Vector {
    Vector::from_vec(vec![
        -xx[(0, 0)] + p[0] * xx[(1, 1)].tanh(),
        -p[1] * xx[(1, 0)] + xx[(0, 2)].sin() + p[2] * xx[(0, 0)] * xx[(1, 0)],
    ])
}

fn two_delay_deriv(xx: &Mat, p: &[f64], req: &DerivativeRequest) -> Result<Derivative> {
    let (a, b, c) = (p[0], p[1], p[2]);
    let mut m = Mat::zeros(2, 2);
    Ok(match req.kind(2, 5)? {
        RequestKind::State(0) => {
            m[(0, 0)] = -1.0;
            m[(1, 0)] = c * xx[(1, 0)];
            m[(1, 1)] = -b + c * xx[(0, 0)];
            Derivative::Matrix(m)
        }
        RequestKind::State(1) => {
            m[(0, 1)] = a * sech2(xx[(1, 1)]);
            Derivative::Matrix(m)
        }
        RequestKind::State(_) => {
            m[(1, 0)] = xx[(0, 2)].cos();
            Derivative::Matrix(m)
        }
        RequestKind::Param(k) => Derivative::Vector(Vector::from_vec(match k {
            1 => vec![xx[(1, 1)].tanh(), 0.0],
            2 => vec![0.0, -xx[(1, 0)]],
            3 => vec![0.0, xx[(0, 0)] * xx[(1, 0)]],
            _ => vec![0.0, 0.0],
        })),
        RequestKind::Mixed(i, k) => {
            match (i, k) {
                (0, 2) => m[(1, 1)] = -1.0,
                (0, 3) => {
                    m[(1, 0)] = xx[(1, 0)];
                    m[(1, 1)] = xx[(0, 0)];
                }
                (1, 1) => m[(0, 1)] = sech2(xx[(1, 1)]),
                _ => {}
            }
            Derivative::Matrix(m)
        }
        RequestKind::StateSecond(i, j) => {
            let v = req.v.as_ref().ok_or_else(|| Error::Request("missing direction".into()))?;
            let mut o = CMat::zeros(2, 2);
            match (i, j) {
                (0, 0) => {
                    o[(1, 0)] = v[1] * c;
                    o[(1, 1)] = v[0] * c;
                }
                (1, 1) => o[(0, 1)] = v[1] * a * sech2_prime(xx[(1, 1)]),
                (2, 2) => o[(1, 0)] = -v[0] * xx[(0, 2)].sin(),
                _ => {}
            }
            Derivative::Complex(o)
        }
    })
}

pub fn two_delay() -> ProblemFunctions {
    assemble_problem(
        2,
        5,
        Arc::new(two_delay_rhs),
        DelaySpec::ConstantIndices(vec![4, 5]),
        ProblemOptions { state_jacobian: Some(Arc::new(two_delay_deriv)), ..Default::default() },
    )
    .unwrap()
}

/// Same right-hand side with finite-difference derivatives only.
pub fn two_delay_fd() -> ProblemFunctions {
    assemble_problem(2, 5, Arc::new(two_delay_rhs), DelaySpec::ConstantIndices(vec![4, 5]), ProblemOptions::default())
        .unwrap()
}

/// Scalar equation with two nested state-dependent delays
/// τ1 = τ0 + c x(t), τ2 = τ0/2 + 0.2 x(t-τ1)²,
/// x' = -a x - b tanh(x(t-τ1)) + 0.3 x(t-τ2); parameters [a, b, τ0, c].
pub fn sd_rhs(xx: &Mat, p: &[f64]) -> Vector {
    Vector::from_element(1, -p[0] * xx[(0, 0)] - p[1] * xx[(0, 1)].tanh() + 0.3 * xx[(0, 2)])
}

pub fn sd_tau(ind: usize, xx: &Mat, p: &[f64]) -> f64 {
    match ind {
        1 => p[2] + p[3] * xx[(0, 0)],
        _ => 0.5 * p[2] + 0.2 * xx[(0, 1)].powi(2),
    }
}

fn sd_deriv(xx: &Mat, p: &[f64], req: &DerivativeRequest) -> Result<Derivative> {
    let (a, b) = (p[0], p[1]);
    let one = |x: f64| Mat::from_element(1, 1, x);
    Ok(match req.kind(2, 4)? {
        RequestKind::State(0) => Derivative::Matrix(one(-a)),
        RequestKind::State(1) => Derivative::Matrix(one(-b * sech2(xx[(0, 1)]))),
        RequestKind::State(_) => Derivative::Matrix(one(0.3)),
        RequestKind::Param(k) => Derivative::Vector(Vector::from_element(
            1,
            match k {
                1 => -xx[(0, 0)],
                2 => -xx[(0, 1)].tanh(),
                _ => 0.0,
            },
        )),
        RequestKind::Mixed(i, k) => Derivative::Matrix(one(match (i, k) {
            (0, 1) => -1.0,
            (1, 2) => -sech2(xx[(0, 1)]),
            _ => 0.0,
        })),
        RequestKind::StateSecond(i, j) => {
            let v = req.v.as_ref().ok_or_else(|| Error::Request("missing direction".into()))?;
            let mut o = CMat::zeros(1, 1);
            if (i, j) == (1, 1) {
                o[(0, 0)] = v[0] * (-b * sech2_prime(xx[(0, 1)]));
            }
            Derivative::Complex(o)
        }
    })
}

fn sd_dtau(ind: usize, xx: &Mat, p: &[f64], nx: &[usize], np: &[usize]) -> Result<Derivative> {
    match (nx, np) {
        ([j], []) => {
            if *j >= ind {
                return Err(Error::Request(format!("delay {} does not depend on block {}", ind, j)));
            }
            let g = match (ind, *j) {
                (1, 0) => p[3],
                (2, 1) => 0.4 * xx[(0, 1)],
                _ => 0.0,
            };
            Ok(Derivative::Vector(Vector::from_element(1, g)))
        }
        ([], [k]) => Ok(Derivative::Scalar(match (ind, *k) {
            (1, 3) => 1.0,
            (1, 4) => xx[(0, 0)],
            (2, 3) => 0.5,
            _ => 0.0,
        })),
        _ => Err(Error::Request("unsupported delay derivative".into())),
    }
}

pub fn sd_scalar() -> ProblemFunctions {
    let tau: DelayFn = Arc::new(sd_tau);
    assemble_problem(
        1,
        4,
        Arc::new(sd_rhs),
        DelaySpec::StateDependent { count: 2, evaluator: tau },
        ProblemOptions {
            state_jacobian: Some(Arc::new(sd_deriv)),
            delay_jacobian: Some(Arc::new(sd_dtau)),
            ..Default::default()
        },
    )
    .unwrap()
}

/// Scalar x' = p1 - x², with an unused constant delay in slot 2: a fold at
/// p1 = 0.
pub fn quadratic_fold() -> ProblemFunctions {
    let rhs = Arc::new(|xx: &Mat, p: &[f64]| Vector::from_element(1, p[0] - xx[(0, 0)].powi(2) + 0.0 * xx[(0, 1)]));
    assemble_problem(1, 2, rhs, DelaySpec::ConstantIndices(vec![2]), ProblemOptions::default()).unwrap()
}

/// Central difference of a vector-valued map of one scalar.
pub fn central<F: Fn(f64) -> Vector>(f: F, x: f64, h: f64) -> Vector {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// x' = -a x(t-τ), params [a, τ]; roots solve λ + a e^{-λτ} = 0.
pub fn hayes() -> ProblemFunctions {
    let rhs = Arc::new(|xx: &Mat, p: &[f64]| Vector::from_element(1, -p[0] * xx[(0, 1)]));
    assemble_problem(1, 2, rhs, DelaySpec::ConstantIndices(vec![2]), ProblemOptions::default()).unwrap()
}

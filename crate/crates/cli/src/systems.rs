//! Built-in demo systems with analytic first derivatives.

use std::sync::Arc;

use ddebif::linalg::{CMat, Mat, Vector};
use ddebif::system::{
    fd_delay_jacobian, mixed_from_first, second_from_first, Derivative, DelayFn, RequestKind,
};
use ddebif::{
    assemble_problem, DelaySpec, DerivativeRequest, Error, ProblemFunctions,
    ProblemOptions, Result,
};

/// A registered system plus its metadata.
#[derive(Debug, Clone)]
pub struct BuiltinSystem {
    pub id: &'static str,
    pub summary: &'static str,
    pub parameter_names: Vec<&'static str>,
    pub problem: ProblemFunctions,
}

impl BuiltinSystem {
    pub fn dim(&self) -> usize {
        self.problem.dim
    }
    pub fn par_count(&self) -> usize {
        self.problem.par_count
    }
}

pub const SYSTEM_IDS: [&str; 3] = ["neuron", "sd_demo", "hom_neural"];

pub fn builtin_system(id: &str) -> Result<BuiltinSystem> {
    match id {
        "neuron" => neuron(),
        "sd_demo" => sd_demo(),
        "hom_neural" => hom_neural(),
        other => Err(Error::Config(format!(
            "unknown system '{}', expected one of {}",
            other,
            SYSTEM_IDS.join(", ")
        ))),
    }
}

fn sech2(x: f64) -> f64 {
    let c = x.cosh();
    1.0 / (c * c)
}

/// d/dx sech²(x).
fn sech2_prime(x: f64) -> f64 {
    -2.0 * sech2(x) * x.tanh()
}

// ---------------------------------------------------------------- neuron

/// Two coupled neurons; parameters [κ, β, a12, a21, τ1, τ2, τs].
pub fn neuron() -> Result<BuiltinSystem> {
    let rhs = Arc::new(|xx: &Mat, par: &[f64]| {
        let (kappa, beta, a12, a21) = (par[0], par[1], par[2], par[3]);
        Vector::from_vec(vec![
            -kappa * xx[(0, 0)] + beta * xx[(0, 3)].tanh() + a12 * xx[(1, 2)].tanh(),
            -kappa * xx[(1, 0)] + beta * xx[(1, 3)].tanh() + a21 * xx[(0, 1)].tanh(),
        ])
    });
    let jac = Arc::new(|xx: &Mat, par: &[f64], req: &DerivativeRequest| neuron_deriv(xx, par, req));
    let problem = assemble_problem(
        2,
        7,
        rhs,
        DelaySpec::ConstantIndices(vec![5, 6, 7]),
        ProblemOptions { state_jacobian: Some(jac), ..Default::default() },
    )?;
    Ok(BuiltinSystem {
        id: "neuron",
        summary: "two coupled neurons with delayed connections (constant delays in slots 5, 6, 7)",
        parameter_names: vec!["kappa", "beta", "a12", "a21", "tau1", "tau2", "taus"],
        problem,
    })
}

fn neuron_deriv(xx: &Mat, par: &[f64], req: &DerivativeRequest) -> Result<Derivative> {
    let (kappa, beta, a12, a21) = (par[0], par[1], par[2], par[3]);
    let mut a = Mat::zeros(2, 2);
    match req.kind(3, 7)? {
        RequestKind::State(i) => {
            match i {
                0 => {
                    a[(0, 0)] = -kappa;
                    a[(1, 1)] = -kappa;
                }
                1 => a[(1, 0)] = a21 * sech2(xx[(0, 1)]),
                2 => a[(0, 1)] = a12 * sech2(xx[(1, 2)]),
                _ => {
                    a[(0, 0)] = beta * sech2(xx[(0, 3)]);
                    a[(1, 1)] = beta * sech2(xx[(1, 3)]);
                }
            }
            Ok(Derivative::Matrix(a))
        }
        RequestKind::Param(p) => {
            let v = match p {
                1 => vec![-xx[(0, 0)], -xx[(1, 0)]],
                2 => vec![xx[(0, 3)].tanh(), xx[(1, 3)].tanh()],
                3 => vec![xx[(1, 2)].tanh(), 0.0],
                4 => vec![0.0, xx[(0, 1)].tanh()],
                _ => vec![0.0, 0.0],
            };
            Ok(Derivative::Vector(Vector::from_vec(v)))
        }
        RequestKind::Mixed(i, p) => {
            match (i, p) {
                (0, 1) => {
                    a[(0, 0)] = -1.0;
                    a[(1, 1)] = -1.0;
                }
                (1, 4) => a[(1, 0)] = sech2(xx[(0, 1)]),
                (2, 3) => a[(0, 1)] = sech2(xx[(1, 2)]),
                (3, 2) => {
                    a[(0, 0)] = sech2(xx[(0, 3)]);
                    a[(1, 1)] = sech2(xx[(1, 3)]);
                }
                _ => {}
            }
            Ok(Derivative::Matrix(a))
        }
        RequestKind::StateSecond(i, j) => {
            let v = req.v.as_ref().ok_or_else(|| Error::Request("missing direction".into()))?;
            let mut out = CMat::zeros(2, 2);
            if i == j {
                match i {
                    1 => out[(1, 0)] = v[0] * a21 * sech2_prime(xx[(0, 1)]),
                    2 => out[(0, 1)] = v[1] * a12 * sech2_prime(xx[(1, 2)]),
                    3 => {
                        out[(0, 0)] = v[0] * beta * sech2_prime(xx[(0, 3)]);
                        out[(1, 1)] = v[1] * beta * sech2_prime(xx[(1, 3)]);
                    }
                    _ => {}
                }
            }
            Ok(Derivative::Complex(out))
        }
    }
}

// ---------------------------------------------------------------- sd_demo

/// Five-component system with six nested delays; p10 = τ1, p11 = τ2.
pub fn sd_demo() -> Result<BuiltinSystem> {
    let rhs = Arc::new(|xx: &Mat, par: &[f64]| sd_rhs(xx, par));
    let tau: DelayFn = Arc::new(|ind: usize, xx: &Mat, par: &[f64]| sd_tau(ind, xx, par));
    let jac = Arc::new(|xx: &Mat, par: &[f64], req: &DerivativeRequest| -> Result<Derivative> {
        match req.kind(6, 11)? {
            RequestKind::State(i) => Ok(Derivative::Matrix(sd_dfdx(xx, par, i))),
            RequestKind::Param(p) => Ok(Derivative::Vector(sd_dfdp(xx, par, p))),
            RequestKind::Mixed(i, p) => Ok(Derivative::Matrix(mixed_from_first(
                |x: &Mat, q: &[f64], i: usize| sd_dfdx(x, q, i),
                xx,
                par,
                i,
                p,
            ))),
            RequestKind::StateSecond(i, j) => {
                let v = req.v.as_ref().ok_or_else(|| Error::Request("missing direction".into()))?;
                Ok(Derivative::Complex(second_from_first(
                    |x: &Mat, q: &[f64], i: usize| sd_dfdx(x, q, i),
                    xx,
                    par,
                    i,
                    j,
                    v,
                )))
            }
        }
    });
    let tau_fd = tau.clone();
    let dtau = Arc::new(
        move |ind: usize, xx: &Mat, par: &[f64], nx: &[usize], np: &[usize]| -> Result<Derivative> {
            match (nx, np) {
                ([j], []) => {
                    if *j >= xx.ncols() {
                        return Err(Error::Request(format!(
                            "delay {} depends only on state blocks 0..{}",
                            ind,
                            xx.ncols() - 1
                        )));
                    }
                    Ok(Derivative::Vector(sd_dtau_dx(ind, xx, par, *j)))
                }
                ([], [p]) if *p >= 1 && *p <= 11 => {
                    Ok(Derivative::Scalar(sd_dtau_dp(ind, xx, par, *p)))
                }
                _ => fd_delay_jacobian(&tau_fd, ind, xx, par, nx, np),
            }
        },
    );
    let problem = assemble_problem(
        5,
        11,
        rhs,
        DelaySpec::StateDependent { count: 6, evaluator: tau },
        ProblemOptions {
            state_jacobian: Some(jac),
            delay_jacobian: Some(dtau),
            ..Default::default()
        },
    )?;
    Ok(BuiltinSystem {
        id: "sd_demo",
        summary: "five components, six nested state-dependent delays, eleven parameters",
        parameter_names: vec!["p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10", "p11"],
        problem,
    })
}

fn sd_rhs(xx: &Mat, par: &[f64]) -> Vector {
    let p = |k: usize| par[k - 1];
    let x = |r: usize, c: usize| xx[(r, c)];
    let d = p(1) + x(1, 0);
    let num = 1.0 - p(2) * x(0, 0) * x(0, 3) * x(2, 3) + p(3) * x(0, 1) * x(1, 2);
    let e = (-p(8) * x(3, 0)).exp();
    let f = (-p(1) * x(3, 0)).exp();
    Vector::from_vec(vec![
        num / d,
        p(4) * x(0, 0) / d + p(5) * x(1, 5).tanh() - 1.0,
        p(6) * (x(1, 0) - x(2, 0)) - p(7) * (x(0, 6) - x(1, 4)) * e,
        x(0, 4) * f - 0.1,
        3.0 * (x(0, 2) - x(4, 0)) - p(9),
    ])
}

fn sd_dfdx(xx: &Mat, par: &[f64], i: usize) -> Mat {
    let p = |k: usize| par[k - 1];
    let x = |r: usize, c: usize| xx[(r, c)];
    let d = p(1) + x(1, 0);
    let e = (-p(8) * x(3, 0)).exp();
    let f = (-p(1) * x(3, 0)).exp();
    let mut a = Mat::zeros(5, 5);
    match i {
        0 => {
            let num = 1.0 - p(2) * x(0, 0) * x(0, 3) * x(2, 3) + p(3) * x(0, 1) * x(1, 2);
            a[(0, 0)] = -p(2) * x(0, 3) * x(2, 3) / d;
            a[(0, 1)] = -num / (d * d);
            a[(1, 0)] = p(4) / d;
            a[(1, 1)] = -p(4) * x(0, 0) / (d * d);
            a[(2, 1)] = p(6);
            a[(2, 2)] = -p(6);
            a[(2, 3)] = p(7) * p(8) * (x(0, 6) - x(1, 4)) * e;
            a[(3, 3)] = -p(1) * x(0, 4) * f;
            a[(4, 4)] = -3.0;
        }
        1 => a[(0, 0)] = p(3) * x(1, 2) / d,
        2 => {
            a[(0, 1)] = p(3) * x(0, 1) / d;
            a[(4, 0)] = 3.0;
        }
        3 => {
            a[(0, 0)] = -p(2) * x(0, 0) * x(2, 3) / d;
            a[(0, 2)] = -p(2) * x(0, 0) * x(0, 3) / d;
        }
        4 => {
            a[(2, 1)] = p(7) * e;
            a[(3, 0)] = f;
        }
        5 => a[(1, 1)] = p(5) * sech2(x(1, 5)),
        6 => a[(2, 0)] = -p(7) * e,
        _ => {}
    }
    a
}

fn sd_dfdp(xx: &Mat, par: &[f64], k: usize) -> Vector {
    let p = |k: usize| par[k - 1];
    let x = |r: usize, c: usize| xx[(r, c)];
    let d = p(1) + x(1, 0);
    let e = (-p(8) * x(3, 0)).exp();
    let f = (-p(1) * x(3, 0)).exp();
    let mut g = Vector::zeros(5);
    match k {
        1 => {
            let num = 1.0 - p(2) * x(0, 0) * x(0, 3) * x(2, 3) + p(3) * x(0, 1) * x(1, 2);
            g[0] = -num / (d * d);
            g[1] = -p(4) * x(0, 0) / (d * d);
            g[3] = -x(0, 4) * x(3, 0) * f;
        }
        2 => g[0] = -x(0, 0) * x(0, 3) * x(2, 3) / d,
        3 => g[0] = x(0, 1) * x(1, 2) / d,
        4 => g[1] = x(0, 0) / d,
        5 => g[1] = x(1, 5).tanh(),
        6 => g[2] = x(1, 0) - x(2, 0),
        7 => g[2] = -(x(0, 6) - x(1, 4)) * e,
        8 => g[2] = p(7) * (x(0, 6) - x(1, 4)) * x(3, 0) * e,
        9 => g[4] = -1.0,
        _ => {}
    }
    g
}

fn sd_tau(ind: usize, xx: &Mat, par: &[f64]) -> f64 {
    match ind {
        1 => par[9],
        2 => par[10],
        3 => 2.0 + par[4] * par[9] * xx[(1, 0)] * xx[(1, 1)],
        4 => 1.0 - 1.0 / (1.0 + xx[(0, 0)] * xx[(1, 2)]),
        5 => xx[(3, 0)],
        _ => xx[(4, 0)],
    }
}

fn sd_dtau_dx(ind: usize, xx: &Mat, par: &[f64], j: usize) -> Vector {
    let mut g = Vector::zeros(5);
    match (ind, j) {
        (3, 0) => g[1] = par[4] * par[9] * xx[(1, 1)],
        (3, 1) => g[1] = par[4] * par[9] * xx[(1, 0)],
        (4, 0) | (4, 2) => {
            let q = 1.0 + xx[(0, 0)] * xx[(1, 2)];
            if j == 0 {
                g[0] = xx[(1, 2)] / (q * q);
            } else {
                g[1] = xx[(0, 0)] / (q * q);
            }
        }
        (5, 0) => g[3] = 1.0,
        (6, 0) => g[4] = 1.0,
        _ => {}
    }
    g
}

fn sd_dtau_dp(ind: usize, xx: &Mat, par: &[f64], p: usize) -> f64 {
    match (ind, p) {
        (1, 10) | (2, 11) => 1.0,
        (3, 5) => par[9] * xx[(1, 0)] * xx[(1, 1)],
        (3, 10) => par[4] * xx[(1, 0)] * xx[(1, 1)],
        _ => 0.0,
    }
}

// ---------------------------------------------------------------- hom_neural

fn sigmoid(y: f64) -> f64 {
    1.0 / (1.0 + (-4.0 * y).exp())
}

/// Neural activity model; parameters [q11, q12, q21, e1, e2, τ].
pub fn hom_neural() -> Result<BuiltinSystem> {
    let rhs = Arc::new(|xx: &Mat, par: &[f64]| {
        let s = sigmoid(xx[(0, 1)]);
        Vector::from_vec(vec![
            -xx[(0, 0)] + par[0] * s - par[1] * xx[(1, 1)] + par[3],
            -xx[(1, 0)] + par[2] * s + par[4],
        ])
    });
    let jac = Arc::new(|xx: &Mat, par: &[f64], req: &DerivativeRequest| -> Result<Derivative> {
        let (q11, q12, q21) = (par[0], par[1], par[2]);
        let s = sigmoid(xx[(0, 1)]);
        let ds = 4.0 * s * (1.0 - s);
        let dds = 4.0 * ds * (1.0 - 2.0 * s);
        let mut a = Mat::zeros(2, 2);
        match req.kind(1, 6)? {
            RequestKind::State(0) => {
                a[(0, 0)] = -1.0;
                a[(1, 1)] = -1.0;
                Ok(Derivative::Matrix(a))
            }
            RequestKind::State(_) => {
                a[(0, 0)] = q11 * ds;
                a[(0, 1)] = -q12;
                a[(1, 0)] = q21 * ds;
                Ok(Derivative::Matrix(a))
            }
            RequestKind::Param(p) => {
                let v = match p {
                    1 => vec![s, 0.0],
                    2 => vec![-xx[(1, 1)], 0.0],
                    3 => vec![0.0, s],
                    4 => vec![1.0, 0.0],
                    5 => vec![0.0, 1.0],
                    _ => vec![0.0, 0.0],
                };
                Ok(Derivative::Vector(Vector::from_vec(v)))
            }
            RequestKind::Mixed(i, p) => {
                match (i, p) {
                    (1, 1) => a[(0, 0)] = ds,
                    (1, 2) => a[(0, 1)] = -1.0,
                    (1, 3) => a[(1, 0)] = ds,
                    _ => {}
                }
                Ok(Derivative::Matrix(a))
            }
            RequestKind::StateSecond(i, j) => {
                let v = req.v.as_ref().ok_or_else(|| Error::Request("missing direction".into()))?;
                let mut out = CMat::zeros(2, 2);
                if i == 1 && j == 1 {
                    out[(0, 0)] = v[0] * q11 * dds;
                    out[(1, 0)] = v[0] * q21 * dds;
                }
                Ok(Derivative::Complex(out))
            }
        }
    });
    let problem = assemble_problem(
        2,
        6,
        rhs,
        DelaySpec::ConstantIndices(vec![6]),
        ProblemOptions { state_jacobian: Some(jac), ..Default::default() },
    )?;
    Ok(BuiltinSystem {
        id: "hom_neural",
        summary: "neural activity model with one delay, homoclinic orbits in (q12, e1)",
        parameter_names: vec!["q11", "q12", "q21", "e1", "e2", "tau"],
        problem,
    })
}

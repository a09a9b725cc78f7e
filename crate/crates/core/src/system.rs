//! Problem definition: right-hand side, delays, their derivatives and
//! optional extra conditions. Parameter indices are 1-based in every public
//! signature; state blocks are numbered 0 (present) to m.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, Mat, Vector};
use crate::model::Point;

/// Right-hand side f(x(t), x(t-τ1), …, x(t-τm), η). States are the columns of an n×(m+1) matrix.
pub type RhsFn = Arc<dyn Fn(&Mat, &[f64]) -> Vector + Send + Sync>;
/// State-dependent delay τ_ind (1-based) from an n×ind state matrix.
pub type DelayFn = Arc<dyn Fn(usize, &Mat, &[f64]) -> f64 + Send + Sync>;
pub type StateJacobianFn =
    Arc<dyn Fn(&Mat, &[f64], &DerivativeRequest) -> Result<Derivative> + Send + Sync>;
pub type DelayJacobianFn =
    Arc<dyn Fn(usize, &Mat, &[f64], &[usize], &[usize]) -> Result<Derivative> + Send + Sync>;
pub type ExtraConditionFn = Arc<dyn Fn(&Point) -> Result<(Vec<f64>, Vec<Point>)> + Send + Sync>;

/// Where the delays come from.
#[derive(Clone)]
pub enum DelaySpec {
    /// Constant delays stored in the parameter vector (1-based positions).
    ConstantIndices(Vec<usize>),
    /// Nested state-dependent delays τ_1..τ_count.
    StateDependent { count: usize, evaluator: DelayFn },
}

impl DelaySpec {
    pub fn count(&self) -> usize {
        match self {
            DelaySpec::ConstantIndices(ix) => ix.len(),
            DelaySpec::StateDependent { count, .. } => *count,
        }
    }
}

impl fmt::Debug for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelaySpec::ConstantIndices(ix) => write!(f, "ConstantIndices({:?})", ix),
            DelaySpec::StateDependent { count, .. } => write!(f, "StateDependent({})", count),
        }
    }
}

/// A derivative request: state blocks `nx`, parameter indices `np` (1-based) and
/// an optional direction `v` for second derivatives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DerivativeRequest {
    pub nx: Vec<usize>,
    pub np: Vec<usize>,
    pub v: Option<CVec>,
}

/// Legal request shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    /// ∂f/∂x^i, n×n.
    State(usize),
    /// ∂f/∂η_p, n-vector.
    Param(usize),
    /// ∂²f/∂x^i∂η_p, n×n.
    Mixed(usize, usize),
    /// ∂/∂x^j (A_i v), n×n complex.
    StateSecond(usize, usize),
}

impl DerivativeRequest {
    pub fn state(i: usize) -> Self {
        DerivativeRequest { nx: vec![i], np: vec![], v: None }
    }
    pub fn param(p: usize) -> Self {
        DerivativeRequest { nx: vec![], np: vec![p], v: None }
    }
    pub fn mixed(i: usize, p: usize) -> Self {
        DerivativeRequest { nx: vec![i], np: vec![p], v: None }
    }
    pub fn second(i: usize, j: usize, v: CVec) -> Self {
        DerivativeRequest { nx: vec![i, j], np: vec![], v: Some(v) }
    }

    /// Classify the request, checking indices against m delays and p parameters.
    pub fn kind(&self, m: usize, p: usize) -> Result<RequestKind> {
        for &i in &self.nx {
            if i > m {
                return Err(Error::Request(format!("state block {} exceeds m={}", i, m)));
            }
        }
        for &k in &self.np {
            if k == 0 || k > p {
                return Err(Error::Request(format!("parameter index {} outside 1..={}", k, p)));
            }
        }
        match (self.nx.len(), self.np.len(), self.v.is_some()) {
            (1, 0, false) => Ok(RequestKind::State(self.nx[0])),
            (0, 1, false) => Ok(RequestKind::Param(self.np[0])),
            (1, 1, false) => Ok(RequestKind::Mixed(self.nx[0], self.np[0])),
            (2, 0, true) => Ok(RequestKind::StateSecond(self.nx[0], self.nx[1])),
            (a, b, c) => Err(Error::Request(format!(
                "unsupported combination |nx|={}, |np|={}, v {}",
                a,
                b,
                if c { "present" } else { "absent" }
            ))),
        }
    }
}

/// Result of a derivative request.
#[derive(Debug, Clone, PartialEq)]
pub enum Derivative {
    Scalar(f64),
    Vector(Vector),
    Matrix(Mat),
    Complex(CMat),
}

impl Derivative {
    pub fn into_matrix(self) -> Result<Mat> {
        match self {
            Derivative::Matrix(m) => Ok(m),
            other => Err(Error::Request(format!("expected a real matrix, got {:?}", other))),
        }
    }
    pub fn into_vector(self) -> Result<Vector> {
        match self {
            Derivative::Vector(v) => Ok(v),
            other => Err(Error::Request(format!("expected a vector, got {:?}", other))),
        }
    }
    pub fn into_complex(self) -> Result<CMat> {
        match self {
            Derivative::Complex(m) => Ok(m),
            Derivative::Matrix(m) => Ok(m.map(|x| Complex64::new(x, 0.0))),
            other => Err(Error::Request(format!("expected a complex matrix, got {:?}", other))),
        }
    }
    pub fn into_scalar(self) -> Result<f64> {
        match self {
            Derivative::Scalar(s) => Ok(s),
            other => Err(Error::Request(format!("expected a scalar, got {:?}", other))),
        }
    }
}

/// Immutable bundle of callbacks defining a DDE.
#[derive(Clone)]
pub struct ProblemFunctions {
    pub dim: usize,
    pub par_count: usize,
    pub rhs: RhsFn,
    pub delays: DelaySpec,
    pub state_jacobian: StateJacobianFn,
    pub delay_jacobian: DelayJacobianFn,
    pub extra_conditions: ExtraConditionFn,
    pub vectorized: bool,
    pub state_dependent: bool,
}

impl fmt::Debug for ProblemFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemFunctions")
            .field("dim", &self.dim)
            .field("par_count", &self.par_count)
            .field("delays", &self.delays)
            .field("vectorized", &self.vectorized)
            .field("state_dependent", &self.state_dependent)
            .finish()
    }
}

/// Optional parts of a problem definition.
#[derive(Clone, Default)]
pub struct ProblemOptions {
    pub state_jacobian: Option<StateJacobianFn>,
    pub delay_jacobian: Option<DelayJacobianFn>,
    pub extra_conditions: Option<ExtraConditionFn>,
    pub vectorized: bool,
}

/// Build a problem, substituting finite-difference fallbacks for missing Jacobians.
pub fn assemble_problem(
    dim: usize,
    par_count: usize,
    rhs: RhsFn,
    delays: DelaySpec,
    options: ProblemOptions,
) -> Result<ProblemFunctions> {
    if dim == 0 {
        return Err(Error::Config("system dimension must be positive".into()));
    }
    if let DelaySpec::ConstantIndices(ix) = &delays {
        for &i in ix {
            if i == 0 || i > par_count {
                return Err(Error::Config(format!(
                    "delay parameter index {} outside 1..={}",
                    i, par_count
                )));
            }
        }
    }
    let state_dependent = matches!(delays, DelaySpec::StateDependent { .. });
    let m = delays.count();
    let state_jacobian = match options.state_jacobian {
        Some(j) => j,
        None => {
            let rhs = rhs.clone();
            Arc::new(move |xx: &Mat, par: &[f64], req: &DerivativeRequest| {
                fd_state_jacobian(&rhs, m, xx, par, req)
            }) as StateJacobianFn
        }
    };
    let delay_jacobian = match (options.delay_jacobian, &delays) {
        (Some(j), _) => j,
        (None, DelaySpec::StateDependent { evaluator, .. }) => {
            let tau = evaluator.clone();
            Arc::new(move |ind: usize, xx: &Mat, par: &[f64], nx: &[usize], np: &[usize]| {
                fd_delay_jacobian(&tau, ind, xx, par, nx, np)
            }) as DelayJacobianFn
        }
        (None, DelaySpec::ConstantIndices(_)) => Arc::new(
            |_: usize, _: &Mat, _: &[f64], _: &[usize], _: &[usize]| -> Result<Derivative> {
                Err(Error::Usage("delay derivatives requested for constant delays".into()))
            },
        ) as DelayJacobianFn,
    };
    let extra_conditions = options.extra_conditions.unwrap_or_else(|| {
        Arc::new(|_: &Point| Ok((Vec::new(), Vec::new()))) as ExtraConditionFn
    });
    Ok(ProblemFunctions {
        dim,
        par_count,
        rhs,
        delays,
        state_jacobian,
        delay_jacobian,
        extra_conditions,
        vectorized: options.vectorized,
        state_dependent,
    })
}

fn fd_step(x: f64, base: f64) -> f64 {
    base * (1.0 + x.abs())
}

const FIRST_STEP: f64 = 1e-6;
const SECOND_STEP: f64 = 1e-3;

/// Mixed second difference of a scalar-or-vector valued map g(a, b) at (0, 0)
/// with Richardson extrapolation in the common step scale.
fn mixed_difference<F>(g: F, h: f64, k: f64) -> Vector
where
    F: Fn(f64, f64) -> Vector,
{
    let stencil = |h: f64, k: f64| -> Vector {
        (g(h, k) - g(h, -k) - g(-h, k) + g(-h, -k)) / (4.0 * h * k)
    };
    let d1 = stencil(h, k);
    let d2 = stencil(2.0 * h, 2.0 * k);
    (d1 * 4.0 - d2) / 3.0
}

/// Finite-difference derivatives of the right-hand side (fallback for a
/// missing analytic Jacobian).
pub fn fd_state_jacobian(
    rhs: &RhsFn,
    m: usize,
    xx: &Mat,
    par: &[f64],
    req: &DerivativeRequest,
) -> Result<Derivative> {
    let n = xx.nrows();
    match req.kind(m, par.len())? {
        RequestKind::State(i) => {
            let mut out = Mat::zeros(n, n);
            let mut x = xx.clone();
            for q in 0..n {
                let x0 = xx[(q, i)];
                let h = fd_step(x0, FIRST_STEP);
                x[(q, i)] = x0 + h;
                let fp = rhs(&x, par);
                x[(q, i)] = x0 - h;
                let fm = rhs(&x, par);
                x[(q, i)] = x0;
                out.set_column(q, &((fp - fm) / (2.0 * h)));
            }
            Ok(Derivative::Matrix(out))
        }
        RequestKind::Param(p) => {
            let mut pp = par.to_vec();
            let p0 = par[p - 1];
            let h = fd_step(p0, FIRST_STEP);
            pp[p - 1] = p0 + h;
            let fp = rhs(xx, &pp);
            pp[p - 1] = p0 - h;
            let fm = rhs(xx, &pp);
            Ok(Derivative::Vector((fp - fm) / (2.0 * h)))
        }
        RequestKind::Mixed(i, p) => {
            let mut out = Mat::zeros(n, n);
            let p0 = par[p - 1];
            let k = fd_step(p0, SECOND_STEP);
            for q in 0..n {
                let x0 = xx[(q, i)];
                let h = fd_step(x0, SECOND_STEP);
                let col = mixed_difference(
                    |a, b| {
                        let mut x = xx.clone();
                        x[(q, i)] += a;
                        let mut pp = par.to_vec();
                        pp[p - 1] += b;
                        rhs(&x, &pp)
                    },
                    h,
                    k,
                );
                out.set_column(q, &col);
            }
            Ok(Derivative::Matrix(out))
        }
        RequestKind::StateSecond(i, j) => {
            let v = req.v.as_ref().ok_or_else(|| Error::Request("missing direction".into()))?;
            if v.len() != n {
                return Err(Error::Request(format!("direction length {} != {}", v.len(), n)));
            }
            let vr = v.map(|z| z.re);
            let vi = v.map(|z| z.im);
            let re = second_real(rhs, xx, par, i, j, &vr);
            let im = second_real(rhs, xx, par, i, j, &vi);
            Ok(Derivative::Complex(CMat::from_fn(n, n, |r, c| {
                Complex64::new(re[(r, c)], im[(r, c)])
            })))
        }
    }
}

/// ∂/∂x^j (A_i w) for a real direction w by mixed differences of f.
fn second_real(rhs: &RhsFn, xx: &Mat, par: &[f64], i: usize, j: usize, w: &Vector) -> Mat {
    let n = xx.nrows();
    let nw = w.norm();
    let mut out = Mat::zeros(n, n);
    if nw == 0.0 {
        return out;
    }
    let u = w / nw;
    let scale_i = xx.column(i).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let k = fd_step(scale_i, SECOND_STEP);
    for q in 0..n {
        let h = fd_step(xx[(q, j)], SECOND_STEP);
        let col = mixed_difference(
            |a, b| {
                let mut x = xx.clone();
                x[(q, j)] += a;
                for r in 0..n {
                    x[(r, i)] += b * u[r];
                }
                rhs(&x, par)
            },
            h,
            k,
        );
        out.set_column(q, &(col * nw));
    }
    out
}

/// Finite-difference derivatives of a state-dependent delay.
pub fn fd_delay_jacobian(
    tau: &DelayFn,
    ind: usize,
    xx: &Mat,
    par: &[f64],
    nx: &[usize],
    np: &[usize],
) -> Result<Derivative> {
    let n = xx.nrows();
    let cols = xx.ncols();
    for &j in nx {
        if j >= cols {
            return Err(Error::Request(format!(
                "delay {} depends only on state blocks 0..{}, got {}",
                ind,
                cols - 1,
                j
            )));
        }
    }
    for &p in np {
        if p == 0 || p > par.len() {
            return Err(Error::Request(format!("parameter index {} outside 1..={}", p, par.len())));
        }
    }
    let eval = |x: &Mat, pp: &[f64]| Vector::from_element(1, tau(ind, x, pp));
    match (nx.len(), np.len()) {
        (1, 0) => {
            let j = nx[0];
            let mut out = Vector::zeros(n);
            let mut x = xx.clone();
            for q in 0..n {
                let x0 = xx[(q, j)];
                let h = fd_step(x0, FIRST_STEP);
                x[(q, j)] = x0 + h;
                let fp = tau(ind, &x, par);
                x[(q, j)] = x0 - h;
                let fm = tau(ind, &x, par);
                x[(q, j)] = x0;
                out[q] = (fp - fm) / (2.0 * h);
            }
            Ok(Derivative::Vector(out))
        }
        (0, 1) => {
            let p = np[0];
            let mut pp = par.to_vec();
            let p0 = par[p - 1];
            let h = fd_step(p0, FIRST_STEP);
            pp[p - 1] = p0 + h;
            let fp = tau(ind, xx, &pp);
            pp[p - 1] = p0 - h;
            let fm = tau(ind, xx, &pp);
            Ok(Derivative::Scalar((fp - fm) / (2.0 * h)))
        }
        (1, 1) => {
            let (j, p) = (nx[0], np[0]);
            let k = fd_step(par[p - 1], SECOND_STEP);
            let mut out = Vector::zeros(n);
            for q in 0..n {
                let h = fd_step(xx[(q, j)], SECOND_STEP);
                let d = mixed_difference(
                    |a, b| {
                        let mut x = xx.clone();
                        x[(q, j)] += a;
                        let mut pp = par.to_vec();
                        pp[p - 1] += b;
                        eval(&x, &pp)
                    },
                    h,
                    k,
                );
                out[q] = d[0];
            }
            Ok(Derivative::Vector(out))
        }
        (2, 0) => {
            let (j, l) = (nx[0], nx[1]);
            let mut out = Mat::zeros(n, n);
            for q in 0..n {
                for r in 0..n {
                    let h = fd_step(xx[(q, j)], SECOND_STEP);
                    let k = fd_step(xx[(r, l)], SECOND_STEP);
                    let d = mixed_difference(
                        |a, b| {
                            let mut x = xx.clone();
                            x[(q, j)] += a;
                            x[(r, l)] += b;
                            eval(&x, par)
                        },
                        h,
                        k,
                    );
                    out[(q, r)] = d[0];
                }
            }
            Ok(Derivative::Matrix(out))
        }
        (a, b) => Err(Error::Request(format!(
            "unsupported delay derivative combination |nx|={}, |np|={}",
            a, b
        ))),
    }
}

/// Second derivative ∂/∂x^j (A_i v) from a first-derivative routine by central
/// differences of the products A_i(x) v.
pub fn second_from_first<F>(first: F, xx: &Mat, par: &[f64], i: usize, j: usize, v: &CVec) -> CMat
where
    F: Fn(&Mat, &[f64], usize) -> Mat,
{
    let n = xx.nrows();
    let mut out = CMat::zeros(n, n);
    let mut x = xx.clone();
    for q in 0..n {
        let x0 = xx[(q, j)];
        let h = fd_step(x0, FIRST_STEP);
        x[(q, j)] = x0 + h;
        let ap = first(&x, par, i).map(|a| Complex64::new(a, 0.0)) * v;
        x[(q, j)] = x0 - h;
        let am = first(&x, par, i).map(|a| Complex64::new(a, 0.0)) * v;
        x[(q, j)] = x0;
        out.set_column(q, &((ap - am) / Complex64::new(2.0 * h, 0.0)));
    }
    out
}

/// Mixed derivative ∂A_i/∂η_p from a first-derivative routine.
pub fn mixed_from_first<F>(first: F, xx: &Mat, par: &[f64], i: usize, p: usize) -> Mat
where
    F: Fn(&Mat, &[f64], usize) -> Mat,
{
    let mut pp = par.to_vec();
    let p0 = par[p - 1];
    let h = fd_step(p0, FIRST_STEP);
    pp[p - 1] = p0 + h;
    let ap = first(xx, &pp, i);
    pp[p - 1] = p0 - h;
    let am = first(xx, &pp, i);
    (ap - am) / (2.0 * h)
}

impl ProblemFunctions {
    pub fn delay_count(&self) -> usize {
        self.delays.count()
    }

    pub fn eval_rhs(&self, xx: &Mat, par: &[f64]) -> Vector {
        (self.rhs)(xx, par)
    }

    /// A_i = ∂f/∂x^i.
    pub fn dfdx(&self, xx: &Mat, par: &[f64], i: usize) -> Result<Mat> {
        (self.state_jacobian)(xx, par, &DerivativeRequest::state(i))?.into_matrix()
    }

    /// ∂f/∂η_p (1-based p).
    pub fn dfdp(&self, xx: &Mat, par: &[f64], p: usize) -> Result<Vector> {
        (self.state_jacobian)(xx, par, &DerivativeRequest::param(p))?.into_vector()
    }

    /// ∂A_i/∂η_p.
    pub fn dfdxdp(&self, xx: &Mat, par: &[f64], i: usize, p: usize) -> Result<Mat> {
        (self.state_jacobian)(xx, par, &DerivativeRequest::mixed(i, p))?.into_matrix()
    }

    /// ∂/∂x^j (A_i v).
    pub fn dfdxdx_v(&self, xx: &Mat, par: &[f64], i: usize, j: usize, v: &CVec) -> Result<CMat> {
        (self.state_jacobian)(xx, par, &DerivativeRequest::second(i, j, v.clone()))?.into_complex()
    }

    /// τ_ind (1-based) for state-dependent problems.
    pub fn tau(&self, ind: usize, xx: &Mat, par: &[f64]) -> Result<f64> {
        match &self.delays {
            DelaySpec::StateDependent { evaluator, .. } => Ok(evaluator(ind, xx, par)),
            DelaySpec::ConstantIndices(ix) => Ok(par[ix[ind - 1] - 1]),
        }
    }

    /// ∂τ_ind/∂x^j as an n-vector; zero for constant delays.
    pub fn dtau_dx(&self, ind: usize, xx: &Mat, par: &[f64], j: usize) -> Result<Vector> {
        if !self.state_dependent {
            return Ok(Vector::zeros(xx.nrows()));
        }
        (self.delay_jacobian)(ind, xx, par, &[j], &[])?.into_vector()
    }

    /// ∂τ_ind/∂η_p.
    pub fn dtau_dp(&self, ind: usize, xx: &Mat, par: &[f64], p: usize) -> Result<f64> {
        match &self.delays {
            DelaySpec::ConstantIndices(ix) => Ok(if ix[ind - 1] == p { 1.0 } else { 0.0 }),
            DelaySpec::StateDependent { .. } => {
                (self.delay_jacobian)(ind, xx, par, &[], &[p])?.into_scalar()
            }
        }
    }

    /// Evaluate all delays and the full state matrix [x(t), x(t-τ1), …]. The
    /// accessor maps (delay number, delay value) to the lagged state; it is
    /// called in the order 1..m, each call after τ_j is known.
    pub fn eval_delay_values(
        &self,
        present: &Vector,
        par: &[f64],
        history: &mut dyn FnMut(usize, f64) -> Vector,
    ) -> Result<(Vec<f64>, Mat)> {
        let n = present.len();
        let m = self.delay_count();
        let mut xx = Mat::zeros(n, m + 1);
        xx.set_column(0, present);
        let mut taus = Vec::with_capacity(m);
        match &self.delays {
            DelaySpec::ConstantIndices(ix) => {
                for (j, &p) in ix.iter().enumerate() {
                    let t = par[p - 1];
                    taus.push(t);
                    xx.set_column(j + 1, &history(j + 1, t));
                }
            }
            DelaySpec::StateDependent { evaluator, .. } => {
                for j in 1..=m {
                    let t = evaluator(j, &xx.columns(0, j).into_owned(), par);
                    taus.push(t);
                    xx.set_column(j, &history(j, t));
                }
            }
        }
        Ok((taus, xx))
    }

    /// Delay values at a steady state x*.
    pub fn steady_delays(&self, x: &Vector, par: &[f64]) -> Result<Vec<f64>> {
        let (t, _) = self.eval_delay_values(x, par, &mut |_, _| x.clone())?;
        Ok(t)
    }

    /// State matrix with every column equal to x*.
    pub fn steady_states(&self, x: &Vector) -> Mat {
        let m = self.delay_count();
        Mat::from_fn(x.len(), m + 1, |r, _| x[r])
    }

    pub fn eval_extra_conditions(&self, point: &Point) -> Result<(Vec<f64>, Vec<Point>)> {
        let (r, g) = (self.extra_conditions)(point)?;
        if r.len() != g.len() {
            return Err(Error::Condition(format!(
                "{} residuals but {} gradients",
                r.len(),
                g.len()
            )));
        }
        Ok((r, g))
    }
}

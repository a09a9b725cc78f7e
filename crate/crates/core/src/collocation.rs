//! Piecewise-polynomial collocation for periodic orbits: profile
//! interpolation, the periodic-orbit determining system, mesh adaptation,
//! Floquet multipliers and delay evaluation along orbits.

use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::linalg::{self, CMat, CVec, Mat, Vector};
use crate::model::{
    mesh_from_intervals, FlatLayout, PeriodicOrbit, PiecewiseProfile, Point,
    PointKind, Stability, StabilityMethod,
};
use crate::poly;
use crate::system::{DelaySpec, ProblemFunctions};

pub use crate::poly::gauss_legendre_nodes;

/// Interval points, degree and collocation parameters of one orbit mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    pub points: Vec<f64>,
    pub degree: usize,
    pub params: Vec<f64>,
}

impl CollocationGrid {
    /// Empty `params` selects the Gauss-Legendre points.
    pub fn new(profile: &PiecewiseProfile, params: &[f64]) -> Result<CollocationGrid> {
        let d = profile.degree();
        let params = if params.is_empty() {
            gauss_legendre_nodes::<f64>(d)?
        } else {
            if params.len() != d {
                return Err(Error::Config(format!(
                    "{} collocation parameters for degree {}",
                    params.len(),
                    d
                )));
            }
            if params.windows(2).any(|w| w[1] <= w[0]) || params[0] < 0.0 || params[d - 1] > 1.0 {
                return Err(Error::Config("collocation parameters must increase within [0,1]".into()));
            }
            params.to_vec()
        };
        Ok(CollocationGrid { points: profile.interval_points(), degree: d, params })
    }

    /// (interval, collocation point) pairs in order.
    pub fn collocation_points(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity((self.points.len() - 1) * self.degree);
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            for &c in &self.params {
                out.push((i, a + c * (b - a)));
            }
        }
        out
    }
}

/// Profile value at t (taken modulo [0,1]).
pub fn interp_profile(profile: &PiecewiseProfile, t: f64) -> Vector {
    profile.eval_wrapped(t).0
}

/// Profile derivative at t (taken modulo [0,1]); at an interior interval point
/// the right derivative is returned.
pub fn interp_profile_derivative(profile: &PiecewiseProfile, t: f64) -> Vector {
    profile.eval_wrapped(t).1
}

/// State at a (lagged) argument with its linear dependence on the unknowns.
#[derive(Debug, Clone)]
pub(crate) struct LagValue {
    pub x: Vector,
    /// du/ds at the argument.
    pub dx: Vector,
    /// n × ncols: ∂x/∂unknowns at fixed argument.
    pub form: Mat,
    /// n × ncols: ∂(du/ds)/∂unknowns; only filled for the present state.
    pub dform: Option<Mat>,
}

/// Column bookkeeping for collocation assembly.
pub(crate) struct ColumnMap<'a> {
    pub ncols: usize,
    /// Column of the period, `None` if frozen.
    pub period: Option<usize>,
    /// 1-based parameter indices that own columns (column = index − 1).
    pub params: &'a [usize],
}

/// Basis of a profile on interval `i` evaluated at t, as a LagValue over
/// profile columns starting at flat offset `offset` + `col0`·n.
pub(crate) fn profile_lag(
    profile: &PiecewiseProfile,
    points: &[f64],
    i: usize,
    t: f64,
    offset: usize,
    ncols: usize,
    with_dform: bool,
) -> LagValue {
    let n = profile.dim();
    let d = profile.degree();
    let (w, dw) = profile.basis(i, t, points);
    let mut form = Mat::zeros(n, ncols);
    let mut dform = if with_dform { Some(Mat::zeros(n, ncols)) } else { None };
    let mut x = Vector::zeros(n);
    let mut dx = Vector::zeros(n);
    for j in 0..=d {
        let col = i * d + j;
        let u = profile.values().column(col);
        x.axpy(w[j], &u, 1.0);
        dx.axpy(dw[j], &u, 1.0);
        for r in 0..n {
            form[(r, offset + col * n + r)] = w[j];
            if let Some(df) = dform.as_mut() {
                df[(r, offset + col * n + r)] = dw[j];
            }
        }
    }
    LagValue { x, dx, form, dform }
}

/// Lagged states along the nested delay chain at collocation time c, with
/// their linear dependence on the unknowns.
pub(crate) struct LagChain {
    /// n × (upto+1) states [x(c), x(c − τ_1/T), …].
    pub xx: Mat,
    pub forms: Vec<Mat>,
    pub taus: Vec<f64>,
    /// ∂τ_k/∂unknowns.
    pub tau_forms: Vec<Vector>,
}

pub(crate) fn lag_chain(
    problem: &ProblemFunctions,
    par: &[f64],
    period: f64,
    c: f64,
    present: &LagValue,
    resolve: &mut dyn FnMut(f64) -> Result<LagValue>,
    cols: &ColumnMap,
    upto: usize,
) -> Result<LagChain> {
    let n = problem.dim;
    let mut xx = Mat::zeros(n, upto + 1);
    xx.set_column(0, &present.x);
    let mut forms: Vec<Mat> = vec![present.form.clone()];
    let mut taus = Vec::with_capacity(upto);
    let mut tau_forms = Vec::with_capacity(upto);
    for k in 1..=upto {
        let head = xx.columns(0, k).into_owned();
        let tau = problem.tau(k, &head, par)?;
        let mut tf = Vector::zeros(cols.ncols);
        match &problem.delays {
            DelaySpec::ConstantIndices(ix) => {
                if cols.params.contains(&ix[k - 1]) {
                    tf[ix[k - 1] - 1] = 1.0;
                }
            }
            DelaySpec::StateDependent { .. } => {
                for (l, f) in forms.iter().enumerate() {
                    let b = problem.dtau_dx(k, &head, par, l)?;
                    tf += f.tr_mul(&b);
                }
                for &p in cols.params {
                    tf[p - 1] += problem.dtau_dp(k, &head, par, p)?;
                }
            }
        }
        let lag = resolve(c - tau / period)?;
        let mut ds = &tf * (-1.0 / period);
        if let Some(pc) = cols.period {
            ds[pc] += tau / (period * period);
        }
        let form = &lag.form + &lag.dx * ds.transpose();
        xx.set_column(k, &lag.x);
        forms.push(form);
        taus.push(tau);
        tau_forms.push(tf);
    }
    Ok(LagChain { xx, forms, taus, tau_forms })
}

/// Residual and Jacobian of u'(c) − T f(u(c), u(c − τ_1/T), …, η) at one
/// collocation point, including the chain through state-dependent delays.
pub(crate) fn collocation_equation(
    problem: &ProblemFunctions,
    par: &[f64],
    period: f64,
    c: f64,
    present: LagValue,
    resolve: &mut dyn FnMut(f64) -> Result<LagValue>,
    cols: &ColumnMap,
) -> Result<(Vector, Mat)> {
    let n = problem.dim;
    let chain = lag_chain(problem, par, period, c, &present, resolve, cols, problem.delay_count())?;
    let xx = &chain.xx;
    let f = problem.eval_rhs(xx, par);
    let residual = &present.dx - &f * period;
    let mut jac = present.dform.expect("present derivative form");
    for (k, form) in chain.forms.iter().enumerate() {
        let a = problem.dfdx(xx, par, k)?;
        jac -= (a * form) * period;
    }
    if let Some(pc) = cols.period {
        for r in 0..n {
            jac[(r, pc)] -= f[r];
        }
    }
    for &p in cols.params {
        let dp = problem.dfdp(xx, par, p)?;
        for r in 0..n {
            jac[(r, p - 1)] -= period * dp[r];
        }
    }
    Ok((residual, jac))
}

/// Residual and Jacobian of the integral phase condition
/// ∫ u̇_ref · (u − u_ref) ds over the mesh of `profile` (Gauss rule with d
/// nodes per interval). Jacobian columns are profile columns at `offset`.
pub(crate) fn phase_condition(
    profile: &PiecewiseProfile,
    reference: &PiecewiseProfile,
    offset: usize,
    ncols: usize,
) -> Result<(f64, Vector)> {
    let n = profile.dim();
    let d = profile.degree();
    let points = profile.interval_points();
    let (nodes, weights) = poly::gauss_legendre_rule::<f64>(d)?;
    let mut res = 0.0;
    let mut row = Vector::zeros(ncols);
    for i in 0..points.len() - 1 {
        let (a, b) = (points[i], points[i + 1]);
        for (g, wg) in nodes.iter().zip(&weights) {
            let t = a + g * (b - a);
            let q = wg * (b - a);
            let (uref, duref) = reference.eval_clamped(t);
            let (w, _) = profile.basis(i, t, &points);
            let mut u = Vector::zeros(n);
            for j in 0..=d {
                let col = i * d + j;
                u.axpy(w[j], &profile.values().column(col), 1.0);
                for r in 0..n {
                    row[offset + col * n + r] += q * w[j] * duref[r];
                }
            }
            res += q * duref.dot(&(u - uref));
        }
    }
    Ok((res, row))
}

/// Determining system of a periodic orbit: collocation equations, periodicity
/// and (optionally) the phase condition. Columns follow the flat layout of the
/// point; only parameter columns listed in `free` are filled.
pub fn psol_system(
    problem: &ProblemFunctions,
    point: &PeriodicOrbit,
    free: &[usize],
    phase_ref: Option<&PiecewiseProfile>,
    collocation_parameters: &[f64],
    phase: bool,
) -> Result<(Vector, Mat)> {
    let wrapped = Point::Psol(point.clone());
    let layout = FlatLayout::of(&wrapped);
    let prof = &point.profile;
    let n = prof.dim();
    let grid = CollocationGrid::new(prof, collocation_parameters)?;
    let cpts = grid.collocation_points();
    let rows = n * cpts.len() + n + usize::from(phase);
    let ncols = layout.len;
    let mut res = Vector::zeros(rows);
    let mut jac = Mat::zeros(rows, ncols);
    let cols = ColumnMap { ncols, period: Some(layout.period), params: free };
    let points = &grid.points;
    for (k, &(i, c)) in cpts.iter().enumerate() {
        let present = profile_lag(prof, points, i, c, layout.profile, ncols, true);
        let mut resolve = |s: f64| -> Result<LagValue> {
            let t = crate::model::wrap_unit(s);
            let j = prof.locate(t, points);
            Ok(profile_lag(prof, points, j, t, layout.profile, ncols, false))
        };
        let (r, j) = collocation_equation(
            problem,
            &point.parameter,
            point.period,
            c,
            present,
            &mut resolve,
            &cols,
        )?;
        res.rows_mut(k * n, n).copy_from(&r);
        jac.view_mut((k * n, 0), (n, ncols)).copy_from(&j);
    }
    let base = n * cpts.len();
    let last = prof.values().ncols() - 1;
    for r in 0..n {
        res[base + r] = prof.values()[(r, 0)] - prof.values()[(r, last)];
        jac[(base + r, layout.prof(0, r))] = 1.0;
        jac[(base + r, layout.prof(last, r))] = -1.0;
    }
    if phase {
        let reference = phase_ref.unwrap_or(prof);
        let (pr, prow) = phase_condition(prof, reference, layout.profile, ncols)?;
        res[base + n] = pr;
        jac.set_row(base + n, &prow.transpose());
    }
    Ok((res, jac))
}

/// Adapted interval points equidistributing |u^{(d+1)}|^{1/(d+1)}, estimated
/// from differences of the piecewise constant d-th derivatives.
pub fn adapted_interval_points(profile: &PiecewiseProfile, intervals: usize, periodic: bool) -> Vec<f64> {
    let d = profile.degree();
    let n = profile.dim();
    let pts = profile.interval_points();
    let l = pts.len() - 1;
    let vals = profile.values();
    // d-th derivative per interval from the d-th forward difference
    let dd: Vec<Vector> = (0..l)
        .map(|i| {
            let h = (pts[i + 1] - pts[i]) / d as f64;
            let mut acc = Vector::zeros(n);
            for j in 0..=d {
                let coeff = binomial(d, j) * if (d - j) % 2 == 0 { 1.0 } else { -1.0 };
                acc.axpy(coeff, &vals.column(i * d + j), 1.0);
            }
            acc / h.powi(d as i32)
        })
        .collect();
    let width: Vec<f64> = (0..l).map(|i| pts[i + 1] - pts[i]).collect();
    let slope = |a: usize, b: usize, hab: f64| -> f64 { (&dd[b] - &dd[a]).norm() / hab };
    let mut mon = vec![0.0; l];
    for i in 0..l {
        let mut s = Vec::new();
        if i > 0 {
            s.push(slope(i - 1, i, 0.5 * (width[i - 1] + width[i])));
        } else if periodic && l > 1 {
            s.push(slope(l - 1, 0, 0.5 * (width[l - 1] + width[0])));
        }
        if i + 1 < l {
            s.push(slope(i, i + 1, 0.5 * (width[i] + width[i + 1])));
        } else if periodic && l > 1 {
            s.push(slope(l - 1, 0, 0.5 * (width[l - 1] + width[0])));
        }
        let avg = if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
        mon[i] = avg.powf(1.0 / (d as f64 + 1.0));
    }
    let top = mon.iter().cloned().fold(0.0, f64::max);
    let floor = if top > 0.0 { 1e-2 * top } else { 1.0 };
    for v in mon.iter_mut() {
        *v += floor;
    }
    // cumulative integral of the piecewise constant monitor
    let mut cum = vec![0.0; l + 1];
    for i in 0..l {
        cum[i + 1] = cum[i] + mon[i] * width[i];
    }
    let total = cum[l];
    let mut out = Vec::with_capacity(intervals + 1);
    out.push(0.0);
    let mut i = 0;
    for k in 1..intervals {
        let target = total * k as f64 / intervals as f64;
        while i + 1 < l && cum[i + 1] < target {
            i += 1;
        }
        let t = pts[i] + (target - cum[i]) / mon[i];
        out.push(t.clamp(pts[i], pts[i + 1]));
    }
    out.push(1.0);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// New representation of an orbit profile.
#[derive(Debug, Clone, PartialEq)]
pub enum NewMesh {
    /// Explicit full mesh (L·d+1 points).
    Explicit(Vec<f64>),
    /// Adapted mesh with this many intervals.
    Intervals(usize),
}

/// Re-represent the profile of a psol or hcli point with a new degree and
/// mesh. The result is not corrected.
pub fn remesh(point: &Point, new_degree: usize, new_mesh: NewMesh) -> Result<Point> {
    let prof = point
        .profile()
        .ok_or_else(|| Error::Usage(format!("cannot remesh a {} point", point.kind())))?;
    let periodic = point.kind() == PointKind::Psol;
    let mesh = match new_mesh {
        NewMesh::Explicit(m) => {
            crate::model::validate_mesh(&m, new_degree)?;
            m
        }
        NewMesh::Intervals(l) => {
            if l == 0 {
                return Err(Error::Mesh("interval count must be positive".into()));
            }
            mesh_from_intervals(&adapted_interval_points(prof, l, periodic), new_degree)
        }
    };
    let mut vals = Mat::zeros(prof.dim(), mesh.len());
    for (j, &t) in mesh.iter().enumerate() {
        vals.set_column(j, &prof.eval_clamped(t).0);
    }
    let newprof = PiecewiseProfile::new(Some(mesh), new_degree, vals)?;
    let mut out = point.without_stability();
    *out.profile_mut().unwrap() = newprof;
    Ok(out)
}

/// Delay values along a periodic orbit at each time in `times` (default: the
/// mesh). Rows follow `delay_nrs` (1-based).
pub fn delay_on_orbit(
    problem: &ProblemFunctions,
    point: &Point,
    delay_nrs: &[usize],
    times: Option<&[f64]>,
) -> Result<Mat> {
    if !problem.state_dependent {
        return Err(Error::Usage("delay evaluation along orbits needs state-dependent delays".into()));
    }
    let m = problem.delay_count();
    if let Some(&bad) = delay_nrs.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::Usage(format!("delay number {} outside 1..={}", bad, m)));
    }
    let (prof, period) = match point {
        Point::Psol(p) => (&p.profile, p.period),
        Point::Hcli(h) => (&h.profile, h.period),
        other => {
            let taus = problem.steady_delays(other.state().unwrap(), other.parameter())?;
            let nt = times.map(|t| t.len()).unwrap_or(1);
            return Ok(Mat::from_fn(delay_nrs.len(), nt, |r, _| taus[delay_nrs[r] - 1]));
        }
    };
    let mesh;
    let times = match times {
        Some(t) => t,
        None => {
            mesh = prof.mesh();
            &mesh[..]
        }
    };
    let par = point.parameter();
    let mut out = Mat::zeros(delay_nrs.len(), times.len());
    for (j, &t) in times.iter().enumerate() {
        let taus = orbit_delays(problem, prof, period, par, t)?;
        for (r, &k) in delay_nrs.iter().enumerate() {
            out[(r, j)] = taus[k - 1];
        }
    }
    Ok(out)
}

/// All delays at orbit time t (wrapped interpolation of lagged states).
pub(crate) fn orbit_delays(
    problem: &ProblemFunctions,
    prof: &PiecewiseProfile,
    period: f64,
    par: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let x = interp_profile(prof, t);
    let (taus, _) = problem
        .eval_delay_values(&x, par, &mut |_, tau| interp_profile(prof, t - tau / period))?;
    Ok(taus)
}

/// Where a negative delay was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeDelay {
    /// 1-based delay number.
    pub delay_nr: usize,
    /// Location of the minimum in [0,1] (orbits only).
    pub tz: Option<f64>,
}

/// First state-dependent delay that becomes negative at a point. For orbits
/// the minimum is located on the mesh, bracketed on the neighbouring
/// intervals and refined by golden-section search.
pub fn detect_negative_delay(problem: &ProblemFunctions, point: &Point) -> Result<Option<NegativeDelay>> {
    if !problem.state_dependent {
        return Ok(None);
    }
    let m = problem.delay_count();
    match point {
        Point::Psol(_) | Point::Hcli(_) => {
            let prof = point.profile().unwrap();
            let period = point.period().unwrap();
            let par = point.parameter();
            let mesh = prof.mesh();
            let all: Vec<usize> = (1..=m).collect();
            let vals = delay_on_orbit(problem, point, &all, Some(&mesh))?;
            for k in 1..=m {
                let row = vals.row(k - 1);
                let (jmin, _) = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |a, (j, &v)| if v < a.1 { (j, v) } else { a });
                let tau_k = |t: f64| -> f64 {
                    orbit_delays(problem, prof, period, par, t).map(|v| v[k - 1]).unwrap_or(f64::NAN)
                };
                let lo = if jmin > 0 { mesh[jmin - 1] } else { mesh[mesh.len() - 2] - 1.0 };
                let hi = if jmin + 1 < mesh.len() { mesh[jmin + 1] } else { 1.0 + mesh[1] };
                let tz = golden_section_min(&tau_k, lo, hi, 1e-10);
                if tau_k(tz) < 0.0 || row[jmin] < 0.0 {
                    return Ok(Some(NegativeDelay { delay_nr: k, tz: Some(crate::model::wrap_unit(tz)) }));
                }
            }
            Ok(None)
        }
        other => {
            let taus = problem.steady_delays(other.state().unwrap(), other.parameter())?;
            Ok(taus.iter().position(|&t| t < 0.0).map(|j| NegativeDelay { delay_nr: j + 1, tz: None }))
        }
    }
}

/// Minimizer of f on [a,b] by golden-section search (tolerance in t).
pub fn golden_section_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Floquet multipliers of a periodic orbit: eigenvalues of the discretized
/// time-T map of the variational equation. The collocation equations on
/// [0,1] are assembled without wrapping the lagged arguments; unknowns on the
/// history window [−τ_max/T, 0] lie on whole-period shifted copies of the mesh.
pub fn floquet_multipliers(
    problem: &ProblemFunctions,
    point: &PeriodicOrbit,
    method: &StabilityMethod,
) -> Result<Stability> {
    let md = monodromy(problem, point, method)?;
    let mut mu = linalg::eigenvalues(&md.matrix)?;
    mu.retain(|z| z.norm() >= method.minimal_modulus);
    mu.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    mu.truncate(method.max_number_of_eigenvalues);
    Ok(Stability::Multipliers { mu })
}

/// Discretized time-T map of the variational equation. `matrix` acts on the
/// history values at representation points h ≤ 0 (the last of which is time
/// 0); `solution` maps a history vector to the values on (0,1].
pub struct Monodromy {
    pub matrix: Mat,
    pub solution: Mat,
    pub history_points: usize,
}

impl Monodromy {
    /// Values of the variational solution over one period at the profile's
    /// representation points, from a history vector.
    pub fn period_values(&self, hist: &CVec, n: usize) -> CMat {
        let h0 = self.history_points - 1;
        let rest = self.solution.map(|x| Complex64::new(x, 0.0)) * hist;
        let cols = 1 + rest.len() / n;
        CMat::from_fn(n, cols, |r, j| if j == 0 { hist[h0 * n + r] } else { rest[(j - 1) * n + r] })
    }
}

/// Multiplier closest to `target` and its eigenfunction over one period,
/// n × (representation points), normalized to unit maximum column norm.
pub fn floquet_mode(
    problem: &ProblemFunctions,
    point: &PeriodicOrbit,
    method: &StabilityMethod,
    target: Complex64,
) -> Result<(Complex64, CMat)> {
    let md = monodromy(problem, point, method)?;
    let mu = linalg::eigenvalues(&md.matrix)?;
    let best = mu
        .iter()
        .cloned()
        .min_by(|a, b| (a - target).norm().partial_cmp(&(b - target).norm()).unwrap())
        .ok_or_else(|| Error::Stability("empty monodromy matrix".into()))?;
    let cm = md.matrix.map(|x| Complex64::new(x, 0.0));
    let e = linalg::inverse_iteration(&cm, best);
    let vals = md.period_values(&e, point.profile.dim());
    let scale = (0..vals.ncols()).map(|j| vals.column(j).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Stability("zero Floquet eigenfunction".into()));
    }
    Ok((best, vals / Complex64::new(scale, 0.0)))
}

pub fn monodromy(
    problem: &ProblemFunctions,
    point: &PeriodicOrbit,
    method: &StabilityMethod,
) -> Result<Monodromy> {
    let prof = &point.profile;
    let n = prof.dim();
    let d = prof.degree();
    let par = &point.parameter;
    let period = point.period;
    let grid = CollocationGrid::new(prof, &method.collocation_parameters)?;
    let cpts = grid.collocation_points();
    let l = grid.points.len() - 1;
    // maximal delay along the orbit
    let mut tau_max: f64 = 0.0;
    for &(_, c) in &cpts {
        let taus = orbit_delays(problem, prof, period, par, c)?;
        for (k, &t) in taus.iter().enumerate() {
            if t < method.delay_accuracy {
                return Err(Error::Stability(format!(
                    "delay {} is negative ({:.3e}) along the orbit",
                    k + 1,
                    t
                )));
            }
            tau_max = tau_max.max(t);
        }
    }
    let reach = tau_max / period;
    let shifts = reach.ceil().max(1.0) as usize;
    // extended interval points from −shifts to 1, trimmed on the left
    let mut ext: Vec<f64> = Vec::with_capacity(shifts * l + l + 1);
    for q in (1..=shifts).rev() {
        for i in 0..l {
            ext.push(grid.points[i] - q as f64);
        }
    }
    ext.extend_from_slice(&grid.points);
    let mut first = 0;
    while first + 1 < ext.len() && ext[first + 1] <= -reach - 1e-12 {
        first += 1;
    }
    let ext: Vec<f64> = ext[first..].to_vec();
    let lext = ext.len() - 1;
    let hist_intervals = lext - l;
    let h0 = hist_intervals * d; // column index of time 0
    let ncolsp = lext * d + 1;
    let ncols = n * ncolsp;
    // profile on the extended mesh (periodic copies)
    let emesh = mesh_from_intervals(&ext, d);
    let evals = Mat::from_fn(n, ncolsp, |r, j| {
        let src = if j >= h0 { j - h0 } else { (j + first * d) % (l * d) };
        prof.values()[(r, src)]
    });
    let eprof = PiecewiseProfile::from_parts(emesh, d, evals);
    let cols = ColumnMap { ncols, period: None, params: &[] };
    let rows = n * cpts.len();
    let mut jac = Mat::zeros(rows, ncols);
    for (k, &(i, c)) in cpts.iter().enumerate() {
        let present = profile_lag(&eprof, &ext, hist_intervals + i, c, 0, ncols, true);
        let mut resolve = |s: f64| -> Result<LagValue> {
            let j = eprof.locate(s, &ext);
            let mut lag = profile_lag(&eprof, &ext, j, s, 0, ncols, false);
            let (x, dx) = prof.eval_wrapped(s);
            lag.x = x;
            lag.dx = dx;
            Ok(lag)
        };
        let (_, j) = collocation_equation(problem, par, period, c, present, &mut resolve, &cols)?;
        jac.view_mut((k * n, 0), (n, ncols)).copy_from(&j);
    }
    let nh = n * (h0 + 1);
    let jhist = jac.columns(0, nh).into_owned();
    let jsol = jac.columns(nh, ncols - nh).into_owned();
    let lu = jsol.lu();
    let y = lu
        .solve(&(-jhist))
        .ok_or_else(|| Error::Numeric("singular collocation matrix in monodromy".into()))?;
    let mut mono = Mat::zeros(nh, nh);
    for q in 0..=h0 {
        let target = q + l * d;
        for r in 0..n {
            if target <= h0 {
                mono[(q * n + r, target * n + r)] = 1.0;
            } else {
                let yr = (target - h0 - 1) * n + r;
                mono.set_row(q * n + r, &y.row(yr));
            }
        }
    }
    Ok(Monodromy { matrix: mono, solution: y, history_points: h0 + 1 })
}

/// Stability of a periodic orbit (the connecting-orbit kind has none).
pub fn orbit_stability(
    problem: &ProblemFunctions,
    point: &Point,
    method: &StabilityMethod,
) -> Result<Stability> {
    match point {
        Point::Psol(p) => floquet_multipliers(problem, p, method),
        other => Err(Error::Usage(format!("no orbit stability for {} points", other.kind()))),
    }
}

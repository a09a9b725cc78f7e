//! Newton correction of single points: determining systems of every kind,
//! steplength and extra-condition rows, the negative-delay boundary variants.

use num_complex::Complex64;

use crate::collocation::{
    self, lag_chain, phase_condition, profile_lag, ColumnMap, CollocationGrid, LagValue, NewMesh,
};
use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::linalg::{self, CMat, CVec, Mat, Vector};
use crate::model::{
    align_profile, flatten, kind_error, unflatten, wrap_unit, ConnectingOrbit, FlatLayout,
    PiecewiseProfile, Point, PointKind, PointMethod,
};
use crate::poly;
use crate::system::ProblemFunctions;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Options of a single correction.
#[derive(Debug, Clone, Default)]
pub struct CorrectOptions {
    /// Correct, adapt the mesh, correct again (orbits only).
    pub adapt: bool,
    /// Phase reference for orbits.
    pub previous: Option<Point>,
    /// Delay to pin at zero (1-based).
    pub d_nr: Option<usize>,
    /// Initial location of the delay minimum along an orbit.
    pub tz: Option<f64>,
}

/// Outcome of a correction. `point` is the final iterate also on failure.
#[derive(Debug, Clone)]
pub struct CorrectionReport {
    pub point: Point,
    pub success: bool,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<f64>,
    pub events: Vec<Event>,
    pub tz: Option<f64>,
}

/// Data frozen at entry of a correction (normalization vectors, phase
/// reference).
#[derive(Debug, Clone, Default)]
pub(crate) struct Frozen {
    pub fold_c: Option<Vector>,
    pub hopf_c: Option<CVec>,
    pub v_c: Vec<CVec>,
    pub w_c: Vec<CVec>,
    pub phase_ref: Option<PiecewiseProfile>,
}

fn normalizer(v: &CVec) -> CVec {
    let nn = v.norm_squared();
    if nn == 0.0 {
        v.clone()
    } else {
        v / Complex64::new(nn, 0.0)
    }
}

impl Frozen {
    pub(crate) fn at_entry(p: &Point, previous: Option<&Point>) -> Frozen {
        let mut fz = Frozen::default();
        match p {
            Point::Fold(f) => {
                let nn = f.v.norm_squared();
                fz.fold_c = Some(if nn == 0.0 { f.v.clone() } else { &f.v / nn });
            }
            Point::Hopf(h) => fz.hopf_c = Some(normalizer(&h.v)),
            Point::Hcli(h) => {
                fz.v_c = (0..h.v.ncols()).map(|k| normalizer(&h.v.column(k).into_owned())).collect();
                fz.w_c = (0..h.w.ncols()).map(|k| normalizer(&h.w.column(k).into_owned())).collect();
            }
            _ => {}
        }
        if let Some(prof) = p.profile() {
            fz.phase_ref = Some(match previous.and_then(|q| q.profile()) {
                Some(q) => q.clone(),
                None => prof.clone(),
            });
        }
        fz
    }
}

fn check_free(problem: &ProblemFunctions, free: &[usize]) -> Result<()> {
    for &p in free {
        if p == 0 || p > problem.par_count {
            return Err(Error::Config(format!("free parameter {} outside 1..={}", p, problem.par_count)));
        }
    }
    Ok(())
}

/// d(Δ(λ)v)/d(unknowns) at a steady state, or of Δ(λ)ᵀv when `transpose`.
pub(crate) struct CharJac {
    pub value: CVec,
    pub mat: CMat,
    pub dx: CMat,
    pub dlambda: CVec,
    pub dp: Vec<CVec>,
}

pub(crate) fn char_times(
    problem: &ProblemFunctions,
    x: &Vector,
    par: &[f64],
    lambda: Complex64,
    v: &CVec,
    free: &[usize],
    transpose: bool,
) -> Result<CharJac> {
    let n = x.len();
    let m = problem.delay_count();
    let xx = problem.steady_states(x);
    let taus = problem.steady_delays(x, par)?;
    let mut tau = vec![0.0];
    tau.extend_from_slice(&taus);
    let cplx = |a: &Mat| if transpose { linalg::to_complex_mat(&a.transpose()) } else { linalg::to_complex_mat(a) };
    let mut a = Vec::with_capacity(m + 1);
    for i in 0..=m {
        a.push(cplx(&problem.dfdx(&xx, par, i)?));
    }
    let e: Vec<Complex64> = tau.iter().map(|&t| (-lambda * t).exp()).collect();
    let mut mat = CMat::identity(n, n) * lambda;
    for i in 0..=m {
        mat -= &a[i] * e[i];
    }
    let value = &mat * v;
    let mut dlambda = v.clone();
    for i in 1..=m {
        dlambda += (&a[i] * v) * (e[i] * tau[i]);
    }
    // delay gradients at the steady state
    let mut dtaudx: Vec<Vector> = vec![Vector::zeros(n); m + 1];
    if problem.state_dependent {
        for i in 1..=m {
            let head = xx.columns(0, i).into_owned();
            for j in 0..i {
                dtaudx[i] += problem.dtau_dx(i, &head, par, j)?;
            }
        }
    }
    let mut dx = CMat::zeros(n, n);
    for i in 0..=m {
        for j in 0..=m {
            let d = if transpose {
                let mut out = CMat::zeros(n, n);
                for r in 0..n {
                    let mut er = CVec::zeros(n);
                    er[r] = Complex64::new(1.0, 0.0);
                    let mr = problem.dfdxdx_v(&xx, par, i, j, &er)?;
                    let row = v.transpose() * mr;
                    out.set_row(r, &row);
                }
                out
            } else {
                problem.dfdxdx_v(&xx, par, i, j, v)?
            };
            dx -= d * e[i];
        }
        if i > 0 && problem.state_dependent {
            let av = (&a[i] * v) * (lambda * e[i]);
            dx += av * linalg::to_complex(&dtaudx[i]).transpose();
        }
    }
    let mut dp = Vec::with_capacity(free.len());
    for &p in free {
        let mut col = CVec::zeros(n);
        for i in 0..=m {
            let dap = cplx(&problem.dfdxdp(&xx, par, i, p)?);
            col -= (dap * v) * e[i];
            if i > 0 {
                let dtp = problem.dtau_dp(i, &head_of(&xx, i), par, p)?;
                if dtp != 0.0 {
                    col += (&a[i] * v) * (lambda * e[i] * dtp);
                }
            }
        }
        dp.push(col);
    }
    Ok(CharJac { value, mat, dx, dlambda, dp })
}

fn head_of(xx: &Mat, k: usize) -> Mat {
    xx.columns(0, k).into_owned()
}

/// f at a steady state with Jacobian columns x (at `xcol`) and free parameters.
fn steady_rows(
    problem: &ProblemFunctions,
    x: &Vector,
    par: &[f64],
    free: &[usize],
    xcol: usize,
    row0: usize,
    res: &mut Vector,
    jac: &mut Mat,
) -> Result<()> {
    let n = x.len();
    let m = problem.delay_count();
    let xx = problem.steady_states(x);
    res.rows_mut(row0, n).copy_from(&problem.eval_rhs(&xx, par));
    let mut a = Mat::zeros(n, n);
    for i in 0..=m {
        a += problem.dfdx(&xx, par, i)?;
    }
    jac.view_mut((row0, xcol), (n, n)).copy_from(&a);
    for &p in free {
        let dp = problem.dfdp(&xx, par, p)?;
        for r in 0..n {
            jac[(row0 + r, p - 1)] += dp[r];
        }
    }
    Ok(())
}

/// Add the complex derivative `d` of a complex residual (rows re, optional im)
/// with respect to a complex unknown (columns re, optional im).
fn add_c(jac: &mut Mat, rows: (usize, Option<usize>), cols: (usize, Option<usize>), d: Complex64) {
    jac[(rows.0, cols.0)] += d.re;
    if let Some(ri) = rows.1 {
        jac[(ri, cols.0)] += d.im;
    }
    if let Some(ci) = cols.1 {
        jac[(rows.0, ci)] -= d.im;
        if let Some(ri) = rows.1 {
            jac[(ri, ci)] += d.re;
        }
    }
}

/// Steady-state determining system f(x*, …, x*, η) = 0.
pub fn residual_jacobian_stst(problem: &ProblemFunctions, point: &Point, free: &[usize]) -> Result<(Vector, Mat)> {
    let s = match point {
        Point::Stst(s) => s,
        other => return Err(kind_error(PointKind::Stst, other.kind())),
    };
    check_free(problem, free)?;
    let l = FlatLayout::of(point);
    let mut res = Vector::zeros(l.n);
    let mut jac = Mat::zeros(l.n, l.len);
    steady_rows(problem, &s.x, &s.parameter, free, l.x, 0, &mut res, &mut jac)?;
    Ok((res, jac))
}

/// Fold determining system {f = 0, Δ(0)v = 0, cᵀv − 1 = 0} with c = v/(vᵀv)
/// taken from the point itself.
pub fn residual_jacobian_fold(problem: &ProblemFunctions, point: &Point, free: &[usize]) -> Result<(Vector, Mat)> {
    let fz = Frozen::at_entry(point, None);
    fold_system(problem, point, free, &fz)
}

fn fold_system(problem: &ProblemFunctions, point: &Point, free: &[usize], fz: &Frozen) -> Result<(Vector, Mat)> {
    let f = match point {
        Point::Fold(f) => f,
        other => return Err(kind_error(PointKind::Fold, other.kind())),
    };
    check_free(problem, free)?;
    let l = FlatLayout::of(point);
    let n = l.n;
    let mut res = Vector::zeros(2 * n + 1);
    let mut jac = Mat::zeros(2 * n + 1, l.len);
    steady_rows(problem, &f.x, &f.parameter, free, l.x, 0, &mut res, &mut jac)?;
    let v = linalg::to_complex(&f.v);
    let cj = char_times(problem, &f.x, &f.parameter, Complex64::new(0.0, 0.0), &v, free, false)?;
    for r in 0..n {
        res[n + r] = cj.value[r].re;
        for c in 0..n {
            jac[(n + r, l.x + c)] = cj.dx[(r, c)].re;
            jac[(n + r, l.v + c)] = cj.mat[(r, c)].re;
        }
        for (k, &p) in free.iter().enumerate() {
            jac[(n + r, p - 1)] += cj.dp[k][r].re;
        }
    }
    let c = fz.fold_c.as_ref().unwrap();
    res[2 * n] = c.dot(&f.v) - 1.0;
    for r in 0..n {
        jac[(2 * n, l.v + r)] = c[r];
    }
    Ok((res, jac))
}

/// Hopf determining system {f = 0, Δ(iω)v = 0, c^H v − 1 = 0} in split real
/// form, c = v/(v^H v) taken from the point itself.
pub fn residual_jacobian_hopf(problem: &ProblemFunctions, point: &Point, free: &[usize]) -> Result<(Vector, Mat)> {
    let fz = Frozen::at_entry(point, None);
    hopf_system(problem, point, free, &fz)
}

fn hopf_system(problem: &ProblemFunctions, point: &Point, free: &[usize], fz: &Frozen) -> Result<(Vector, Mat)> {
    let h = match point {
        Point::Hopf(h) => h,
        other => return Err(kind_error(PointKind::Hopf, other.kind())),
    };
    check_free(problem, free)?;
    let l = FlatLayout::of(point);
    let n = l.n;
    let rows = 3 * n + 2;
    let mut res = Vector::zeros(rows);
    let mut jac = Mat::zeros(rows, l.len);
    steady_rows(problem, &h.x, &h.parameter, free, l.x, 0, &mut res, &mut jac)?;
    let lambda = I * h.omega;
    let cj = char_times(problem, &h.x, &h.parameter, lambda, &h.v, free, false)?;
    for r in 0..n {
        let rr = (n + r, Some(2 * n + r));
        res[n + r] = cj.value[r].re;
        res[2 * n + r] = cj.value[r].im;
        for c in 0..n {
            add_c(&mut jac, rr, (l.x + c, None), cj.dx[(r, c)]);
            add_c(&mut jac, rr, (l.v + c, Some(l.v + n + c)), cj.mat[(r, c)]);
        }
        add_c(&mut jac, rr, (l.omega, None), cj.dlambda[r] * I);
        for (k, &p) in free.iter().enumerate() {
            add_c(&mut jac, rr, (p - 1, None), cj.dp[k][r]);
        }
    }
    let c = fz.hopf_c.as_ref().unwrap();
    let cv = c.dotc(&h.v) - 1.0;
    res[3 * n] = cv.re;
    res[3 * n + 1] = cv.im;
    for r in 0..n {
        add_c(&mut jac, (3 * n, Some(3 * n + 1)), (l.v + r, Some(l.v + n + r)), c[r].conj());
    }
    Ok((res, jac))
}

/// Periodic-orbit determining system (collocation, periodicity, phase).
fn psol_system(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    method: &PointMethod,
    fz: &Frozen,
) -> Result<(Vector, Mat)> {
    let p = point.as_psol()?;
    check_free(problem, free)?;
    collocation::psol_system(
        problem,
        p,
        free,
        fz.phase_ref.as_ref(),
        &method.collocation_parameters,
        method.phase_condition,
    )
}

/// Whether the k-th unstable mode is treated with real arithmetic.
fn real_mode(z: Complex64) -> bool {
    z.im == 0.0
}

/// Left tail x⁻ + ε Re Σ α_k v_k e^{λ_k T s} for s < 0 as a LagValue.
fn hcli_tail(h: &ConnectingOrbit, l: &FlatLayout, s: f64, ncols: usize) -> LagValue {
    let n = l.n;
    let t = h.period;
    let mut x = h.x1.clone();
    let mut dx = Vector::zeros(n);
    let mut form = Mat::zeros(n, ncols);
    for r in 0..n {
        form[(r, l.x1 + r)] = 1.0;
    }
    for k in 0..l.s1 {
        let lam = h.lambda_v[k];
        let e = (lam * t * s).exp();
        let a = h.alpha[k];
        for r in 0..n {
            let v = h.v[(r, k)];
            let term = a * v * e;
            x[r] += (term * h.epsilon).re;
            dx[r] += (term * h.epsilon * lam * t).re;
            // Re of complex derivatives
            let put = |form: &mut Mat, c: (usize, usize), d: Complex64| {
                form[(r, c.0)] += d.re;
                form[(r, c.1)] -= d.im;
            };
            put(&mut form, (l.alpha + 2 * k, l.alpha + 2 * k + 1), v * e * h.epsilon);
            put(&mut form, (l.vv + 2 * n * k + r, l.vv + 2 * n * k + n + r), a * e * h.epsilon);
            put(&mut form, (l.lambda_v + 2 * k, l.lambda_v + 2 * k + 1), term * h.epsilon * t * s);
            form[(r, l.period)] += (term * h.epsilon * lam * s).re;
            form[(r, l.epsilon)] += term.re;
        }
    }
    LagValue { x, dx, form, dform: None }
}

/// State of a connecting orbit at s (profile on [0,1], tail before 0).
fn hcli_state(h: &ConnectingOrbit, l: &FlatLayout, s: f64) -> Vector {
    if s < 0.0 {
        hcli_tail(h, l, s, l.len).x
    } else {
        h.profile.eval_clamped(s).0
    }
}

/// Projections of u(1) − x⁺ (with its history segment) on the unstable left
/// eigenvectors of x⁺ with the bilinear form of the linearization; one
/// complex value per w column.
fn hcli_projection(problem: &ProblemFunctions, h: &ConnectingOrbit, l: &FlatLayout) -> Result<Vec<Complex64>> {
    let n = l.n;
    let m = problem.delay_count();
    let par = &h.parameter;
    let xx = problem.steady_states(&h.x2);
    let taus = problem.steady_delays(&h.x2, par)?;
    let d = h.profile.degree();
    let (nodes, weights) = poly::gauss_legendre_rule::<f64>(d)?;
    let mut a = Vec::with_capacity(m);
    for i in 1..=m {
        a.push(problem.dfdx(&xx, par, i)?);
    }
    let end = linalg::to_complex(&(h.profile.eval_clamped(1.0).0 - &h.x2));
    let mut out = Vec::with_capacity(l.s2);
    for k in 0..l.s2 {
        let w = h.w.column(k).into_owned();
        let lam = h.lambda_w[k];
        let mut acc = (w.transpose() * &end)[(0, 0)];
        for i in 0..m {
            let tau = taus[i];
            if tau <= 0.0 {
                continue;
            }
            for (g, wg) in nodes.iter().zip(&weights) {
                let theta = -tau + g * tau;
                let u = hcli_state(h, l, 1.0 + theta / h.period) - &h.x2;
                let au = linalg::to_complex(&(&a[i] * u));
                let e = (-lam * (theta + tau)).exp();
                acc += (w.transpose() * au)[(0, 0)] * e * (wg * tau);
            }
        }
        out.push(acc);
    }
    let _ = n;
    Ok(out)
}

fn hcli_projection_rows(problem: &ProblemFunctions, point: &Point) -> Result<Vec<f64>> {
    let h = point.as_hcli()?;
    let l = FlatLayout::of(point);
    let pr = hcli_projection(problem, h, &l)?;
    let mut out = Vec::new();
    for (k, z) in pr.iter().enumerate() {
        out.push(z.re);
        if !real_mode(h.lambda_w[k]) {
            out.push(z.im);
        }
    }
    Ok(out)
}

/// Connecting-orbit determining system: collocation on [0,1] with the
/// unstable-manifold tail before 0, equilibria, eigenpairs at both ends,
/// end-point projection, initial-point condition, normalization of α and the
/// phase condition. Only constant delays are supported.
pub fn residual_jacobian_hcli(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    method: &PointMethod,
) -> Result<(Vector, Mat)> {
    let fz = Frozen::at_entry(point, None);
    hcli_system(problem, point, free, method, &fz, None)
}

fn hcli_system(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    method: &PointMethod,
    fz: &Frozen,
    selected: Option<&[usize]>,
) -> Result<(Vector, Mat)> {
    let h = point.as_hcli()?;
    check_free(problem, free)?;
    if problem.state_dependent {
        return Err(Error::Usage("connecting orbits need constant delays".into()));
    }
    let l = FlatLayout::of(point);
    if l.s1 == 0 {
        return Err(Error::NotConnecting("no unstable modes at the initial equilibrium".into()));
    }
    let n = l.n;
    let ncols = l.len;
    let prof = &h.profile;
    let par = &h.parameter;
    let grid = CollocationGrid::new(prof, &method.collocation_parameters)?;
    let cpts = grid.collocation_points();
    let cx = |z: Complex64| usize::from(!real_mode(z));
    let nv_rows: usize = h.lambda_v.iter().map(|&z| (n + 1) * (1 + cx(z))).sum();
    let nw_rows: usize = h.lambda_w.iter().map(|&z| (n + 1) * (1 + cx(z))).sum();
    let np_rows: usize = h.lambda_w.iter().map(|&z| 1 + cx(z)).sum();
    let rows = n * cpts.len() + 2 * n + nv_rows + nw_rows + np_rows + n + 1 + usize::from(method.phase_condition);
    let mut res = Vector::zeros(rows);
    let mut jac = Mat::zeros(rows, ncols);
    let cols = ColumnMap { ncols, period: Some(l.period), params: free };
    let points = &grid.points;
    for (k, &(i, c)) in cpts.iter().enumerate() {
        let present = profile_lag(prof, points, i, c, l.profile, ncols, true);
        let mut resolve = |s: f64| -> Result<LagValue> {
            if s < 0.0 {
                Ok(hcli_tail(h, &l, s, ncols))
            } else {
                let j = prof.locate(s, points);
                Ok(profile_lag(prof, points, j, s, l.profile, ncols, false))
            }
        };
        let (r, j) = collocation::collocation_equation(problem, par, h.period, c, present, &mut resolve, &cols)?;
        res.rows_mut(k * n, n).copy_from(&r);
        jac.view_mut((k * n, 0), (n, ncols)).copy_from(&j);
    }
    let mut row = n * cpts.len();
    steady_rows(problem, &h.x1, par, free, l.x1, row, &mut res, &mut jac)?;
    row += n;
    steady_rows(problem, &h.x2, par, free, l.x2, row, &mut res, &mut jac)?;
    row += n;
    // eigenpairs
    for (side, transpose) in [(0usize, false), (1usize, true)] {
        let (lams, vecs, x, lamcol, veccol, cs) = if side == 0 {
            (&h.lambda_v, &h.v, &h.x1, l.lambda_v, l.vv, &fz.v_c)
        } else {
            (&h.lambda_w, &h.w, &h.x2, l.lambda_w, l.ww, &fz.w_c)
        };
        let xcol = if side == 0 { l.x1 } else { l.x2 };
        for k in 0..lams.len() {
            let complex = !real_mode(lams[k]);
            let v = vecs.column(k).into_owned();
            let cj = char_times(problem, x, par, lams[k], &v, free, transpose)?;
            let rr = |r: usize| (row + r, if complex { Some(row + n + r) } else { None });
            for r in 0..n {
                res[row + r] = cj.value[r].re;
                if complex {
                    res[row + n + r] = cj.value[r].im;
                }
                for c in 0..n {
                    add_c(&mut jac, rr(r), (xcol + c, None), cj.dx[(r, c)]);
                    add_c(&mut jac, rr(r), (veccol + 2 * n * k + c, Some(veccol + 2 * n * k + n + c)), cj.mat[(r, c)]);
                }
                add_c(&mut jac, rr(r), (lamcol + 2 * k, Some(lamcol + 2 * k + 1)), cj.dlambda[r]);
                for (q, &p) in free.iter().enumerate() {
                    add_c(&mut jac, rr(r), (p - 1, None), cj.dp[q][r]);
                }
            }
            row += n * (1 + usize::from(complex));
            let c = &cs[k];
            let cv = c.dotc(&v) - 1.0;
            res[row] = cv.re;
            let nrow = (row, if complex { Some(row + 1) } else { None });
            if complex {
                res[row + 1] = cv.im;
            }
            for r in 0..n {
                add_c(&mut jac, nrow, (veccol + 2 * n * k + r, Some(veccol + 2 * n * k + n + r)), c[r].conj());
            }
            row += 1 + usize::from(complex);
        }
    }
    // projection rows by finite differences over the unknowns
    let proj = hcli_projection_rows(problem, point)?;
    let base = flatten(point);
    let all: Vec<usize>;
    let sel = match selected {
        Some(s) => s,
        None => {
            all = (0..ncols).collect();
            &all
        }
    };
    for (q, &v) in proj.iter().enumerate() {
        res[row + q] = v;
    }
    for &c in sel {
        if c >= ncols {
            continue;
        }
        let hstep = 1e-7 * (1.0 + base[c].abs());
        let mut fp = base.clone();
        fp[c] += hstep;
        let pp = hcli_projection_rows(problem, &unflatten(point, &fp))?;
        fp[c] = base[c] - hstep;
        let pm = hcli_projection_rows(problem, &unflatten(point, &fp))?;
        for q in 0..proj.len() {
            jac[(row + q, c)] = (pp[q] - pm[q]) / (2.0 * hstep);
        }
    }
    row += proj.len();
    // u(0) = x⁻ + ε Re Σ α_k v_k
    for r in 0..n {
        let mut val = prof.values()[(r, 0)] - h.x1[r];
        jac[(row + r, l.prof(0, r))] = 1.0;
        jac[(row + r, l.x1 + r)] = -1.0;
        for k in 0..l.s1 {
            let av = h.alpha[k] * h.v[(r, k)];
            val -= h.epsilon * av.re;
            jac[(row + r, l.epsilon)] -= av.re;
            let d = -h.v[(r, k)] * h.epsilon;
            jac[(row + r, l.alpha + 2 * k)] += d.re;
            jac[(row + r, l.alpha + 2 * k + 1)] -= d.im;
            let d = -h.alpha[k] * h.epsilon;
            jac[(row + r, l.vv + 2 * n * k + r)] += d.re;
            jac[(row + r, l.vv + 2 * n * k + n + r)] -= d.im;
        }
        res[row + r] = val;
    }
    row += n;
    res[row] = h.alpha.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0;
    for k in 0..l.s1 {
        jac[(row, l.alpha + 2 * k)] = 2.0 * h.alpha[k].re;
        jac[(row, l.alpha + 2 * k + 1)] = 2.0 * h.alpha[k].im;
    }
    row += 1;
    if method.phase_condition {
        let reference = fz.phase_ref.as_ref().unwrap_or(prof);
        let (pr, prow) = phase_condition(prof, reference, l.profile, ncols)?;
        res[row] = pr;
        jac.set_row(row, &prow.transpose());
        row += 1;
    }
    debug_assert_eq!(row, rows);
    Ok((res, jac))
}

/// Flat columns that are unknowns of the correction.
pub fn unknown_columns(point: &Point, free: &[usize]) -> Vec<usize> {
    let l = FlatLayout::of(point);
    let mut cols: Vec<usize> = free.iter().map(|&p| p - 1).collect();
    match point {
        Point::Stst(_) => cols.extend(l.x..l.x + l.n),
        Point::Fold(_) => cols.extend(l.x..l.x + 2 * l.n),
        Point::Hopf(_) => cols.extend(l.x..l.omega + 1),
        Point::Psol(_) => cols.extend(l.profile..l.period + 1),
        Point::Hcli(h) => {
            let n = l.n;
            cols.extend(l.profile..l.period + 1);
            cols.extend(l.x1..l.x1 + 2 * n);
            for k in 0..l.s1 {
                let cx = !real_mode(h.lambda_v[k]);
                cols.push(l.lambda_v + 2 * k);
                cols.extend(l.vv + 2 * n * k..l.vv + 2 * n * k + n);
                cols.push(l.alpha + 2 * k);
                if cx {
                    cols.push(l.lambda_v + 2 * k + 1);
                    cols.extend(l.vv + 2 * n * k + n..l.vv + 2 * n * (k + 1));
                    cols.push(l.alpha + 2 * k + 1);
                }
            }
            for k in 0..l.s2 {
                let cx = !real_mode(h.lambda_w[k]);
                cols.push(l.lambda_w + 2 * k);
                cols.extend(l.ww + 2 * n * k..l.ww + 2 * n * k + n);
                if cx {
                    cols.push(l.lambda_w + 2 * k + 1);
                    cols.extend(l.ww + 2 * n * k + n..l.ww + 2 * n * (k + 1));
                }
            }
        }
    }
    cols
}

/// Rows pinning delay d_nr: stst τ_d = 0; orbit τ_d(tz) = 0 and dτ_d/dt(tz) = 0
/// with tz appended as the last column.
fn delay_rows(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    d_nr: usize,
    tz: Option<f64>,
    sel: &[usize],
) -> Result<(Vector, Mat)> {
    if !problem.state_dependent {
        return Err(Error::Usage("delay boundary needs state-dependent delays".into()));
    }
    let m = problem.delay_count();
    if d_nr == 0 || d_nr > m {
        return Err(Error::Usage(format!("delay number {} outside 1..={}", d_nr, m)));
    }
    let l = FlatLayout::of(point);
    let par = point.parameter();
    match (point, tz) {
        (Point::Stst(s), None) => {
            let xx = problem.steady_states(&s.x);
            let head = xx.columns(0, d_nr).into_owned();
            let mut jac = Mat::zeros(1, l.len);
            let tau = problem.tau(d_nr, &head, par)?;
            for j in 0..d_nr {
                let g = problem.dtau_dx(d_nr, &head, par, j)?;
                for r in 0..l.n {
                    jac[(0, l.x + r)] += g[r];
                }
            }
            for &p in free {
                jac[(0, p - 1)] += problem.dtau_dp(d_nr, &head, par, p)?;
            }
            Ok((Vector::from_element(1, tau), jac))
        }
        (Point::Psol(_), Some(tz)) => {
            let ncols = l.len + 1;
            let (tau, tform) = orbit_delay_form(problem, point, free, d_nr, tz, ncols)?;
            let g = |p: &Point, t: f64| -> Result<f64> {
                let ht = 1e-6;
                let a = orbit_delay_form(problem, p, &[], d_nr, t + ht, l.len)?.0;
                let b = orbit_delay_form(problem, p, &[], d_nr, t - ht, l.len)?.0;
                Ok((a - b) / (2.0 * ht))
            };
            let g0 = g(point, tz)?;
            let mut jac = Mat::zeros(2, ncols);
            jac.set_row(0, &tform.transpose());
            jac[(0, l.len)] = g0;
            let base = flatten(point);
            for &c in sel {
                if c >= l.len {
                    continue;
                }
                let h = 1e-7 * (1.0 + base[c].abs());
                let mut fp = base.clone();
                fp[c] += h;
                let gp = g(&unflatten(point, &fp), tz)?;
                fp[c] = base[c] - h;
                let gm = g(&unflatten(point, &fp), tz)?;
                jac[(1, c)] = (gp - gm) / (2.0 * h);
            }
            let ht = 1e-5;
            jac[(1, l.len)] = (g(point, tz + ht)? - g(point, tz - ht)?) / (2.0 * ht);
            Ok((Vector::from_vec(vec![tau, g0]), jac))
        }
        (Point::Psol(_), None) => Err(Error::Usage("orbit delay boundary needs tz".into())),
        (other, _) => Err(Error::Usage(format!("no delay boundary for {} points", other.kind()))),
    }
}

/// τ_d at orbit time t with its linear dependence on the flat unknowns.
fn orbit_delay_form(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    d_nr: usize,
    t: f64,
    ncols: usize,
) -> Result<(f64, Vector)> {
    let p = point.as_psol()?;
    let l = FlatLayout::of(point);
    let prof = &p.profile;
    let points = prof.interval_points();
    let t = wrap_unit(t);
    let i = prof.locate(t, &points);
    let present = profile_lag(prof, &points, i, t, l.profile, ncols, false);
    let cols = ColumnMap { ncols, period: Some(l.period), params: free };
    let mut resolve = |s: f64| -> Result<LagValue> {
        let s = wrap_unit(s);
        let j = prof.locate(s, &points);
        Ok(profile_lag(prof, &points, j, s, l.profile, ncols, false))
    };
    let chain = lag_chain(problem, &p.parameter, p.period, t, &present, &mut resolve, &cols, d_nr)?;
    Ok((chain.taus[d_nr - 1], chain.tau_forms[d_nr - 1].clone()))
}

/// Determining system of any kind (without steplength and extra rows).
fn determining_system(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    method: &PointMethod,
    fz: &Frozen,
    sel: &[usize],
) -> Result<(Vector, Mat)> {
    match point.kind() {
        PointKind::Stst => residual_jacobian_stst(problem, point, free),
        PointKind::Fold => fold_system(problem, point, free, fz),
        PointKind::Hopf => hopf_system(problem, point, free, fz),
        PointKind::Psol => psol_system(problem, point, free, method, fz),
        PointKind::Hcli => hcli_system(problem, point, free, method, fz, Some(sel)),
    }
}

/// Determining system at `point` with normalization vectors and the phase
/// reference taken from `reference`. Only the columns of
/// `unknown_columns(point, free)` are filled.
pub fn frozen_system(
    problem: &ProblemFunctions,
    point: &Point,
    reference: &Point,
    free: &[usize],
    method: &PointMethod,
) -> Result<(Vector, Mat)> {
    if reference.kind() != point.kind() {
        return Err(kind_error(point.kind(), reference.kind()));
    }
    let fz = Frozen::at_entry(reference, None);
    let sel = unknown_columns(point, free);
    determining_system(problem, point, free, method, &fz, &sel)
}

/// Full residual and Jacobian of a correction: determining system, delay
/// boundary rows, steplength rows and extra conditions. Columns are the flat
/// layout plus tz (if present).
#[allow(clippy::too_many_arguments)]
pub(crate) fn full_system(
    problem: &ProblemFunctions,
    point: &Point,
    free: &[usize],
    steps: &[(Vector, Vector)],
    method: &PointMethod,
    fz: &Frozen,
    d_nr: Option<usize>,
    tz: Option<f64>,
    sel: &[usize],
) -> Result<(Vector, Mat)> {
    let l = FlatLayout::of(point);
    let ncols = l.len + usize::from(tz.is_some());
    let (r0, j0) = determining_system(problem, point, free, method, fz, sel)?;
    let mut blocks: Vec<(Vector, Mat)> = vec![(r0, j0)];
    if let Some(d) = d_nr {
        blocks.push(delay_rows(problem, point, free, d, tz, sel)?);
    }
    if !steps.is_empty() {
        let flat = flatten(point);
        let mut r = Vector::zeros(steps.len());
        let mut j = Mat::zeros(steps.len(), l.len);
        for (k, (coef, p0)) in steps.iter().enumerate() {
            r[k] = coef.dot(&(&flat - p0));
            j.set_row(k, &coef.transpose());
        }
        blocks.push((r, j));
    }
    if method.extra_condition {
        let (vals, grads) = problem.eval_extra_conditions(point)?;
        let mut r = Vector::zeros(vals.len());
        let mut j = Mat::zeros(vals.len(), l.len);
        for (k, (v, g)) in vals.iter().zip(&grads).enumerate() {
            if g.kind() != point.kind() {
                return Err(Error::Condition(format!("gradient of kind {} for a {} point", g.kind(), point.kind())));
            }
            let gf = flatten(&align_profile(point, g));
            if gf.len() != l.len {
                return Err(Error::Condition("extra-condition gradient has the wrong shape".into()));
            }
            r[k] = *v;
            j.set_row(k, &gf.transpose());
        }
        blocks.push((r, j));
    }
    let rows: usize = blocks.iter().map(|b| b.0.len()).sum();
    let mut res = Vector::zeros(rows);
    let mut jac = Mat::zeros(rows, ncols);
    let mut at = 0;
    for (r, j) in blocks {
        let k = r.len();
        res.rows_mut(at, k).copy_from(&r);
        let c = j.ncols().min(ncols);
        jac.view_mut((at, 0), (k, c)).copy_from(&j.columns(0, c));
        at += k;
    }
    Ok((res, jac))
}

/// Newton correction of a point.
pub fn correct(
    problem: &ProblemFunctions,
    point0: &Point,
    free: &[usize],
    step_conds: &[Point],
    method: &PointMethod,
    opts: &CorrectOptions,
) -> Result<CorrectionReport> {
    check_free(problem, free)?;
    for s in step_conds {
        if s.kind() != point0.kind() {
            return Err(kind_error(point0.kind(), s.kind()));
        }
    }
    match (point0.kind(), opts.d_nr, opts.tz) {
        (_, None, Some(_)) => return Err(Error::Usage("tz given without a delay number".into())),
        (PointKind::Stst, Some(_), None) | (PointKind::Psol, Some(_), Some(_)) | (_, None, None) => {}
        (k, Some(_), _) => {
            return Err(Error::Usage(format!("delay boundary correction not available for {} points", k)))
        }
    }
    let orbit = matches!(point0.kind(), PointKind::Psol | PointKind::Hcli);
    let first = newton(problem, point0, free, step_conds, method, opts)?;
    let explicit = first.point.profile().map_or(false, |p| p.has_explicit_mesh());
    if !(opts.adapt && orbit && explicit) || !first.success {
        return Ok(first);
    }
    let prof = first.point.profile().unwrap();
    let adapted = collocation::remesh(&first.point, prof.degree(), NewMesh::Intervals(prof.intervals()))?;
    let mut o2 = opts.clone();
    o2.tz = first.tz;
    let mut second = newton(problem, &adapted, free, step_conds, method, &o2)?;
    let mut events = first.events;
    events.append(&mut second.events);
    second.events = events;
    second.iterations += first.iterations;
    Ok(second)
}

fn newton(
    problem: &ProblemFunctions,
    point0: &Point,
    free: &[usize],
    step_conds: &[Point],
    method: &PointMethod,
    opts: &CorrectOptions,
) -> Result<CorrectionReport> {
    let fz = Frozen::at_entry(point0, opts.previous.as_ref());
    let mut point = point0.without_stability();
    let l = FlatLayout::of(&point);
    let p0 = flatten(&point);
    let steps: Vec<(Vector, Vector)> = step_conds
        .iter()
        .map(|s| (flatten(&align_profile(&point, s)), p0.clone()))
        .collect();
    let mut sel = unknown_columns(&point, free);
    let mut tz = if point.kind() == PointKind::Psol { opts.tz } else { None };
    if tz.is_some() {
        sel.push(l.len);
    }
    let mut events = Vec::new();
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut warned = false;
    let mut last = f64::INFINITY;
    for it in 1..=method.newton_max_iterations {
        let (res, jac) = full_system(problem, &point, free, &steps, method, &fz, opts.d_nr, tz, &sel)?;
        let r = linalg::inf_norm(&res);
        last = r;
        trace.push(r);
        if method.print_residual_info {
            events.push(
                Event::new(EventKind::Residual, format!("it={}, res={:e}", it, r))
                    .with_payload(serde_json::json!({ "it": it, "res": r })),
            );
        }
        if !r.is_finite() || r <= method.halting_accuracy {
            break;
        }
        if it > method.newton_nmon_iterations + 1 && r > prev {
            break;
        }
        prev = r;
        let js = jac.select_columns(sel.iter());
        let dx = if js.nrows() == js.ncols() {
            linalg::solve_square(&js, &res)
        } else {
            if !warned {
                warned = true;
                events.push(Event::new(
                    EventKind::LeastSquares,
                    format!("{} equations for {} unknowns: least-squares step", js.nrows(), js.ncols()),
                ));
            }
            linalg::solve_least_squares(&js, &res)
        };
        let dx = match dx {
            Some(dx) => dx,
            None => {
                events.push(Event::new(EventKind::Warning, "singular Jacobian in Newton iteration"));
                break;
            }
        };
        let mut flat = flatten(&point);
        for (k, &c) in sel.iter().enumerate() {
            if c < l.len {
                flat[c] -= dx[k];
            } else if let Some(t) = tz.as_mut() {
                *t -= dx[k];
            }
        }
        point = unflatten(&point, &flat);
        iterations = it;
    }
    let success = last <= method.minimal_accuracy;
    Ok(CorrectionReport { point, success, iterations, residual: last, trace, events, tz: tz.map(wrap_unit) })
}

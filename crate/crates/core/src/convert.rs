//! Constructors switching between point kinds. All outputs are approximate
//! and meant to be corrected by the caller.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::collocation::{floquet_mode, interp_profile};
use crate::corrector::{correct, CorrectOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, Mat, Vector};
use crate::model::{
    default_point_method, equidistant_mesh, mesh_from_intervals, point_axpy, point_normalize,
    ConnectingOrbit, FoldPoint, HopfPoint, PeriodicOrbit, PiecewiseProfile, Point, PointKind,
    Stability, StabilityMethod, SteadyState,
};
use crate::spectrum::{correct_root, linearize_steady, stst_stability, LinearizedDde};
use crate::system::ProblemFunctions;

/// Steady states contained in a point: one for stst/fold/hopf, the two end
/// states of a connecting orbit.
pub fn to_stst(point: &Point) -> Result<Vec<Point>> {
    let st = |par: &[f64], x: &Vector| {
        Point::Stst(SteadyState { parameter: par.to_vec(), x: x.clone(), stability: None })
    };
    match point {
        Point::Stst(s) => Ok(vec![st(&s.parameter, &s.x)]),
        Point::Fold(s) => Ok(vec![st(&s.parameter, &s.x)]),
        Point::Hopf(s) => Ok(vec![st(&s.parameter, &s.x)]),
        Point::Hcli(h) => Ok(vec![st(&h.parameter, &h.x1), st(&h.parameter, &h.x2)]),
        Point::Psol(_) => Err(Error::Usage("a periodic orbit has no steady state".into())),
    }
}

fn roots_of(problem: &ProblemFunctions, point: &Point, method: &StabilityMethod) -> Result<Vec<Complex64>> {
    let stab = match point.stability() {
        Some(s) => s.clone(),
        None => stst_stability(problem, point, method)?.0,
    };
    match stab {
        Stability::Roots { l0, l1, .. } => Ok(if l1.is_empty() { l0 } else { l1 }),
        Stability::Multipliers { .. } => Err(Error::Usage("steady-state roots expected".into())),
    }
}

/// Fold seed from a steady state or Hopf point: v spans the null direction of
/// Δ(0).
pub fn to_fold(problem: &ProblemFunctions, point: &Point, method: &StabilityMethod) -> Result<Point> {
    let (par, x) = match point {
        Point::Stst(s) => (&s.parameter, &s.x),
        Point::Hopf(h) => (&h.parameter, &h.x),
        Point::Fold(f) => return Ok(Point::Fold(FoldPoint { stability: None, ..f.clone() })),
        other => return Err(Error::Usage(format!("no fold seed from a {} point", other.kind()))),
    };
    let roots = roots_of(problem, point, method)?;
    if !roots.iter().any(|z| z.im.abs() <= 1e-8 * (1.0 + z.norm())) {
        return Err(Error::Degenerate("no real characteristic root for a fold seed".into()));
    }
    let lin = linearize_steady(problem, point, method.delay_accuracy)?;
    let d0 = crate::spectrum::char_matrix(&lin, Complex64::new(0.0, 0.0));
    let v = linalg::null_vector(&d0).map(|z| z.re);
    let fold = Point::Fold(FoldPoint { parameter: par.clone(), x: x.clone(), v, stability: None });
    point_normalize(&fold)
}

/// Hopf seed from the root pair closest to the imaginary axis. For each
/// excluded frequency the root with the closest imaginary part is dropped, as
/// are roots within 1e-6·(1+|ω|) of it; a Hopf input excludes its own ω.
pub fn to_hopf(
    problem: &ProblemFunctions,
    point: &Point,
    excludefreqs: &[f64],
    method: &StabilityMethod,
) -> Result<Point> {
    let (par, x) = match point {
        Point::Stst(s) => (&s.parameter, &s.x),
        Point::Fold(f) => (&f.parameter, &f.x),
        Point::Hopf(h) => (&h.parameter, &h.x),
        other => return Err(Error::Usage(format!("no Hopf seed from a {} point", other.kind()))),
    };
    let mut exclude: Vec<f64> = excludefreqs.iter().map(|w| w.abs()).collect();
    if let Point::Hopf(h) = point {
        exclude.push(h.omega.abs());
    }
    let roots = roots_of(problem, point, method)?;
    let mut cand: Vec<Complex64> = roots
        .into_iter()
        .filter(|z| z.im > 1e-8 * (1.0 + z.norm()))
        .collect();
    for &w in &exclude {
        let tol = 1e-6 * (1.0 + w);
        if let Some((k, _)) = cand
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.im - w).abs().partial_cmp(&(b.1.im - w).abs()).unwrap())
        {
            cand.remove(k);
        }
        cand.retain(|z| (z.im - w).abs() > tol);
    }
    let best = cand
        .iter()
        .cloned()
        .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
        .ok_or_else(|| Error::Degenerate("no complex characteristic root for a Hopf seed".into()))?;
    let lin = linearize_steady(problem, point, method.delay_accuracy)?;
    let c = correct_root(&lin, best, method);
    let (omega, v) = if c.converged && c.lambda.im > 0.0 {
        (c.lambda.im, c.v)
    } else {
        let d = crate::spectrum::char_matrix(&lin, Complex64::new(0.0, best.im));
        (best.im, linalg::null_vector(&d))
    };
    let hopf = Point::Hopf(HopfPoint { parameter: par.clone(), x: x.clone(), v, omega, stability: None });
    point_normalize(&hopf)
}

/// Periodic-orbit seed x* + amplitude·Re(v e^{2πit}) on an equidistant mesh,
/// with the steplength condition along the amplitude direction.
pub fn to_psol(
    point: &Point,
    amplitude: f64,
    degree: usize,
    intervals: usize,
) -> Result<(Point, Point)> {
    let h = match point_normalize(point)? {
        Point::Hopf(h) => h,
        other => return Err(Error::Usage(format!("no periodic-orbit seed from a {} point", other.kind()))),
    };
    if h.omega == 0.0 {
        return Err(Error::Degenerate("zero Hopf frequency".into()));
    }
    if degree == 0 || intervals == 0 {
        return Err(Error::Mesh("degree and interval count must be positive".into()));
    }
    let mesh = equidistant_mesh(degree, intervals);
    let n = h.x.len();
    let dir = Mat::from_fn(n, mesh.len(), |r, j| {
        let th = 2.0 * PI * mesh[j];
        h.v[r].re * th.cos() - h.v[r].im * th.sin()
    });
    let vals = Mat::from_fn(n, mesh.len(), |r, j| h.x[r] + amplitude * dir[(r, j)]);
    let psol = Point::Psol(PeriodicOrbit {
        parameter: h.parameter.clone(),
        profile: PiecewiseProfile::new(Some(mesh.clone()), degree, vals)?,
        period: 2.0 * PI / h.omega.abs(),
        stability: None,
    });
    let step = Point::Psol(PeriodicOrbit {
        parameter: vec![0.0; h.parameter.len()],
        profile: PiecewiseProfile::new(Some(mesh), degree, dir)?,
        period: 0.0,
        stability: None,
    });
    Ok((psol, step))
}

/// Period-doubled seed: two copies of the orbit on the concatenated mesh,
/// perturbed by ± the Floquet eigenfunction of the multiplier nearest −1.
/// `amplitude` defaults to 1e-2 of the orbit amplitude.
pub fn to_psol_doubled(
    problem: &ProblemFunctions,
    point: &Point,
    method: &StabilityMethod,
    amplitude: Option<f64>,
) -> Result<(Point, Point)> {
    let p = point.as_psol()?;
    let (mu, mode) = floquet_mode(problem, p, method, Complex64::new(-1.0, 0.0))?;
    if (mu + 1.0).norm() > 0.5 {
        return Err(Error::Degenerate(format!("no multiplier near -1 (closest {:.4})", mu)));
    }
    // eigenfunction made real: rotate by the phase of its largest entry
    let ph = crate::model::phase_of_largest(mode.as_slice());
    let phi = mode.map(|z| (z * ph).re);
    let prof = &p.profile;
    let amp = amplitude.unwrap_or_else(|| 1e-2 * profile_amplitude(prof));
    let d = prof.degree();
    let mesh = prof.mesh();
    let cols = mesh.len();
    let n = prof.dim();
    let mut new_mesh = Vec::with_capacity(2 * cols - 1);
    new_mesh.extend(mesh.iter().map(|t| t / 2.0));
    new_mesh.extend(mesh[1..].iter().map(|t| 0.5 + t / 2.0));
    let dir = Mat::from_fn(n, 2 * cols - 1, |r, j| {
        if j < cols {
            phi[(r, j)]
        } else {
            -phi[(r, j - cols + 1)]
        }
    });
    let vals = Mat::from_fn(n, 2 * cols - 1, |r, j| {
        let base = if j < cols { prof.values()[(r, j)] } else { prof.values()[(r, j - cols + 1)] };
        base + amp * dir[(r, j)]
    });
    new_mesh[2 * cols - 2] = 1.0;
    let doubled = Point::Psol(PeriodicOrbit {
        parameter: p.parameter.clone(),
        profile: PiecewiseProfile::new(Some(new_mesh.clone()), d, vals)?,
        period: 2.0 * p.period,
        stability: None,
    });
    let step = Point::Psol(PeriodicOrbit {
        parameter: vec![0.0; p.parameter.len()],
        profile: PiecewiseProfile::new(Some(new_mesh), d, dir)?,
        period: 0.0,
        stability: None,
    });
    Ok((doubled, step))
}

/// Periodic orbit from a connecting orbit; the steplength condition pins the
/// period.
pub fn to_psol_from_hcli(point: &Point) -> Result<(Point, Point)> {
    let h = point.as_hcli()?;
    let psol = Point::Psol(PeriodicOrbit {
        parameter: h.parameter.clone(),
        profile: h.profile.clone(),
        period: h.period,
        stability: None,
    });
    let mut step = point_axpy(0.0, &psol, None)?;
    if let Point::Psol(s) = &mut step {
        s.period = 1.0;
    }
    Ok((psol, step))
}

/// Part of a periodic orbit between representation points `first` and
/// `last` (0-based, both on interval boundaries), rescaled to [0,1] with the
/// period shortened accordingly. The result is generally not periodic and is
/// meant as input for [`to_hcli`].
pub fn orbit_segment(point: &Point, first: usize, last: usize) -> Result<Point> {
    let p = point.as_psol()?;
    let d = p.profile.degree();
    let mesh = p.profile.mesh();
    if first % d != 0 || last % d != 0 || last <= first || last >= mesh.len() {
        return Err(Error::Usage(format!(
            "segment {}..{} is not a range of interval boundaries of a {}-point mesh",
            first,
            last,
            mesh.len()
        )));
    }
    let (t0, t1) = (mesh[first], mesh[last]);
    let sub: Vec<f64> = mesh[first..=last].iter().map(|t| (t - t0) / (t1 - t0)).collect();
    let vals = p.profile.values().columns(first, last - first + 1).into_owned();
    Ok(Point::Psol(PeriodicOrbit {
        parameter: p.parameter.clone(),
        profile: PiecewiseProfile::new(Some(sub), d, vals)?,
        period: p.period * (t1 - t0),
        stability: None,
    }))
}

fn profile_amplitude(prof: &PiecewiseProfile) -> f64 {
    let v = prof.values();
    (0..v.nrows())
        .map(|r| {
            let row = v.row(r);
            let (lo, hi) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Connecting-orbit seed from a periodic orbit that spends a long time near
/// a saddle. The plateau is the longest run (in time) of consecutive
/// representation points within 1e-2·amplitude of one of them; its state is
/// corrected to an equilibrium x*. The interval containing the point closest
/// to x* is removed, together with following intervals until the start
/// deviates from x* mostly (90%) along the unstable eigenspace; the rest is
/// rotated to start right after the removed part and rescaled to [0,1]. The unstable roots of x* give λ_v, v and (from the
/// transposed problem) λ_w, w; α and ε come from projecting u(0) − x* on v.
pub fn to_hcli(problem: &ProblemFunctions, point: &Point, method: &StabilityMethod) -> Result<Point> {
    let p = point.as_psol()?;
    let prof = &p.profile;
    let n = prof.dim();
    let d = prof.degree();
    let mesh = prof.mesh();
    let vals = prof.values();
    let cols = mesh.len();
    let amp = profile_amplitude(prof);
    if amp == 0.0 {
        return Err(Error::Degenerate("constant profile is not near a connecting orbit".into()));
    }
    let tol = 1e-2 * amp;
    // cyclic list of distinct points 0..cols-1 (last equals first in time)
    let np = cols - 1;
    let col = |j: usize| vals.column(j % np).into_owned();
    let mut best = (0usize, -1.0f64, 0usize);
    for j in 0..np {
        let uj = col(j);
        let mut fwd = 0;
        while fwd < np && (col(j + fwd + 1) - &uj).norm() <= tol {
            fwd += 1;
        }
        let mut back = 0;
        while back < np && (col(j + np - back - 1) - &uj).norm() <= tol {
            back += 1;
        }
        let t = |k: isize| mesh[k.rem_euclid(np as isize) as usize] + k.div_euclid(np as isize) as f64;
        let (t_hi, t_lo) = (t(j as isize + fwd as isize), t(j as isize - back as isize));
        let dur = t_hi - t_lo;
        if dur > best.1 {
            best = (j, dur, fwd + back + 1);
        }
    }
    if best.2 < 2 {
        return Err(Error::Degenerate("no plateau near an equilibrium in the profile".into()));
    }
    let seed = Point::Stst(SteadyState { parameter: p.parameter.clone(), x: col(best.0), stability: None });
    let rep = correct(problem, &seed, &[], &[], &default_point_method(PointKind::Stst), &CorrectOptions::default())?;
    if !rep.success {
        return Err(Error::Degenerate("plateau state does not correct to an equilibrium".into()));
    }
    let xs = rep.point.state().unwrap().clone();
    // closest representation point
    let (jc, dist) = (0..np)
        .map(|j| (j, (col(j) - &xs).norm()))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if dist > tol {
        return Err(Error::Degenerate(format!(
            "profile stays {:.3e} away from the equilibrium (tolerance {:.3e})",
            dist, tol
        )));
    }
    // unstable eigenpairs of x*
    let st = Point::Stst(SteadyState { parameter: p.parameter.clone(), x: xs.clone(), stability: None });
    let roots = roots_of(problem, &st, method)?;
    let lin = linearize_steady(problem, &st, method.delay_accuracy)?;
    let lin_t = LinearizedDde { a: lin.a.iter().map(|a| a.transpose()).collect(), tau: lin.tau.clone() };
    let mut lambda_v = Vec::new();
    let mut vs: Vec<CVec> = Vec::new();
    let mut ws: Vec<CVec> = Vec::new();
    for z in roots.iter().filter(|z| z.re > 0.0) {
        let cv = correct_root(&lin, *z, method);
        let cw = correct_root(&lin_t, cv.lambda, method);
        let mut lam = cv.lambda;
        let (mut v, mut w) = (cv.v, cw.v);
        if lam.im.abs() <= 1e-10 * (1.0 + lam.norm()) {
            lam.im = 0.0;
            v = realify(&v);
            w = realify(&w);
        }
        lambda_v.push(lam);
        vs.push(v);
        ws.push(w);
    }
    if lambda_v.is_empty() {
        return Err(Error::Degenerate("equilibrium has no unstable characteristic roots".into()));
    }
    let s = lambda_v.len();
    let vmat = CMat::from_fn(n, s, |r, k| vs[k][r]);
    let wmat = CMat::from_fn(n, s, |r, k| ws[k][r]);
    // real basis of the unstable eigenspace: u − x* ≈ Re Σ β_k v_k
    let mut basis = Mat::zeros(n, 2 * s);
    for k in 0..s {
        for r in 0..n {
            basis[(r, 2 * k)] = vmat[(r, k)].re;
            basis[(r, 2 * k + 1)] = -vmat[(r, k)].im;
        }
    }
    let project = |dev: &Vector| linalg::solve_least_squares(&basis, dev);

    let l = np / d;
    let first = if jc % d != 0 {
        jc / d
    } else {
        // interval endpoint: take the neighbour interval whose far end is closer
        let i = jc / d;
        let left = (i + l - 1) % l;
        let dl = (col(left * d) - &xs).norm();
        let dr = (col((i + 1) * d) - &xs).norm();
        if dl <= dr {
            left
        } else {
            i
        }
    };
    // leave out further intervals until the new start departs along the
    // unstable eigenspace
    let mut removed = 1;
    while removed < l / 2 {
        let dev = col(((first + removed) % l) * d) - &xs;
        let share = project(&dev).map(|b| 1.0 - (&dev - &basis * b).norm() / dev.norm().max(f64::MIN_POSITIVE));
        if share.map_or(false, |sh| sh >= 0.9) {
            break;
        }
        removed += 1;
    }
    if removed == l / 2 {
        removed = 1;
    }
    let ip = prof.interval_points();
    // interval points continued periodically
    let tp = |i: usize| ip[i % l] + (i / l) as f64;
    let removed_len = tp(first + removed) - tp(first);
    let keep = 1.0 - removed_len;
    let start = tp(first + removed);
    let mut new_ip = vec![0.0];
    let mut src_cols: Vec<Vec<usize>> = Vec::new();
    for q in 0..l - removed {
        let i = first + removed + q;
        new_ip.push((tp(i + 1) - start) / keep);
        src_cols.push((0..=d).map(|k| (i % l) * d + k).collect());
    }
    let last = new_ip.len() - 1;
    new_ip[last] = 1.0;
    let new_mesh = mesh_from_intervals(&new_ip, d);
    let mut nv = Mat::zeros(n, new_mesh.len());
    for (q, cs) in src_cols.iter().enumerate() {
        for (k, &c) in cs.iter().enumerate() {
            let target = q * d + k;
            let v = vals.column(c).into_owned();
            if k == 0 && q > 0 {
                // junction: average the end of the previous piece with this start
                let prev = nv.column(target).into_owned();
                nv.set_column(target, &((prev + v) * 0.5));
            } else {
                nv.set_column(target, &v);
            }
        }
    }
    let profile = PiecewiseProfile::new(Some(new_mesh), d, nv)?;
    let period = p.period * keep;
    let u0 = interp_profile(&profile, 0.0) - &xs;
    let beta = project(&u0).ok_or_else(|| Error::Numeric("projection onto unstable eigenvectors failed".into()))?;
    let beta: Vec<Complex64> = (0..s).map(|k| Complex64::new(beta[2 * k], beta[2 * k + 1])).collect();
    let eps = beta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let alpha: Vec<Complex64> = if eps > 0.0 {
        beta.iter().map(|z| z / eps).collect()
    } else {
        let mut a = vec![Complex64::new(0.0, 0.0); s];
        a[0] = Complex64::new(1.0, 0.0);
        a
    };
    Ok(Point::Hcli(ConnectingOrbit {
        parameter: p.parameter.clone(),
        profile,
        period,
        x1: xs.clone(),
        x2: xs,
        lambda_w: lambda_v.clone(),
        lambda_v,
        v: vmat,
        w: wmat,
        alpha,
        epsilon: eps,
    }))
}

/// Real unit vector spanning a complex vector with (numerically) real
/// direction, sign fixed by the largest entry.
fn realify(v: &CVec) -> CVec {
    let ph = crate::model::phase_of_largest(v.as_slice());
    let r = v.map(|z| Complex64::new((z * ph).re, 0.0));
    let nr = r.norm();
    if nr == 0.0 {
        v.clone()
    } else {
        r / Complex64::new(nr, 0.0)
    }
}

//! Characteristic roots of steady states: LMS discretization of the linearized
//! equation, eigenvalues of the resulting one-step map, Newton correction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::linalg::{self, CMat, CVec, Mat};
use crate::model::{Point, StabilityMethod, Stability};
use crate::poly::integer_stencil_weights;
use crate::system::ProblemFunctions;

/// Linearization at a steady state: A_0..A_m and delay values τ_1..τ_m.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedDde {
    pub a: Vec<Mat>,
    pub tau: Vec<f64>,
}

impl LinearizedDde {
    pub fn dim(&self) -> usize {
        self.a[0].nrows()
    }

    /// Largest delay among terms with a nonzero coefficient matrix.
    pub fn effective_tau_max(&self) -> f64 {
        self.tau
            .iter()
            .zip(self.a.iter().skip(1))
            .filter(|(_, a)| a.iter().any(|&x| x != 0.0))
            .map(|(&t, _)| t)
            .fold(0.0, f64::max)
    }
}

/// Δ(λ) = λI − A_0 − Σ A_i e^{−λτ_i}.
pub fn char_matrix(lin: &LinearizedDde, lambda: Complex64) -> CMat {
    let n = lin.dim();
    let mut d = CMat::identity(n, n) * lambda - linalg::to_complex_mat(&lin.a[0]);
    for (i, &t) in lin.tau.iter().enumerate() {
        let e = (-lambda * t).exp();
        d -= linalg::to_complex_mat(&lin.a[i + 1]) * e;
    }
    d
}

/// dΔ/dλ = I + Σ τ_i A_i e^{−λτ_i}.
pub fn char_matrix_derivative(lin: &LinearizedDde, lambda: Complex64) -> CMat {
    let n = lin.dim();
    let mut d = CMat::identity(n, n);
    for (i, &t) in lin.tau.iter().enumerate() {
        let e = (-lambda * t).exp() * t;
        d += linalg::to_complex_mat(&lin.a[i + 1]) * e;
    }
    d
}

/// Linear multistep scheme with its interpolation stencil for past values.
#[derive(Debug, Clone, PartialEq)]
pub struct LmsScheme {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: f64,
    pub r: usize,
    pub s: usize,
}

impl LmsScheme {
    pub fn from_method(method: &StabilityMethod) -> Result<LmsScheme> {
        let alpha = method.lms_parameter_alpha.clone();
        let beta = method.lms_parameter_beta.clone();
        if alpha.len() < 2 || alpha.len() != beta.len() {
            return Err(Error::Config("LMS coefficient lists must have equal length ≥ 2".into()));
        }
        if alpha.iter().sum::<f64>().abs() > 1e-10 * alpha.iter().map(|a| a.abs()).sum::<f64>() {
            return Err(Error::Config("LMS coefficients are not consistent (Σα ≠ 0)".into()));
        }
        let (r, s) = stencil_spans(method.interpolation_order);
        Ok(LmsScheme { alpha, beta, rho: method.lms_parameter_rho, r, s })
    }

    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn is_explicit(&self) -> bool {
        *self.beta.last().unwrap() == 0.0
    }
}

/// Most local split r + s = order with r ≤ s ≤ r + 2.
pub fn stencil_spans(order: usize) -> (usize, usize) {
    let r = order / 2;
    (r, order - r)
}

/// Largest radius ρ (scanned in steps `dr`) such that on every circle |z| ≤ ρ
/// the principal root of Σ(α_j − zβ_j)ζ^j approximates e^z within relative
/// error `eps`.
pub fn lms_safety_radius(alpha: &[f64], beta: &[f64], eps: f64, dr: f64) -> f64 {
    let k = alpha.len() - 1;
    let angles = 720;
    let mut radius = 0.0;
    loop {
        let r = radius + dr;
        if r > 10.0 {
            return radius;
        }
        for a in 0..angles {
            let th = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
            let z = Complex64::from_polar(r, th);
            let coeff: Vec<Complex64> =
                (0..=k).map(|j| Complex64::new(alpha[j], 0.0) - z * beta[j]).collect();
            let roots = poly_roots(&coeff);
            let ez = z.exp();
            let err = roots.iter().map(|&zeta| (zeta - ez).norm()).fold(f64::INFINITY, f64::min);
            if !(err <= eps * ez.norm()) {
                return radius;
            }
        }
        radius = (r / dr).round() * dr;
    }
}

/// Roots of Σ c_j ζ^j via the companion matrix.
fn poly_roots(c: &[Complex64]) -> Vec<Complex64> {
    let mut deg = c.len() - 1;
    while deg > 0 && c[deg].norm() == 0.0 {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut m = CMat::zeros(deg, deg);
    for j in 0..deg {
        m[(0, j)] = -c[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    linalg::complex_eigenvalues(&m).unwrap_or_default()
}

/// Upper bound for |λ| over roots with Re λ ≥ γ.
pub fn root_modulus_bound(lin: &LinearizedDde, gamma: f64) -> f64 {
    let norm1 = |a: &Mat| {
        (0..a.ncols()).map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let norminf = |a: &Mat| {
        (0..a.nrows()).map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let bound = |norm: &dyn Fn(&Mat) -> f64| {
        let mut b = norm(&lin.a[0]);
        for (i, &t) in lin.tau.iter().enumerate() {
            b += norm(&lin.a[i + 1]) * (-gamma * t).exp();
        }
        b
    };
    bound(&norm1).min(bound(&norminf))
}

/// Step size for the LMS discretization: h = ρ / (bound on |λ| over the
/// targeted roots), clamped to [minimal_time_step·τ, maximal_time_step·τ].
/// Hitting the lower clamp produces a warning event.
pub fn choose_timestep(
    method: &StabilityMethod,
    tau_max: f64,
    root_bound: f64,
) -> (f64, Option<Event>) {
    let hmin = method.minimal_time_step * tau_max;
    let hmax = method.maximal_time_step * tau_max;
    if hmin >= hmax {
        return (hmax, None);
    }
    let h = if root_bound > 0.0 { method.lms_parameter_rho / root_bound } else { hmax };
    if h < hmin {
        let ev = Event::new(
            EventKind::StepSize,
            format!("time step {:.3e} below minimum; set to minimal value {:.3e}", h, hmin),
        )
        .with_payload(serde_json::json!({ "heuristic": h, "h": hmin }));
        (hmin, Some(ev))
    } else if h > hmax {
        (hmax, None)
    } else {
        (h, None)
    }
}

/// λ from a multiplier μ of the time-h map.
pub fn multiplier_to_root(mu: Complex64, h: f64) -> Complex64 {
    let m = mu.norm();
    Complex64::new(m.ln() / h, (mu.im / m).clamp(-1.0, 1.0).asin() / h)
}

fn sort_roots(v: &mut [Complex64]) {
    v.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// One-step companion map of the LMS discretization with step h.
pub fn lms_companion(lin: &LinearizedDde, scheme: &LmsScheme, h: f64) -> Result<Mat> {
    let n = lin.dim();
    let k = scheme.steps();
    // coefficient blocks indexed by lag q (0 = new point)
    let mut blocks: Vec<Mat> = vec![Mat::zeros(n, n); k + 1];
    let add = |blocks: &mut Vec<Mat>, q: usize, m: &Mat| {
        if q >= blocks.len() {
            blocks.resize(q + 1, Mat::zeros(n, n));
        }
        blocks[q] += m;
    };
    let eye = Mat::identity(n, n);
    for j in 0..=k {
        let lag = k - j;
        add(&mut blocks, lag, &(&eye * scheme.alpha[j]));
        let b = scheme.beta[j];
        if b == 0.0 {
            continue;
        }
        add(&mut blocks, lag, &(&lin.a[0] * (-h * b)));
        for (i, &tau) in lin.tau.iter().enumerate() {
            let ai = &lin.a[i + 1];
            if ai.iter().all(|&x| x == 0.0) {
                continue;
            }
            let pos = -(lag as f64) - tau / h;
            let mut base = pos.floor();
            let hi = base + scheme.s as f64;
            if hi > 0.0 {
                base -= hi;
            }
            let eps = pos - base;
            let w = integer_stencil_weights(scheme.r, scheme.s, eps);
            for (l, &wl) in w.iter().enumerate() {
                if wl == 0.0 {
                    continue;
                }
                let idx = base as i64 - scheme.r as i64 + l as i64;
                let q = (-idx) as usize;
                add(&mut blocks, q, &(ai * (-h * b * wl)));
            }
        }
    }
    let big_n = blocks.len() - 1;
    let c0 = blocks[0].clone().lu();
    let mut m = Mat::zeros(n * big_n, n * big_n);
    for q in 1..=big_n {
        let sol = c0
            .solve(&blocks[q])
            .ok_or_else(|| Error::Numeric("singular implicit LMS block".into()))?;
        m.view_mut((0, n * (q - 1)), (n, n)).copy_from(&(-sol));
    }
    for b in 1..big_n {
        m.view_mut((n * b, n * (b - 1)), (n, n)).copy_from(&eye);
    }
    Ok(m)
}

/// Approximate the rightmost characteristic roots.
pub fn approximate_roots(
    lin: &LinearizedDde,
    method: &StabilityMethod,
) -> Result<(f64, Vec<Complex64>, Vec<Event>)> {
    let tau_max = lin.effective_tau_max();
    let mut events = Vec::new();
    if tau_max <= 0.0 {
        let mut a = lin.a[0].clone();
        for (i, &t) in lin.tau.iter().enumerate() {
            if t <= 0.0 {
                a += &lin.a[i + 1];
            }
        }
        let mut l0 = linalg::eigenvalues(&a)?;
        if let Some(g) = method.minimal_real_part {
            l0.retain(|z| z.re >= g);
        }
        sort_roots(&mut l0);
        l0.truncate(method.max_number_of_eigenvalues);
        return Ok((0.0, l0, events));
    }
    let scheme = LmsScheme::from_method(method)?;
    let gamma = method.minimal_real_part.unwrap_or(-1.0 / tau_max);
    let (h, ev) = choose_timestep(method, tau_max, root_modulus_bound(lin, gamma));
    events.extend(ev);
    let m = lms_companion(lin, &scheme, h)?;
    let mus = linalg::eigenvalues(&m)?;
    let mut l0: Vec<Complex64> = mus
        .into_iter()
        .filter(|mu| mu.norm() > 0.0)
        .filter(|mu| Complex64::new(mu.norm().ln(), mu.arg()).norm() <= scheme.rho)
        .map(|mu| multiplier_to_root(mu, h))
        .filter(|l| l.re >= gamma)
        .collect();
    sort_roots(&mut l0);
    l0.truncate(method.max_number_of_eigenvalues);
    Ok((h, l0, events))
}

/// Result of one root correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedRoot {
    pub lambda: Complex64,
    pub v: CVec,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Newton on {Δ(λ)v = 0, c^H v = 1} from the approximation λ0.
pub fn correct_root(lin: &LinearizedDde, lambda0: Complex64, method: &StabilityMethod) -> CorrectedRoot {
    let n = lin.dim();
    let d0 = char_matrix(lin, lambda0);
    let ev = linalg::complex_eigenvalues(&d0).unwrap_or_default();
    let smallest = ev.iter().cloned().fold(None, |acc: Option<Complex64>, z| match acc {
        Some(a) if a.norm() <= z.norm() => Some(a),
        _ => Some(z),
    });
    let mut v = match smallest {
        Some(mu) => linalg::inverse_iteration(&d0, mu),
        None => linalg::null_vector(&d0),
    };
    let nv = v.norm();
    if nv > 0.0 {
        v /= Complex64::new(nv, 0.0);
    }
    let c = v.clone();
    let mut lambda = lambda0;
    let mut it = 0;
    loop {
        let d = char_matrix(lin, lambda);
        let mut res = CVec::zeros(n + 1);
        res.rows_mut(0, n).copy_from(&(&d * &v));
        res[n] = c.dotc(&v) - 1.0;
        let rn = res.norm();
        if rn <= method.root_accuracy {
            return CorrectedRoot { lambda, v, iterations: it, converged: true, residual: rn };
        }
        if it >= method.max_newton_iterations || !rn.is_finite() {
            return CorrectedRoot { lambda, v, iterations: it, converged: false, residual: rn };
        }
        let dd = char_matrix_derivative(lin, lambda) * &v;
        let mut j = CMat::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&d);
        j.view_mut((0, n), (n, 1)).copy_from(&dd);
        for r in 0..n {
            j[(n, r)] = c[r].conj();
        }
        match linalg::solve_complex(&j, &res) {
            Some(dx) => {
                v -= dx.rows(0, n);
                lambda -= dx[n];
            }
            None => {
                return CorrectedRoot { lambda, v, iterations: it, converged: false, residual: rn }
            }
        }
        it += 1;
    }
}

/// Correct all approximations; returns (l1, n1).
pub fn correct_roots(
    lin: &LinearizedDde,
    l0: &[Complex64],
    method: &StabilityMethod,
) -> (Vec<Complex64>, Option<Vec<i32>>) {
    let corrected: Vec<CorrectedRoot> = l0.iter().map(|&l| correct_root(lin, l, method)).collect();
    if method.remove_unconverged_roots {
        let mut l1: Vec<Complex64> = Vec::new();
        for c in corrected.iter().filter(|c| c.converged) {
            if l1.iter().all(|z| (z - c.lambda).norm() > method.root_accuracy) {
                l1.push(c.lambda);
            }
        }
        sort_roots(&mut l1);
        (l1, None)
    } else {
        let l1 = corrected.iter().map(|c| c.lambda).collect();
        let n1 = corrected
            .iter()
            .map(|c| if c.converged { c.iterations as i32 } else { -1 })
            .collect();
        (l1, Some(n1))
    }
}

/// Linearize a steady-state-like point. Delays slightly below zero (down to
/// delay_accuracy) are set to zero; more negative ones are an error.
pub fn linearize_steady(
    problem: &ProblemFunctions,
    point: &Point,
    delay_accuracy: f64,
) -> Result<LinearizedDde> {
    let x = point
        .state()
        .ok_or_else(|| Error::Usage(format!("no steady state in a {} point", point.kind())))?;
    linearize_at(problem, x, point.parameter(), delay_accuracy)
}

pub fn linearize_at(
    problem: &ProblemFunctions,
    x: &linalg::Vector,
    par: &[f64],
    delay_accuracy: f64,
) -> Result<LinearizedDde> {
    let m = problem.delay_count();
    let mut tau = problem.steady_delays(x, par)?;
    for (j, t) in tau.iter_mut().enumerate() {
        if *t < delay_accuracy {
            return Err(Error::Stability(format!("delay {} is negative ({:.3e})", j + 1, t)));
        }
        if *t < 0.0 {
            *t = 0.0;
        }
    }
    let xx = problem.steady_states(x);
    let mut a = Vec::with_capacity(m + 1);
    for i in 0..=m {
        a.push(problem.dfdx(&xx, par, i)?);
    }
    Ok(LinearizedDde { a, tau })
}

/// Characteristic roots of a stst/fold/hopf point.
pub fn stst_stability(
    problem: &ProblemFunctions,
    point: &Point,
    method: &StabilityMethod,
) -> Result<(Stability, Vec<Event>)> {
    let lin = linearize_steady(problem, point, method.delay_accuracy)?;
    let (h, l0, events) = approximate_roots(&lin, method)?;
    let (l1, n1) = correct_roots(&lin, &l0, method);
    Ok((Stability::Roots { h, l0, l1, n1 }, events))
}

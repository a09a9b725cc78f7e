use std::fmt;

use num_complex::Complex64;

use super::profile::PiecewiseProfile;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, Mat, Vector};

/// Characteristic roots of a steady-state-like point or Floquet multipliers of
/// a periodic orbit.
#[derive(Debug, Clone, PartialEq)]
pub enum Stability {
    Roots {
        h: f64,
        l0: Vec<Complex64>,
        l1: Vec<Complex64>,
        /// Newton iteration counts aligned with `l0` (-1: unconverged); `None`
        /// when unconverged roots were removed.
        n1: Option<Vec<i32>>,
    },
    Multipliers { mu: Vec<Complex64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointKind {
    Stst,
    Fold,
    Hopf,
    Psol,
    Hcli,
}

impl PointKind {
    pub fn name(self) -> &'static str {
        match self {
            PointKind::Stst => "stst",
            PointKind::Fold => "fold",
            PointKind::Hopf => "hopf",
            PointKind::Psol => "psol",
            PointKind::Hcli => "hcli",
        }
    }

    pub fn parse(s: &str) -> Result<PointKind> {
        match s {
            "stst" => Ok(PointKind::Stst),
            "fold" => Ok(PointKind::Fold),
            "hopf" => Ok(PointKind::Hopf),
            "psol" => Ok(PointKind::Psol),
            "hcli" => Ok(PointKind::Hcli),
            other => Err(Error::Config(format!("unknown point kind '{}'", other))),
        }
    }
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub parameter: Vec<f64>,
    pub x: Vector,
    pub stability: Option<Stability>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPoint {
    pub parameter: Vec<f64>,
    pub x: Vector,
    pub v: Vector,
    pub stability: Option<Stability>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfPoint {
    pub parameter: Vec<f64>,
    pub x: Vector,
    pub v: CVec,
    pub omega: f64,
    pub stability: Option<Stability>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub parameter: Vec<f64>,
    pub profile: PiecewiseProfile,
    pub period: f64,
    pub stability: Option<Stability>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectingOrbit {
    pub parameter: Vec<f64>,
    pub profile: PiecewiseProfile,
    pub period: f64,
    pub x1: Vector,
    pub x2: Vector,
    pub lambda_v: Vec<Complex64>,
    pub lambda_w: Vec<Complex64>,
    pub v: CMat,
    pub w: CMat,
    pub alpha: Vec<Complex64>,
    pub epsilon: f64,
}

/// A solution point of one of the five kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Stst(SteadyState),
    Fold(FoldPoint),
    Hopf(HopfPoint),
    Psol(PeriodicOrbit),
    Hcli(ConnectingOrbit),
}

impl Point {
    pub fn kind(&self) -> PointKind {
        match self {
            Point::Stst(_) => PointKind::Stst,
            Point::Fold(_) => PointKind::Fold,
            Point::Hopf(_) => PointKind::Hopf,
            Point::Psol(_) => PointKind::Psol,
            Point::Hcli(_) => PointKind::Hcli,
        }
    }

    pub fn parameter(&self) -> &[f64] {
        match self {
            Point::Stst(p) => &p.parameter,
            Point::Fold(p) => &p.parameter,
            Point::Hopf(p) => &p.parameter,
            Point::Psol(p) => &p.parameter,
            Point::Hcli(p) => &p.parameter,
        }
    }

    pub fn parameter_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Point::Stst(p) => &mut p.parameter,
            Point::Fold(p) => &mut p.parameter,
            Point::Hopf(p) => &mut p.parameter,
            Point::Psol(p) => &mut p.parameter,
            Point::Hcli(p) => &mut p.parameter,
        }
    }

    pub fn stability(&self) -> Option<&Stability> {
        match self {
            Point::Stst(p) => p.stability.as_ref(),
            Point::Fold(p) => p.stability.as_ref(),
            Point::Hopf(p) => p.stability.as_ref(),
            Point::Psol(p) => p.stability.as_ref(),
            Point::Hcli(_) => None,
        }
    }

    pub fn set_stability(&mut self, s: Option<Stability>) {
        match self {
            Point::Stst(p) => p.stability = s,
            Point::Fold(p) => p.stability = s,
            Point::Hopf(p) => p.stability = s,
            Point::Psol(p) => p.stability = s,
            Point::Hcli(_) => {}
        }
    }

    pub fn without_stability(&self) -> Point {
        let mut p = self.clone();
        p.set_stability(None);
        p
    }

    pub fn profile(&self) -> Option<&PiecewiseProfile> {
        match self {
            Point::Psol(p) => Some(&p.profile),
            Point::Hcli(p) => Some(&p.profile),
            _ => None,
        }
    }

    pub fn profile_mut(&mut self) -> Option<&mut PiecewiseProfile> {
        match self {
            Point::Psol(p) => Some(&mut p.profile),
            Point::Hcli(p) => Some(&mut p.profile),
            _ => None,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self {
            Point::Psol(p) => Some(p.period),
            Point::Hcli(p) => Some(p.period),
            _ => None,
        }
    }

    /// Steady-state vector of stst/fold/hopf points.
    pub fn state(&self) -> Option<&Vector> {
        match self {
            Point::Stst(p) => Some(&p.x),
            Point::Fold(p) => Some(&p.x),
            Point::Hopf(p) => Some(&p.x),
            _ => None,
        }
    }

    pub fn as_psol(&self) -> Result<&PeriodicOrbit> {
        match self {
            Point::Psol(p) => Ok(p),
            other => Err(kind_error(PointKind::Psol, other.kind())),
        }
    }

    pub fn as_hcli(&self) -> Result<&ConnectingOrbit> {
        match self {
            Point::Hcli(p) => Ok(p),
            other => Err(kind_error(PointKind::Hcli, other.kind())),
        }
    }

    pub fn as_hopf(&self) -> Result<&HopfPoint> {
        match self {
            Point::Hopf(p) => Ok(p),
            other => Err(kind_error(PointKind::Hopf, other.kind())),
        }
    }
}

pub(crate) fn kind_error(expected: PointKind, found: PointKind) -> Error {
    Error::KindMismatch { expected: expected.name().into(), found: found.name().into() }
}

/// Offsets of every numeric field in the flat real representation of a point.
///
/// Order: parameters; then per kind
/// stst: x; fold: x, v; hopf: x, Re v, Im v, ω; psol: profile (column by
/// column), period; hcli: profile, period, x1, x2, λ_v (re,im pairs),
/// λ_w (pairs), v (per column: re block, im block), w (same), α (pairs), ε.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatLayout {
    pub kind: PointKind,
    pub n: usize,
    pub p: usize,
    pub x: usize,
    pub v: usize,
    pub omega: usize,
    pub profile: usize,
    pub profile_cols: usize,
    pub period: usize,
    pub x1: usize,
    pub x2: usize,
    pub lambda_v: usize,
    pub lambda_w: usize,
    pub vv: usize,
    pub ww: usize,
    pub alpha: usize,
    pub epsilon: usize,
    pub s1: usize,
    pub s2: usize,
    pub len: usize,
}

impl FlatLayout {
    pub fn of(point: &Point) -> FlatLayout {
        let p = point.parameter().len();
        let mut l = FlatLayout {
            kind: point.kind(),
            n: 0,
            p,
            x: p,
            v: 0,
            omega: 0,
            profile: 0,
            profile_cols: 0,
            period: 0,
            x1: 0,
            x2: 0,
            lambda_v: 0,
            lambda_w: 0,
            vv: 0,
            ww: 0,
            alpha: 0,
            epsilon: 0,
            s1: 0,
            s2: 0,
            len: p,
        };
        match point {
            Point::Stst(s) => {
                l.n = s.x.len();
                l.len = p + l.n;
            }
            Point::Fold(s) => {
                l.n = s.x.len();
                l.v = p + l.n;
                l.len = p + 2 * l.n;
            }
            Point::Hopf(s) => {
                l.n = s.x.len();
                l.v = p + l.n;
                l.omega = p + 3 * l.n;
                l.len = l.omega + 1;
            }
            Point::Psol(s) => {
                l.n = s.profile.dim();
                l.profile = p;
                l.profile_cols = s.profile.values().ncols();
                l.period = p + l.n * l.profile_cols;
                l.len = l.period + 1;
            }
            Point::Hcli(s) => {
                let n = s.profile.dim();
                l.n = n;
                l.profile = p;
                l.profile_cols = s.profile.values().ncols();
                l.period = p + n * l.profile_cols;
                l.x1 = l.period + 1;
                l.x2 = l.x1 + n;
                l.s1 = s.lambda_v.len();
                l.s2 = s.lambda_w.len();
                l.lambda_v = l.x2 + n;
                l.lambda_w = l.lambda_v + 2 * l.s1;
                l.vv = l.lambda_w + 2 * l.s2;
                l.ww = l.vv + 2 * n * l.s1;
                l.alpha = l.ww + 2 * n * l.s2;
                l.epsilon = l.alpha + 2 * l.s1;
                l.len = l.epsilon + 1;
            }
        }
        l
    }

    /// Flat index of profile entry (component r, column j).
    pub fn prof(&self, j: usize, r: usize) -> usize {
        self.profile + j * self.n + r
    }
}

/// Flatten every numeric field of a point into a real vector.
pub fn flatten(point: &Point) -> Vector {
    let l = FlatLayout::of(point);
    let mut out = Vector::zeros(l.len);
    out.rows_mut(0, l.p).copy_from_slice(point.parameter());
    match point {
        Point::Stst(s) => out.rows_mut(l.x, l.n).copy_from(&s.x),
        Point::Fold(s) => {
            out.rows_mut(l.x, l.n).copy_from(&s.x);
            out.rows_mut(l.v, l.n).copy_from(&s.v);
        }
        Point::Hopf(s) => {
            out.rows_mut(l.x, l.n).copy_from(&s.x);
            for r in 0..l.n {
                out[l.v + r] = s.v[r].re;
                out[l.v + l.n + r] = s.v[r].im;
            }
            out[l.omega] = s.omega;
        }
        Point::Psol(s) => {
            out.rows_mut(l.profile, l.n * l.profile_cols)
                .copy_from_slice(s.profile.values().as_slice());
            out[l.period] = s.period;
        }
        Point::Hcli(s) => {
            out.rows_mut(l.profile, l.n * l.profile_cols)
                .copy_from_slice(s.profile.values().as_slice());
            out[l.period] = s.period;
            out.rows_mut(l.x1, l.n).copy_from(&s.x1);
            out.rows_mut(l.x2, l.n).copy_from(&s.x2);
            put_complex(&mut out, l.lambda_v, &s.lambda_v);
            put_complex(&mut out, l.lambda_w, &s.lambda_w);
            put_cmat(&mut out, l.vv, &s.v);
            put_cmat(&mut out, l.ww, &s.w);
            put_complex(&mut out, l.alpha, &s.alpha);
            out[l.epsilon] = s.epsilon;
        }
    }
    out
}

fn put_complex(out: &mut Vector, at: usize, z: &[Complex64]) {
    for (k, c) in z.iter().enumerate() {
        out[at + 2 * k] = c.re;
        out[at + 2 * k + 1] = c.im;
    }
}

fn put_cmat(out: &mut Vector, at: usize, m: &CMat) {
    let n = m.nrows();
    for k in 0..m.ncols() {
        for r in 0..n {
            out[at + 2 * n * k + r] = m[(r, k)].re;
            out[at + 2 * n * k + n + r] = m[(r, k)].im;
        }
    }
}

fn get_complex(data: &Vector, at: usize, s: usize) -> Vec<Complex64> {
    (0..s).map(|k| Complex64::new(data[at + 2 * k], data[at + 2 * k + 1])).collect()
}

fn get_cmat(data: &Vector, at: usize, n: usize, s: usize) -> CMat {
    CMat::from_fn(n, s, |r, k| {
        Complex64::new(data[at + 2 * n * k + r], data[at + 2 * n * k + n + r])
    })
}

/// Rebuild a point of the template's shape from flat data (stability dropped).
pub fn unflatten(template: &Point, data: &Vector) -> Point {
    let l = FlatLayout::of(template);
    assert_eq!(data.len(), l.len, "flat vector length mismatch");
    let parameter: Vec<f64> = data.rows(0, l.p).iter().cloned().collect();
    match template {
        Point::Stst(_) => Point::Stst(SteadyState {
            parameter,
            x: data.rows(l.x, l.n).into_owned(),
            stability: None,
        }),
        Point::Fold(_) => Point::Fold(FoldPoint {
            parameter,
            x: data.rows(l.x, l.n).into_owned(),
            v: data.rows(l.v, l.n).into_owned(),
            stability: None,
        }),
        Point::Hopf(_) => Point::Hopf(HopfPoint {
            parameter,
            x: data.rows(l.x, l.n).into_owned(),
            v: CVec::from_fn(l.n, |r, _| Complex64::new(data[l.v + r], data[l.v + l.n + r])),
            omega: data[l.omega],
            stability: None,
        }),
        Point::Psol(s) => {
            let values = Mat::from_column_slice(
                l.n,
                l.profile_cols,
                data.rows(l.profile, l.n * l.profile_cols).as_slice(),
            );
            Point::Psol(PeriodicOrbit {
                parameter,
                profile: s.profile.with_values(values),
                period: data[l.period],
                stability: None,
            })
        }
        Point::Hcli(s) => {
            let values = Mat::from_column_slice(
                l.n,
                l.profile_cols,
                data.rows(l.profile, l.n * l.profile_cols).as_slice(),
            );
            Point::Hcli(ConnectingOrbit {
                parameter,
                profile: s.profile.with_values(values),
                period: data[l.period],
                x1: data.rows(l.x1, l.n).into_owned(),
                x2: data.rows(l.x2, l.n).into_owned(),
                lambda_v: get_complex(data, l.lambda_v, l.s1),
                lambda_w: get_complex(data, l.lambda_w, l.s2),
                v: get_cmat(data, l.vv, l.n, l.s1),
                w: get_cmat(data, l.ww, l.n, l.s2),
                alpha: get_complex(data, l.alpha, l.s1),
                epsilon: data[l.epsilon],
            })
        }
    }
}

fn check_compatible(x: &Point, y: &Point) -> Result<()> {
    if x.kind() != y.kind() {
        return Err(kind_error(x.kind(), y.kind()));
    }
    let (lx, ly) = (FlatLayout::of(x), FlatLayout::of(y));
    let same = lx.n == ly.n && lx.p == ly.p && lx.s1 == ly.s1 && lx.s2 == ly.s2;
    if !same {
        return Err(Error::Config(format!(
            "incompatible {} points (n {} vs {}, p {} vs {})",
            x.kind(),
            lx.n,
            ly.n,
            lx.p,
            ly.p
        )));
    }
    Ok(())
}

/// Re-represent the profile of `y` on the mesh of `x` (if they differ).
pub fn align_profile(x: &Point, y: &Point) -> Point {
    match (x.profile(), y.profile()) {
        (Some(px), Some(py)) if !px.same_mesh(py) => {
            let mesh = px.mesh();
            let mut vals = Mat::zeros(py.dim(), mesh.len());
            for (j, &t) in mesh.iter().enumerate() {
                vals.set_column(j, &py.eval_clamped(t).0);
            }
            let mut out = y.clone();
            *out.profile_mut().unwrap() = px.with_values(vals);
            out
        }
        _ => y.clone(),
    }
}

/// a·x + y on all numeric fields; y on a different mesh is interpolated onto
/// the mesh of x; stability is dropped.
pub fn point_axpy(a: f64, x: &Point, y: Option<&Point>) -> Result<Point> {
    let fx = flatten(x);
    let data = match y {
        None => fx * a,
        Some(y) => {
            check_compatible(x, y)?;
            let ya = align_profile(x, y);
            fx * a + flatten(&ya)
        }
    };
    Ok(unflatten(x, &data))
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn profile_norm(p: &PiecewiseProfile) -> f64 {
    let v = p.values();
    (0..v.ncols()).map(|j| v.column(j).norm()).fold(0.0, f64::max)
}

/// Euclidean combination of field norms; the profile contributes the maximum
/// over representation points of the column 2-norm.
pub fn point_norm(p: &Point) -> f64 {
    let par = p.parameter().iter().map(|x| x * x).sum::<f64>();
    let rest = match p {
        Point::Stst(s) => s.x.norm_squared(),
        Point::Fold(s) => s.x.norm_squared() + s.v.norm_squared(),
        Point::Hopf(s) => s.x.norm_squared() + s.v.norm_squared() + s.omega * s.omega,
        Point::Psol(s) => profile_norm(&s.profile).powi(2) + s.period * s.period,
        Point::Hcli(s) => {
            profile_norm(&s.profile).powi(2)
                + s.period * s.period
                + s.x1.norm_squared()
                + s.x2.norm_squared()
                + cnorm(&s.lambda_v).powi(2)
                + cnorm(&s.lambda_w).powi(2)
                + s.v.norm_squared()
                + s.w.norm_squared()
                + cnorm(&s.alpha).powi(2)
                + s.epsilon * s.epsilon
        }
    };
    (par + rest).sqrt()
}

/// Unit phase factor making the largest-modulus entry real positive.
pub fn phase_of_largest(v: &[Complex64]) -> Complex64 {
    let mut best = Complex64::new(0.0, 0.0);
    for z in v {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        best.conj() / best.norm()
    }
}

/// Scale eigenvectors to unit norm (fold, hopf, hcli); complex ones are also
/// rotated so that their largest-modulus entry is real positive. For hcli the
/// coefficients α absorb the change of v so that Σ α_k v_k is unchanged.
pub fn point_normalize(p: &Point) -> Result<Point> {
    match p {
        Point::Fold(f) => {
            let nv = f.v.norm();
            if nv == 0.0 {
                return Err(Error::Degenerate("fold eigenvector is zero".into()));
            }
            let mut out = f.clone();
            out.v /= nv;
            Ok(Point::Fold(out))
        }
        Point::Hopf(h) => {
            let nv = h.v.norm();
            if nv == 0.0 {
                return Err(Error::Degenerate("Hopf eigenvector is zero".into()));
            }
            let mut out = h.clone();
            let ph = phase_of_largest(h.v.as_slice());
            out.v = h.v.map(|z| z * ph / nv);
            Ok(Point::Hopf(out))
        }
        Point::Hcli(c) => {
            let mut out = c.clone();
            for k in 0..c.v.ncols() {
                let col: Vec<Complex64> = c.v.column(k).iter().cloned().collect();
                let nv = cnorm(&col);
                if nv == 0.0 {
                    return Err(Error::Degenerate("unstable eigenvector is zero".into()));
                }
                let ph = phase_of_largest(&col);
                for r in 0..c.v.nrows() {
                    out.v[(r, k)] = col[r] * ph / nv;
                }
                out.alpha[k] = c.alpha[k] * nv / ph;
            }
            let na = cnorm(&out.alpha);
            if na > 0.0 && c.v.ncols() > 0 {
                for a in out.alpha.iter_mut() {
                    *a /= na;
                }
                out.epsilon *= na;
            }
            for k in 0..c.w.ncols() {
                let col: Vec<Complex64> = c.w.column(k).iter().cloned().collect();
                let nw = cnorm(&col);
                if nw == 0.0 {
                    return Err(Error::Degenerate("adjoint eigenvector is zero".into()));
                }
                let ph = phase_of_largest(&col);
                for r in 0..c.w.nrows() {
                    out.w[(r, k)] = col[r] * ph / nw;
                }
            }
            Ok(Point::Hcli(out))
        }
        other => Ok(other.clone()),
    }
}

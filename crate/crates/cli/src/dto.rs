//! JSON records for points and branches. Complex numbers are `[re, im]`
//! pairs; profiles are stored row by row (one row per state component).

use ddebif::linalg::{CMat, CVec, Mat, Vector};
use ddebif::{
    Branch, BranchMethod, Complex, ConnectingOrbit, Error, FoldPoint, HopfPoint, ParameterRecord,
    PeriodicOrbit, PiecewiseProfile, Point, PointKind, Result, Stability, SteadyState,
};
use serde::{Deserialize, Serialize};

pub type ComplexPair = [f64; 2];

fn pair(z: Complex) -> ComplexPair {
    [z.re, z.im]
}

fn unpair(p: &ComplexPair) -> Complex {
    Complex::new(p[0], p[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StabilityDto {
    Roots { h: f64, l0: Vec<ComplexPair>, l1: Vec<ComplexPair>, n1: Option<Vec<i32>> },
    Multipliers { mu: Vec<ComplexPair> },
}

impl From<&Stability> for StabilityDto {
    fn from(s: &Stability) -> Self {
        match s {
            Stability::Roots { h, l0, l1, n1 } => StabilityDto::Roots {
                h: *h,
                l0: l0.iter().map(|&z| pair(z)).collect(),
                l1: l1.iter().map(|&z| pair(z)).collect(),
                n1: n1.clone(),
            },
            Stability::Multipliers { mu } => StabilityDto::Multipliers { mu: mu.iter().map(|&z| pair(z)).collect() },
        }
    }
}

impl From<&StabilityDto> for Stability {
    fn from(s: &StabilityDto) -> Self {
        match s {
            StabilityDto::Roots { h, l0, l1, n1 } => Stability::Roots {
                h: *h,
                l0: l0.iter().map(unpair).collect(),
                l1: l1.iter().map(unpair).collect(),
                n1: n1.clone(),
            },
            StabilityDto::Multipliers { mu } => Stability::Multipliers { mu: mu.iter().map(unpair).collect() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PointDto {
    Stst {
        parameter: Vec<f64>,
        x: Vec<f64>,
        stability: Option<StabilityDto>,
    },
    Fold {
        parameter: Vec<f64>,
        x: Vec<f64>,
        v: Vec<f64>,
        stability: Option<StabilityDto>,
    },
    Hopf {
        parameter: Vec<f64>,
        x: Vec<f64>,
        v: Vec<ComplexPair>,
        omega: f64,
        stability: Option<StabilityDto>,
    },
    Psol {
        parameter: Vec<f64>,
        mesh: Option<Vec<f64>>,
        degree: usize,
        profile: Vec<Vec<f64>>,
        period: f64,
        stability: Option<StabilityDto>,
    },
    Hcli {
        parameter: Vec<f64>,
        mesh: Option<Vec<f64>>,
        degree: usize,
        profile: Vec<Vec<f64>>,
        period: f64,
        x1: Vec<f64>,
        x2: Vec<f64>,
        lambda_v: Vec<ComplexPair>,
        lambda_w: Vec<ComplexPair>,
        /// One row per state component, one column per unstable direction.
        v: Vec<Vec<ComplexPair>>,
        w: Vec<Vec<ComplexPair>>,
        alpha: Vec<ComplexPair>,
        epsilon: f64,
    },
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
}

fn crows(m: &CMat) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows()).map(|r| m.row(r).iter().map(|&z| pair(z)).collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> Result<Mat> {
    let cols = r.first().map_or(0, |x| x.len());
    if r.iter().any(|x| x.len() != cols) {
        return Err(Error::Config("ragged profile rows".into()));
    }
    Ok(Mat::from_fn(r.len(), cols, |i, j| r[i][j]))
}

fn from_crows(r: &[Vec<ComplexPair>]) -> Result<CMat> {
    let cols = r.first().map_or(0, |x| x.len());
    if r.iter().any(|x| x.len() != cols) {
        return Err(Error::Config("ragged eigenvector rows".into()));
    }
    Ok(CMat::from_fn(r.len(), cols, |i, j| unpair(&r[i][j])))
}

fn profile_dto(p: &PiecewiseProfile) -> (Option<Vec<f64>>, usize, Vec<Vec<f64>>) {
    (p.explicit_mesh().map(|m| m.to_vec()), p.degree(), rows(p.values()))
}

impl From<&Point> for PointDto {
    fn from(p: &Point) -> Self {
        let st = |s: &Option<Stability>| s.as_ref().map(StabilityDto::from);
        match p {
            Point::Stst(s) => PointDto::Stst {
                parameter: s.parameter.clone(),
                x: s.x.iter().cloned().collect(),
                stability: st(&s.stability),
            },
            Point::Fold(f) => PointDto::Fold {
                parameter: f.parameter.clone(),
                x: f.x.iter().cloned().collect(),
                v: f.v.iter().cloned().collect(),
                stability: st(&f.stability),
            },
            Point::Hopf(h) => PointDto::Hopf {
                parameter: h.parameter.clone(),
                x: h.x.iter().cloned().collect(),
                v: h.v.iter().map(|&z| pair(z)).collect(),
                omega: h.omega,
                stability: st(&h.stability),
            },
            Point::Psol(o) => {
                let (mesh, degree, profile) = profile_dto(&o.profile);
                PointDto::Psol { parameter: o.parameter.clone(), mesh, degree, profile, period: o.period, stability: st(&o.stability) }
            }
            Point::Hcli(c) => {
                let (mesh, degree, profile) = profile_dto(&c.profile);
                PointDto::Hcli {
                    parameter: c.parameter.clone(),
                    mesh,
                    degree,
                    profile,
                    period: c.period,
                    x1: c.x1.iter().cloned().collect(),
                    x2: c.x2.iter().cloned().collect(),
                    lambda_v: c.lambda_v.iter().map(|&z| pair(z)).collect(),
                    lambda_w: c.lambda_w.iter().map(|&z| pair(z)).collect(),
                    v: crows(&c.v),
                    w: crows(&c.w),
                    alpha: c.alpha.iter().map(|&z| pair(z)).collect(),
                    epsilon: c.epsilon,
                }
            }
        }
    }
}

impl PointDto {
    pub fn kind(&self) -> PointKind {
        match self {
            PointDto::Stst { .. } => PointKind::Stst,
            PointDto::Fold { .. } => PointKind::Fold,
            PointDto::Hopf { .. } => PointKind::Hopf,
            PointDto::Psol { .. } => PointKind::Psol,
            PointDto::Hcli { .. } => PointKind::Hcli,
        }
    }

    pub fn to_point(&self) -> Result<Point> {
        let st = |s: &Option<StabilityDto>| s.as_ref().map(Stability::from);
        let vec = |v: &[f64]| Vector::from_vec(v.to_vec());
        Ok(match self {
            PointDto::Stst { parameter, x, stability } => {
                Point::Stst(SteadyState { parameter: parameter.clone(), x: vec(x), stability: st(stability) })
            }
            PointDto::Fold { parameter, x, v, stability } => Point::Fold(FoldPoint {
                parameter: parameter.clone(),
                x: vec(x),
                v: vec(v),
                stability: st(stability),
            }),
            PointDto::Hopf { parameter, x, v, omega, stability } => Point::Hopf(HopfPoint {
                parameter: parameter.clone(),
                x: vec(x),
                v: CVec::from_iterator(v.len(), v.iter().map(unpair)),
                omega: *omega,
                stability: st(stability),
            }),
            PointDto::Psol { parameter, mesh, degree, profile, period, stability } => Point::Psol(PeriodicOrbit {
                parameter: parameter.clone(),
                profile: PiecewiseProfile::new(mesh.clone(), *degree, from_rows(profile)?)?,
                period: *period,
                stability: st(stability),
            }),
            PointDto::Hcli {
                parameter,
                mesh,
                degree,
                profile,
                period,
                x1,
                x2,
                lambda_v,
                lambda_w,
                v,
                w,
                alpha,
                epsilon,
            } => Point::Hcli(ConnectingOrbit {
                parameter: parameter.clone(),
                profile: PiecewiseProfile::new(mesh.clone(), *degree, from_rows(profile)?)?,
                period: *period,
                x1: vec(x1),
                x2: vec(x2),
                lambda_v: lambda_v.iter().map(unpair).collect(),
                lambda_w: lambda_w.iter().map(unpair).collect(),
                v: from_crows(v)?,
                w: from_crows(w)?,
                alpha: alpha.iter().map(unpair).collect(),
                epsilon: *epsilon,
            }),
        })
    }
}

/// Branch file contents. A single converted point is written as a branch
/// of one point without methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDto {
    pub kind: String,
    pub parameter_names: Vec<String>,
    pub parameter: Option<ParameterRecord>,
    pub points: Vec<PointDto>,
    pub methods: Option<BranchMethod>,
}

impl BranchDto {
    pub fn from_branch(b: &Branch, names: &[String]) -> Self {
        BranchDto {
            kind: b.kind.name().into(),
            parameter_names: names.to_vec(),
            parameter: Some(b.parameter.clone()),
            points: b.points.iter().map(PointDto::from).collect(),
            methods: Some(b.method.clone()),
        }
    }

    pub fn from_point(p: &Point, names: &[String]) -> Self {
        BranchDto {
            kind: p.kind().name().into(),
            parameter_names: names.to_vec(),
            parameter: None,
            points: vec![PointDto::from(p)],
            methods: None,
        }
    }

    pub fn points(&self) -> Result<Vec<Point>> {
        let kind = PointKind::parse(&self.kind)?;
        self.points
            .iter()
            .map(|d| {
                if d.kind() != kind {
                    return Err(Error::KindMismatch { expected: kind.name().into(), found: d.kind().name().into() });
                }
                d.to_point()
            })
            .collect()
    }

    /// Rebuild the branch; fails for single-point files without methods.
    pub fn to_branch(&self) -> Result<Branch> {
        let kind = PointKind::parse(&self.kind)?;
        let method = self.methods.clone().ok_or_else(|| Error::Config("branch file has no methods".into()))?;
        Ok(Branch { kind, points: self.points()?, method, parameter: self.parameter.clone().unwrap_or_default() })
    }
}

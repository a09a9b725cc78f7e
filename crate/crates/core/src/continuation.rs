//! Branch continuation by secant prediction and steplength-conditioned
//! correction, plus whole-branch stability, recomputation and default
//! plotting measures.

use crate::collocation::{self, detect_negative_delay, orbit_stability, NewMesh};
use crate::corrector::{correct, CorrectOptions, CorrectionReport};
use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::linalg::CVec;
use crate::model::{
    eval_measure, point_axpy, point_norm, point_normalize, Branch, Measure, MeasureField,
    MeasureFunc, MeasureSubfield, NamedSelector, Point, PointKind, Selector,
};
use crate::spectrum::stst_stability;
use crate::system::ProblemFunctions;

/// Result of extending a branch.
#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    pub branch: Branch,
    /// Successful corrections.
    pub succ: usize,
    /// Failed corrections.
    pub fail: usize,
    /// Rejected (removed) points.
    pub rjct: usize,
    pub events: Vec<Event>,
}

/// Direction of `to − from` with eigenvectors of `from` rotated onto those
/// of `to` first, so that a phase jump does not enter the secant.
fn secant(from: &Point, to: &Point) -> Result<Point> {
    let neg = point_axpy(-1.0, &align_eigenvectors(from, to), None)?;
    point_axpy(1.0, to, Some(&neg))
}

fn best_phase(a: &CVec, b: &CVec) -> num_complex::Complex64 {
    // unit factor z minimizing |z a − b|
    let s = a.dotc(b);
    if s.norm() == 0.0 {
        num_complex::Complex64::new(1.0, 0.0)
    } else {
        s / s.norm()
    }
}

fn align_eigenvectors(from: &Point, to: &Point) -> Point {
    match (from, to) {
        (Point::Hopf(a), Point::Hopf(b)) if a.v.len() == b.v.len() => {
            let z = best_phase(&a.v, &b.v);
            let mut out = a.clone();
            out.v = a.v.map(|c| c * z);
            Point::Hopf(out)
        }
        (Point::Fold(a), Point::Fold(b)) if a.v.dot(&b.v) < 0.0 => {
            let mut out = a.clone();
            out.v = -&a.v;
            Point::Fold(out)
        }
        _ => from.clone(),
    }
}

fn bounds_violation(branch: &Branch, p: &Point) -> Option<(usize, f64)> {
    let par = p.parameter();
    for &(i, b) in &branch.parameter.min_bound {
        if par[i - 1] < b {
            return Some((i, b));
        }
    }
    for &(i, b) in &branch.parameter.max_bound {
        if par[i - 1] > b {
            return Some((i, b));
        }
    }
    None
}

fn correct_step(
    problem: &ProblemFunctions,
    branch: &Branch,
    pred: &Point,
    step: Option<&Point>,
    previous: &Point,
    free: &[usize],
    number: usize,
) -> Result<CorrectionReport> {
    let orbit = matches!(pred.kind(), PointKind::Psol | PointKind::Hcli);
    let every = |n: usize| n > 0 && (number - 1) % n == 0;
    let m = &branch.method.point;
    let mut pred = pred.clone();
    if orbit && every(m.adapt_mesh_before_correct) && pred.profile().map_or(false, |p| p.has_explicit_mesh()) {
        let prof = pred.profile().unwrap();
        pred = collocation::remesh(&pred, prof.degree(), NewMesh::Intervals(prof.intervals()))?;
    }
    let opts = CorrectOptions {
        adapt: orbit && every(m.adapt_mesh_after_correct),
        previous: if orbit { Some(previous.clone()) } else { None },
        ..Default::default()
    };
    let steps: Vec<Point> = step.into_iter().cloned().collect();
    correct(problem, &pred, free, &steps, m, &opts)
}

/// Correct `start` with parameter `index` pinned at `value` and no steplength
/// condition.
fn boundary_point(
    problem: &ProblemFunctions,
    branch: &Branch,
    start: &Point,
    previous: &Point,
    index: usize,
    value: f64,
) -> Result<CorrectionReport> {
    let mut p = start.clone();
    p.parameter_mut()[index - 1] = value;
    let free: Vec<usize> = branch.parameter.free.iter().cloned().filter(|&i| i != index).collect();
    correct_step(problem, branch, &p, None, previous, &free, 1)
}

/// Extend a branch by at most `max_tries` corrections.
pub fn continue_branch(
    problem: &ProblemFunctions,
    branch: &Branch,
    max_tries: usize,
) -> Result<ContinuationOutcome> {
    branch.validate(problem.par_count)?;
    if branch.points.len() < 2 {
        return Err(Error::Usage("continuation needs at least two points".into()));
    }
    let cm = &branch.method.continuation;
    let mut out = ContinuationOutcome { branch: branch.clone(), succ: 0, fail: 0, rjct: 0, events: Vec::new() };
    let free = branch.parameter.free.clone();
    let progress = |ev: &mut Vec<Event>, p: &Point, tag: &str| {
        if cm.plot > 0.0 && cm.plot_progress {
            let (x, y) = match &cm.plot_measure {
                Some(pm) => (eval_measure(p, &pm.x).ok(), eval_measure(p, &pm.y).ok()),
                None => (None, None),
            };
            ev.push(Event::new(EventKind::Progress, tag).with_payload(serde_json::json!({
                "parameter": p.parameter(),
                "x": x,
                "y": y,
            })));
        }
    };
    let n0 = out.branch.points.len();
    let mut steplength = {
        let s = secant(&out.branch.points[n0 - 2], &out.branch.points[n0 - 1])?;
        point_norm(&s)
    };
    let mut interpolate = false;
    let mut tries = 0;
    while tries < max_tries {
        let pts = &out.branch.points;
        let k = pts.len();
        let (prev, last) = (pts[k - 2].clone(), pts[k - 1].clone());
        let sec = secant(&prev, &last)?;
        let sn = point_norm(&sec);
        if !(sn > 0.0) || !sn.is_finite() {
            out.events.push(Event::new(EventKind::DegenerateSecant, "last two points coincide, no secant"));
            break;
        }
        let dir = point_axpy(1.0 / sn, &sec, None)?;
        let pred = if interpolate {
            point_axpy(-0.5 * sn, &dir, Some(&last))?
        } else {
            let mut h = steplength;
            for &(i, ms) in &branch.parameter.max_step {
                let dp = dir.parameter()[i - 1].abs() * h;
                if ms > 0.0 && dp > ms {
                    h *= ms / dp;
                }
            }
            point_axpy(h, &dir, Some(&last))?
        };
        tries += 1;
        progress(&mut out.events, &pred, "prediction");
        let rep = correct_step(problem, branch, &pred, Some(&dir), &last, &free, tries)?;
        out.events.extend(rep.events.iter().cloned());
        // prediction beyond a bound and no regular point: correct on the bound
        if !rep.success && !interpolate {
            if let Some((i, b)) = bounds_violation(branch, &pred) {
                let rep2 = boundary_point(problem, branch, &pred, &last, i, b)?;
                out.events.extend(rep2.events.clone());
                if rep2.success {
                    out.succ += 1;
                    finish_boundary(&mut out, rep2, i, b);
                    break;
                }
            }
        }
        if rep.success {
            let p = point_normalize(&rep.point)?;
            progress(&mut out.events, &p, "correction");
            if let Some((i, b)) = bounds_violation(branch, &p) {
                let rep2 = boundary_point(problem, branch, &p, &last, i, b)?;
                out.events.extend(rep2.events.clone());
                if rep2.success {
                    out.succ += 1;
                } else {
                    out.fail += 1;
                }
                finish_boundary(&mut out, rep2, i, b);
                break;
            }
            out.succ += 1;
            if problem.state_dependent {
                if let Some(neg) = detect_negative_delay(problem, &p)? {
                    out.events.push(
                        Event::new(
                            EventKind::NegativeDelay,
                            format!("delay number {} becomes negative", neg.delay_nr),
                        )
                        .with_payload(serde_json::json!({ "delay_nr": neg.delay_nr, "tz": neg.tz })),
                    );
                    let opts = CorrectOptions {
                        adapt: false,
                        previous: Some(last.clone()),
                        d_nr: Some(neg.delay_nr),
                        tz: neg.tz,
                    };
                    let rep2 = correct(problem, &p, &free, &[], &branch.method.point, &opts)?;
                    out.events.extend(rep2.events.iter().cloned());
                    if rep2.success {
                        out.succ += 1;
                        let bp = point_normalize(&rep2.point)?;
                        progress(&mut out.events, &bp, "delay boundary");
                        out.events.push(
                            Event::new(EventKind::NegativeDelay, format!("delay number {} pinned at zero", neg.delay_nr))
                                .with_payload(serde_json::json!({ "delay_nr": neg.delay_nr, "tz": rep2.tz, "boundary": true })),
                        );
                        if interpolate {
                            let at = out.branch.points.len() - 1;
                            out.branch.points.insert(at, bp);
                        } else {
                            out.branch.points.push(bp);
                        }
                    } else {
                        out.fail += 1;
                        out.events.push(Event::new(
                            EventKind::Warning,
                            format!("correction onto zero delay {} failed", neg.delay_nr),
                        ));
                    }
                    break;
                }
            }
            if interpolate {
                let at = out.branch.points.len() - 1;
                out.branch.points.insert(at, p);
                out.events.push(Event::new(EventKind::Inserted, "interpolated point inserted"));
                interpolate = false;
                let pts = &out.branch.points;
                let k = pts.len();
                steplength = point_norm(&secant(&pts[k - 2], &pts[k - 1])?);
            } else {
                out.branch.points.push(p);
                steplength *= cm.steplength_growth_factor;
            }
        } else {
            out.fail += 1;
            if interpolate {
                if cm.halt_before_reject {
                    out.events.push(Event::new(EventKind::Warning, "halting before rejecting a point"));
                    break;
                }
                if out.branch.points.len() <= 2 {
                    out.events.push(Event::new(EventKind::Warning, "no points left to reject"));
                    break;
                }
                out.branch.points.pop();
                out.rjct += 1;
                out.events.push(Event::new(EventKind::Rejected, "last point rejected after failed interpolation"));
            }
            interpolate = true;
        }
    }
    Ok(out)
}

/// Append the point corrected on a bound, if any.
fn finish_boundary(out: &mut ContinuationOutcome, rep: CorrectionReport, index: usize, value: f64) {
    out.events.push(
        Event::new(EventKind::BoundaryHit, "boundary hit")
            .with_payload(serde_json::json!({ "parameter": index, "bound": value })),
    );
    if rep.success {
        let p = point_normalize(&rep.point).unwrap_or(rep.point);
        out.branch.points.push(p);
    } else {
        out.events.push(Event::new(EventKind::Warning, "correction on the boundary failed"));
    }
}

pub fn reverse_branch(branch: &Branch) -> Branch {
    let mut b = branch.clone();
    b.points.reverse();
    b
}

/// Stability of one point with the branch's stability method.
pub fn point_stability(problem: &ProblemFunctions, branch: &Branch, p: &Point) -> Result<Option<crate::model::Stability>> {
    let m = &branch.method.stability;
    match p.kind() {
        PointKind::Stst | PointKind::Fold | PointKind::Hopf => Ok(Some(stst_stability(problem, p, m)?.0)),
        PointKind::Psol => Ok(Some(orbit_stability(problem, p, m)?)),
        PointKind::Hcli => Ok(None),
    }
}

/// Fill stability in every (skip+1)-th point; existing payloads are kept
/// unless `recompute`.
pub fn branch_stability(
    problem: &ProblemFunctions,
    branch: &Branch,
    skip: usize,
    recompute: bool,
) -> Result<(Branch, Vec<Event>)> {
    let mut b = branch.clone();
    let mut events = Vec::new();
    for (k, p) in b.points.iter_mut().enumerate() {
        if k % (skip + 1) != 0 {
            continue;
        }
        if p.stability().is_some() && !recompute {
            continue;
        }
        match point_stability(problem, branch, p) {
            Ok(s) => p.set_stability(s),
            Err(e) => events.push(
                Event::new(EventKind::Warning, format!("stability of point {} failed: {}", k + 1, e))
                    .with_payload(serde_json::json!({ "point": k + 1 })),
            ),
        }
    }
    Ok((b, events))
}

/// Re-correct the listed points (1-based; empty = all) with the branch's
/// free parameters. A point whose correction fails keeps its old value.
pub fn recompute_branch(
    problem: &ProblemFunctions,
    branch: &Branch,
    point_numbers: &[usize],
) -> Result<(Branch, Vec<Event>)> {
    let mut b = branch.clone();
    let mut events = Vec::new();
    let list: Vec<usize> = if point_numbers.is_empty() {
        (1..=b.points.len()).collect()
    } else {
        point_numbers.to_vec()
    };
    let free = b.parameter.free.clone();
    for &k in &list {
        if k == 0 || k > b.points.len() {
            return Err(Error::Usage(format!("point number {} outside 1..={}", k, b.points.len())));
        }
        let p0 = b.points[k - 1].clone();
        // neighbours give the secant for the steplength condition
        let nb = if k >= 2 { Some(b.points[k - 2].clone()) } else if k < b.points.len() { Some(b.points[k].clone()) } else { None };
        let step = match &nb {
            Some(q) if free.len() > 0 => {
                let s = secant(q, &p0)?;
                let sn = point_norm(&s);
                if sn > 0.0 {
                    Some(point_axpy(1.0 / sn, &s, None)?)
                } else {
                    None
                }
            }
            _ => None,
        };
        let fr: Vec<usize> = if step.is_some() { free.clone() } else { Vec::new() };
        let orbit = matches!(p0.kind(), PointKind::Psol | PointKind::Hcli);
        let opts = CorrectOptions { previous: if orbit { Some(p0.clone()) } else { None }, ..Default::default() };
        let steps: Vec<Point> = step.into_iter().collect();
        let rep = correct(problem, &p0, &fr, &steps, &b.method.point, &opts);
        match rep {
            Ok(r) if r.success => {
                b.points[k - 1] = point_normalize(&r.point)?;
            }
            _ => events.push(
                Event::new(EventKind::Warning, format!("recomputation of point {} failed, the old value remains", k))
                    .with_payload(serde_json::json!({ "point": k })),
            ),
        }
    }
    Ok((b, events))
}

fn varies(vals: &[f64]) -> bool {
    vals.windows(2).any(|w| (w[1] - w[0]).abs() > 1e-12 * (1.0 + w[0].abs()))
}

/// Default (x, y) measures of a branch.
pub fn default_measures(stability: bool, branch: &Branch) -> Result<(Measure, Measure)> {
    let pts = &branch.points;
    let p = pts.first().map(|q| q.parameter().len()).unwrap_or(0);
    let varying_par: Vec<usize> = (1..=p)
        .filter(|&i| varies(&pts.iter().map(|q| q.parameter()[i - 1]).collect::<Vec<_>>()))
        .collect();
    let xcol = varying_par
        .first()
        .cloned()
        .or_else(|| branch.parameter.free.first().cloned())
        .unwrap_or(1);
    let x = Measure::parameter(xcol);
    default_y(stability, branch.kind, pts, &varying_par, xcol).map(|y| (x, y))
}

/// Default measures from a kind and a parameter list.
pub fn default_measures_for(stability: bool, kind: PointKind, par_list: &[usize]) -> Result<(Measure, Measure)> {
    let xcol = *par_list.first().ok_or_else(|| Error::Usage("empty parameter list".into()))?;
    let y = default_y(stability, kind, &[], par_list, xcol)?;
    Ok((Measure::parameter(xcol), y))
}

fn default_y(stability: bool, kind: PointKind, pts: &[Point], varying_par: &[usize], xcol: usize) -> Result<Measure> {
    let all = Selector::Named(NamedSelector::All);
    if stability {
        return Ok(match kind {
            PointKind::Psol => Measure {
                field: MeasureField::Stability,
                subfield: MeasureSubfield::Mu,
                row: all,
                col: Selector::Index(1),
                func: MeasureFunc::Abs,
            },
            PointKind::Hcli => return Err(Error::Measure("connecting orbits carry no stability".into())),
            _ => Measure {
                field: MeasureField::Stability,
                subfield: MeasureSubfield::L1,
                row: all,
                col: Selector::Index(1),
                func: MeasureFunc::Real,
            },
        });
    }
    Ok(match kind {
        PointKind::Stst => {
            let n = pts.first().and_then(|q| q.state()).map(|x| x.len()).unwrap_or(1);
            let row = (1..=n)
                .find(|&r| varies(&pts.iter().map(|q| q.state().map(|x| x[r - 1]).unwrap_or(0.0)).collect::<Vec<_>>()))
                .unwrap_or(1);
            Measure::new(MeasureField::X, Selector::Index(row), Selector::Index(1))
        }
        PointKind::Psol => {
            let n = pts.first().and_then(|q| q.profile()).map(|p| p.dim()).unwrap_or(1);
            let row = (1..=n)
                .find(|&r| {
                    let amps: Vec<f64> = pts
                        .iter()
                        .map(|q| {
                            let v = q.profile().unwrap().values();
                            let row = v.row(r - 1);
                            row.max() - row.min()
                        })
                        .collect();
                    varies(&amps) || amps.iter().any(|&a| a > 0.0)
                })
                .unwrap_or(1);
            Measure::new(MeasureField::Profile, Selector::Index(row), Selector::Named(NamedSelector::Ampl))
        }
        _ => {
            let col = varying_par.iter().cloned().find(|&c| c != xcol).unwrap_or(xcol);
            Measure::parameter(col)
        }
    })
}

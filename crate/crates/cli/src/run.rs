//! Stage-by-stage execution of a run plan.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ddebif::collocation::{remesh, NewMesh};
use ddebif::continuation::{branch_stability, continue_branch, default_measures, point_stability, reverse_branch};
use ddebif::convert::{orbit_segment, to_hcli, to_hopf, to_psol, to_stst};
use ddebif::corrector::{correct, CorrectOptions};
use ddebif::{
    default_branch, default_point_method, default_stability_method, eval_measure, point_axpy, Branch, Error, Event,
    Point, PointKind, PointMethod, Result, StabilityMethod,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::dto::BranchDto;
use crate::emit::{write_measures, write_plot};
use crate::plan::{RunPlan, Stage, StageKind, Which};
use crate::systems::{builtin_system, BuiltinSystem};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// 0: no progress, 1: stage summaries on stderr, 2: also prediction and
    /// correction samples in the events log.
    pub verbose: Option<u8>,
    /// Acceptance threshold for seed and conversion corrections.
    pub seed_tolerance: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum StageOutput {
    Branch(Branch),
    Point {
        point: Point,
        /// Zero-amplitude orbit accompanying a periodic-orbit seed.
        anchor: Option<Point>,
    },
}

impl StageOutput {
    pub fn points(&self) -> &[Point] {
        match self {
            StageOutput::Branch(b) => &b.points,
            StageOutput::Point { point, .. } => std::slice::from_ref(point),
        }
    }

    pub fn branch(&self) -> Option<&Branch> {
        match self {
            StageOutput::Branch(b) => Some(b),
            StageOutput::Point { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageRecord {
    pub name: String,
    pub kind: StageKind,
    pub output: StageOutput,
    pub summary: Value,
    pub events: Vec<Event>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct StageFailure {
    pub stage: String,
    pub error: Error,
}

impl StageFailure {
    /// 2 for plan or reference problems, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        exit_code_of(&self.error)
    }
}

pub fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::KindMismatch { .. } | Error::Measure(_) => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub system: String,
    pub records: Vec<StageRecord>,
    pub failure: Option<StageFailure>,
}

impl RunReport {
    pub fn record(&self, name: &str) -> Option<&StageRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, |f| f.exit_code())
    }
}

fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}

/// Overwrite fields of `base` with the entries of `over`; unknown field
/// names are rejected.
pub fn merge_method<T: Serialize + DeserializeOwned>(base: &T, over: Option<&Map<String, Value>>) -> Result<T> {
    let Some(over) = over else { return Ok(serde_json::from_value(serde_json::to_value(base).unwrap()).unwrap()) };
    let mut v = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    let obj = v.as_object_mut().expect("method records serialize to objects");
    for (k, val) in over {
        if !obj.contains_key(k) {
            return Err(Error::Config(format!("unknown method field '{}'", k)));
        }
        obj.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("method override: {}", e)))
}

struct Runner<'a> {
    sys: &'a BuiltinSystem,
    opts: &'a RunOptions,
    records: Vec<StageRecord>,
}

impl<'a> Runner<'a> {
    fn source(&self, s: &Stage) -> Result<&StageRecord> {
        let name = s.from.as_deref().ok_or_else(|| Error::Config(format!("stage '{}' needs 'from'", s.name)))?;
        self.records
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Config(format!("stage '{}': no output from '{}'", s.name, name)))
    }

    fn index(pts: &[Point], n: i64, stage: &str) -> Result<usize> {
        let len = pts.len() as i64;
        let i = if n > 0 { n - 1 } else { len + n };
        if n == 0 || i < 0 || i >= len {
            return Err(Error::Config(format!("stage '{}': point {} outside a source of {} points", stage, n, len)));
        }
        Ok(i as usize)
    }

    /// The input point: by number, by rule, or the last point of the source.
    fn pick(&self, s: &Stage) -> Result<Point> {
        let pts = self.source(s)?.output.points();
        if let Some(n) = s.point {
            return Ok(pts[Self::index(pts, n, &s.name)?].clone());
        }
        if let Some(rule) = &s.select {
            let hit = |p: &Point| {
                eval_measure(p, &rule.measure).ok().and_then(|v| v.first().copied()).map_or(false, |v| {
                    rule.above.map_or(true, |a| v > a) && rule.below.map_or(true, |b| v < b)
                })
            };
            let found = match rule.which {
                Which::First => pts.iter().find(|p| hit(p)),
                Which::Last => pts.iter().rev().find(|p| hit(p)),
            };
            return found
                .cloned()
                .ok_or_else(|| Error::Config(format!("stage '{}': no point matches the selection rule", s.name)));
        }
        pts.last().cloned().ok_or_else(|| Error::Config(format!("stage '{}': empty source", s.name)))
    }

    fn point_method(&self, s: &Stage, kind: PointKind) -> Result<PointMethod> {
        merge_method(&default_point_method(kind), s.method.point.as_ref())
    }

    fn stability_method(&self, s: &Stage, kind: PointKind) -> Result<StabilityMethod> {
        merge_method(&default_stability_method(kind), s.method.stability.as_ref())
    }

    /// Correct a seed or converted point with the stage method; failure
    /// aborts the stage.
    fn correct_seed(
        &self,
        s: &Stage,
        p: &Point,
        free: &[usize],
        steps: &[Point],
        events: &mut Vec<Event>,
        what: &str,
    ) -> Result<Point> {
        let m = self.point_method(s, p.kind())?;
        self.correct_with(&m, s.adapt, p, free, steps, events, what)
    }

    #[allow(clippy::too_many_arguments)]
    fn correct_with(
        &self,
        m: &PointMethod,
        adapt: bool,
        p: &Point,
        free: &[usize],
        steps: &[Point],
        events: &mut Vec<Event>,
        what: &str,
    ) -> Result<Point> {
        let mut m = m.clone();
        if let Some(t) = self.opts.seed_tolerance {
            m.minimal_accuracy = t;
        }
        let rep = correct(&self.sys.problem, p, free, steps, &m, &CorrectOptions { adapt, ..Default::default() })?;
        events.extend(rep.events.iter().cloned());
        if !rep.success {
            return Err(numeric(format!(
                "correction of {} did not converge (residual {:.3e} after {} iterations)",
                what, rep.residual, rep.iterations
            )));
        }
        Ok(rep.point)
    }

    fn new_branch(&self, s: &Stage, kind: PointKind) -> Result<Branch> {
        let mut b = default_branch(&self.sys.problem, &s.free, kind);
        for &(i, v) in &s.min_bound {
            ddebif::ParameterRecord::set(&mut b.parameter.min_bound, i, v);
        }
        for &(i, v) in &s.max_bound {
            ddebif::ParameterRecord::set(&mut b.parameter.max_bound, i, v);
        }
        for &(i, v) in &s.max_step {
            ddebif::ParameterRecord::set(&mut b.parameter.max_step, i, v);
        }
        b.method.point = self.point_method(s, kind)?;
        b.method.stability = self.stability_method(s, kind)?;
        b.method.continuation = merge_method(&b.method.continuation, s.method.continuation.as_ref())?;
        match self.opts.verbose {
            Some(0) => {
                b.method.continuation.plot = 0.0;
                b.method.continuation.plot_progress = false;
            }
            Some(1) => {
                b.method.continuation.plot = 0.5;
                b.method.continuation.plot_progress = false;
            }
            Some(_) => {
                b.method.continuation.plot = 1.0;
                b.method.continuation.plot_progress = true;
            }
            None => {}
        }
        b.validate(self.sys.par_count())?;
        Ok(b)
    }

    /// Second seed: increments from `seed_step`, corrected in `seed_free`.
    fn second_seed(&self, s: &Stage, first: &Point, events: &mut Vec<Event>) -> Result<Point> {
        if s.seed_step.is_empty() {
            return Err(Error::Config(format!("stage '{}' needs seed_step for its second point", s.name)));
        }
        let mut p = first.clone();
        for &(i, d) in &s.seed_step {
            if i == 0 || i > self.sys.par_count() {
                return Err(Error::Config(format!("stage '{}': parameter {} out of range", s.name, i)));
            }
            p.parameter_mut()[i - 1] += d;
        }
        self.correct_seed(s, &p, &s.seed_free, &[], events, "the second seed")
    }

    /// Continue (and optionally reverse and continue), then stability.
    fn extend(&self, s: &Stage, mut b: Branch, events: &mut Vec<Event>) -> Result<(Branch, Value)> {
        let pr = &self.sys.problem;
        let o = continue_branch(pr, &b, s.max_tries.unwrap_or(20))?;
        events.extend(o.events);
        let mut summary = json!({ "succ": o.succ, "fail": o.fail, "rjct": o.rjct });
        b = o.branch;
        if let Some(t) = s.reverse_tries {
            let o2 = continue_branch(pr, &reverse_branch(&b), t)?;
            events.extend(o2.events);
            summary["reverse"] = json!({ "succ": o2.succ, "fail": o2.fail, "rjct": o2.rjct });
            b = o2.branch;
        }
        if s.stability {
            let (sb, ev) = branch_stability(pr, &b, 0, false)?;
            events.extend(ev);
            b = sb;
        }
        summary["points"] = json!(b.points.len());
        Ok((b, summary))
    }

    fn psol_from_seeds(&self, s: &Stage, mut seeds: Vec<Point>, mut ev: Vec<Event>) -> Result<(StageOutput, Value, Vec<Event>)> {
        if seeds.len() < 2 {
            return Err(Error::Config(format!("stage '{}' needs two seeds", s.name)));
        }
        if let Some(p) = seeds.iter().find(|p| p.kind() != PointKind::Psol) {
            return Err(Error::KindMismatch { expected: "psol".into(), found: p.kind().name().into() });
        }
        if s.clear_mesh {
            for p in &mut seeds {
                p.profile_mut().unwrap().clear_mesh()?;
            }
        }
        let mut b = self.new_branch(s, PointKind::Psol)?;
        b.points = seeds;
        let (b, sum) = self.extend(s, b, &mut ev)?;
        Ok((StageOutput::Branch(b), sum, ev))
    }

    fn run_stage(&self, s: &Stage) -> Result<(StageOutput, Value, Vec<Event>)> {
        let pr = &self.sys.problem;
        let mut ev = Vec::new();
        match s.kind {
            StageKind::StstBranch => {
                let start = match (&s.parameter, &s.x) {
                    (Some(par), Some(x)) if s.from.is_none() => {
                        if par.len() != self.sys.par_count() || x.len() != self.sys.dim() {
                            return Err(Error::Config(format!(
                                "stage '{}': expected {} parameters and {} states",
                                s.name,
                                self.sys.par_count(),
                                self.sys.dim()
                            )));
                        }
                        Point::Stst(ddebif::SteadyState {
                            parameter: par.clone(),
                            x: ddebif::linalg::Vector::from_vec(x.clone()),
                            stability: None,
                        })
                    }
                    _ => to_stst(&self.pick(s)?)?.remove(0),
                };
                let p1 = self.correct_seed(s, &start, &s.seed_free, &[], &mut ev, "the first seed")?;
                let p2 = self.second_seed(s, &p1, &mut ev)?;
                let mut b = self.new_branch(s, PointKind::Stst)?;
                b.points = vec![p1, p2];
                let (b, sum) = self.extend(s, b, &mut ev)?;
                Ok((StageOutput::Branch(b), sum, ev))
            }
            StageKind::HopfBranch | StageKind::HcliBranch => {
                let kind = if s.kind == StageKind::HopfBranch { PointKind::Hopf } else { PointKind::Hcli };
                let p1 = self.pick(s)?;
                if p1.kind() != kind {
                    return Err(Error::KindMismatch { expected: kind.name().into(), found: p1.kind().name().into() });
                }
                let p2 = self.second_seed(s, &p1, &mut ev)?;
                let mut b = self.new_branch(s, kind)?;
                b.points = vec![p1.without_stability(), p2];
                let (b, sum) = self.extend(s, b, &mut ev)?;
                Ok((StageOutput::Branch(b), sum, ev))
            }
            StageKind::Stability => {
                let src = self.source(s)?;
                let mut b = src
                    .output
                    .branch()
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("stage '{}': source is not a branch", s.name)))?;
                b.method.stability = merge_method(&b.method.stability, s.method.stability.as_ref())?;
                match &s.points {
                    Some(list) => {
                        for &n in list {
                            let i = Self::index(&b.points, n, &s.name)?;
                            if s.recompute || b.points[i].stability().is_none() {
                                let st = point_stability(pr, &b, &b.points[i])?;
                                b.points[i].set_stability(st);
                            }
                        }
                    }
                    None => {
                        let (sb, e) = branch_stability(pr, &b, 0, s.recompute)?;
                        ev.extend(e);
                        b = sb;
                    }
                }
                let with = b.points.iter().filter(|p| p.stability().is_some()).count();
                Ok((StageOutput::Branch(b), json!({ "points": with }), ev))
            }
            StageKind::ToHopf => {
                let src = self.pick(s)?;
                let sm = self.stability_method(s, src.kind())?;
                let h = to_hopf(pr, &src, &s.excludefreqs, &sm)?;
                let h = if s.free.is_empty() { h } else { self.correct_seed(s, &h, &s.free, &[], &mut ev, "the Hopf point")? };
                let hp = h.as_hopf()?;
                let sum = json!({ "parameter": hp.parameter, "omega": hp.omega });
                Ok((StageOutput::Point { point: h, anchor: None }, sum, ev))
            }
            StageKind::ToPsol => {
                let src = self.pick(s)?;
                let (d, l) = (s.degree.unwrap(), s.intervals.unwrap());
                let (ps, step) = to_psol(&src, s.amplitude.unwrap(), d, l)?;
                let ps = self.correct_seed(s, &ps, &s.free, &[step], &mut ev, "the periodic orbit")?;
                let (anchor, _) = to_psol(&src, 0.0, d, l)?;
                let sum = json!({ "parameter": ps.parameter(), "period": ps.period() });
                Ok((StageOutput::Point { point: ps, anchor: Some(anchor) }, sum, ev))
            }
            StageKind::PsolBranch => {
                if let Some(names) = &s.seeds {
                    let mut seeds = Vec::new();
                    for n in names {
                        let r = self.records.iter().find(|r| &r.name == n).ok_or_else(|| {
                            Error::Config(format!("stage '{}': no output from '{}'", s.name, n))
                        })?;
                        match &r.output {
                            StageOutput::Point { point, .. } => seeds.push(point.clone()),
                            StageOutput::Branch(_) => {
                                return Err(Error::Config(format!("stage '{}': seed '{}' is a branch", s.name, n)))
                            }
                        }
                    }
                    return self.psol_from_seeds(s, seeds, ev);
                }
                let src = self.source(s)?;
                let seeds = match (&s.points, &src.output) {
                    (None, StageOutput::Point { point, anchor: Some(a) }) => vec![a.clone(), point.clone()],
                    (Some(list), out) => {
                        let (d, l) = s.remesh.unwrap();
                        let mut v = Vec::new();
                        for &n in list {
                            let p = &out.points()[Self::index(out.points(), n, &s.name)?];
                            let q = remesh(p, d, NewMesh::Intervals(l))?;
                            v.push(self.correct_seed(s, &q, &s.seed_free, &[], &mut ev, "a remeshed seed")?);
                        }
                        v
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "stage '{}': source must be a to_psol stage or give 'points' and 'remesh'",
                            s.name
                        )))
                    }
                };
                self.psol_from_seeds(s, seeds, ev)
            }
            StageKind::ToHcli => {
                let mut src = self.pick(s)?;
                if let Some(t) = s.pin_period {
                    let m = match self.source(s)?.output.branch() {
                        Some(b) => b.method.point.clone(),
                        None => default_point_method(PointKind::Psol),
                    };
                    let mut pin = point_axpy(0.0, &src, None)?;
                    if let Point::Psol(q) = &mut pin {
                        q.period = 1.0;
                    }
                    if let Point::Psol(q) = &mut src {
                        q.period = t;
                    }
                    let adapt = m.adapt_mesh_after_correct > 0;
                    src = self.correct_with(&m, adapt, &src, &s.free, &[pin], &mut ev, "the orbit with pinned period")?;
                }
                if let Some((a, b)) = s.segment {
                    src = orbit_segment(&src, a, b)?;
                }
                let sm = self.stability_method(s, PointKind::Stst)?;
                let h0 = to_hcli(pr, &src, &sm)?;
                let (eps0, t0) = (h0.as_hcli()?.epsilon, h0.as_hcli()?.period);
                let cols0 = h0.as_hcli()?.profile.mesh().len();
                let mut h = self.correct_seed(s, &h0, &s.free, &[], &mut ev, "the connecting orbit")?;
                let t1 = h.period();
                if let Some((d, l)) = s.remesh {
                    let q = remesh(&h, d, NewMesh::Intervals(l))?;
                    h = self.correct_seed(s, &q, &s.free, &[], &mut ev, "the remeshed connecting orbit")?;
                }
                let c = h.as_hcli()?;
                let sum = json!({
                    "parameter": c.parameter,
                    "initial_period": t0,
                    "initial_epsilon": eps0,
                    "initial_mesh_points": cols0,
                    "corrected_period": t1,
                    "period": c.period,
                    "lambda_v": c.lambda_v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                    "epsilon": c.epsilon,
                    "mesh_points": c.profile.mesh().len(),
                });
                Ok((StageOutput::Point { point: h, anchor: None }, sum, ev))
            }
        }
    }
}

/// Run all stages in memory, stopping at the first failing stage.
pub fn execute(plan: &RunPlan, opts: &RunOptions) -> Result<RunReport> {
    plan.validate()?;
    let sys = builtin_system(&plan.system)?;
    let mut runner = Runner { sys: &sys, opts, records: Vec::new() };
    let mut failure = None;
    for s in &plan.stages {
        match runner.run_stage(s) {
            Ok((output, summary, events)) => {
                if opts.verbose.unwrap_or(1) >= 1 {
                    eprintln!("{} ({:?}): {}", s.name, s.kind, summary);
                }
                runner.records.push(StageRecord {
                    name: s.name.clone(),
                    kind: s.kind,
                    output,
                    summary,
                    events,
                    files: Vec::new(),
                })
            }
            Err(error) => {
                failure = Some(StageFailure { stage: s.name.clone(), error });
                break;
            }
        }
    }
    Ok(RunReport { system: plan.system.clone(), records: runner.records, failure })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {}", path.display(), e))
}

/// Write per-stage files, the events log, the manifest and (on failure) an
/// error record into `dir`.
pub fn emit_report(report: &mut RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let stale = dir.join("error.json");
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| io_error(&stale, e))?;
    }
    let sys = builtin_system(&report.system)?;
    let names: Vec<String> = sys.parameter_names.iter().map(|s| s.to_string()).collect();
    let events_path = dir.join("events.jsonl");
    let mut log = fs::File::create(&events_path).map_err(|e| io_error(&events_path, e))?;
    for (k, r) in report.records.iter_mut().enumerate() {
        let stem = format!("{:02}_{}", k + 1, r.name);
        let mut files = Vec::new();
        let dto = match &r.output {
            StageOutput::Branch(b) => BranchDto::from_branch(b, &names),
            StageOutput::Point { point, .. } => BranchDto::from_point(point, &names),
        };
        let f = format!("{}.json", stem);
        write_json(&dir.join(&f), &dto)?;
        files.push(f);
        if let StageOutput::Branch(b) = &r.output {
            if b.points.len() >= 1 {
                let stab = b.points.iter().any(|p| p.stability().is_some()) && b.kind != PointKind::Hcli;
                let (xm, ym) = default_measures(false, b)?;
                let mut measures = vec![xm.clone(), ym.clone()];
                if stab {
                    measures.push(default_measures(true, b)?.1);
                }
                let f = format!("{}_measures.csv", stem);
                write_measures(b, &measures, &dir.join(&f))?;
                files.push(f);
                let f = format!("{}_plot.csv", stem);
                write_plot(b, &xm, &ym, &dir.join(&f))?;
                files.push(f);
                if stab {
                    let f = format!("{}_stability_plot.csv", stem);
                    write_plot(b, &xm, &measures[2], &dir.join(&f))?;
                    files.push(f);
                }
            }
        }
        for e in &r.events {
            let mut v = serde_json::to_value(e).unwrap();
            v.as_object_mut().unwrap().insert("stage".into(), json!(r.name));
            writeln!(log, "{}", v).map_err(|e| io_error(&events_path, e))?;
        }
        r.files = files;
    }
    let stages: Vec<Value> = report
        .records
        .iter()
        .map(|r| json!({ "name": r.name, "kind": r.kind, "status": "ok", "files": r.files, "summary": r.summary }))
        .collect();
    let mut manifest = json!({ "system": report.system, "stages": stages, "events": "events.jsonl" });
    if let Some(f) = &report.failure {
        let err = json!({ "stage": f.stage, "exit_code": f.exit_code(), "error": f.error.to_string() });
        write_json(&dir.join("error.json"), &err)?;
        manifest["failure"] = err;
    }
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Parse, execute and write a plan. The output directory is `opts.out`,
/// else the plan's own, else `out`.
pub fn run(plan: &RunPlan, opts: &RunOptions) -> Result<RunReport> {
    let mut report = execute(plan, opts)?;
    let dir = opts.out.clone().or_else(|| plan.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    emit_report(&mut report, &dir)?;
    Ok(report)
}

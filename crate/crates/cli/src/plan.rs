//! Declarative run plans (TOML). Parameter indices are 1-based.

use std::collections::HashSet;
use std::path::PathBuf;

use ddebif::{Error, Measure, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    StstBranch,
    Stability,
    ToHopf,
    HopfBranch,
    ToPsol,
    PsolBranch,
    ToHcli,
    HcliBranch,
}

impl StageKind {
    pub fn makes_branch(self) -> bool {
        matches!(
            self,
            StageKind::StstBranch | StageKind::Stability | StageKind::HopfBranch | StageKind::PsolBranch | StageKind::HcliBranch
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    #[default]
    First,
    Last,
}

/// Pick the first or last point whose measure (first value) lies above
/// and/or below the given thresholds. Points where the measure is absent do
/// not match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectRule {
    pub measure: Measure,
    pub above: Option<f64>,
    pub below: Option<f64>,
    #[serde(default)]
    pub which: Which,
}

/// Partial method overrides, merged field by field into the defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOverrides {
    pub point: Option<serde_json::Map<String, serde_json::Value>>,
    pub stability: Option<serde_json::Map<String, serde_json::Value>>,
    pub continuation: Option<serde_json::Map<String, serde_json::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub name: String,
    pub kind: StageKind,
    /// Name of an earlier stage whose output is the input.
    pub from: Option<String>,
    /// 1-based point number in the source; negative counts from the end.
    pub point: Option<i64>,
    /// Several point numbers (psol_branch seeds taken from a branch).
    pub points: Option<Vec<i64>>,
    pub select: Option<SelectRule>,
    /// psol_branch: earlier point stages whose outputs are the seeds.
    pub seeds: Option<Vec<String>>,

    /// Explicit starting point of a steady-state branch.
    pub parameter: Option<Vec<f64>>,
    pub x: Option<Vec<f64>>,

    #[serde(default)]
    pub free: Vec<usize>,
    /// Second seed: parameter increments applied to the first seed.
    #[serde(default)]
    pub seed_step: Vec<(usize, f64)>,
    /// Free parameters while correcting seeds.
    #[serde(default)]
    pub seed_free: Vec<usize>,
    #[serde(default)]
    pub min_bound: Vec<(usize, f64)>,
    #[serde(default)]
    pub max_bound: Vec<(usize, f64)>,
    #[serde(default)]
    pub max_step: Vec<(usize, f64)>,
    pub max_tries: Option<usize>,
    /// Reverse the branch and continue this many more steps.
    pub reverse_tries: Option<usize>,
    /// Compute stability along the produced branch.
    #[serde(default)]
    pub stability: bool,
    /// Stability stage: recompute existing stability.
    #[serde(default)]
    pub recompute: bool,

    #[serde(default)]
    pub excludefreqs: Vec<f64>,
    pub amplitude: Option<f64>,
    pub degree: Option<usize>,
    pub intervals: Option<usize>,
    /// Adapt the mesh after correcting seeds (orbits with an explicit mesh).
    #[serde(default)]
    pub adapt: bool,
    /// psol_branch: drop the (equidistant) mesh of the seeds so it stays fixed.
    #[serde(default)]
    pub clear_mesh: bool,
    /// Re-represent on (degree, intervals) before correcting.
    pub remesh: Option<(usize, usize)>,
    /// to_hcli: correct the source orbit with its period pinned at this value.
    pub pin_period: Option<f64>,
    /// to_hcli: representation points (0-based, interval boundaries) cut out
    /// of the source orbit.
    pub segment: Option<(usize, usize)>,

    #[serde(default)]
    pub method: MethodOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPlan {
    pub system: String,
    pub output: Option<PathBuf>,
    #[serde(default, rename = "stage")]
    pub stages: Vec<Stage>,
}

impl RunPlan {
    pub fn parse(text: &str) -> Result<RunPlan> {
        let plan: RunPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Names unique, references resolve to earlier stages, required fields
    /// present per stage kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &Stage, msg: String| Err(Error::Config(format!("stage '{}': {}", s.name, msg)));
        let mut seen: HashSet<&str> = HashSet::new();
        for s in &self.stages {
            if s.name.is_empty() {
                return Err(Error::Config("stage without a name".into()));
            }
            if let Some(f) = &s.from {
                if !seen.contains(f.as_str()) {
                    return bad(s, format!("refers to '{}', which is not an earlier stage", f));
                }
            }
            if !seen.insert(&s.name) {
                return bad(s, "duplicate stage name".into());
            }
            for n in s.seeds.iter().flatten() {
                if !seen.contains(n.as_str()) {
                    return bad(s, format!("seed '{}' is not an earlier stage", n));
                }
            }
            if s.point.is_some() && s.select.is_some() {
                return bad(s, "give either point or select, not both".into());
            }
            if let Some(sel) = &s.select {
                sel.measure.validate()?;
                if sel.above.is_none() && sel.below.is_none() {
                    return bad(s, "select needs above and/or below".into());
                }
            }
            let needs_from = !matches!(s.kind, StageKind::StstBranch) && s.seeds.is_none();
            if needs_from && s.from.is_none() {
                return bad(s, "needs 'from'".into());
            }
            match s.kind {
                StageKind::StstBranch => {
                    if s.from.is_none() && (s.parameter.is_none() || s.x.is_none()) {
                        return bad(s, "needs 'from' or both 'parameter' and 'x'".into());
                    }
                }
                StageKind::ToPsol => {
                    if s.amplitude.is_none() || s.degree.is_none() || s.intervals.is_none() {
                        return bad(s, "needs amplitude, degree and intervals".into());
                    }
                }
                StageKind::PsolBranch => {
                    if s.points.is_some() && s.remesh.is_none() {
                        return bad(s, "seeds taken from a branch need 'remesh'".into());
                    }
                }
                _ => {}
            }
            if s.kind.makes_branch() && s.kind != StageKind::Stability && s.free.is_empty() {
                return bad(s, "needs at least one free parameter".into());
            }
        }
        Ok(())
    }
}

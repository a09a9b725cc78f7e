use serde::{Deserialize, Serialize};

use super::measure::{eval_measure, Measure, MeasureField};
use super::methods::{
    default_continuation_method, default_point_method, default_stability_method,
    ContinuationMethod, PointMethod, StabilityMethod,
};
use super::point::{Point, PointKind};
use crate::error::{Error, Result};
use crate::system::{DelaySpec, ProblemFunctions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMethod {
    pub point: PointMethod,
    pub stability: StabilityMethod,
    pub continuation: ContinuationMethod,
}

/// Free parameters and per-parameter limits, all indices 1-based.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterRecord {
    pub free: Vec<usize>,
    pub min_bound: Vec<(usize, f64)>,
    pub max_bound: Vec<(usize, f64)>,
    pub max_step: Vec<(usize, f64)>,
}

impl ParameterRecord {
    /// Replace or add the entry for `index` in one of the bound lists.
    pub fn set(list: &mut Vec<(usize, f64)>, index: usize, value: f64) {
        if let Some(e) = list.iter_mut().find(|e| e.0 == index) {
            e.1 = value;
        } else {
            list.push((index, value));
        }
    }
}

/// An ordered list of same-kind points with its methods and parameter record.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub kind: PointKind,
    pub points: Vec<Point>,
    pub method: BranchMethod,
    pub parameter: ParameterRecord,
}

impl Branch {
    pub fn validate(&self, par_count: usize) -> Result<()> {
        for p in &self.points {
            if p.kind() != self.kind {
                return Err(Error::KindMismatch {
                    expected: self.kind.name().into(),
                    found: p.kind().name().into(),
                });
            }
        }
        let check = |i: usize| {
            if i == 0 || i > par_count {
                Err(Error::Config(format!("parameter index {} outside 1..={}", i, par_count)))
            } else {
                Ok(())
            }
        };
        for &i in &self.parameter.free {
            check(i)?;
        }
        for list in [&self.parameter.min_bound, &self.parameter.max_bound, &self.parameter.max_step] {
            for &(i, _) in list {
                check(i)?;
            }
        }
        Ok(())
    }
}

/// Empty branch with default methods; constant delays get a lower bound 0.
pub fn default_branch(problem: &ProblemFunctions, free: &[usize], kind: PointKind) -> Branch {
    let min_bound = match &problem.delays {
        DelaySpec::ConstantIndices(ix) => ix.iter().map(|&i| (i, 0.0)).collect(),
        DelaySpec::StateDependent { .. } => Vec::new(),
    };
    Branch {
        kind,
        points: Vec::new(),
        method: BranchMethod {
            point: default_point_method(kind),
            stability: default_stability_method(kind),
            continuation: default_continuation_method(),
        },
        parameter: ParameterRecord {
            free: free.to_vec(),
            min_bound,
            max_bound: Vec::new(),
            max_step: Vec::new(),
        },
    }
}

/// Measure along a branch: per-point values and their lengths. Points without
/// stability data yield empty rows for stability measures.
pub fn branch_measure(b: &Branch, m: &Measure) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut rows = Vec::with_capacity(b.points.len());
    for p in &b.points {
        let r = if m.field == MeasureField::Stability && p.stability().is_none() {
            Vec::new()
        } else {
            eval_measure(p, m)?
        };
        rows.push(r);
    }
    let lengths = rows.iter().map(|r| r.len()).collect();
    Ok((rows, lengths))
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::point::{Point, Stability};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureField {
    Parameter,
    X,
    V,
    Omega,
    Profile,
    Period,
    Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeasureSubfield {
    #[default]
    #[serde(rename = "")]
    None,
    L0,
    L1,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedSelector {
    Min,
    Max,
    Mean,
    Ampl,
    All,
}

/// Row or column choice: a 1-based index or a named selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selector {
    Index(usize),
    Named(NamedSelector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MeasureFunc {
    #[default]
    #[serde(rename = "")]
    None,
    Real,
    Imag,
    Abs,
}

/// Declarative projection of a point: func(field.subfield(row, col)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub field: MeasureField,
    #[serde(default)]
    pub subfield: MeasureSubfield,
    pub row: Selector,
    pub col: Selector,
    #[serde(default)]
    pub func: MeasureFunc,
}

impl Measure {
    pub fn new(field: MeasureField, row: Selector, col: Selector) -> Self {
        Measure { field, subfield: MeasureSubfield::None, row, col, func: MeasureFunc::None }
    }

    /// η_col (1-based).
    pub fn parameter(col: usize) -> Self {
        Measure::new(MeasureField::Parameter, Selector::Index(1), Selector::Index(col))
    }

    pub fn validate(&self) -> Result<()> {
        let all = Selector::Named(NamedSelector::All);
        let both_all = self.row == all && self.col == all;
        if !both_all
            && matches!(self.row, Selector::Named(_))
            && matches!(self.col, Selector::Named(_))
        {
            return Err(Error::Measure(
                "row and column cannot both be selectors unless both are 'all'".into(),
            ));
        }
        if let (Selector::Index(0), _) | (_, Selector::Index(0)) = (self.row, self.col) {
            return Err(Error::Measure("indices are 1-based".into()));
        }
        Ok(())
    }
}

/// Field data as a row-major complex matrix (rows, cols, entries).
fn field_data(p: &Point, m: &Measure) -> Result<(usize, usize, Vec<Complex64>)> {
    let re = |x: f64| Complex64::new(x, 0.0);
    let absent = || Error::Measure(format!("field {:?} absent for {} point", m.field, p.kind()));
    match m.field {
        MeasureField::Parameter => {
            let v: Vec<Complex64> = p.parameter().iter().map(|&x| re(x)).collect();
            Ok((1, v.len(), v))
        }
        MeasureField::X => {
            let x = p.state().ok_or_else(absent)?;
            Ok((x.len(), 1, x.iter().map(|&v| re(v)).collect()))
        }
        MeasureField::V => match p {
            Point::Fold(f) => Ok((f.v.len(), 1, f.v.iter().map(|&v| re(v)).collect())),
            Point::Hopf(h) => Ok((h.v.len(), 1, h.v.iter().cloned().collect())),
            Point::Hcli(c) => {
                let (r, s) = c.v.shape();
                let data = (0..r).flat_map(|i| (0..s).map(move |k| (i, k))).map(|(i, k)| c.v[(i, k)]);
                Ok((r, s, data.collect()))
            }
            _ => Err(absent()),
        },
        MeasureField::Omega => match p {
            Point::Hopf(h) => Ok((1, 1, vec![re(h.omega)])),
            _ => Err(absent()),
        },
        MeasureField::Profile => {
            let pr = p.profile().ok_or_else(absent)?;
            let v = pr.values();
            let (r, c) = v.shape();
            let data = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| re(v[(i, j)]));
            Ok((r, c, data.collect()))
        }
        MeasureField::Period => Ok((1, 1, vec![re(p.period().ok_or_else(absent)?)])),
        MeasureField::Stability => {
            let s = p
                .stability()
                .ok_or_else(|| Error::Measure("stability requested but empty".into()))?;
            let list = match (s, m.subfield) {
                (Stability::Roots { l0, .. }, MeasureSubfield::L0) => l0.clone(),
                (Stability::Roots { l1, .. }, MeasureSubfield::L1) => l1.clone(),
                (Stability::Multipliers { mu }, MeasureSubfield::Mu) => mu.clone(),
                (_, sub) => {
                    return Err(Error::Measure(format!("stability subfield {:?} not available", sub)))
                }
            };
            Ok((list.len(), 1, list))
        }
    }
}

fn reduce(values: &[Complex64], sel: NamedSelector) -> Vec<Complex64> {
    if values.is_empty() {
        return Vec::new();
    }
    let complex = values.iter().any(|z| z.im != 0.0);
    let key = |z: &Complex64| if complex { z.norm() } else { z.re };
    let pick = |want_max: bool| {
        let mut best = values[0];
        for z in &values[1..] {
            if (want_max && key(z) > key(&best)) || (!want_max && key(z) < key(&best)) {
                best = *z;
            }
        }
        best
    };
    match sel {
        NamedSelector::Min => vec![pick(false)],
        NamedSelector::Max => vec![pick(true)],
        NamedSelector::Mean => {
            let s: Complex64 = values.iter().sum();
            vec![s / values.len() as f64]
        }
        NamedSelector::Ampl => vec![pick(true) - pick(false)],
        NamedSelector::All => values.to_vec(),
    }
}

/// Evaluate a measure on a point. Complex results are mapped by `func`; an
/// empty func takes the real part.
pub fn eval_measure(p: &Point, m: &Measure) -> Result<Vec<f64>> {
    m.validate()?;
    let (rows, cols, data) = field_data(p, m)?;
    let at = |i: usize, j: usize| data[i * cols + j];
    let check = |k: usize, lim: usize, what: &str| -> Result<usize> {
        if k == 0 || k > lim {
            Err(Error::Measure(format!("{} index {} outside 1..={}", what, k, lim)))
        } else {
            Ok(k - 1)
        }
    };
    let selected: Vec<Complex64> = match (m.row, m.col) {
        (Selector::Index(r), Selector::Index(c)) => {
            vec![at(check(r, rows, "row")?, check(c, cols, "column")?)]
        }
        (Selector::Index(r), Selector::Named(s)) => {
            let r = check(r, rows, "row")?;
            reduce(&(0..cols).map(|j| at(r, j)).collect::<Vec<_>>(), s)
        }
        (Selector::Named(s), Selector::Index(c)) => {
            let c = check(c, cols, "column")?;
            reduce(&(0..rows).map(|i| at(i, c)).collect::<Vec<_>>(), s)
        }
        (Selector::Named(_), Selector::Named(_)) => {
            (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).map(|(i, j)| at(i, j)).collect()
        }
    };
    Ok(selected
        .into_iter()
        .map(|z| match m.func {
            MeasureFunc::None | MeasureFunc::Real => z.re,
            MeasureFunc::Imag => z.im,
            MeasureFunc::Abs => z.norm(),
        })
        .collect())
}

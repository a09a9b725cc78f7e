//! CSV output of branch measures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ddebif::{branch_measure, Branch, Error, Measure, MeasureFunc, MeasureSubfield, NamedSelector, Result, Selector};

fn sel(s: &Selector) -> String {
    match s {
        Selector::Index(i) => i.to_string(),
        Selector::Named(n) => match n {
            NamedSelector::Min => "min",
            NamedSelector::Max => "max",
            NamedSelector::Mean => "mean",
            NamedSelector::Ampl => "ampl",
            NamedSelector::All => "all",
        }
        .into(),
    }
}

/// Column label such as `parameter[1,4]` or `stability.l1[all,1].real`.
pub fn measure_label(m: &Measure) -> String {
    let field = serde_json::to_value(m.field).unwrap();
    let mut s = field.as_str().unwrap_or("measure").to_string();
    match m.subfield {
        MeasureSubfield::None => {}
        MeasureSubfield::L0 => s.push_str(".l0"),
        MeasureSubfield::L1 => s.push_str(".l1"),
        MeasureSubfield::Mu => s.push_str(".mu"),
    }
    let _ = write!(s, "[{},{}]", sel(&m.row), sel(&m.col));
    match m.func {
        MeasureFunc::None => {}
        MeasureFunc::Real => s.push_str(".real"),
        MeasureFunc::Imag => s.push_str(".imag"),
        MeasureFunc::Abs => s.push_str(".abs"),
    }
    s
}

fn num(x: f64) -> String {
    format!("{:.16e}", x)
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))
}

/// One row per point; a measure with several values takes several columns
/// and shorter rows are padded with empty cells.
pub fn write_measures(b: &Branch, measures: &[Measure], path: &Path) -> Result<()> {
    let mut cols = Vec::new();
    for m in measures {
        let (rows, lens) = branch_measure(b, m)?;
        let width = lens.iter().copied().max().unwrap_or(0).max(1);
        cols.push((measure_label(m), rows, width));
    }
    let mut out = String::from("point");
    for (label, _, width) in &cols {
        if *width == 1 {
            let _ = write!(out, ",{}", label);
        } else {
            for k in 1..=*width {
                let _ = write!(out, ",{}_{}", label, k);
            }
        }
    }
    out.push('\n');
    for i in 0..b.points.len() {
        out.push_str(&(i + 1).to_string());
        for (_, rows, width) in &cols {
            for k in 0..*width {
                out.push(',');
                if let Some(v) = rows[i].get(k) {
                    out.push_str(&num(*v));
                }
            }
        }
        out.push('\n');
    }
    write(path, out)
}

/// (x, y) pairs: the first x value against every y value of each point.
pub fn write_plot(b: &Branch, x: &Measure, y: &Measure, path: &Path) -> Result<()> {
    let (xs, _) = branch_measure(b, x)?;
    let (ys, _) = branch_measure(b, y)?;
    let mut out = String::from("point,x,y\n");
    for (i, (xr, yr)) in xs.iter().zip(&ys).enumerate() {
        let Some(&xv) = xr.first() else { continue };
        for &yv in yr {
            let _ = writeln!(out, "{},{},{}", i + 1, num(xv), num(yv));
        }
    }
    write(path, out)
}

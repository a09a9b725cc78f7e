use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::poly::equidistant_basis;

/// Piecewise polynomial on [0,1]: L intervals of degree d, represented by its
/// values at L·d+1 points (interval points at indices 0, d, 2d, …, with
/// equidistant representation points in between).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseProfile {
    mesh: Option<Vec<f64>>,
    degree: usize,
    values: Mat,
}

const MESH_TOL: f64 = 1e-12;

/// Equidistant mesh of `intervals` intervals of degree `degree`.
pub fn equidistant_mesh(degree: usize, intervals: usize) -> Vec<f64> {
    let np = degree * intervals;
    (0..=np).map(|j| j as f64 / np as f64).collect()
}

/// Full mesh from interval points, with equidistant representation points.
pub fn mesh_from_intervals(points: &[f64], degree: usize) -> Vec<f64> {
    let mut mesh = Vec::with_capacity((points.len() - 1) * degree + 1);
    for w in points.windows(2) {
        for j in 0..degree {
            let s = j as f64 / degree as f64;
            mesh.push(w[0] + s * (w[1] - w[0]));
        }
    }
    mesh.push(*points.last().unwrap());
    mesh
}

/// Check the mesh rules; returns the number of intervals.
pub fn validate_mesh(mesh: &[f64], degree: usize) -> Result<usize> {
    if degree == 0 {
        return Err(Error::Mesh("degree must be positive".into()));
    }
    if mesh.len() < degree + 1 || (mesh.len() - 1) % degree != 0 {
        return Err(Error::Mesh(format!(
            "mesh length {} is not L·{}+1",
            mesh.len(),
            degree
        )));
    }
    if mesh[0] != 0.0 || (mesh[mesh.len() - 1] - 1.0).abs() > MESH_TOL {
        return Err(Error::Mesh("mesh must start at 0 and end at 1".into()));
    }
    let l = (mesh.len() - 1) / degree;
    for i in 0..l {
        let a = mesh[i * degree];
        let b = mesh[(i + 1) * degree];
        if !(b > a) {
            return Err(Error::Mesh(format!("interval points not increasing at interval {}", i)));
        }
        for j in 1..degree {
            let expected = a + (j as f64 / degree as f64) * (b - a);
            let got = mesh[i * degree + j];
            if (got - expected).abs() > MESH_TOL * (1.0 + expected.abs()) {
                return Err(Error::Mesh(format!(
                    "representation point {} is {} but should be {}",
                    i * degree + j,
                    got,
                    expected
                )));
            }
        }
    }
    Ok(l)
}

impl PiecewiseProfile {
    /// Build a profile; `mesh = None` means equidistant.
    pub fn new(mesh: Option<Vec<f64>>, degree: usize, values: Mat) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Mesh("degree must be positive".into()));
        }
        let cols = values.ncols();
        if cols < degree + 1 || (cols - 1) % degree != 0 {
            return Err(Error::Mesh(format!(
                "{} profile columns is not L·{}+1",
                cols, degree
            )));
        }
        if let Some(m) = &mesh {
            if m.len() != cols {
                return Err(Error::Mesh(format!(
                    "mesh has {} points but profile has {} columns",
                    m.len(),
                    cols
                )));
            }
            validate_mesh(m, degree)?;
        }
        Ok(PiecewiseProfile { mesh, degree, values })
    }

    /// Unchecked constructor for internal meshes that extend beyond [0,1].
    pub(crate) fn from_parts(mesh: Vec<f64>, degree: usize, values: Mat) -> Self {
        PiecewiseProfile { mesh: Some(mesh), degree, values }
    }

    /// Constant profile equal to `x` on an explicit equidistant mesh.
    pub fn constant(x: &Vector, degree: usize, intervals: usize) -> Self {
        let cols = degree * intervals + 1;
        let values = Mat::from_fn(x.len(), cols, |r, _| x[r]);
        PiecewiseProfile { mesh: Some(equidistant_mesh(degree, intervals)), degree, values }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn intervals(&self) -> usize {
        (self.values.ncols() - 1) / self.degree
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Mat {
        &mut self.values
    }

    pub fn explicit_mesh(&self) -> Option<&[f64]> {
        self.mesh.as_deref()
    }

    pub fn has_explicit_mesh(&self) -> bool {
        self.mesh.is_some()
    }

    /// Drop an explicit mesh that is equidistant, so the mesh stays fixed.
    pub fn clear_mesh(&mut self) -> Result<()> {
        if let Some(m) = &self.mesh {
            let eq = equidistant_mesh(self.degree, self.intervals());
            if m.iter().zip(&eq).any(|(a, b)| (a - b).abs() > MESH_TOL) {
                return Err(Error::Mesh("only an equidistant mesh can be cleared".into()));
            }
        }
        self.mesh = None;
        Ok(())
    }

    /// Mesh with the equidistant default materialized.
    pub fn mesh(&self) -> Vec<f64> {
        match &self.mesh {
            Some(m) => m.clone(),
            None => equidistant_mesh(self.degree, self.intervals()),
        }
    }

    /// Interval points t_0..t_L.
    pub fn interval_points(&self) -> Vec<f64> {
        let l = self.intervals();
        match &self.mesh {
            Some(m) => (0..=l).map(|i| m[i * self.degree]).collect(),
            None => (0..=l).map(|i| i as f64 / l as f64).collect(),
        }
    }

    /// Same mesh description (explicit or default) and degree.
    pub fn same_mesh(&self, other: &PiecewiseProfile) -> bool {
        self.degree == other.degree
            && self.values.ncols() == other.values.ncols()
            && self.mesh() == other.mesh()
    }

    pub fn with_values(&self, values: Mat) -> Self {
        PiecewiseProfile { mesh: self.mesh.clone(), degree: self.degree, values }
    }

    /// Index i of the interval with t_i ≤ t < t_{i+1} (last interval closed).
    pub fn locate(&self, t: f64, points: &[f64]) -> usize {
        let l = points.len() - 1;
        if t <= points[0] {
            return 0;
        }
        if t >= points[l] {
            return l - 1;
        }
        let mut lo = 0;
        let mut hi = l;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if points[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Basis values and t-derivatives of interval `i` at t (no wrapping).
    pub fn basis(&self, i: usize, t: f64, points: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = points[i];
        let b = points[i + 1];
        let (v, mut dv) = equidistant_basis(self.degree, (t - a) / (b - a));
        for x in dv.iter_mut() {
            *x /= b - a;
        }
        (v, dv)
    }

    /// Value and derivative of the polynomial piece on interval `i` at t.
    pub fn eval_piece(&self, i: usize, t: f64, points: &[f64]) -> (Vector, Vector) {
        let (v, dv) = self.basis(i, t, points);
        let n = self.dim();
        let mut val = Vector::zeros(n);
        let mut der = Vector::zeros(n);
        for j in 0..=self.degree {
            let col = self.values.column(i * self.degree + j);
            val.axpy(v[j], &col, 1.0);
            der.axpy(dv[j], &col, 1.0);
        }
        (val, der)
    }

    /// Value and derivative at t ∈ [0,1] (clamped, no wrapping).
    pub fn eval_clamped(&self, t: f64) -> (Vector, Vector) {
        let points = self.interval_points();
        let t = t.clamp(0.0, 1.0);
        let i = self.locate(t, &points);
        self.eval_piece(i, t, &points)
    }

    /// Value and derivative at t taken modulo [0,1].
    pub fn eval_wrapped(&self, t: f64) -> (Vector, Vector) {
        self.eval_clamped(wrap_unit(t))
    }

    /// Values at the given times (wrapped), as columns.
    pub fn sample(&self, times: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.dim(), times.len());
        for (k, &t) in times.iter().enumerate() {
            out.set_column(k, &self.eval_wrapped(t).0);
        }
        out
    }
}

/// t - floor(t), mapping into [0,1).
pub fn wrap_unit(t: f64) -> f64 {
    let w = t - t.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

//! Point kinds, stability payloads, method records, branches and measures.

mod branch;
mod measure;
mod methods;
mod point;
mod profile;

pub use branch::{branch_measure, default_branch, Branch, BranchMethod, ParameterRecord};
pub use measure::{
    eval_measure, Measure, MeasureField, MeasureFunc, MeasureSubfield, NamedSelector, Selector,
};
pub use methods::{
    bdf4_alpha, bdf4_beta, default_continuation_method, default_point_method,
    default_stability_method, ContinuationMethod, PlotMeasure, PointMethod, StabilityMethod,
    BDF4_RHO,
};
pub use point::{
    align_profile, flatten, phase_of_largest, point_axpy, point_norm, point_normalize, unflatten,
    ConnectingOrbit, FlatLayout, FoldPoint, HopfPoint, PeriodicOrbit, Point, PointKind,
    SteadyState, Stability,
};
pub(crate) use point::kind_error;
pub use profile::{equidistant_mesh, mesh_from_intervals, validate_mesh, wrap_unit, PiecewiseProfile};

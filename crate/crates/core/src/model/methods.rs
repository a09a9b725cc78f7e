use serde::{Deserialize, Serialize};

use super::measure::Measure;
use super::point::PointKind;

/// Newton corrector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMethod {
    pub newton_max_iterations: usize,
    pub newton_nmon_iterations: usize,
    pub halting_accuracy: f64,
    pub minimal_accuracy: f64,
    pub extra_condition: bool,
    pub print_residual_info: bool,
    /// Periodic and connecting orbits only.
    #[serde(default)]
    pub phase_condition: bool,
    /// Empty: Gauss-Legendre points.
    #[serde(default)]
    pub collocation_parameters: Vec<f64>,
    #[serde(default)]
    pub adapt_mesh_before_correct: usize,
    #[serde(default)]
    pub adapt_mesh_after_correct: usize,
}

/// Characteristic-root and Floquet-multiplier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMethod {
    pub lms_parameter_alpha: Vec<f64>,
    pub lms_parameter_beta: Vec<f64>,
    pub lms_parameter_rho: f64,
    pub interpolation_order: usize,
    pub minimal_time_step: f64,
    pub maximal_time_step: f64,
    pub max_number_of_eigenvalues: usize,
    pub minimal_real_part: Option<f64>,
    pub max_newton_iterations: usize,
    pub root_accuracy: f64,
    pub remove_unconverged_roots: bool,
    pub delay_accuracy: f64,
    #[serde(default)]
    pub collocation_parameters: Vec<f64>,
    pub minimal_modulus: f64,
}

/// Plot measures used for continuation progress samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotMeasure {
    pub x: Measure,
    pub y: Measure,
}

/// Continuation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationMethod {
    pub steplength_condition: bool,
    pub plot: f64,
    pub prediction: u32,
    pub steplength_growth_factor: f64,
    pub plot_progress: bool,
    pub plot_measure: Option<PlotMeasure>,
    pub halt_before_reject: bool,
}

/// BDF4 coefficients ordered past to present, scaled so that the oldest α is 1.
pub fn bdf4_alpha() -> Vec<f64> {
    vec![1.0, -16.0 / 3.0, 12.0, -16.0, 25.0 / 3.0]
}

pub fn bdf4_beta() -> Vec<f64> {
    vec![0.0, 0.0, 0.0, 0.0, 4.0]
}

/// Safety radius of BDF4 with relative accuracy 0.01 on the principal root,
/// scanned at radius resolution 0.01 (see `spectrum::lms_safety_radius`).
pub const BDF4_RHO: f64 = 0.45;

pub fn default_point_method(kind: PointKind) -> PointMethod {
    let (max_it, halt, min_acc) = match kind {
        PointKind::Stst => (5, 1e-10, 1e-8),
        PointKind::Fold | PointKind::Hopf => (5, 1e-9, 1e-7),
        PointKind::Psol => (5, 1e-8, 1e-6),
        PointKind::Hcli => (10, 1e-8, 1e-6),
    };
    let orbit = matches!(kind, PointKind::Psol | PointKind::Hcli);
    PointMethod {
        newton_max_iterations: max_it,
        newton_nmon_iterations: 1,
        halting_accuracy: halt,
        minimal_accuracy: min_acc,
        extra_condition: false,
        print_residual_info: false,
        phase_condition: orbit,
        collocation_parameters: Vec::new(),
        adapt_mesh_before_correct: 0,
        adapt_mesh_after_correct: if orbit { 3 } else { 0 },
    }
}

pub fn default_stability_method(kind: PointKind) -> StabilityMethod {
    StabilityMethod {
        lms_parameter_alpha: bdf4_alpha(),
        lms_parameter_beta: bdf4_beta(),
        lms_parameter_rho: BDF4_RHO,
        interpolation_order: 4,
        minimal_time_step: 0.01,
        maximal_time_step: 0.1,
        max_number_of_eigenvalues: 100,
        minimal_real_part: None,
        max_newton_iterations: 6,
        root_accuracy: 1e-6,
        remove_unconverged_roots: true,
        delay_accuracy: -1e-8,
        collocation_parameters: Vec::new(),
        minimal_modulus: if kind == PointKind::Psol { 0.01 } else { 0.0 },
    }
}

pub fn default_continuation_method() -> ContinuationMethod {
    ContinuationMethod {
        steplength_condition: true,
        plot: 1.0,
        prediction: 1,
        steplength_growth_factor: 1.2,
        plot_progress: true,
        plot_measure: None,
        halt_before_reject: false,
    }
}

//! Bifurcation analysis for delay differential equations with constant and
//! state-dependent delays.

pub mod collocation;
pub mod continuation;
pub mod convert;
pub mod corrector;
pub mod error;
pub mod events;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod spectrum;
pub mod system;

pub use error::{Error, Result};
pub use events::{Event, EventKind};
pub use model::*;
pub use system::{assemble_problem, DelaySpec, DerivativeRequest, ProblemFunctions, ProblemOptions};

pub type Complex = num_complex::Complex64;

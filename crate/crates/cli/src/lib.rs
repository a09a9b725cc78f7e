//! Demo systems, run plans and file emission.

pub mod dto;
pub mod emit;
pub mod plan;
pub mod run;
pub mod systems;

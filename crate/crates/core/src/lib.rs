//! Integral sign assignments for formal flows and the bordered Floer
//! structures they induce for torus boundary.

pub mod formal_flows;
pub mod diagram;
pub mod gf2;
pub mod sign_assign;
pub mod structures;
pub mod torus_algebra;

//! Symbolic analysis of singular reduction operators for partial
//! differential equations in two independent variables.

pub mod correspondence;
pub mod jet;
pub mod problem;
pub mod reduction;
pub mod report;
pub mod run;
pub mod singularity;
pub mod symbolic;

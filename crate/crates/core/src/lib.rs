pub mod cli;
pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod relations;
pub mod step;
pub mod synthetic;

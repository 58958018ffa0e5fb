pub mod data;
pub mod error;
pub mod linalg;
pub mod model;
pub mod priors;
pub mod likelihood;
pub mod laplace;
pub mod moves;
pub mod adaptation;
pub mod engine;
pub mod checkpoint;
pub mod estimation;
pub mod simgen;
pub mod enumerate;
pub mod cli;

pub mod dataset;
pub mod error;
pub mod linalg;
pub mod linear;
pub mod logistic;
pub mod restricted;
pub mod sampling;
pub mod simulation;
pub mod cli_io;

pub mod dynamics;
pub mod linalg;
pub mod linearization;
pub mod synthesis;
pub mod simulation;
pub mod config;
pub mod reference;
pub mod cli;

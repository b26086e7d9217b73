pub mod angle;
pub mod config;
pub mod curve;
pub mod engine;
pub mod io;
pub mod lamination;
pub mod mating;
pub mod prune;
pub mod rational;

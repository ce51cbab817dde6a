//! Builders for the example measures: digit processes, self-similar
//! measures, random fractals, splices and the coded counterexample.

pub mod counterexample;
pub mod digit;
pub mod ifs;
pub mod random_fractal;
pub mod splice;

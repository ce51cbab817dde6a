//! Numerical tools for zooming dynamics on fractal measures.

pub mod cell;
pub mod constructions;
pub mod dimension;
pub mod error;
pub mod geometry;
pub mod ops;
pub mod point;
pub mod rng;
pub mod scenery;
pub mod source;
pub mod spec;
pub mod tree;

pub use cell::{CellIndex, Grid, Key, Window};
pub use error::{Error, Result};
pub use point::Point;
pub use source::{MeasureSource, Region};
pub use tree::{Norm, TreeMeasure};

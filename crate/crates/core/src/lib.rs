pub mod error;
mod fft;
pub mod field;
pub mod gmc;
pub mod curves;
pub mod winding;
pub mod area;
pub mod phi;
pub mod io;
pub mod harness;
pub mod grid;
mod raster;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{CellMask, GridSpec, Point2, Triangle};

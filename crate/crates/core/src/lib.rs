pub mod bernstein;
pub mod bspline;
pub mod bvh;
pub mod error;
pub mod fixtures;
pub mod implicit;
pub mod intersect;
pub mod io;
pub mod kdop;
pub mod lattice;
pub mod linalg;
pub mod patch;
pub mod pencil;
pub mod subdivision;
pub mod truss;

pub use error::{Error, Result};

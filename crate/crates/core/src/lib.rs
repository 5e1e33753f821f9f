//! Numerical core: periodic grids and fields, density transport, scalar and
//! vector advection-diffusion solvers with vacuum, level-set (De Giorgi)
//! energy analysis and the abstract recursion lemmas behind it.

pub mod continuity;
pub mod degiorgi;
pub mod diffusion;
pub mod error;
pub mod grid;
pub mod linsolve;
pub mod recursion;
pub mod scalar;
pub mod system;
pub mod test_functions;
pub mod trajectory;

pub use error::{Error, Result};

//! Linear q-difference operators over truncated Laurent series: Newton
//! polygons, factorization into first-order factors, symbolic solution
//! bases built from q-characters, theta powers and q-logarithms, and
//! kernel/cokernel index computations.
//!
//! Numbers are `f64`-based complex values throughout.

pub mod cli;
pub mod error;
pub mod factor;
pub mod index;
pub mod newton;
pub mod ore;
pub mod qseries;
pub mod solve;
pub mod special;

pub use error::{Error, Result};
pub use qseries::{LaurentSeries, Mode, QContext, C};

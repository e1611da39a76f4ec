//! Model isoperimetric profiles for curvature-dimension bounds, 1-D
//! curvature tests, and a discrete L1 needle decomposition on finite
//! metric measure spaces.

pub mod coeffs;
pub mod density1d;
pub mod error;
pub mod iso1d;
pub mod l1ot;
pub mod mms;
pub mod model_profiles;
pub mod needles;
mod numeric;
pub mod parallel;
pub mod report;
pub mod verify;

pub use error::{Error, Result};

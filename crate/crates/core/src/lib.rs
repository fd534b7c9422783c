//! Online nonnegative quadratic optimization by internal-model gradient flows
//! with projection anti-windup.

pub mod design;
pub mod error;
pub mod exosystem;
pub mod integrate;
pub mod linalg;
pub mod lmi;
pub mod par;
pub mod problem;
pub mod projection;
pub mod qp;
pub mod signal;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
pub use nalgebra;

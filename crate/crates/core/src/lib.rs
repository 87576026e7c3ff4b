//! Certify quantum steering by mapping steering data onto separability
//! problems, by an exact local-hidden-state semidefinite test, and by a
//! dimension-bounded determinant criterion.

#![allow(clippy::needless_range_loop)]

pub mod dimbound;
pub mod ensemble;
pub mod error;
pub mod lhs_sdp;
pub mod linalg;
pub mod scenarios;
pub mod separability;
pub mod steering_map;

pub use error::{Error, Result};

//! Numerical solver and verification suite for prescribed k-th Weingarten
//! curvature equations of vertical graphs in the hyperbolic half-space
//! model, approximated through Dirichlet problems on level-set domains of an
//! asymptotic subsolution.

pub mod band;
pub mod cli;
pub mod domain;
pub mod error;
pub mod expr;
pub mod graphgeom;
pub mod linalg;
pub mod solver;
pub mod symfunc;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};

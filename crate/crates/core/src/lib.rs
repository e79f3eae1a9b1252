//! Time-domain Maxwell solver in one space dimension for media whose
//! susceptibility is a finite sum of Debye relaxations.
//!
//! Two time discretizations share one spatial discretization: a leapfrog scheme
//! with one auxiliary recursion per pole ([`stepper::AdeStepper`]) and a
//! convolution-quadrature scheme that only needs the transfer function of the
//! material ([`stepper::CqStepper`]). With exact weights they produce the same
//! trajectory, and both satisfy a discrete energy balance.

pub mod config;
pub mod convolution;
pub mod discretization;
pub mod error;
pub mod material;
pub mod output;
pub mod run;
pub mod stepper;
pub mod weights;

pub use error::{Error, Result};

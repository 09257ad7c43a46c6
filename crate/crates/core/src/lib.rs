//! Two-weight bilinear fractional integrals over finite atomic measures.
//!
//! The crate evaluates the operator, its dyadic and sparse models, builds
//! sparse families and stopping-time decompositions, and estimates the
//! testing constants and norm constants of a concrete instance.

pub mod calibration;
pub mod decomposition;
pub mod error;
pub mod generate;
pub mod geometry;
pub mod io;
pub mod measure;
pub mod num;
pub mod operators;
pub mod par;
pub mod sparse;
pub mod testing;

pub use error::{ExponentError, GeometryError, InstanceError, MeasureError, OperatorError, SparseError};
pub use geometry::{DyadicCube, GridShift, Rational};
pub use measure::{DiscreteMeasure, ExponentTuple, SimpleFunction};
pub use operators::{OperatorParams, TruncationWindow, Weighted};
pub use sparse::SparseFamily;
pub use testing::{verify_theorem, Instance, VerificationReport};

//! Numerical toolkit for representations of relatively hyperbolic groups.
//!
//! The crate builds finite models of cusped spaces (Cayley balls with
//! combinatorial horoballs attached along peripheral cosets), evaluates
//! representations stably along long words, measures singular-value gaps and
//! limit-set flags, and certifies-by-sampling the quantitative conditions that
//! separate relatively Anosov representations from the broader extended
//! geometrically finite regime.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (real `f64` or
//! `Complex<f64>`, one code path with the adjoint in place of the transpose).
//! All sampling is seeded and all reports are deterministic for a fixed
//! configuration.

pub mod certify;
pub mod cusp;
pub mod flags;
pub mod gallery;
pub mod group;
pub mod groupfile;
pub mod matdyn;
pub mod report;
pub mod scalar;
pub mod word;

pub use group::{CosetTable, MarkedGroup, PeripheralSubgroup, Presentation};
pub use scalar::Scalar;
pub use word::Word;

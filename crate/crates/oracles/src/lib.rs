//! Reference computations for validating `turbo-amp`.
//!
//! Everything here is written from first principles (explicit basis matrices,
//! numerical integration, exhaustive enumeration) and shares no code with the
//! library under test. Speed is not a goal.

pub mod haar;
pub mod quad;
pub mod moments;
pub mod tree;
pub mod conjugate;

//! Numerical building blocks shared by the engine.

pub mod linalg;
pub mod quad;
pub mod roots;

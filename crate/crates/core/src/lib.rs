//! Multilayer particle deposition with nearest-neighbor screening.

pub mod analytic;
pub mod compare;
pub mod curve;
pub mod degree;
pub mod deposit;
pub mod exppoly;
pub mod motives;
pub mod quad;
pub mod tree;
pub mod validate;

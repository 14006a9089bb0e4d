//! Finite element schemes for the Oldroyd-B model in two dimensions, with
//! free-energy diagnostics.

pub mod diagnostics;
pub mod linalg;
pub mod mesh;
pub mod projections;
pub mod schemes;
pub mod spaces;
pub mod tensor;
pub mod transport;

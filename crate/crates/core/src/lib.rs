//! Projective and conformal structures on the flat torus: compatibility
//! tensors, moving-frame scalars, the energy functional and its gradient
//! flow, and Blaschke metrics from Wang's equation.

pub mod blaschke;
pub mod error;
pub mod flatness;
pub mod flow;
pub mod frames;
pub mod grid;
pub mod pgfb;
pub mod projective;
pub mod samples;
pub mod tensor_calc;

pub use error::{Error, Result};
pub use grid::{
    AffineTorusMap, Axis, ComplexField, Field, Mat2, OneFormField, ScalarField, Tensor3,
    TorusGrid, VectorField,
};

use thiserror::Error;

use crate::field::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({}, {}) is outside the domain of validity: {reason}", .point[0], .point[1])]
    DomainViolation { point: Point, reason: &'static str },

    #[error("point ({}, {}) is outside the mesh", .point[0], .point[1])]
    OutsideMesh { point: Point },

    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponent p = {p} is not admissible for {what}")]
    InadmissibleExponent { p: f64, what: String },

    #[error("unknown catalog id `{0}`")]
    UnknownCatalogId(String),

    #[error("non-finite weight on element {element}: {value}")]
    NonFiniteWeight { element: usize, value: f64 },

    #[error("frequency function undefined at r = {r}: I(r) = {i_value}")]
    UndefinedFrequency { r: f64, i_value: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

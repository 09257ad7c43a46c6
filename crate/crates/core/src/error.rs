use thiserror::Error;

use crate::geometry::DyadicCube;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cube side must be positive")]
    NonPositiveSide,
    #[error("no shifted dyadic cube covers the given cube within six times its side")]
    NoCover,
    #[error("cannot parse rational {0:?}")]
    BadRational(String),
    #[error("coordinate {0} exceeds the supported numerator/denominator range")]
    CoordinateRange(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom {index} has mass {mass}; masses must be finite and strictly positive")]
    BadMass { index: usize, mass: f64 },
    #[error("atom {index} has dimension {found}, expected {expected}")]
    Dimension { index: usize, expected: usize, found: usize },
    #[error("atoms {first} and {second} share the same point")]
    DuplicatePoint { first: usize, second: usize },
    #[error("function value {value} at atom {index} is negative or NaN")]
    BadValue { index: usize, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("exponent {name} = {value} must be finite and > 1")]
    NotAboveOne { name: &'static str, value: f64 },
    #[error("q = {q} must be >= p1 = {p1}")]
    QBelowP1 { q: f64, p1: f64 },
    #[error("q = {q} must be >= p2 = {p2}")]
    QBelowP2 { q: f64, p2: f64 },
    #[error("p1 + p2 = {sum} must be >= p1 * p2 = {product}")]
    SumBelowProduct { sum: f64, product: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("order alpha = {alpha} must satisfy 0 < alpha < 2n = {bound}")]
    BadOrder { alpha: f64, bound: f64 },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("window needs k_min <= k_max and a root no finer than k_max (got k_min={k_min}, k_max={k_max}, root scale={root})")]
    BadWindow { k_min: i32, k_max: i32, root: i32 },
    #[error("window scales must lie within +/-{limit}")]
    ScaleRange { limit: i32 },
    #[error("no cube of the grid with scale in the window contains every atom")]
    NoEnclosingCube,
    #[error("point {0} lies outside the window root")]
    OutsideWindow(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("family mixes grids or dimensions at {0:?}")]
    MixedGrid(DyadicCube),
    #[error("product average overflowed at {0:?}")]
    InfiniteAverage(DyadicCube),
    #[error("cube {0:?} lies outside the truncation window")]
    OutsideWindow(DyadicCube),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("oracle requires at most {limit} atoms per sigma measure, found {found}")]
    OracleTooLarge { limit: usize, found: usize },
    #[error("delta = {0} must lie in [0, 1)")]
    BadDelta(f64),
    #[error("malformed instance: {0}")]
    Format(String),
}

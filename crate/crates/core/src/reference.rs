//! The constant two-state model used throughout the experiments.
//!
//! ```text
//! A = [0.9802 0.0196; 0 0.9802]    Q = [1.9608 0.0195; 0.0195 1.9605]
//! C = [1 −1]                       R = 1,  S = 0,  V₀ = I₂,  m₀ = 0
//! ```

use nalgebra::{dmatrix, DMatrix, DVector};

use crate::model::{CovarianceSpec, Schedule, StateSpaceModel};

/// Plotted interval.
pub const HORIZON: usize = 200;

/// Extra steps appended before running the backward sweep.
pub const PAD: usize = 300;

/// Tolerances swept in the experiments, in nats.
pub const TOLERANCES: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Tolerance used for the filter comparisons.
pub const COMPARISON_TOLERANCE: f64 = 1e-4;

pub fn a() -> DMatrix<f64> {
    dmatrix![0.9802, 0.0196; 0.0, 0.9802]
}

pub fn q() -> DMatrix<f64> {
    dmatrix![1.9608, 0.0195; 0.0195, 1.9605]
}

pub fn c() -> DMatrix<f64> {
    dmatrix![1.0, -1.0]
}

pub fn r() -> DMatrix<f64> {
    dmatrix![1.0]
}

pub fn spec() -> CovarianceSpec {
    CovarianceSpec::uncorrelated(q(), r()).expect("reference noise covariance is SPD")
}

/// The reference model over `0..=horizon`, with `B = [chol Q, 0]`,
/// `D = [0, 1]`.
pub fn model(horizon: usize) -> StateSpaceModel {
    StateSpaceModel::from_covariances(
        horizon,
        Schedule::Constant(a()),
        Schedule::Constant(c()),
        Schedule::Constant(spec()),
        DVector::zeros(2),
        DMatrix::identity(2, 2),
    )
    .expect("reference model is valid")
}

//! Robust state-space filtering under per-step relative-entropy
//! perturbations of a nominal Gauss-Markov model.
//!
//! The adversary may perturb each transition `(x_t → x_{t+1}, y_t)` within a
//! Kullback-Leibler ball of radius `c_t`. The resulting minimax filter is a
//! Kalman-like predictor with a time-varying risk-sensitivity parameter
//! `θ_t`; its least-favorable model is an augmented `2n`-state Gaussian
//! system against which any filter can be scored by a Lyapunov recursion.
//!
//! ```
//! use robust_kf::{reference, robust_filter, model::ToleranceSchedule};
//!
//! let model = reference::model(200);
//! let tol = ToleranceSchedule::constant(1e-3)?;
//! let design = robust_filter::design(&model, &tol)?;
//! let kalman = robust_filter::kalman_design(&model)?;
//! assert!(design.v(201).trace() > kalman.v(201).trace());
//! # Ok::<(), robust_kf::Error>(())
//! ```

pub mod error;
pub mod evaluate;
pub mod gauss;
pub mod io;
pub mod leastfav;
pub mod model;
pub mod reference;
pub mod reproduce;
pub mod robust_filter;
pub mod static_minimax;

pub use error::{Error, ErrorKind, Result};

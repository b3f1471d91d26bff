//! Guide chapters compiled as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/divergence.md")]
pub mod divergence {}

#[doc = include_str!("../../../book/src/static_minimax.md")]
pub mod static_minimax {}

#[doc = include_str!("../../../book/src/robust_filter.md")]
pub mod robust_filter {}

#[doc = include_str!("../../../book/src/least_favorable.md")]
pub mod least_favorable {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/measurements.md")]
pub mod measurements {}

//! Gaussian state estimation with the stochastic integration rule.

pub mod baseline;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sir;
pub mod sqrt;

pub use error::{Error, Result};
pub use model::{GaussianState, LinearModel, StateSpaceModel};
pub use rng::RngStream;
pub use sir::{SirConfig, SirDegree};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/stochastic-integration.md")]
    mod stochastic_integration {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/square-root.md")]
    mod square_root {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/tracking-benchmark.md")]
    mod tracking_benchmark {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

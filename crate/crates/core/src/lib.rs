//! Knowledge-gradient acquisition functions for Bayesian optimization with
//! Gaussian-process surrogates.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the benchmarks use.

pub mod acquisition;
pub mod bo;
pub mod error;
pub mod gp;
pub mod normal;
pub mod optimizer;
pub mod qmc;
pub mod testbed;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type KernelConfig64 = gp::KernelConfig<f64>;
pub type Dataset64 = gp::Dataset<f64>;
pub type PosteriorGp64 = gp::PosteriorGp<f64>;
pub type KgContext64<'a> = acquisition::KgContext<'a, f64>;
pub type Discretization64 = acquisition::Discretization<f64>;
pub type ZSet64 = acquisition::ZSet<f64>;
pub type Proposal64 = acquisition::Proposal<f64>;
pub type BoxDomain64 = optimizer::BoxDomain<f64>;

pub use acquisition::{AcquisitionSpec, Variant};
pub use bo::{run_bo, BoConfig, BoHistory, RunRecord};
pub use optimizer::{OptimizerConfig, StepRule};
pub use testbed::TestFunction;

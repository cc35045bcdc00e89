//! Exact Gaussian-process regression and the one-step look-ahead
//! ("fantasy") posterior mean used by every knowledge-gradient variant.

mod kernel;
mod linalg;
mod posterior;

pub use kernel::{kernel_eval, KernelConfig, KernelKind};
pub use posterior::{
    Anchor, Dataset, FantasySample, PosteriorGp, SigmaTildeGrad, JITTER_LEVELS, VARIANCE_FLOOR,
};

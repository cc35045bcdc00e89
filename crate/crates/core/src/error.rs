use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, range, finiteness).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Cholesky failed at every jitter level that was tried.
    #[error("gram matrix not positive definite (tried jitter levels {jitters:?})")]
    NotPositiveDefinite { jitters: Vec<f64> },

    /// Predictive variance at a fantasy anchor is (numerically) zero.
    #[error("degenerate anchor: predictive variance {variance:e} at x_new")]
    DegenerateAnchor { variance: f64 },

    /// Every optimizer restart produced a non-finite value.
    #[error("optimizer failed: all {restarts} restarts discarded")]
    OptimizerFailed { restarts: usize },

    /// Inner fantasy maximization failed for one of the Z samples.
    #[error("inner optimization failed for z = {z}: {source}")]
    Inner {
        z: f64,
        #[source]
        source: Box<Error>,
    },
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Contract(msg()))
    }
}

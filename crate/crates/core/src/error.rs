use thiserror::Error;

pub type Result<T> = std::result::Result<T, SfrError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The single-band lag response has no interior minimum; the frequency
    /// decays monotonically towards `(PFR − P_cont)/D'`.
    #[error("asymptotic region: {0}")]
    Asymptotic(String),

    #[error("fit did not converge after {iterations} iterations (best params {best:?}, cost {cost:e})")]
    FitFailure {
        iterations: usize,
        best: Vec<f64>,
        cost: f64,
    },

    #[error("unbounded result: {0}")]
    Unbounded(String),

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("singular ratio: {0}")]
    SingularRatio(String),

    #[error("undefined MAPE: {0}")]
    UndefinedMape(String),
}

impl SfrError {
    /// True for errors caused by malformed or out-of-range inputs, as opposed
    /// to analytic branch or fitting failures on otherwise valid inputs.
    pub fn is_validation(&self) -> bool {
        matches!(self, SfrError::InvalidInput(_) | SfrError::UndefinedMape(_))
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SfrError::InvalidInput(msg.into()))
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {what} (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("statistic outside conditioning event: {statistic} does not satisfy {event}")]
    OutsideEvent { statistic: f64, event: String },

    #[error("no sign change after {expansions} bracket expansions (bracket [{lo}, {hi}])")]
    NoSignChange { expansions: usize, lo: f64, hi: f64 },

    #[error("bisection did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("non-finite conditional probability at theta = {theta}")]
    NonFinite { theta: f64 },

    #[error("selection event too rare: estimated acceptance rate {rate:e} after {draws} draws")]
    SelectionTooRare { rate: f64, draws: u64 },

    #[error("draw cap of {cap} reached with only {accepted} accepted draws")]
    DrawCapReached { cap: u64, accepted: usize },

    #[error("while processing draw x = {statistic}: {source}")]
    AtDraw {
        statistic: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64) -> Self {
        Error::Domain { what, value }
    }

    /// True for failures of the inputs rather than of the numerics.
    pub fn is_precondition(&self) -> bool {
        match self {
            Error::Domain { .. } | Error::OutsideEvent { .. } => true,
            Error::AtDraw { source, .. } => source.is_precondition(),
            _ => false,
        }
    }
}

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
///
/// Variants split into configuration problems (bad sizes, bad inputs,
/// unknown names) and numeric problems (an invariant that failed while
/// computing). The CLI maps the two families onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample count {n} is invalid: {reason}")]
    Sizing { n: usize, reason: &'static str },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("frequency {u} lies within {margin} of the singular value {singular}; the density is undefined there")]
    NearSingular { u: f64, singular: f64, margin: f64 },

    #[error("root near x = {x} for u = {u} could not be resolved (S'' = {spp}); u is a critical value")]
    SingularRoot { u: f64, x: f64, spp: f64 },

    #[error("interval [{a}, {b}] is outside the spectral range [{min}, {max}]; tau is too small for it")]
    OutOfRange { a: f64, b: f64, min: f64, max: f64 },

    #[error("neighborhood centered at {center} contains no frequency bins")]
    DegenerateNeighborhood { center: f64 },

    #[error("neighborhood construction failed at center {center}: {reason}")]
    Neighborhood { center: f64, reason: String },

    #[error("quadrature needs {needed} panels but at most {limit} are allowed; use a smaller N or larger tau")]
    Infeasible { needed: usize, limit: usize },

    #[error("quadrature did not settle: refining the step moved the result by {change:e} (limit {limit:e})")]
    QuadratureUnsettled { change: f64, limit: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Sizing { .. }
                | Error::Parameter { .. }
                | Error::Config(_)
                | Error::Infeasible { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

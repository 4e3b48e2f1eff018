use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature order {given} too small, at least {required} needed")]
    QuadratureOrder { required: usize, given: usize },

    #[error("energy cutoff {e_cut} below the {n}-particle minimum {min}")]
    EmptySpace { n: usize, e_cut: f64, min: f64 },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),

    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },

    #[error("projection is rank deficient (smallest overlap eigenvalue {min_eigenvalue:e}); reduce the model space")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("no sign change bracketing relative level {level} at g = {g}; transcendental-equation convention is broken")]
    RootNotBracketed { level: usize, g: f64 },

    #[error("embedding loses norm {norm_deficit:e}; target cutoff too small")]
    LossyEmbedding { norm_deficit: f64 },

    #[error("initial-state completeness {completeness} below required {threshold}")]
    Incomplete { completeness: f64, threshold: f64 },

    #[error("spectral conditions violated ({0}); use the exact resonance average instead")]
    ConditionsViolated(&'static str),

    #[error("centre-of-mass quanta deviate from integers by {max_deviation:e}; cutoff contamination")]
    CmContamination { max_deviation: f64 },

    #[error("time grid is empty")]
    EmptyTimeGrid,

    #[error("need at least {needed} {what}, got {got}")]
    TooFewPoints { what: &'static str, needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    Degenerate(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

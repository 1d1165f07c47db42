use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resolution M={0}: M must be even and at least 8")]
    InvalidResolution(usize),

    #[error("coordinate y={0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mismatched operands: {0}")]
    Mismatch(String),

    #[error("factorization failed in {0}: matrix is numerically singular")]
    SingularMatrix(&'static str),

    #[error("eigensolver did not converge: {0}")]
    EigenSolver(String),

    #[error("neutral eigenvalue {re:+.3e}{im:+.3e}i: |Re λ| <= margin {margin:.1e}")]
    NeutralEigenvalue { re: f64, im: f64, margin: f64 },

    #[error("eigenvalues are not semisimple: {0}")]
    NotSemisimple(String),

    #[error("degenerate direct/adjoint pairing for mode {index}: |<φ, φ*>| = {modulus:.3e}")]
    DegeneratePairing { index: usize, modulus: f64 },

    #[error("boundary traces are not linearly independent: cond(F) = {cond:.3e}")]
    IndependenceFailure { cond: f64 },

    #[error("no feasible (k, η) on the search grid: {0}")]
    InfeasibleGains(String),

    #[error("shift k={0} too small: the shifted Oseen operator is singular, use a larger k")]
    ShiftTooSmall(f64),

    #[error("control signal vanishes: obliqueness angles are undefined")]
    NoControl,

    #[error("decay-rate fit undefined: {0}")]
    FitUndefined(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// | code | meaning |
    /// |------|---------|
    /// | 1 | I/O or serialization failure |
    /// | 2 | configuration error |
    /// | 3 | spectrum or hypothesis failure |
    /// | 4 | gain infeasibility |
    /// | 5 | verification residual failure |
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) => 1,
            Error::Config { .. } | Error::InvalidResolution(_) | Error::InvalidParameter(_) => 2,
            Error::InfeasibleGains(_) => 4,
            Error::Verification(_) | Error::NoControl | Error::FitUndefined(_) => 5,
            Error::OutOfDomain(_)
            | Error::Mismatch(_)
            | Error::SingularMatrix(_)
            | Error::EigenSolver(_)
            | Error::NeutralEigenvalue { .. }
            | Error::NotSemisimple(_)
            | Error::DegeneratePairing { .. }
            | Error::IndependenceFailure { .. }
            | Error::ShiftTooSmall(_) => 3,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    Hermiticity { deviation: f64 },

    #[error("linear system is singular within tolerance (pivot {pivot:.3e} at column {column})")]
    SingularSystem { pivot: f64, column: usize },

    #[error("steady state is not unique: probe solutions differ by {difference:.3e}")]
    DegenerateSteadyState { difference: f64 },

    #[error("steady state has eigenvalue {eigenvalue:.3e}, beyond the clipping tolerance")]
    NotPositive { eigenvalue: f64 },

    #[error("steady-state residual {residual:.3e} exceeds bound {bound:.3e}")]
    Residual { residual: f64, bound: f64 },

    #[error("inverse temperature must be finite, got {0}")]
    NonFiniteBeta(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state does not have the X pattern (offending entry magnitude {deviation:.3e})")]
    NotXState { deviation: f64 },

    #[error("eigenvalue {eigenvalue:.3e} of rho * rho_tilde is negative beyond tolerance")]
    NumericalPsd { eigenvalue: f64 },

    #[error("unknown bath label `{0}`")]
    UnknownBath(String),

    #[error("no inverse temperature supplied for bath `{0}`")]
    MissingBeta(String),

    #[error("time step {dt:.3e} too large: dt * max rate = {product:.3e} (limit 0.05)")]
    Timestep { dt: f64, product: f64 },

    #[error("final state {index} has zero weight under the reverse initial distribution")]
    BoundaryWeight { index: usize },

    #[error("inconsistent ensemble: {0}")]
    InconsistentEnsemble(String),

    #[error("model is not jump-diagonal in the chosen basis: {0}")]
    NotJumpDiagonal(String),

    #[error("effective temperatures undefined: pump rate p is zero")]
    MapUndefined,

    #[error(
        "no convergence up to n_max = {n_max}: concurrence {last:.6} vs {previous:.6} at the previous level"
    )]
    NoConvergence {
        n_max: usize,
        last: f64,
        previous: f64,
    },
}

impl Error {
    /// Short stable identifier, used in error columns of sweep output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NonFinite => "non_finite",
            Error::Hermiticity { .. } => "hermiticity",
            Error::SingularSystem { .. } => "singular_system",
            Error::DegenerateSteadyState { .. } => "degenerate_steady_state",
            Error::NotPositive { .. } => "not_positive",
            Error::Residual { .. } => "residual",
            Error::NonFiniteBeta(_) => "non_finite_beta",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotXState { .. } => "not_x_state",
            Error::NumericalPsd { .. } => "numerical_psd",
            Error::UnknownBath(_) => "unknown_bath",
            Error::MissingBeta(_) => "missing_beta",
            Error::Timestep { .. } => "timestep",
            Error::BoundaryWeight { .. } => "boundary_weight",
            Error::InconsistentEnsemble(_) => "inconsistent_ensemble",
            Error::NotJumpDiagonal(_) => "not_jump_diagonal",
            Error::MapUndefined => "map_undefined",
            Error::NoConvergence { .. } => "no_convergence",
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular lattice generator (det = {det})")]
    SingularLattice { det: f64 },

    #[error("point ({tau}, {nu}) is not on the lattice")]
    OffLattice { tau: f64, nu: f64 },

    #[error("duplicate support point ({tau}, {nu})")]
    DuplicateSupport { tau: f64, nu: f64 },

    #[error("identifiability ratio undefined: operators are equal")]
    UndefinedRatio,

    #[error("grid [{have_lo}, {have_hi}] does not cover required interval [{need_lo}, {need_hi}]")]
    Coverage {
        need_lo: f64,
        need_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error("|z| = {modulus} exceeds the supported range {limit}")]
    Range { modulus: f64, limit: f64 },

    #[error(
        "normalization weight lambda_{index} = {value:e} underflows; reduce B^2 T^2 / M^2"
    )]
    Underflow { index: usize, value: f64 },

    #[error("model order {order} needs at least {needed} samples, got {available}")]
    InsufficientSamples {
        order: usize,
        needed: usize,
        available: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate pole at index {0} (|z| = 0)")]
    DegeneratePole(usize),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

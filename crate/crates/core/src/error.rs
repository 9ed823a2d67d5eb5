use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown element symbol `{0}`")]
    UnknownElement(String),

    #[error("element `{symbol}` (Z = {z}) is not supported; only H through Ne are available")]
    UnsupportedElement { symbol: String, z: u32 },

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("invalid molecule: {0}")]
    InvalidMolecule(String),

    #[error("nuclei {0} and {1} occupy the same position")]
    CoincidentNuclei(usize, usize),

    #[error("infeasible spin state: {0}")]
    InfeasibleSpin(String),

    #[error("{electrons} electrons of one spin exceed the {functions} basis functions")]
    TooManyElectrons { electrons: usize, functions: usize },

    #[error("SCF did not converge in {iterations} iterations (last dE = {delta_energy:e}, dP = {delta_density:e})")]
    ScfNotConverged {
        iterations: usize,
        delta_energy: f64,
        delta_density: f64,
    },

    #[error("SCF solution is not converged")]
    UnconvergedInput,

    #[error("charge initialization: {0}")]
    ChargeInit(String),

    #[error(
        "walker {walker} has a non-finite log amplitude after {attempts} initialization attempts"
    )]
    WalkerInit { walker: usize, attempts: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("every sample in the batch was flagged as non-finite")]
    AllSamplesFlagged,

    #[error("at least {needed} usable samples are required, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (SCF divergence, fully flagged batches)
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ScfNotConverged { .. }
                | Error::AllSamplesFlagged
                | Error::WalkerInit { .. }
                | Error::TooFewSamples { .. }
        )
    }
}

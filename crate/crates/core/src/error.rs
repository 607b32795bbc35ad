use std::path::PathBuf;

use thiserror::Error;

use crate::laminate::LaminateSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix (det = {det:e})")]
    SingularMatrix { det: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("inadmissible deformation: det F = {det:e}{}", cell_suffix(*cell))]
    InadmissibleDeformation { det: f64, cell: Option<usize> },

    #[error("inadmissible macroscopic state: det F_box = {det:e}")]
    InadmissibleMacroState { det: f64 },

    #[error("invalid material parameters: {0}")]
    BadMaterial(String),

    #[error("Milton parameter lambda = {lambda} must exceed the largest stiffness eigenvalue {bound}")]
    BadLambda { lambda: f64, bound: f64 },

    #[error("laminate did not converge after {iterations} iterations (residual {residual:e})", iterations = .0.state.iterations, residual = .0.state.residual)]
    LaminateNoConvergence(Box<LaminateSolution>),

    #[error("naive Newton update left the admissible set at iteration {iteration}")]
    InadmissibleIterate { iteration: usize },

    #[error("invalid shape specification: {0}")]
    BadShapeSpec(String),

    #[error("coarsening factor {factor} does not divide dimension {n} along axis {axis}")]
    NonDividingFactor { axis: usize, n: usize, factor: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("conjugate gradient breakdown at iteration {iteration}")]
    CgBreakdown { iteration: usize },

    #[error("load path failed at step {step} after {bisections} bisections: {reason}")]
    LoadPathFailed { step: usize, bisections: usize, reason: String },

    #[error("reference value has zero norm")]
    ZeroReference,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("upstream artifact missing: {}", .0.display())]
    UpstreamArtifactMissing(PathBuf),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("I/O failure: {0}")]
    IoFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn cell_suffix(cell: Option<usize>) -> String {
    match cell {
        Some(c) => format!(" at cell {c}"),
        None => String::new(),
    }
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::InadmissibleDeformation { .. } => "InadmissibleDeformation",
            Error::InadmissibleMacroState { .. } => "InadmissibleMacroState",
            Error::BadMaterial(_) => "BadMaterial",
            Error::BadLambda { .. } => "BadLambda",
            Error::LaminateNoConvergence(_) => "NoConvergence",
            Error::InadmissibleIterate { .. } => "InadmissibleIterate",
            Error::BadShapeSpec(_) => "BadShapeSpec",
            Error::NonDividingFactor { .. } => "NonDividingFactor",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::CgBreakdown { .. } => "CGBreakdown",
            Error::LoadPathFailed { .. } => "LoadPathFailed",
            Error::ZeroReference => "ZeroReference",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::UpstreamArtifactMissing(_) => "UpstreamArtifactMissing",
            Error::Format(_) => "Format",
            Error::IoFailure(_) | Error::Io(_) => "IOFailure",
            Error::Json(_) => "ConfigInvalid",
        }
    }
}

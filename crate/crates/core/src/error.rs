use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis}: ({max} - {min}) / {step} is not an integer")]
    NonIntegralGrid { axis: usize, min: f64, max: f64, step: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("generator is reducible: {closed_classes} closed communicating classes")]
    Reducible { closed_classes: usize },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("state {state} has zero stationary mass but carries incident rates")]
    ZeroStationaryMass { state: usize },

    #[error("invalid reactant/product specification: {0}")]
    InvalidSpec(String),

    #[error("{count} interior states cannot reach A or B (first: {first})")]
    DisconnectedInterior { count: usize, first: usize },

    #[error("negative jump rate {rate} at state {state} (grid too coarse for the drift)")]
    DegenerateGrid { state: usize, rate: f64 },

    #[error("reaction {reaction}: change vector cannot be mapped onto the lattice")]
    OffLattice { reaction: String },

    #[error("reaction {reaction}: negative propensity {value} at state {state}")]
    NegativePropensity { reaction: String, state: usize, value: f64 },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` requires {fields}")]
    MissingModelField { model: String, fields: String },

    #[error("current graph has no positive edges")]
    EmptyGraph,

    #[error("node {0} has no sampled neighbors")]
    IsolatedNode(usize),

    #[error("training diverged at iteration {iteration}: objective {value}")]
    Diverged { iteration: usize, value: f64 },

    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("need at least {needed} points for clustering, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), constraint: constraint.into() }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

use thiserror::Error;

/// Every failure the library can report. Variants are grouped by error class so
/// that front ends can map them to distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("unsupported Hölder order r = {0} (only 0 and 1)")]
    UnsupportedOrder(usize),
    #[error("mollifier radius {radius} below 2 grid cells ({min})")]
    KernelUnderresolved { radius: f64, min: f64 },
    #[error("resolution {0} below the minimum of 16")]
    Underresolved(usize),
    #[error("mask is not 4-connected ({components} components)")]
    Connectivity { components: usize },
    #[error("collar thickness {epsilon} not below inradius {inradius}")]
    CollarTooThick { epsilon: f64, inradius: f64 },
    #[error("exhaustion failed: {0}")]
    ExhaustionFailure(String),
    #[error("linear solver stalled after {iterations} iterations (last residual {last:e})")]
    SolverStall {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("inconsistent datum: mean {mean:e} against scale {scale:e}")]
    InconsistentDatum { mean: f64, scale: f64 },
    #[error("nonzero period {period:e} of the band 1-form (tolerance {tol:e})")]
    NonzeroPeriod { period: f64, tol: f64 },
    #[error("unsupported topology: {components} boundary components")]
    UnsupportedTopology { components: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("point ({x}, {y}) outside the bounding box")]
    OutOfRange { x: f64, y: f64 },
    #[error("orientation lost at {count} nodes (min det {min_det:e})")]
    OrientationLoss { count: usize, min_det: f64 },
    #[error("map inversion failed at {} nodes", nodes.len())]
    InversionFailure { nodes: Vec<usize> },
    #[error("positivity violated: {0}")]
    Positivity(String),
    #[error("flow accuracy: det residual {residual:e} exceeds {limit:e}")]
    FlowAccuracy { residual: f64, limit: f64 },
    #[error("contraction failure after {iterations} iterations: {reason}")]
    ContractionFailure { iterations: usize, reason: String },
    #[error("smallness gate failed: Hölder norm {norm:e} above threshold {threshold:e}")]
    GateFailure { norm: f64, threshold: f64 },
    #[error("measure bracket failed: m(-1) = {m_minus}, m(1) = {m_plus}, target {target}")]
    BracketFailure {
        m_minus: f64,
        m_plus: f64,
        target: f64,
    },
    #[error("mass condition violated: |∫f - meas| = {error:e} above {tol:e}")]
    MassCondition { error: f64, tol: f64 },
    #[error("change-of-variables drift: mass error {error:e} above {tol:e}")]
    ChangeOfVariablesDrift { error: f64, tol: f64 },
    #[error("support of f - 1 closer than d to the boundary at {} nodes", nodes.len())]
    SupportDistance { nodes: Vec<usize> },
    #[error("inconsistent map: {0}")]
    InconsistentMap(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Everything that can go wrong inside the solvers and the study driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("tangential axis {axis} out of range for d = {d}")]
    AxisOutOfRange { axis: usize, d: usize },
    #[error("grid too small: need at least {needed} wall-normal points, have {have}")]
    GridTooSmall { needed: usize, have: usize },
    #[error("fields live on different grids ({0})")]
    ShapeMismatch(String),
    #[error("field `{field}` does not decay at the top boundary: |f(top)| = {top:.3e} > {tol:.1e} * max|f| = {limit:.3e}")]
    DecayViolation {
        field: String,
        top: f64,
        limit: f64,
        tol: f64,
    },
    #[error("incompatible data: {0}")]
    Compatibility(String),
    #[error("vorticity is not divergence free: scaled divergence {0:.3e}")]
    DivergenceViolation(f64),
    #[error("CFL number {cfl:.3} exceeds {limit} (dt = {dt:.3e})")]
    Cfl { cfl: f64, limit: f64, dt: f64 },
    #[error("vorticity support reached y = {y:.3} below the guard height {guard} at t = {t:.4}")]
    SupportErosion { y: f64, guard: f64, t: f64 },
    #[error("layer gradient {value:.3e} exceeded cap {cap:.3e} at t = {t:.4}; the layer solution left its analytic window")]
    BlowUp { value: f64, cap: f64, t: f64 },
    #[error("wall layer under-resolved at eps = {eps}: {have} points in y <= 3 eps, need {need}; try ny >= {required_ny}")]
    Resolution {
        eps: f64,
        have: usize,
        need: usize,
        required_ny: usize,
    },
    #[error("time window mismatch: {0}")]
    WindowMismatch(String),
    #[error("interpolation out of range: {0}")]
    Interpolation(String),
    #[error("analytic weight overflow: factor {factor:.3e} exceeds {limit:.1e}; use a smaller delta or a larger lambda")]
    Overflow { factor: f64, limit: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage `{stage}` refused: {source}. hint: {hint}")]
    Stage {
        stage: String,
        hint: String,
        #[source]
        source: Box<Error>,
    },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &str, hint: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            hint: hint.to_string(),
            source: Box::new(self),
        }
    }
}

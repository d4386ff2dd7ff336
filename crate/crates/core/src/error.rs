use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Variants carry enough context to name the offending sample, zero or
/// truncation, so the CLI can surface them verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("block size mismatch: {left} vs {right}")]
    BlockSizeMismatch { left: usize, right: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("grid size {n_pts} must be a power of two")]
    GridNotPowerOfTwo { n_pts: usize },

    #[error("band [{n_min}, {n_max}] too wide for a grid of {n_pts} points (aliasing)")]
    Aliasing { n_min: i64, n_max: i64, n_pts: usize },

    #[error("singular sample at grid point {index} (t = {re:+.6} {im:+.6}i)")]
    SingularSample { index: usize, re: f64, im: f64 },

    #[error("Fourier tail {tail:.3e} above tolerance after reaching grid cap {cap}")]
    TailTooLarge { tail: f64, cap: usize },

    #[error("cannot evaluate a {kind}-type series in region {region}")]
    RegionMismatch { kind: &'static str, region: &'static str },

    #[error("symbol (near-)singular on T: min |det| = {min_abs_det:.3e}")]
    NearSingular { min_abs_det: f64 },

    #[error("nonzero winding number {0}")]
    NonzeroWinding(i64),

    #[error("phase unwrapping did not resolve at grid cap {cap}")]
    UnwrapNotResolved { cap: usize },

    #[error("no canonical factorization detected numerically (residual {residual:.3e})")]
    NoCanonicalFactorization { residual: f64 },

    #[error("finite section of size {size} is not invertible")]
    SingularSection { size: usize },

    #[error("singular matrix in {context}")]
    SingularMatrix { context: &'static str },

    #[error("zero not in open unit disk: {re:+.6} {im:+.6}i")]
    ZeroOutsideDisk { re: f64, im: f64 },

    #[error("zero {index} has modulus {modulus:.6} above the desk-scale cap {cap}")]
    DeskScaleCap { index: usize, modulus: f64, cap: f64 },

    #[error("pole hit: 1 - conj(alpha) z = 0")]
    PoleHit,

    #[error("basis Gram defect {defect:.3e} above tolerance at grid cap {cap}")]
    GramDefect { defect: f64, cap: usize },

    #[error("quadrature did not converge (change {change:.3e}) at grid cap {cap}")]
    QuadratureNotConverged { change: f64, cap: usize },

    #[error("truncation {size} too small: projection defect {defect:.3e}")]
    TruncationTooSmall { size: usize, defect: f64 },

    #[error("tail bound {tail:.3e} too large for a reliable determinant")]
    TailBoundTooLarge { tail: f64 },

    #[error("determinant did not stabilize (change {change:.3e}) at truncation cap {cap}")]
    FredholmStagnation { change: f64, cap: usize },

    #[error("route discrepancy {discrepancy:.3e} between sandwich and Hankel forms")]
    RouteDiscrepancy { discrepancy: f64 },

    #[error("radius rule violates summability: {0}")]
    SummabilityViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}

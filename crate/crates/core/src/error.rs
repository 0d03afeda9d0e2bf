use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ray is parallel to the scanline plane after rectification")]
    DegenerateRay,
    #[error("reduced camera decomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("gravity direction is (anti)parallel to the singular axis")]
    GravitySingular,
    #[error("gauge cannot be fixed: {0}")]
    DegenerateGauge(String),
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("tensor shapes differ")]
    ShapeMismatch,
    #[error("line projects parallel to the scanline")]
    NoIntersection,
    #[error("line {line} is not observed by camera {camera}")]
    IncompleteVisibility { camera: usize, line: usize },
    #[error("linear system is rank deficient (sigma ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("decomposition has only complex roots (discriminant {discriminant:e})")]
    ComplexRoots { discriminant: f64 },
    #[error("pivot {0} vanishes")]
    PivotZero(&'static str),
    #[error("constraint span has dimension {found}, expected {expected}")]
    SpanDimensionMismatch { expected: usize, found: usize },
    #[error("tensor violates the calibrated constraints by {residual:e}")]
    ConstraintViolation { residual: f64 },
    #[error("camera {camera} has no gravity direction")]
    GravityMissing { camera: usize },
    #[error("no real solution reproduces the tensor")]
    NoRealSolution,
    #[error("left 2x2 block of the reduced camera is singular")]
    SingularBlock,
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("balance function has a pole at m = {m}")]
    PoleDivision { m: i64 },
    #[error("random instance generation failed")]
    InstanceGenerationFailed,
    #[error("scene sampling gave up after {0} retries")]
    ExhaustedRetries(usize),
    #[error("triangulated line is at infinity")]
    Unnormalizable,
    #[error("need {needed} lines, have {available}")]
    NotEnoughLines { needed: usize, available: usize },
    #[error("every RANSAC iteration failed")]
    AllIterationsFailed,
    #[error("expected {expected_cameras} cameras x {expected_lines} lines, got {cameras} x {lines}")]
    SampleSize {
        expected_cameras: usize,
        expected_lines: usize,
        cameras: usize,
        lines: usize,
    },
    #[error("setting {0} is not supported here")]
    UnsupportedSetting(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("inconsistent intrinsics: {0}")]
    InconsistentIntrinsics(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

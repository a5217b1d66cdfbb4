//! Error type shared across the pipeline.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlossError>;

#[derive(Debug, Error)]
pub enum GlossError {
    #[error("{what}: raster shape mismatch, expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    ShapeMismatch {
        what: &'static str,
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("total internal reflection at theta_i={theta_i} rad for n1={n1} > n2={n2}; medium ordering unsupported")]
    TotalInternalReflection { theta_i: f64, n1: f64, n2: f64 },

    #[error("degenerate reflection coefficients: rs + rp = 0")]
    DegenerateResidual,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("flat-field reference contains a pixel <= {epsilon}; defective white capture")]
    FlatFieldReference { epsilon: f64 },

    #[error("degenerate normalization range: min {min} >= max {max}")]
    DegenerateRange { min: f64, max: f64 },

    #[error("gloss samples are not monotone: isotonic residual {residual:.3} exceeds 20% of sample range {range:.3}")]
    NonMonotoneCurve { residual: f64, range: f64 },

    #[error("insufficient overlap between tiles: {overlap_px} px is below {required_px} px")]
    InsufficientOverlap { overlap_px: usize, required_px: usize },

    #[error("plane fit is rank deficient: fewer than 3 non-collinear samples")]
    RankDeficientPlane,

    #[error("relief of {max_mm:.3} mm exceeds printer Z limit of {limit_mm:.1} mm; scale heights by {suggested_scale:.3} to fit")]
    HeightExceedsPrinter {
        max_mm: f64,
        limit_mm: f64,
        suggested_scale: f64,
    },

    #[error("missing input file: {}", path.display())]
    MissingInput { path: PathBuf },

    #[error("invalid file format: {0}")]
    InvalidFormat(String),

    #[error("unknown scene primitive: {0}")]
    UnknownPrimitive(String),

    #[error("tile grid does not fit the raster: {0}")]
    GridOverflow(String),

    #[error("empty unmasked region; no pixels to compare")]
    EmptyRegion,

    #[error("registration failed for tile ({row},{col}): {source}")]
    TileRegistration {
        row: usize,
        col: usize,
        #[source]
        source: Box<GlossError>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GlossError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("png: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl GlossError {
    /// Exit code for the CLI; missing inputs are distinguished so scripted
    /// pipelines can tell a bad stage order from a real failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            GlossError::MissingInput { .. } => 2,
            GlossError::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        GlossError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TcmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TcmError {
    #[error("polygon `{id}` is degenerate: {reason}")]
    DegeneratePolygon { id: String, reason: String },

    #[error("geotransform is singular (determinant {det})")]
    SingularGeoTransform { det: f64 },

    #[error("polygon `{0}` does not cover any pixel center of the extent")]
    EmptyFootprintMask(String),

    #[error("footprint `{0}` lies outside the imagery")]
    FootprintOutsideImagery(String),

    #[error("footprint `{0}` covers its whole buffered extent, neighborhood is empty")]
    EmptyNeighborhood(String),

    #[error("chip stack is inconsistent: {0}")]
    InvalidChipStack(String),

    #[error("need at least {k} pixels to fit {k} clusters, got {rows}")]
    TooFewPixels { rows: usize, k: usize },

    #[error("feature dimension mismatch: model expects {expected}, image gives {found}")]
    FeatureDimMismatch { expected: usize, found: usize },

    #[error("{0} region of the mask is empty")]
    EmptyRegion(&'static str),

    #[error("distribution supports differ: {0} vs {1}")]
    SupportMismatch(usize, usize),

    #[error("could not place random polygon after {0} attempts")]
    PlacementFailed(usize),

    #[error("histograms use different binning")]
    BinMismatch,

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("series needs at least 2 layers, got {0}")]
    SeriesTooShort(usize),

    #[error("no prediction for labeled footprint `{0}`")]
    MissingPrediction(String),

    #[error("ranks have zero variance")]
    DegenerateRanks,

    #[error("could not place footprint {placed} of {requested} without overlap")]
    SceneTooCrowded { placed: usize, requested: usize },

    #[error("inputs disagree: {0}")]
    InconsistentInputs(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed {what} in {path}: {reason}")]
    Format {
        what: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

/// Process exit categories used by the command line front end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    Data = 3,
    Internal = 4,
}

impl TcmError {
    /// Stable machine-readable name of the error variant.
    pub fn code(&self) -> &'static str {
        use TcmError::*;
        match self {
            DegeneratePolygon { .. } => "DegeneratePolygon",
            SingularGeoTransform { .. } => "SingularGeoTransform",
            EmptyFootprintMask(_) => "EmptyFootprintMask",
            FootprintOutsideImagery(_) => "FootprintOutsideImagery",
            EmptyNeighborhood(_) => "EmptyNeighborhood",
            InvalidChipStack(_) => "InvalidChipStack",
            TooFewPixels { .. } => "TooFewPixels",
            FeatureDimMismatch { .. } => "FeatureDimMismatch",
            EmptyRegion(_) => "EmptyRegion",
            SupportMismatch(..) => "SupportMismatch",
            PlacementFailed(_) => "PlacementFailed",
            BinMismatch => "BinMismatch",
            DegenerateLabels => "DegenerateLabels",
            SeriesTooShort(_) => "SeriesTooShort",
            MissingPrediction(_) => "MissingPrediction",
            DegenerateRanks => "DegenerateRanks",
            SceneTooCrowded { .. } => "SceneTooCrowded",
            InconsistentInputs(_) => "InconsistentInputs",
            InvalidArgument(_) => "InvalidArgument",
            Config(_) => "ConfigError",
            Format { .. } => "FormatError",
            Io { .. } => "IoError",
            Internal(_) => "InternalError",
        }
    }

    pub fn exit_kind(&self) -> ExitKind {
        use TcmError::*;
        match self {
            Config(_) | InvalidArgument(_) => ExitKind::Config,
            Internal(_) => ExitKind::Internal,
            _ => ExitKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TcmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        what: &'static str,
        path: impl Into<PathBuf>,
        reason: impl ToString,
    ) -> Self {
        TcmError::Format {
            what,
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

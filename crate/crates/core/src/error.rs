use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("run counts sum to {actual}, expected {expected}")]
    RunSumMismatch { expected: usize, actual: usize },
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} is smaller than the {min} px pyramid minimum")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error("point ({x}, {y}) lies outside the {width}x{height} grid")]
    PointOutOfGrid { x: f64, y: f64, width: usize, height: usize },
    #[error("point ({x}, {y}) lies outside the {width}x{height} scene")]
    PointOutOfBounds { x: f64, y: f64, width: usize, height: usize },
    #[error("manifest not found: {}", .0.display())]
    ManifestNotFound(PathBuf),
    #[error("manifest schema error at `{field}`: {message}")]
    ManifestSchemaError { field: String, message: String },
    #[error("segmentation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty vector")]
    EmptyVector,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("degenerate fold {fold}: {reason}")]
    FoldDegenerate { fold: usize, reason: String },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("model schema error: {0}")]
    ModelSchemaError(String),
    #[error("label for unknown segment `{segment_id}` in scene `{scene_id}`")]
    DanglingLabel { scene_id: String, segment_id: String },
    #[error("missing manifest for scene `{0}`")]
    MissingManifest(String),
    #[error("mask/report mismatch: {0}")]
    ReportMismatch(String),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error("workspace error: {0}")]
    Workspace(String),
    #[error("labels schema error at `{field}`: {message}")]
    LabelsSchemaError { field: String, message: String },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image codec: {0}")]
    Codec(#[from] ::image::ImageError),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error line and the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidImage(_) => "InvalidImage",
            Error::RunSumMismatch { .. } => "RunSumMismatch",
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::ImageTooSmall { .. } => "ImageTooSmall",
            Error::PointOutOfGrid { .. } => "PointOutOfGrid",
            Error::PointOutOfBounds { .. } => "PointOutOfBounds",
            Error::ManifestNotFound(_) => "ManifestNotFound",
            Error::ManifestSchemaError { .. } => "ManifestSchemaError",
            Error::BackendUnavailable(_) => "BackendUnavailable",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::EmptyVector => "EmptyVector",
            Error::EmptyDataset => "EmptyDataset",
            Error::SingleClassDataset => "SingleClassDataset",
            Error::TooFewSamples(_) => "TooFewSamples",
            Error::FoldDegenerate { .. } => "FoldDegenerate",
            Error::InvalidHyperparams(_) => "InvalidHyperparams",
            Error::ModelSchemaError(_) => "ModelSchemaError",
            Error::DanglingLabel { .. } => "DanglingLabel",
            Error::MissingManifest(_) => "MissingManifest",
            Error::ReportMismatch(_) => "ReportMismatch",
            Error::UnknownScene(_) => "UnknownScene",
            Error::Workspace(_) => "WorkspaceError",
            Error::LabelsSchemaError { .. } => "LabelsSchemaError",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
            Error::Codec(_) => "CodecError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ManifestSchemaError { field: field.into(), message: message.into() }
    }
}

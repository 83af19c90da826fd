use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the recognition pipeline.
///
/// Every variant belongs to one pipeline stage (see [`Error::stage`]) so
/// command-line diagnostics can say where a run failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema violation in video {video_id}{}: {message}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    Schema {
        video_id: String,
        frame: Option<usize>,
        message: String,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("degenerate pose: {0}")]
    DegeneratePose(String),
    #[error("no part scale configured for joint {0}")]
    MissingScale(String),
    #[error("synthetic script error: {0}")]
    Synth(String),
    #[error("direction undefined between coincident points")]
    CoincidentPoints,
    #[error("direction undefined for pair {pair}: centers coincide from the first frame")]
    DirectionUnavailable { pair: String },
    #[error("episode compression needs a nonempty relation series")]
    EmptySeries,
    #[error("interval pair is not in canonical order: {0}")]
    NonCanonical(String),
    #[error("segmentation: {0}")]
    Segmentation(String),
    #[error("cell graph {0} is not in the dictionary")]
    UnknownCellGraph(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("vector quantization: {0}")]
    Quantization(String),
    #[error("hmm: {0}")]
    Hmm(String),
    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("training: {0}")]
    Training(String),
    #[error("evaluation: {0}")]
    Evaluation(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// Short tag naming the pipeline stage that produced the error.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::MissingFile(_) | Error::Schema { .. } | Error::EmptyDataset => {
                "load"
            }
            Error::Geometry(_) | Error::DegeneratePose(_) | Error::MissingScale(_) => "body",
            Error::Synth(_) => "synth",
            Error::CoincidentPoints | Error::DirectionUnavailable { .. } | Error::EmptySeries => {
                "relations"
            }
            Error::NonCanonical(_) => "temporal",
            Error::Segmentation(_) => "segmentation",
            Error::UnknownCellGraph(_) | Error::LengthMismatch { .. } => "features",
            Error::Quantization(_) => "vocab",
            Error::Hmm(_) | Error::SymbolOutOfRange { .. } => "hmm",
            Error::Training(_) => "train",
            Error::Evaluation(_) => "evaluate",
            Error::Config(_) => "config",
            Error::Serialization(_) => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(video_id: &str, frame: Option<usize>, message: impl Into<String>) -> Self {
        Error::Schema {
            video_id: video_id.to_string(),
            frame,
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

use std::path::PathBuf;

use crate::seed::TaskId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),

    #[error("{}:{line}: {message}", path.display())]
    MalformedEntry {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("pool at {} is empty", .0.display())]
    EmptyPool(PathBuf),

    #[error("near-form group {group} has only {members} member(s): {listing}")]
    NearFormGroupTooSmall {
        group: usize,
        members: usize,
        listing: String,
    },

    #[error("insufficient eligible entries: requested {requested}, available {available}")]
    InsufficientEntries { requested: usize, available: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cell ({row}, {col}) outside {n}x{n} grid")]
    CellOutOfRange { row: u32, col: u32, n: u32 },

    #[error("word {word:?} (length {len}) does not fit a {n}x{n} grid")]
    WordTooLong { word: String, len: usize, n: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Generation gave up after its retry bound; the sample is skipped and
    /// replaced by over-drawing.
    #[error("sample rejected: {0}")]
    Rejected(String),

    #[error("image {}: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error("font does not cover {codepoint} ({ch:?})")]
    MissingGlyph { ch: char, codepoint: String },

    #[error("font: {0}")]
    Font(String),

    #[error("region {0} is out of bounds or overlaps another region")]
    BadRegion(usize),

    #[error("tile boundary {0} lies outside the image")]
    BadBoundary(usize),

    #[error("direct-answer mode is not defined for {0}")]
    DirectAnswerUnsupported(TaskId),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("manifest missing in {}", .0.display())]
    ManifestMissing(PathBuf),

    #[error("output directory {} is not empty (use --force to overwrite)", .0.display())]
    OutputNotEmpty(PathBuf),

    #[error("authentication failed against {url}: HTTP {status}")]
    Auth { url: String, status: u16 },

    #[error("endpoint {url}: {message}")]
    Endpoint { url: String, message: String },

    #[error("record for unknown sample {0}")]
    OrphanRecord(String),

    #[error("breakdown key {0} does not apply to any scored task")]
    InapplicableKey(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_rejection(&self) -> bool {
        matches!(self, Error::Rejected(_))
    }
}

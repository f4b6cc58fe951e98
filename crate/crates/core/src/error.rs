use std::fmt;
use std::path::PathBuf;

/// Pipeline stage names used to tag errors surfaced by [`crate::diff::compare_documents`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    LoadReference,
    LoadTest,
    Preprocess,
    Ocr,
    PixelCompare,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::LoadReference => "load-reference",
            Stage::LoadTest => "load-test",
            Stage::Preprocess => "preprocess",
            Stage::Ocr => "ocr",
            Stage::PixelCompare => "pixel-compare",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("image has no foreground pixels")]
    BlankImage,

    #[error("OCR engine not found: {0}")]
    EngineNotFound(PathBuf),
    #[error("OCR engine failed with status {status}: {stderr}")]
    EngineFailed { status: i32, stderr: String },
    #[error("OCR engine timed out after {0:.3} s")]
    Timeout(f64),
    #[error("malformed hOCR: {0}")]
    MalformedHocr(String),
    #[error("hOCR word without bbox (id {0:?})")]
    MissingBbox(Option<String>),

    #[error("box {box_:?} exceeds image {width}x{height}")]
    BoxOutOfBounds {
        box_: crate::segment::BBox,
        width: u32,
        height: u32,
    },
    #[error("both word images are blank")]
    BothBlank,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

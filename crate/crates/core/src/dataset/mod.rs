//! VOC-style annotation parsing and per-class dataset statistics.

mod stats;
mod voc;

use std::path::PathBuf;

use thiserror::Error;

pub use stats::{compute_stats, load_annotation_dir, stats_to_report, ClassStats, ImbalanceReport};
pub use voc::{parse_annotation, serialize_annotation, AnnotatedObject, AnnotationRecord};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: malformed markup: {message}")]
    Markup { line: u32, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: u32, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<AnnotationError>,
    },
}

impl AnnotationError {
    /// Source line of the offending element, when known.
    pub fn line(&self) -> Option<u32> {
        match self {
            Self::Markup { line, .. } | Self::Invalid { line, .. } => Some(*line),
            Self::InFile { source, .. } => source.line(),
            Self::Io { .. } => None,
        }
    }
}

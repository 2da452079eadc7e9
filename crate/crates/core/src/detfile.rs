//! Per-image detection text files.
//!
//! One detection per line, single-space separated, LF terminated:
//!
//! ```text
//! <label> <confidence:.3> <left:.2> <top:.2> <right:.2> <bottom:.2>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::bbox::BBox;
use crate::post::{Detection, PostError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum DetectionFileError {
    #[error("line {line}: expected 6 fields, found {found}")]
    WrongFieldCount { line: usize, found: usize },
    #[error("line {line}: non-numeric {field} {value:?}")]
    NonNumeric {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: confidence out of range")]
    ConfidenceOutOfRange { line: usize },
    #[error("line {line}: invalid box: {reason}")]
    InvalidBox { line: usize, reason: String },
    #[error("detection {ordinal}: {source}")]
    InvalidDetection {
        ordinal: usize,
        #[source]
        source: PostError,
    },
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
        source: Box<DetectionFileError>,
    },
}

impl DetectionFileError {
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::WrongFieldCount { line, .. }
            | Self::NonNumeric { line, .. }
            | Self::ConfidenceOutOfRange { line }
            | Self::InvalidBox { line, .. } => Some(*line),
            Self::InFile { source, .. } => source.line(),
            _ => None,
        }
    }
}

/// Detections for one image, keyed by the file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile<T> {
    pub image_id: String,
    pub detections: Vec<Detection<T>>,
}

/// Renders detections in the on-disk format.
pub fn format_detections<T: Real>(dets: &[Detection<T>]) -> Result<String, DetectionFileError> {
    let mut out = String::new();
    for (ordinal, d) in dets.iter().enumerate() {
        // re-validate: fields are public
        Detection::new(d.label.as_str(), d.confidence, d.bbox)
            .map_err(|source| DetectionFileError::InvalidDetection { ordinal, source })?;
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{} {:.3} {:.2} {:.2} {:.2} {:.2}",
            d.label,
            d.confidence,
            b.left(),
            b.top(),
            b.right(),
            b.bottom()
        );
    }
    Ok(out)
}

pub fn write_detection_file<T: Real>(f: &DetectionFile<T>, out: &Path) -> Result<(), DetectionFileError> {
    let text = format_detections(&f.detections)?;
    fs::write(out, text).map_err(|source| DetectionFileError::Io {
        path: out.to_path_buf(),
        source,
    })
}

const FIELDS: [&str; 6] = ["label", "confidence", "left", "top", "right", "bottom"];

/// Parses detection lines. Runs of spaces/tabs, trailing whitespace and
/// blank lines are accepted.
pub fn parse_detections<T: Real + FromStr>(text: &str) -> Result<Vec<Detection<T>>, DetectionFileError> {
    let mut dets = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(DetectionFileError::WrongFieldCount {
                line,
                found: fields.len(),
            });
        }
        let mut nums = [T::zero(); 5];
        for (k, slot) in nums.iter_mut().enumerate() {
            let value = fields[k + 1];
            *slot = value
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DetectionFileError::NonNumeric {
                    line,
                    field: FIELDS[k + 1],
                    value: value.to_string(),
                })?;
        }
        let [confidence, left, top, right, bottom] = nums;
        if !(confidence >= T::zero() && confidence <= T::one()) {
            return Err(DetectionFileError::ConfidenceOutOfRange { line });
        }
        let bbox = BBox::new(left, top, right, bottom).map_err(|e| DetectionFileError::InvalidBox {
            line,
            reason: e.to_string(),
        })?;
        dets.push(Detection {
            label: fields[0].to_string(),
            confidence,
            bbox,
        });
    }
    Ok(dets)
}

pub fn parse_detection_file<T: Real + FromStr>(
    image_id: impl Into<String>,
    text: &str,
) -> Result<DetectionFile<T>, DetectionFileError> {
    Ok(DetectionFile {
        image_id: image_id.into(),
        detections: parse_detections(text)?,
    })
}

/// Reads a detection file; the image id is the file stem.
pub fn read_detection_file<T: Real + FromStr>(path: &Path) -> Result<DetectionFile<T>, DetectionFileError> {
    let text = fs::read_to_string(path).map_err(|source| DetectionFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_detection_file(stem, &text).map_err(|e| DetectionFileError::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use super::{blur_plane, build_kernel, pnm, BlurError, GaussianKernelSpec};
use crate::scalar::Real;

const IMAGE_EXTENSIONS: &[&str] = &["ppm", "pgm"];
const ANNOTATION_EXTENSIONS: &[&str] = &["xml", "txt"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

/// Outcome of [`augment_directory`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AugmentReport {
    /// Blurred images written.
    pub written: usize,
    /// Annotation files copied unchanged.
    pub copied: usize,
    /// Inputs that could not be read or decoded.
    pub skipped: Vec<SkippedFile>,
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BlurError + '_ {
    move |source| BlurError::Io {
        path: path.to_path_buf(),
        source,
    }
}

enum Outcome {
    Written,
    Skipped(SkippedFile),
}

fn process_image<T: Real>(
    src: &Path,
    dst: &Path,
    kernel: &super::KernelMatrix<T>,
) -> Result<Outcome, BlurError> {
    let skip = |reason: String| {
        Ok(Outcome::Skipped(SkippedFile {
            path: src.to_path_buf(),
            reason,
        }))
    };
    let bytes = match fs::read(src) {
        Ok(b) => b,
        Err(e) => return skip(e.to_string()),
    };
    let img = match pnm::decode(&bytes) {
        Ok(img) => img,
        Err(e) => return skip(e.to_string()),
    };
    let blurred = match blur_plane(&img, kernel) {
        Ok(b) => b,
        Err(e) => return skip(e.to_string()),
    };
    if let Some(parent) = dst.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(dst, pnm::encode(&blurred)).map_err(io_err(dst))?;
    Ok(Outcome::Written)
}

/// Blurs every PGM/PPM image under `in_dir` into the same relative path under
/// `out_dir` and copies `.xml`/`.txt` annotation files alongside unchanged.
///
/// Unreadable or undecodable images are skipped and listed in the report.
/// Failing to write anything under `out_dir` aborts the run.
pub fn augment_directory<T: Real>(
    in_dir: &Path,
    out_dir: &Path,
    spec: &GaussianKernelSpec<T>,
) -> Result<AugmentReport, BlurError> {
    if !in_dir.is_dir() {
        return Err(BlurError::Io {
            path: in_dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input directory not found"),
        });
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for entry in WalkDir::new(in_dir).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                warn!("skipping unreadable entry: {e}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(in_dir)
            .expect("walkdir yields paths under root")
            .to_path_buf();
        if has_ext(&rel, IMAGE_EXTENSIONS) {
            images.push(rel);
        } else if has_ext(&rel, ANNOTATION_EXTENSIONS) {
            annotations.push(rel);
        }
    }

    let kernel = build_kernel(spec);
    let outcomes = images
        .par_iter()
        .map(|rel| process_image(&in_dir.join(rel), &out_dir.join(rel), &kernel))
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = AugmentReport::default();
    for outcome in outcomes {
        match outcome {
            Outcome::Written => report.written += 1,
            Outcome::Skipped(s) => {
                warn!("skipping {}: {}", s.path.display(), s.reason);
                report.skipped.push(s);
            }
        }
    }

    for rel in annotations {
        let dst = out_dir.join(&rel);
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::copy(in_dir.join(&rel), &dst).map_err(io_err(&dst))?;
        report.copied += 1;
    }
    Ok(report)
}

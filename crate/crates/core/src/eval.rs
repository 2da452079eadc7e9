//! Comparison of two detection runs by mean confidence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::detfile::{read_detection_file, DetectionFile, DetectionFileError};

/// Reference mean confidences of a baseline and an improved detector on a
/// 689-image test set. Kept for comparison; not reproducible here.
pub const REPORTED_BASELINE_MEAN: f64 = 0.966;
pub const REPORTED_IMPROVED_MEAN: f64 = 0.982;

/// Improvement band claimed for the blurred-training model.
pub const CLAIMED_DELTA_BAND: (f64, f64) = (0.01, 0.02);

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no matched pairs")]
    NoMatchedPairs,
    #[error(transparent)]
    Detections(#[from] DetectionFileError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageComparison {
    pub image_id: String,
    pub baseline_count: usize,
    pub improved_count: usize,
    /// `None` when the run produced no detections for the image.
    pub baseline_mean_conf: Option<f64>,
    pub improved_mean_conf: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub per_image: Vec<ImageComparison>,
    /// Detection-weighted mean confidence over all matched images.
    pub global_baseline_mean: f64,
    pub global_improved_mean: f64,
    pub global_delta: f64,
    pub matched_pairs: usize,
    /// Image ids present in only one run, excluded from every mean.
    pub unmatched: Vec<String>,
}

impl ComparisonReport {
    /// Whether the global delta falls in the claimed improvement band.
    pub fn within_claimed_band(&self) -> bool {
        let (lo, hi) = CLAIMED_DELTA_BAND;
        // confidences are printed to 3 decimals; absorb binary rounding of the bound
        self.global_delta >= lo - 1e-9 && self.global_delta <= hi + 1e-9
    }
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values.fold((0.0, 0), |(s, n), v| (s + v, n + 1))
}

fn run_mean(total: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Compares detection files matched by image id.
pub fn compare_files(
    baseline: &[DetectionFile<f64>],
    improved: &[DetectionFile<f64>],
) -> Result<ComparisonReport, EvalError> {
    let base: BTreeMap<&str, &DetectionFile<f64>> =
        baseline.iter().map(|f| (f.image_id.as_str(), f)).collect();
    let impr: BTreeMap<&str, &DetectionFile<f64>> =
        improved.iter().map(|f| (f.image_id.as_str(), f)).collect();

    let mut per_image = Vec::new();
    let mut unmatched = Vec::new();
    let (mut base_sum, mut base_n, mut impr_sum, mut impr_n) = (0.0, 0usize, 0.0, 0usize);

    for (&id, b) in &base {
        let Some(i) = impr.get(id) else {
            unmatched.push(id.to_string());
            continue;
        };
        let (bs, bn) = mean(b.detections.iter().map(|d| d.confidence));
        let (is, inn) = mean(i.detections.iter().map(|d| d.confidence));
        base_sum += bs;
        base_n += bn;
        impr_sum += is;
        impr_n += inn;
        let bm = (bn > 0).then(|| bs / bn as f64);
        let im = (inn > 0).then(|| is / inn as f64);
        per_image.push(ImageComparison {
            image_id: id.to_string(),
            baseline_count: bn,
            improved_count: inn,
            baseline_mean_conf: bm,
            improved_mean_conf: im,
            delta: bm.zip(im).map(|(b, i)| i - b),
        });
    }
    unmatched.extend(impr.keys().filter(|id| !base.contains_key(*id)).map(|id| id.to_string()));
    unmatched.sort();

    if per_image.is_empty() {
        return Err(EvalError::NoMatchedPairs);
    }
    let global_baseline_mean = run_mean(base_sum, base_n);
    let global_improved_mean = run_mean(impr_sum, impr_n);
    Ok(ComparisonReport {
        matched_pairs: per_image.len(),
        per_image,
        global_baseline_mean,
        global_improved_mean,
        global_delta: global_improved_mean - global_baseline_mean,
        unmatched,
    })
}

/// Reads every `.txt` detection file in `dir`.
pub fn load_detection_dir(dir: &Path) -> Result<Vec<DetectionFile<f64>>, EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths
        .par_iter()
        .map(|p| read_detection_file(p))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Loads both directories and compares them; images are matched by file
/// stem.
pub fn compare_runs(baseline_dir: &Path, improved_dir: &Path) -> Result<ComparisonReport, EvalError> {
    let baseline = load_detection_dir(baseline_dir)?;
    let improved = load_detection_dir(improved_dir)?;
    compare_files(&baseline, &improved)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

/// Human-readable comparison table.
pub fn comparison_to_table(report: &ComparisonReport) -> String {
    let id_w = report
        .per_image
        .iter()
        .map(|r| r.image_id.chars().count())
        .chain(["image".len(), "overall".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<id_w$}  {:>6}  {:>6}  {:>10}  {:>10}  {:>10}",
        "image", "n_base", "n_impr", "baseline", "improved", "delta"
    );
    for r in &report.per_image {
        let delta = r.delta.map_or_else(|| "-".to_string(), |d| format!("{d:+.6}"));
        let _ = writeln!(
            out,
            "{:<id_w$}  {:>6}  {:>6}  {:>10}  {:>10}  {:>10}",
            r.image_id,
            r.baseline_count,
            r.improved_count,
            opt(r.baseline_mean_conf),
            opt(r.improved_mean_conf),
            delta
        );
    }
    let (nb, ni): (usize, usize) = report
        .per_image
        .iter()
        .fold((0, 0), |(a, b), r| (a + r.baseline_count, b + r.improved_count));
    let _ = writeln!(
        out,
        "{:<id_w$}  {:>6}  {:>6}  {:>10.6}  {:>10.6}  {:>+10.6}",
        "overall", nb, ni, report.global_baseline_mean, report.global_improved_mean, report.global_delta
    );
    let _ = writeln!(out, "matched pairs: {}", report.matched_pairs);
    if !report.unmatched.is_empty() {
        let _ = writeln!(out, "unmatched: {}", report.unmatched.join(", "));
    }
    out
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{parse_annotation, AnnotationError, AnnotationRecord};

/// Aggregates for one class label. Width is the box's horizontal extent and
/// height its vertical extent ("length").
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassStats {
    pub class_label: String,
    pub count: usize,
    pub proportion: f64,
    pub mean_width: f64,
    pub mean_height: f64,
    pub mean_area: f64,
    /// Mean of box area / image area over the class's objects.
    pub mean_area_fraction: f64,
}

/// Per-class statistics sorted by descending count, ties broken by label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImbalanceReport {
    pub per_class: Vec<ClassStats>,
    pub majority: Option<String>,
    pub minority: Option<String>,
    /// Majority count over minority count; `None` when there are no objects.
    pub imbalance_ratio: Option<f64>,
}

impl ImbalanceReport {
    pub fn total_objects(&self) -> usize {
        self.per_class.iter().map(|c| c.count).sum()
    }
}

#[derive(Default)]
struct Samples {
    widths: Vec<f64>,
    heights: Vec<f64>,
    areas: Vec<f64>,
    fractions: Vec<f64>,
}

/// Mean over values summed in sorted order, so the result does not depend on
/// the order the samples arrived in.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn compute_stats(records: &[AnnotationRecord]) -> ImbalanceReport {
    let mut by_class: BTreeMap<&str, Samples> = BTreeMap::new();
    for rec in records {
        let image_area = f64::from(rec.image_width) * f64::from(rec.image_height);
        for obj in &rec.objects {
            let s = by_class.entry(obj.label.as_str()).or_default();
            let area = obj.bbox.area();
            s.widths.push(obj.bbox.width());
            s.heights.push(obj.bbox.height());
            s.areas.push(area);
            s.fractions.push(area / image_area);
        }
    }

    let total: usize = by_class.values().map(|s| s.widths.len()).sum();
    let mut per_class: Vec<ClassStats> = by_class
        .into_iter()
        .map(|(label, mut s)| {
            let count = s.widths.len();
            ClassStats {
                class_label: label.to_string(),
                count,
                proportion: count as f64 / total as f64,
                mean_width: order_free_mean(&mut s.widths),
                mean_height: order_free_mean(&mut s.heights),
                mean_area: order_free_mean(&mut s.areas),
                mean_area_fraction: order_free_mean(&mut s.fractions),
            }
        })
        .collect();
    per_class.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.class_label.cmp(&b.class_label)));

    let (majority, minority, imbalance_ratio) = match (per_class.first(), per_class.last()) {
        (Some(maj), Some(min)) => (
            Some(maj.class_label.clone()),
            Some(min.class_label.clone()),
            Some(maj.count as f64 / min.count as f64),
        ),
        _ => (None, None, None),
    };

    ImbalanceReport {
        per_class,
        majority,
        minority,
        imbalance_ratio,
    }
}

const HEADERS: [&str; 7] = [
    "class",
    "count",
    "proportion",
    "mean_width",
    "mean_height",
    "mean_area",
    "mean_area_fraction",
];

/// Column-aligned text table, one row per class in report order. An empty
/// report renders as the header line alone.
pub fn stats_to_report(report: &ImbalanceReport) -> String {
    let rows: Vec<[String; 7]> = report
        .per_class
        .iter()
        .map(|c| {
            [
                c.class_label.clone(),
                c.count.to_string(),
                format!("{:.4}", c.proportion),
                format!("{:.2}", c.mean_width),
                format!("{:.2}", c.mean_height),
                format!("{:.2}", c.mean_area),
                format!("{:.6}", c.mean_area_fraction),
            ]
        })
        .collect();

    let mut widths = HEADERS.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }

    let mut out = String::new();
    let mut push_row = |cells: &[&str]| {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(line, "{cell:<w$}");
            } else {
                let _ = write!(line, "  {cell:>w$}");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    push_row(&HEADERS);
    for row in &rows {
        push_row(&row.each_ref().map(String::as_str));
    }
    if let (Some(maj), Some(min), Some(ratio)) =
        (&report.majority, &report.minority, report.imbalance_ratio)
    {
        let _ = writeln!(out, "imbalance {maj}:{min} = {ratio:.4}");
    }
    out
}

/// Parses every `.xml` file under `dir` (sorted by path). The file stem
/// replaces an empty `filename` element as the image id.
pub fn load_annotation_dir(dir: &Path) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| AnnotationError::Io { path, source }
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.is_file()
            && path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("xml"))
        {
            paths.push(path);
        }
    }
    paths.sort();

    paths
        .par_iter()
        .map(|path| {
            let text = fs::read_to_string(path).map_err(io(path))?;
            let mut rec = parse_annotation(&text).map_err(|e| AnnotationError::InFile {
                path: path.clone(),
                source: Box::new(e),
            })?;
            if rec.image_id.is_empty() {
                rec.image_id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
            }
            Ok(rec)
        })
        .collect()
}

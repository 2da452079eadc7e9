//! Detections, confidence top-k, greedy per-class NMS and the detection head
//! output shape.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::bbox::{iou, BBox};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostError {
    #[error("confidence must be in [0, 1]")]
    ConfidenceOutOfRange,
    #[error("label must be non-empty and contain no whitespace")]
    InvalidLabel,
    #[error("thresh must be in (0,1]")]
    InvalidThreshold,
    #[error("topk must be >= 1")]
    InvalidTopk,
    #[error("{0} must be >= 1")]
    ZeroDimension(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection<T> {
    pub label: String,
    pub confidence: T,
    pub bbox: BBox<T>,
}

impl<T: Real> Detection<T> {
    pub fn new(label: impl Into<String>, confidence: T, bbox: BBox<T>) -> Result<Self, PostError> {
        let label = label.into();
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(PostError::InvalidLabel);
        }
        if !(confidence >= T::zero() && confidence <= T::one()) {
            return Err(PostError::ConfidenceOutOfRange);
        }
        Ok(Self {
            label,
            confidence,
            bbox,
        })
    }
}

/// Suppression settings. Defaults: threshold 0.45, top-k 400, per-class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig<T> {
    nms_thresh: T,
    topk: usize,
    class_agnostic: bool,
}

impl<T: Real> NmsConfig<T> {
    pub const DEFAULT_TOPK: usize = 400;

    pub fn new(nms_thresh: T, topk: usize) -> Result<Self, PostError> {
        if !(nms_thresh > T::zero() && nms_thresh <= T::one()) {
            return Err(PostError::InvalidThreshold);
        }
        if topk == 0 {
            return Err(PostError::InvalidTopk);
        }
        Ok(Self {
            nms_thresh,
            topk,
            class_agnostic: false,
        })
    }

    /// Suppress across labels instead of within each label.
    pub fn class_agnostic(mut self, on: bool) -> Self {
        self.class_agnostic = on;
        self
    }

    pub fn nms_thresh(&self) -> T {
        self.nms_thresh
    }

    pub fn topk(&self) -> usize {
        self.topk
    }

    pub fn is_class_agnostic(&self) -> bool {
        self.class_agnostic
    }
}

impl<T: Real> Default for NmsConfig<T> {
    fn default() -> Self {
        Self {
            nms_thresh: T::lit(0.45),
            topk: Self::DEFAULT_TOPK,
            class_agnostic: false,
        }
    }
}

/// The `k` most confident detections, most confident first. Equal
/// confidences keep their input order.
pub fn topk_filter<T: Real>(dets: &[Detection<T>], k: usize) -> Vec<Detection<T>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable sort: ties stay in input order
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap_or(Ordering::Equal)
    });
    order.truncate(k);
    order.into_iter().map(|i| dets[i].clone()).collect()
}

/// Greedy non-maximum suppression: after top-k truncation, repeatedly keeps
/// the most confident remaining detection and drops every remaining
/// detection of the same label (any label when class-agnostic) whose IoU
/// with it exceeds the threshold. Output is in keep order.
pub fn nms<T: Real>(dets: &[Detection<T>], cfg: &NmsConfig<T>) -> Vec<Detection<T>> {
    let ranked = topk_filter(dets, cfg.topk);
    let mut suppressed = vec![false; ranked.len()];
    let mut kept = Vec::new();
    for i in 0..ranked.len() {
        if suppressed[i] {
            continue;
        }
        let anchor = &ranked[i];
        for j in i + 1..ranked.len() {
            if suppressed[j] {
                continue;
            }
            let other = &ranked[j];
            let same_class = cfg.class_agnostic || other.label == anchor.label;
            if same_class && iou(&anchor.bbox, &other.bbox) > cfg.nms_thresh {
                suppressed[j] = true;
            }
        }
        kept.push(anchor.clone());
    }
    kept
}

/// Output tensor shape of a detection head: an `N x N` grid, 3 anchors per
/// cell, each predicting 4 box offsets, 1 objectness score and `M` class
/// scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HeadShape {
    pub grid_n: usize,
    pub num_classes_m: usize,
    pub anchors_per_cell: usize,
    pub channels: usize,
}

impl HeadShape {
    pub const ANCHORS_PER_CELL: usize = 3;

    pub fn cells(&self) -> usize {
        self.grid_n * self.grid_n
    }

    /// Total number of predicted values, `N * N * channels`.
    pub fn len(&self) -> usize {
        self.cells() * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shape `N x N x [3 * (4 + 1 + M)]`.
pub fn head_output_shape(n: usize, m: usize) -> Result<HeadShape, PostError> {
    if n == 0 {
        return Err(PostError::ZeroDimension("grid"));
    }
    if m == 0 {
        return Err(PostError::ZeroDimension("classes"));
    }
    Ok(HeadShape {
        grid_n: n,
        num_classes_m: m,
        anchors_per_cell: HeadShape::ANCHORS_PER_CELL,
        channels: HeadShape::ANCHORS_PER_CELL * (4 + 1 + m),
    })
}

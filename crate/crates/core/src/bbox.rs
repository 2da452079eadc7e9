//! Axis-aligned boxes and their overlap measures.
//!
//! Boxes are closed real intervals `[left, right] x [top, bottom]` in continuous
//! pixel coordinates. Area is `(right - left) * (bottom - top)` with no `+1`
//! pixel correction.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box coordinates must be finite")]
    NonFinite,
    #[error("inverted box: right < left or bottom < top")]
    Inverted,
}

/// Axis-aligned bounding box. `left <= right`, `top <= bottom`, all finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox<T> {
    left: T,
    top: T,
    right: T,
    bottom: T,
}

impl<T: Real> BBox<T> {
    pub fn new(left: T, top: T, right: T, bottom: T) -> Result<Self, GeometryError> {
        if !(left.is_finite() && top.is_finite() && right.is_finite() && bottom.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if right < left || bottom < top {
            return Err(GeometryError::Inverted);
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    pub fn left(&self) -> T {
        self.left
    }

    pub fn top(&self) -> T {
        self.top
    }

    pub fn right(&self) -> T {
        self.right
    }

    pub fn bottom(&self) -> T {
        self.bottom
    }

    pub fn width(&self) -> T {
        self.right - self.left
    }

    pub fn height(&self) -> T {
        self.bottom - self.top
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    /// Shifts the box by `(dx, dy)`.
    pub fn translate(&self, dx: T, dy: T) -> Result<Self, GeometryError> {
        Self::new(self.left + dx, self.top + dy, self.right + dx, self.bottom + dy)
    }

    /// Scales every coordinate by `s`. `s` must be positive.
    pub fn scale(&self, s: T) -> Result<Self, GeometryError> {
        Self::new(self.left * s, self.top * s, self.right * s, self.bottom * s)
    }

    /// Area of `self ∩ other`, zero when disjoint.
    pub fn intersection_area(&self, other: &Self) -> T {
        let w = (self.right.min(other.right) - self.left.max(other.left)).max(T::zero());
        let h = (self.bottom.min(other.bottom) - self.top.max(other.top)).max(T::zero());
        w * h
    }

    /// Smallest box containing both `self` and `other`.
    pub fn enclosing(&self, other: &Self) -> Self {
        Self {
            left: self.left.min(other.left),
            top: self.top.min(other.top),
            right: self.right.max(other.right),
            bottom: self.bottom.max(other.bottom),
        }
    }

    pub fn iou(&self, other: &Self) -> T {
        iou(self, other)
    }

    pub fn giou(&self, other: &Self) -> T {
        giou(self, other)
    }
}

impl<T: Real> TryFrom<[T; 4]> for BBox<T> {
    type Error = GeometryError;

    fn try_from(c: [T; 4]) -> Result<Self, Self::Error> {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl<T> From<BBox<T>> for [T; 4] {
    fn from(b: BBox<T>) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

/// Every term of the IoU / GIoU computation for one pair of boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapReport<T> {
    pub intersection_area: T,
    pub union_area: T,
    pub enclosing_area: T,
    pub iou: T,
    pub giou: T,
}

pub fn area<T: Real>(b: &BBox<T>) -> T {
    b.area()
}

pub fn overlap_report<T: Real>(a: &BBox<T>, b: &BBox<T>) -> OverlapReport<T> {
    let intersection_area = a.intersection_area(b);
    let union_area = a.area() + b.area() - intersection_area;
    let enclosing_area = a.enclosing(b).area();

    // Two zero-area boxes have no meaningful overlap ratio.
    let iou = if union_area > T::zero() {
        (intersection_area / union_area).min(T::one())
    } else {
        T::zero()
    };
    // Zero enclosing area only happens when both boxes collapse to one point.
    let giou = if enclosing_area > T::zero() {
        // enclosing >= union exactly; rounding can flip the sign for nested boxes
        iou - (enclosing_area - union_area).max(T::zero()) / enclosing_area
    } else {
        iou
    };

    OverlapReport {
        intersection_area,
        union_area,
        enclosing_area,
        iou,
        giou,
    }
}

/// Intersection over union; 0 when both boxes have zero area.
pub fn iou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    overlap_report(a, b).iou
}

/// Generalized IoU: `iou - (enclosing - union) / enclosing`.
pub fn giou<T: Real>(a: &BBox<T>, b: &BBox<T>) -> T {
    overlap_report(a, b).giou
}

//! Scalar loss formulas: stable binary cross-entropy on logits, the GIoU box
//! loss, and the three-part (box / objectness / class) breakdown.

use serde::Serialize;
use thiserror::Error;

use crate::bbox::{giou, BBox, GeometryError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("logit must be finite")]
    NonFiniteLogit,
    #[error("target must be in [0, 1], got {0}")]
    TargetOutOfRange(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Per-component loss values; `total = l_box + l_obj + l_cls`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown<T> {
    pub l_box: T,
    pub l_obj: T,
    pub l_cls: T,
    pub total: T,
}

/// Binary cross-entropy of logit `x` against target `z`, computed as
/// `max(x, 0) - x*z + ln(1 + e^-|x|)` so it never overflows.
pub fn bce_with_logits<T: Real>(x: T, z: T) -> Result<T, LossError> {
    if !x.is_finite() {
        return Err(LossError::NonFiniteLogit);
    }
    if !(z >= T::zero() && z <= T::one()) {
        return Err(LossError::TargetOutOfRange(z.to_f64().unwrap_or(f64::NAN)));
    }
    let loss = x.max(T::zero()) - x * z + (-x.abs()).exp().ln_1p();
    // Rounding can push a near-zero result slightly negative when z is fractional.
    Ok(loss.max(T::zero()))
}

/// `1 - giou(pred, target)`, in `[0, 2)`.
pub fn giou_loss<T: Real>(pred: &BBox<T>, target: &BBox<T>) -> T {
    T::one() - giou(pred, target)
}

fn mean<T: Real>(sum: T, n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        sum / T::from_usize(n).expect("term count representable")
    }
}

/// Mean GIoU loss over box pairs plus mean BCE over objectness and class
/// terms. Empty lists contribute zero.
pub fn compose_loss<T: Real>(
    box_terms: &[(BBox<T>, BBox<T>)],
    obj_terms: &[(T, T)],
    cls_terms: &[(T, T)],
) -> Result<LossBreakdown<T>, LossError> {
    let box_sum = box_terms
        .iter()
        .fold(T::zero(), |acc, (p, t)| acc + giou_loss(p, t));
    let bce_sum = |terms: &[(T, T)]| -> Result<T, LossError> {
        terms
            .iter()
            .try_fold(T::zero(), |acc, &(x, z)| Ok(acc + bce_with_logits(x, z)?))
    };

    let l_box = mean(box_sum, box_terms.len());
    let l_obj = mean(bce_sum(obj_terms)?, obj_terms.len());
    let l_cls = mean(bce_sum(cls_terms)?, cls_terms.len());
    Ok(LossBreakdown {
        l_box,
        l_obj,
        l_cls,
        total: l_box + l_obj + l_cls,
    })
}

/// Term lists read from a loss input file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTerms<T> {
    pub box_terms: Vec<(BBox<T>, BBox<T>)>,
    pub obj_terms: Vec<(T, T)>,
    pub cls_terms: Vec<(T, T)>,
}

impl<T: Real> LossTerms<T> {
    pub fn compose(&self) -> Result<LossBreakdown<T>, LossError> {
        compose_loss(&self.box_terms, &self.obj_terms, &self.cls_terms)
    }
}

/// Parses one term per line:
///
/// ```text
/// box <pl> <pt> <pr> <pb> <tl> <tt> <tr> <tb>
/// obj <logit> <target>
/// cls <logit> <target>
/// ```
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_loss_terms<T: Real + std::str::FromStr>(text: &str) -> Result<LossTerms<T>, LossError> {
    let mut terms = LossTerms {
        box_terms: Vec::new(),
        obj_terms: Vec::new(),
        cls_terms: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| LossError::Parse { line, message };
        let mut fields = trimmed.split_whitespace();
        let kind = fields.next().unwrap_or_default();
        let values = fields
            .map(|f| {
                f.parse::<T>()
                    .map_err(|_| err(format!("non-numeric field {f:?}")))
            })
            .collect::<Result<Vec<T>, _>>()?;

        let expect = |n: usize| {
            if values.len() == n {
                Ok(())
            } else {
                Err(err(format!(
                    "{kind} term expects {n} values, found {}",
                    values.len()
                )))
            }
        };
        let to_box = |c: &[T]| {
            BBox::new(c[0], c[1], c[2], c[3])
                .map_err(|e: GeometryError| err(e.to_string()))
        };
        match kind {
            "box" => {
                expect(8)?;
                terms
                    .box_terms
                    .push((to_box(&values[..4])?, to_box(&values[4..])?));
            }
            "obj" | "cls" => {
                expect(2)?;
                // validate eagerly so the error carries the line number
                bce_with_logits(values[0], values[1]).map_err(|e| err(e.to_string()))?;
                let list = if kind == "obj" {
                    &mut terms.obj_terms
                } else {
                    &mut terms.cls_terms
                };
                list.push((values[0], values[1]));
            }
            other => return Err(err(format!("unknown term kind {other:?}"))),
        }
    }
    Ok(terms)
}

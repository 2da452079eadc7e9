//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use detkit::dataset::AnnotationRecord;
use detkit::{BBox, Detection};
use rand::Rng;

/// Unit-cell counts `(intersection, union, enclosing)` for integer boxes
/// `[l, t, r, b]` inside `[0, 32]^2`.
pub fn cell_counts(a: [i32; 4], b: [i32; 4]) -> (u32, u32, u32) {
    let inside = |bx: [i32; 4], x: i32, y: i32| bx[0] <= x && x < bx[2] && bx[1] <= y && y < bx[3];
    let enc = [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])];
    let (mut inter, mut union, mut encl) = (0, 0, 0);
    for y in 0..32 {
        for x in 0..32 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u32::from(ia && ib);
            union += u32::from(ia || ib);
            encl += u32::from(inside(enc, x, y));
        }
    }
    (inter, union, encl)
}

/// `(iou, giou)` from cell counts, with the same degenerate-case rules.
pub fn cell_iou_giou(a: [i32; 4], b: [i32; 4]) -> (f64, f64) {
    let (i, u, e) = cell_counts(a, b);
    let iou = if u == 0 { 0.0 } else { f64::from(i) / f64::from(u) };
    let giou = if e == 0 {
        iou
    } else {
        iou - f64::from(e - u) / f64::from(e)
    };
    (iou, giou)
}

pub fn random_int_box(rng: &mut impl Rng) -> [i32; 4] {
    let (x0, x1) = (rng.gen_range(0..=32), rng.gen_range(0..=32));
    let (y0, y1) = (rng.gen_range(0..=32), rng.gen_range(0..=32));
    [x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)]
}

pub fn to_bbox(c: [i32; 4]) -> BBox<f64> {
    BBox::new(f64::from(c[0]), f64::from(c[1]), f64::from(c[2]), f64::from(c[3])).unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Textbook cross-entropy on probabilities. `1 - sigmoid(x)` is evaluated as
/// `sigmoid(-x)` so the reference itself does not lose precision.
pub fn naive_bce(x: f64, z: f64) -> f64 {
    -z * sigmoid(x).ln() - (1.0 - z) * sigmoid(-x).ln()
}

/// Quadratic greedy NMS: selection-sort by confidence (earliest wins ties),
/// keep a candidate unless an already kept box of the same label overlaps
/// it by more than `thresh`.
pub fn reference_nms(dets: &[Detection<f64>], thresh: f64, topk: usize) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut ranked = Vec::new();
    while !remaining.is_empty() && ranked.len() < topk {
        let mut best = 0;
        for (pos, &i) in remaining.iter().enumerate() {
            if dets[i].confidence > dets[remaining[best]].confidence {
                best = pos;
            }
        }
        ranked.push(remaining.remove(best));
    }
    let overlap = |a: &BBox<f64>, b: &BBox<f64>| {
        let iw = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
        let ih = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
        let inter = iw * ih;
        let union = a.width() * a.height() + b.width() * b.height() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    };
    let mut kept: Vec<usize> = Vec::new();
    for i in ranked {
        let clash = kept
            .iter()
            .any(|&k| dets[k].label == dets[i].label && overlap(&dets[k].bbox, &dets[i].bbox) > thresh);
        if !clash {
            kept.push(i);
        }
    }
    kept
}

pub fn random_detections(rng: &mut impl Rng, max: usize) -> Vec<Detection<f64>> {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| {
            let label = ["hat", "person"][rng.gen_range(0..2)];
            // coarse confidences so ties occur
            let conf = f64::from(rng.gen_range(0..=100u32)) / 100.0;
            Detection::new(label, conf, to_bbox(random_int_box(rng))).unwrap()
        })
        .collect()
}

/// Naive single-pass per-class means:
/// label -> (count, mean_w, mean_h, mean_area, mean_fraction).
pub fn reference_stats(records: &[AnnotationRecord]) -> BTreeMap<String, (usize, f64, f64, f64, f64)> {
    let mut acc: BTreeMap<String, (usize, f64, f64, f64, f64)> = BTreeMap::new();
    for r in records {
        let img = f64::from(r.image_width) * f64::from(r.image_height);
        for o in &r.objects {
            let w = o.bbox.right() - o.bbox.left();
            let h = o.bbox.bottom() - o.bbox.top();
            let e = acc.entry(o.label.clone()).or_default();
            e.0 += 1;
            e.1 += w;
            e.2 += h;
            e.3 += w * h;
            e.4 += w * h / img;
        }
    }
    acc.into_iter()
        .map(|(k, (n, w, h, a, f))| {
            let c = n as f64;
            (k, (n, w / c, h / c, a / c, f / c))
        })
        .collect()
}

pub fn random_records(rng: &mut impl Rng) -> Vec<AnnotationRecord> {
    use detkit::dataset::AnnotatedObject;
    let labels = ["hat", "person", "vest", "dog"];
    (0..rng.gen_range(1..8))
        .map(|i| {
            let (w, h) = (rng.gen_range(1..500u32), rng.gen_range(1..500u32));
            let objects = (0..rng.gen_range(0..10))
                .map(|_| {
                    let (x0, x1) = (rng.gen_range(0..=w), rng.gen_range(0..=w));
                    let (y0, y1) = (rng.gen_range(0..=h), rng.gen_range(0..=h));
                    AnnotatedObject {
                        label: labels[rng.gen_range(0..labels.len())].to_string(),
                        bbox: BBox::new(
                            f64::from(x0.min(x1)),
                            f64::from(y0.min(y1)),
                            f64::from(x0.max(x1)),
                            f64::from(y0.max(y1)),
                        )
                        .unwrap(),
                    }
                })
                .collect();
            AnnotationRecord {
                image_id: format!("img{i}"),
                image_width: w,
                image_height: h,
                objects,
            }
        })
        .collect()
}

/// Brute-force 2-D convolution of one gray channel with the kernel weights
/// recomputed from scratch, mirror border repeating the edge sample.
pub fn brute_force_blur(pixels: &[u8], w: usize, h: usize, sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut weights = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            weights.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        (if i < 0 { -i - 1 } else if i >= n { 2 * n - 1 - i } else { i }) as usize
    };
    let size = 2 * radius + 1;
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let wgt = weights[(dy + r) as usize * size + (dx + r) as usize] / total;
                    acc += wgt * f64::from(pixels[mirror(y + dy, h) * w + mirror(x + dx, w)]);
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{
    brute_force_blur, cell_iou_giou, naive_bce, random_detections, random_int_box,
    random_records, reference_nms, reference_stats, to_bbox,
};
use detkit::blur::{blur_plane_direct, ImagePlane};
use detkit::dataset::compute_stats;
use detkit::detfile::{format_detections, parse_detection_file, parse_detections, DetectionFileError};
use detkit::eval::compare_files;
use detkit::record::{decode_sequential, pack, read_random, read_sequential, record_len, RecordEntry};
use detkit::{
    bce_with_logits, blur_plane, build_kernel, giou, head_output_shape, iou, nms, GaussianKernelSpec,
    NmsConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);
type ErrorCase = (&'static str, fn(&DetectionFileError) -> bool, &'static str);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn within_time(start: Instant, limit: Duration) -> Outcome {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

// Rows of the two per-image result tables.
const TABLE_BASELINE: &str = "hat 0.981 598.40 5.74 718.82 143.52\nhat 0.965 106.98 74.34 188.41 177.79\nhat 0.968 314.11 60.32 395.96 158.78\n";
const TABLE_IMPROVED: &str = "hat 0.999 598.08 5.79 718.31 143.43\nhat 0.995 106.91 74.47 188.49 177.79\nhat 0.977 314.10 60.35 395.93 158.73\n";

fn ac1_table_fixture() -> Outcome {
    let start = Instant::now();
    let base = parse_detection_file::<f64>("test", TABLE_BASELINE).map_err(|e| e.to_string())?;
    let impr = parse_detection_file::<f64>("test", TABLE_IMPROVED).map_err(|e| e.to_string())?;
    let r = compare_files(&[base], &[impr]).map_err(|e| e.to_string())?;
    let tol = 1e-6;
    ensure!((r.global_baseline_mean - 0.971_333).abs() < tol, "baseline mean {}", r.global_baseline_mean);
    ensure!((r.global_improved_mean - 0.990_333).abs() < tol, "improved mean {}", r.global_improved_mean);
    ensure!((r.global_delta - 0.019).abs() < tol, "delta {}", r.global_delta);
    ensure!(r.within_claimed_band(), "delta {} outside [0.01, 0.02]", r.global_delta);
    within_time(start, Duration::from_secs(1))
}

fn ac2_head_shape() -> Outcome {
    let a = head_output_shape(13, 2).map_err(|e| e.to_string())?;
    let b = head_output_shape(52, 80).map_err(|e| e.to_string())?;
    ensure!(a.channels == 21, "(13, 2) channels {}", a.channels);
    ensure!(b.channels == 255, "(52, 80) channels {}", b.channels);
    Ok(())
}

fn ac3_bce_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let x = -30.0 + 60.0 * f64::from(k) / 9_999.0;
        for z in [0.0, 0.5, 1.0] {
            let v = bce_with_logits(x, z).map_err(|e| e.to_string())?;
            worst = worst.max((v - naive_bce(x, z)).abs());
        }
    }
    ensure!(worst <= 1e-9, "max abs error {worst:e}");
    for x in [1e6f64, -1e6] {
        for z in [0.0, 0.5, 1.0] {
            let v = bce_with_logits(x, z).map_err(|e| e.to_string())?;
            ensure!(v.is_finite(), "bce({x}, {z}) = {v}");
        }
    }
    within_time(start, Duration::from_secs(1))
}

fn ac4_iou_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tol = 1e-9;
    for _ in 0..1_000 {
        let (ca, cb) = (random_int_box(&mut rng), random_int_box(&mut rng));
        let (a, b) = (to_bbox(ca), to_bbox(cb));
        let (oi, og) = cell_iou_giou(ca, cb);
        let (i, g) = (iou(&a, &b), giou(&a, &b));
        ensure!((i - oi).abs() < tol && (g - og).abs() < tol, "{ca:?} {cb:?}: ({i}, {g}) vs oracle ({oi}, {og})");
        ensure!(i == iou(&b, &a) && g == giou(&b, &a), "asymmetric on {ca:?} {cb:?}");

        let (dx, dy) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let (ta, tb) = (a.translate(dx, dy).unwrap(), b.translate(dx, dy).unwrap());
        ensure!(
            (iou(&ta, &tb) - i).abs() < tol && (giou(&ta, &tb) - g).abs() < tol,
            "translation by ({dx}, {dy}) changed {ca:?} {cb:?}"
        );
        let s = rng.gen_range(0.1..10.0);
        let (sa, sb) = (a.scale(s).unwrap(), b.scale(s).unwrap());
        ensure!(
            (iou(&sa, &sb) - i).abs() < tol && (giou(&sa, &sb) - g).abs() < tol,
            "scaling by {s} changed {ca:?} {cb:?}"
        );
    }
    within_time(start, Duration::from_secs(5))
}

fn ac5_kernel() -> Outcome {
    // oracle: raw weights exp(-(u^2 + v^2) / 2) at the nine offsets, normalized
    let raw: Vec<f64> = (-1i32..=1)
        .flat_map(|v| (-1i32..=1).map(move |u| (-f64::from(u * u + v * v) / 2.0).exp()))
        .collect();
    let oracle_center = raw[4] / raw.iter().sum::<f64>();
    let k = build_kernel(&GaussianKernelSpec::new(1.0f64, 1).unwrap());
    ensure!((oracle_center - 0.204_180).abs() < 1e-5, "oracle center {oracle_center}");
    ensure!((k.weight(0, 0) - 0.204_180).abs() < 1e-5, "center {}", k.weight(0, 0));
    ensure!((k.weight(0, 0) - oracle_center).abs() < 1e-12, "center differs from oracle");

    for sigma in [0.5, 1.0, 2.0, 5.0] {
        for radius in 1..=3 {
            let k = build_kernel(&GaussianKernelSpec::new(sigma, radius).unwrap());
            let sum: f64 = k.weights().iter().sum();
            ensure!((sum - 1.0).abs() <= 1e-12, "sigma {sigma} radius {radius}: sum {sum}");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 0..50 {
        let channels = if n % 2 == 0 { 1 } else { 3 };
        let px = (0..64 * 64 * channels).map(|_| rng.gen()).collect();
        let img = ImagePlane::new(64, 64, channels, px).unwrap();
        let sigma = [0.5, 1.0, 2.0, 5.0][n % 4];
        let radius = 1 + n % 3;
        let k = build_kernel(&GaussianKernelSpec::new(sigma, radius).unwrap());
        let sep = blur_plane(&img, &k).map_err(|e| e.to_string())?;
        let direct = blur_plane_direct(&img, &k).map_err(|e| e.to_string())?;
        ensure!(sep == direct, "image {n}: separable differs from direct");
        if channels == 1 {
            let brute: Vec<u8> = brute_force_blur(img.pixels(), 64, 64, sigma, radius)
                .into_iter()
                .map(|v| (v + 0.5).floor() as u8)
                .collect();
            ensure!(sep.pixels() == brute.as_slice(), "image {n}: differs from brute force");
        }
    }
    Ok(())
}

fn ac6_blur_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 0..60 {
        let (w, h) = (rng.gen_range(3..48), rng.gen_range(3..48));
        let channels = if rng.gen() { 3 } else { 1 };
        let sigma = rng.gen_range(0.3..5.0);
        let radius = rng.gen_range(1..=3.min(w.min(h)));
        let k = build_kernel(&GaussianKernelSpec::new(sigma, radius).unwrap());

        let constant = ImagePlane::filled(w, h, channels, rng.gen()).unwrap();
        ensure!(blur_plane(&constant, &k).unwrap() == constant, "case {n}: constant image changed");

        let px: Vec<u8> = (0..w * h * channels).map(|_| rng.gen()).collect();
        let img = ImagePlane::new(w, h, channels, px).unwrap();
        let out = blur_plane(&img, &k).unwrap();
        let mirrored = blur_plane(&img.mirrored_horizontally(), &k).unwrap();
        let expect = out.mirrored_horizontally();
        let r = radius;
        for y in r..h - r {
            for x in r..w - r {
                for c in 0..channels {
                    ensure!(
                        mirrored.get(x, y, c) == expect.get(x, y, c),
                        "case {n}: mirror mismatch at ({x}, {y}, {c})"
                    );
                }
            }
        }
        for c in 0..channels {
            let ch = img.channel(c);
            let lo = i32::from(*ch.iter().min().unwrap());
            let hi = i32::from(*ch.iter().max().unwrap());
            ensure!(
                out.channel(c).iter().all(|&p| (lo - 1..=hi + 1).contains(&i32::from(p))),
                "case {n}: channel {c} left [{lo}, {hi}]"
            );
        }
    }
    within_time(start, Duration::from_secs(10))
}

fn ac7_nms_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = NmsConfig::default();
    ensure!(cfg.nms_thresh() == 0.45 && cfg.topk() == 400, "defaults changed");
    for n in 0..500 {
        let dets = random_detections(&mut rng, 50);
        let got = nms(&dets, &cfg);
        let expected: Vec<_> = reference_nms(&dets, 0.45, 400).into_iter().map(|i| dets[i].clone()).collect();
        ensure!(got == expected, "instance {n}: {} kept vs reference {}", got.len(), expected.len());
        ensure!(nms(&got, &cfg) == got, "instance {n}: not idempotent");
    }
    Ok(())
}

fn ac8_archive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for n in 0..6 {
        let count = if n == 0 { 200 } else { rng.gen_range(1..=200) };
        let mut indices: Vec<u64> = (0..count as u64 * 4).collect();
        indices.shuffle(&mut rng);
        let entries: Vec<RecordEntry> = indices[..count]
            .iter()
            .enumerate()
            .map(|(i, &index)| {
                let len = if i == 0 { 64 * 1024 } else { rng.gen_range(0..=(if i % 10 == 0 { 64 * 1024 } else { 512 })) };
                RecordEntry {
                    index,
                    source_path: format!("images/{index:05}.jpg"),
                    payload: (0..len).map(|_| rng.gen()).collect(),
                }
            })
            .collect();

        let triple = pack(&entries, &dir.path().join(format!("set{n}"))).map_err(|e| e.to_string())?;
        let seq = read_sequential(&triple.rec_path).map_err(|e| e.to_string())?;
        ensure!(seq.len() == entries.len(), "set {n}: {} records read", seq.len());
        for (e, p) in entries.iter().zip(&seq) {
            ensure!(&e.payload == p, "set {n}: payload of index {} differs", e.index);
            let random = read_random(&triple, e.index).map_err(|e| e.to_string())?;
            ensure!(&random == p, "set {n}: random read of {} differs", e.index);
        }

        let rec = std::fs::read(&triple.rec_path).map_err(|e| e.to_string())?;
        let mut offset = 0;
        let mut flips = 0;
        for (ordinal, e) in entries.iter().enumerate() {
            // every byte of small payloads, a sample of large ones
            let step = (e.payload.len() / 64).max(1);
            for b in (0..e.payload.len()).step_by(step) {
                let mut corrupt = rec.clone();
                corrupt[offset + 8 + b] ^= 1 << rng.gen_range(0..8);
                let caught = matches!(
                    decode_sequential(&corrupt),
                    Err(detkit::record::ArchiveError::ChecksumMismatch { record }) if record == ordinal
                );
                ensure!(caught, "set {n}: flip in record {ordinal} byte {b} undetected");
                flips += 1;
                if flips > 2_000 {
                    break;
                }
            }
            offset += record_len(e.payload.len());
        }

        let again = pack(&entries, &dir.path().join(format!("again{n}"))).map_err(|e| e.to_string())?;
        for (a, b) in [
            (&triple.rec_path, &again.rec_path),
            (&triple.idx_path, &again.idx_path),
            (&triple.lst_path, &again.lst_path),
        ] {
            ensure!(std::fs::read(a).unwrap() == std::fs::read(b).unwrap(), "set {n}: repack differs");
        }
    }
    Ok(())
}

fn ac9_stats_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 0..100 {
        let mut records = random_records(&mut rng);
        let report = compute_stats(&records);
        let reference = reference_stats(&records);
        ensure!(report.per_class.len() == reference.len(), "fixture {n}: class count");
        for c in &report.per_class {
            let (count, w, h, a, f) = reference[&c.class_label];
            ensure!(c.count == count, "fixture {n}: {} count", c.class_label);
            for (got, want, what) in [
                (c.mean_width, w, "mean_width"),
                (c.mean_height, h, "mean_height"),
                (c.mean_area, a, "mean_area"),
                (c.mean_area_fraction, f, "mean_area_fraction"),
            ] {
                ensure!((got - want).abs() <= 1e-9, "fixture {n}: {} {what} {got} vs {want}", c.class_label);
            }
        }
        if report.total_objects() > 0 {
            let sum: f64 = report.per_class.iter().map(|c| c.proportion).sum();
            ensure!((sum - 1.0).abs() <= 1e-9, "fixture {n}: proportions sum {sum}");
        }
        records.shuffle(&mut rng);
        ensure!(compute_stats(&records) == report, "fixture {n}: order dependent");
    }
    Ok(())
}

fn ac10_detection_golden() -> Outcome {
    for table in [TABLE_BASELINE, TABLE_IMPROVED] {
        let dets = parse_detections::<f64>(table).map_err(|e| e.to_string())?;
        ensure!(dets.len() == 3, "expected 3 rows");
        let text = format_detections(&dets).map_err(|e| e.to_string())?;
        ensure!(text == table, "rewrite differs:\n{text}");
    }
    let cases: [ErrorCase; 4] = [
        ("hat 1.5 0 0 1 1", |e| matches!(e, DetectionFileError::ConfidenceOutOfRange { line: 1 }), "line 1: confidence out of range"),
        ("hat 0.5 0 0 1 1\nhat 0.5 0 0 1", |e| matches!(e, DetectionFileError::WrongFieldCount { line: 2, .. }), "line 2"),
        ("\nhat 0.5 a 0 1 1", |e| matches!(e, DetectionFileError::NonNumeric { line: 2, .. }), "line 2"),
        ("hat 0.5 0 0 1 1\n\n\nhat 0.9 3 0 1 1", |e| matches!(e, DetectionFileError::InvalidBox { line: 4, .. }), "line 4"),
    ];
    for (text, check, msg) in cases {
        match parse_detections::<f64>(text) {
            Err(e) if check(&e) && e.to_string().starts_with(msg) => {}
            other => return Err(format!("{text:?}: unexpected {other:?}")),
        }
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1  reported-table fixture comparison", ac1_table_fixture),
        ("AC2  head output shape", ac2_head_shape),
        ("AC3  BCE stable vs naive", ac3_bce_equivalence),
        ("AC4  IoU/GIoU cell oracle and invariances", ac4_iou_oracle),
        ("AC5  kernel weights and separable blur", ac5_kernel),
        ("AC6  blur invariants", ac6_blur_invariants),
        ("AC7  NMS oracle and idempotence", ac7_nms_oracle),
        ("AC8  archive round-trip and corruption", ac8_archive),
        ("AC9  dataset statistics oracle", ac9_stats_oracle),
        ("AC10 detection file golden round-trip", ac10_detection_golden),
    ];

    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Err(format!("panicked: {msg}"))
            });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("PASS  {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({ms} ms): {why}");
            }
        }
    }
    println!("\n{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

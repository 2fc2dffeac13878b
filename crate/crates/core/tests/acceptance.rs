mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use camoscore::boundary::{detect_edges, ground_truth_contours, ContourMap, EdgeParams};
use camoscore::features::{extract_builtin, write_feature_file, BuiltinParams, FeatureMap};
use camoscore::frechet::{frechet_distance, RegionStats};
use camoscore::linalg::matrix_sqrt;
use camoscore::morphology::{dilate, erode};
use camoscore::rank::{alpha_grid, kendall_tau_values, pair_counts_brute, pair_counts_fast, HumanMeasure};
use camoscore::score::{ContourSource, FeatureSource};
use camoscore::synth::{emit_dataset, fill_background, SequenceSpec, Sprite, SynthConfig, SynthSource};
use camoscore::{
    calibrate_alpha, combined_score, make_trimap, score_dataset, score_example, select_kernels, BinaryMask, CropBox,
    HumanRanking, ImagePlane, KernelPolicy, KernelRange, Manifest, RankKey, ScoreConfig, ScoreReport, Sidecars, TauVariant,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run(n: usize, name: &str, budget: Duration, f: fn() -> Check) -> bool {
    let t = Instant::now();
    let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
    let dt = t.elapsed();
    let out = out.and_then(|s| {
        if dt <= budget {
            Ok(s)
        } else {
            Err(format!("{s}; took {dt:.2?}, budget {budget:?}"))
        }
    });
    match &out {
        Ok(s) => println!("PASS criterion {n}: {name} ({dt:.2?}) {s}"),
        Err(s) => println!("FAIL criterion {n}: {name} ({dt:.2?}) {s}"),
    }
    out.is_ok()
}

// (dataset, S_Rf, S_b, S_alpha) as published.
const TABLE: [(&str, f64, f64, f64); 12] = [
    ("CHAMELEON", 0.694, 0.445, 0.607),
    ("CAMO Train", 0.672, 0.451, 0.595),
    ("CAMO Test", 0.683, 0.470, 0.608),
    ("COD10K Train", 0.655, 0.433, 0.577),
    ("COD10K Test", 0.657, 0.431, 0.578),
    ("Camouflaged Animals", 0.674, 0.536, 0.626),
    ("MoCA-Mask Train", 0.850, 0.443, 0.707),
    ("MoCA-Mask Test", 0.733, 0.464, 0.639),
    ("Camouflaged cuboids", 0.894, 0.433, 0.733),
    ("Synthetic w/o FID", 0.608, 0.432, 0.546),
    ("Synthetic w/ FID", 0.679, 0.447, 0.598),
    ("Synthetic video", 0.658, 0.430, 0.578),
];

fn table_regression() -> Check {
    let mut worst = 0.0f64;
    for (name, rf, b, sa) in TABLE {
        let got = combined_score(rf, b, 0.35).map_err(|e| e.to_string())?;
        let err = (got - sa).abs();
        ensure(err <= 0.0015, format!("{name}: {got:.4} vs {sa}"))?;
        worst = worst.max(err);
    }
    Ok(format!("{} rows, max error {worst:.5}", TABLE.len()))
}

fn quantized(fm: FeatureMap) -> FeatureMap {
    let data = fm.data.iter().map(|&v| v as f32 as f64).collect();
    FeatureMap::new(fm.width, fm.height, fm.dim, data, fm.extractor_id).unwrap()
}

fn external_config(dir: &Path) -> ScoreConfig {
    ScoreConfig {
        features: FeatureSource::External { dir: dir.to_path_buf() },
        contours: ContourSource::External {
            dir: dir.to_path_buf(),
            threshold: 0.5,
        },
        ..ScoreConfig::default()
    }
}

fn same_scores(a: &ScoreReport, b: &ScoreReport) -> bool {
    a.s_rf.to_bits() == b.s_rf.to_bits()
        && a.s_b.to_bits() == b.s_b.to_bits()
        && a.s_alpha.to_bits() == b.s_alpha.to_bits()
        && a.d2.map(f64::to_bits) == b.d2.map(f64::to_bits)
        && a.crop == b.crop
        && a.kernels == b.kernels
        && a.feature_dim == b.feature_dim
}

fn external_ingestion() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = external_config(dir.path());
    let image_path = dir.path().join("fixture.png");
    let mut checked = 0;

    for (img, mask) in [common::matched_texture(), common::red_on_blue(), common::smooth_hidden()] {
        // sidecars written to disk and read back must score exactly like the in-memory maps
        let fm = quantized(extract_builtin(&img, &BuiltinParams::default()));
        let edges = detect_edges(&img, &EdgeParams::default());
        write_feature_file(dir.path().join("fixture.feat"), &fm).map_err(|e| e.to_string())?;
        edges.plane.save_png(dir.path().join("fixture.contour.png")).map_err(|e| e.to_string())?;
        let memory = Sidecars {
            features: Some(fm),
            contours: Some(ContourMap::external(edges.plane.clone(), 0.5)),
        };
        let loaded = Sidecars::load(&image_path, &cfg).map_err(|e| e.to_string())?;
        let a = score_example("x", &img, &mask, &memory, &cfg).map_err(|e| e.to_string())?;
        let b = score_example("x", &img, &mask, &loaded, &cfg).map_err(|e| e.to_string())?;
        ensure(same_scores(&a, &b), format!("in-memory {a:?} vs loaded {b:?}"))?;
        ensure(b.extractor_id.starts_with("external:"), "extractor id not recorded")?;
        checked += 1;

        // contours identical to the mask outline leave nothing hidden
        let gt = ground_truth_contours(&mask).map_err(|e| e.to_string())?;
        gt.plane.save_png(dir.path().join("fixture.contour.png")).map_err(|e| e.to_string())?;
        // constant features per region: the distance is the squared mean gap
        let (va, vb) = ([0.25, 0.5, 1.0], [0.75, 0.0, 0.5]);
        let mut data = Vec::new();
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                data.extend(if mask.get(x, y) { va } else { vb });
            }
        }
        let fm = FeatureMap::new(mask.width(), mask.height(), 3, data, "constant").unwrap();
        write_feature_file(dir.path().join("fixture.feat"), &fm).map_err(|e| e.to_string())?;
        let loaded = Sidecars::load(&image_path, &cfg).map_err(|e| e.to_string())?;
        let r = score_example("x", &img, &mask, &loaded, &cfg).map_err(|e| e.to_string())?;
        ensure(r.s_b == 0.0, format!("outline contours gave s_b {}", r.s_b))?;
        let d2 = r.d2.ok_or("no distance")?;
        ensure((d2 - 0.75).abs() < 1e-9, format!("constant features gave d2 {d2}, expected 0.75"))?;
        checked += 1;
    }
    Ok(format!("{checked} sidecar fixtures"))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, max_cond: f64, decades: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let scale = 10f64.powf(rng.random_range(-decades..decades));
    let eig = DVector::from_fn(n, |_, _| scale * max_cond.powf(rng.random::<f64>()));
    let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    (&m + m.transpose()) * 0.5
}

fn random_stats(rng: &mut ChaCha8Rng) -> RegionStats {
    let n = rng.random_range(1..=16);
    let mu = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    RegionStats::new(mu, random_spd(rng, n, 1e3, 1.0), 100).unwrap()
}

fn frechet_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_self = 0.0f64;
    for _ in 0..100 {
        let s = random_stats(&mut rng);
        let d = frechet_distance(&s, &s).map_err(|e| e.to_string())?.d2;
        ensure(d.abs() <= 1e-8, format!("d2(s, s) = {d:e} at dim {}", s.dim()))?;
        worst_self = worst_self.max(d.abs());
    }

    for _ in 0..100 {
        let (m1, m2) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (s1, s2): (f64, f64) = (rng.random_range(0.01..4.0), rng.random_range(0.01..4.0));
        let one = |m: f64, s: f64| {
            RegionStats::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, s * s), 10).unwrap()
        };
        let d = frechet_distance(&one(m1, s1), &one(m2, s2)).map_err(|e| e.to_string())?.d2;
        let expected = (m1 - m2).powi(2) + (s1 - s2).powi(2);
        ensure((d - expected).abs() <= 1e-8, format!("1-d: {d} vs {expected}"))?;
    }

    let mut worst_sqrt = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=32);
        let a = random_spd(&mut rng, n, 1e4, 3.0);
        let root = matrix_sqrt(&a, 100).map_err(|e| e.to_string())?.root;
        let eig = a.clone().symmetric_eigen();
        let oracle = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let rel = (&root - &oracle).norm() / oracle.norm();
        ensure(rel <= 1e-6, format!("dim {n}: relative error {rel:e}"))?;
        worst_sqrt = worst_sqrt.max(rel);
    }
    Ok(format!("max self-distance {worst_self:.1e}, max sqrt error {worst_sqrt:.1e}"))
}

fn fixture_ordering() -> Check {
    let cfg = ScoreConfig::default();
    let score = |(img, mask): (ImagePlane, BinaryMask)| {
        score_example("x", &img, &mask, &Sidecars::default(), &cfg).map_err(|e| e.to_string())
    };
    let matched = score(common::matched_texture())?;
    let loud = score(common::red_on_blue())?;
    let smooth = score(common::smooth_hidden())?;
    ensure(matched.s_rf > 0.7, format!("matched texture s_rf {}", matched.s_rf))?;
    ensure(loud.s_rf < 0.2, format!("red-on-blue s_rf {}", loud.s_rf))?;
    ensure(matched.s_b > loud.s_b, format!("hidden s_b {} vs {}", matched.s_b, loud.s_b))?;
    ensure(smooth.s_b > loud.s_b, format!("smooth s_b {} vs {}", smooth.s_b, loud.s_b))?;
    Ok(format!(
        "s_rf {:.3} vs {:.3}; s_b {:.3} / {:.3} vs {:.3}",
        matched.s_rf, loud.s_rf, matched.s_b, smooth.s_b, loud.s_b
    ))
}

fn report(id: &str, s_rf: f64, s_b: f64) -> ScoreReport {
    ScoreReport {
        example_id: id.into(),
        group: None,
        s_rf,
        s_b,
        s_alpha: combined_score(s_rf, s_b, 0.35).unwrap(),
        alpha: 0.35,
        d2: None,
        warnings: vec![],
        crop: CropBox::full(1, 1),
        kernels: (1, 1),
        config_hash: String::new(),
        extractor_id: String::new(),
        feature_dim: 0,
    }
}

/// Two item pairs whose order under `(1 - a) s_rf + a s_b` flips just below
/// and just above `g`; the human order is right only at `a = g`.
fn planted(g: f64) -> (Vec<ScoreReport>, HumanRanking) {
    let t = 0.1;
    let pair = |base: f64, c: f64| (base + t * c, base + t * (c - 1.0));
    let mut reports = vec![report("low", 0.02, 0.02), report("high", 0.97, 0.97)];
    let mut human = vec![("low".to_string(), 0.0), ("high".to_string(), 10.0)];
    if g > 0.0 {
        let (rf, b) = pair(0.3, g - 0.025);
        reports.push(report("a_u", rf, b));
        reports.push(report("a_v", 0.3, 0.3));
        human.push(("a_u".into(), 1.0));
        human.push(("a_v".into(), 2.0));
    }
    if g < 1.0 {
        let (rf, b) = pair(0.7, g + 0.025);
        reports.push(report("b_u", rf, b));
        reports.push(report("b_v", 0.7, 0.7));
        human.push(("b_u".into(), 4.0));
        human.push(("b_v".into(), 3.0));
    }
    let human = HumanRanking {
        measure: HumanMeasure::Score,
        entries: human,
    };
    (reports, human)
}

fn kendall_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.random_range(2..=60);
        let levels = rng.random_range(1..=n);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let (fast, brute) = (pair_counts_fast(&a, &b), pair_counts_brute(&a, &b));
        ensure(fast == brute, format!("{fast:?} vs {brute:?}"))?;
    }

    let x: Vec<f64> = (0..50).map(f64::from).collect();
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let same = kendall_tau_values(&x, &x, TauVariant::B).map_err(|e| e.to_string())?;
    let opposite = kendall_tau_values(&x, &rev, TauVariant::B).map_err(|e| e.to_string())?;
    ensure(same == 1.0 && opposite == -1.0, format!("identity {same}, reversal {opposite}"))?;

    for g in alpha_grid() {
        let (reports, human) = planted(g);
        let c = calibrate_alpha(&reports, &human, TauVariant::B).map_err(|e| e.to_string())?;
        ensure((c.alpha - g).abs() < 1e-12, format!("planted {g}, recovered {}", c.alpha))?;
        ensure(c.tau == 1.0, format!("planted {g}: tau {}", c.tau))?;
    }
    Ok(format!("500 tied permutations, {} planted weights", alpha_grid().len()))
}

fn naive(mask: &BinaryMask, k: usize, all: bool) -> BinaryMask {
    let r = (k / 2) as i64;
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        let mut hits = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (x as i64 + dx, y as i64 + dy)));
        let on = |(u, v): (i64, i64)| u >= 0 && v >= 0 && u < w && v < h && mask.get(u as usize, v as usize);
        if all {
            hits.all(on)
        } else {
            hits.any(on)
        }
    })
}

fn naive_kernels(mask: &BinaryMask, range: &KernelRange) -> (usize, usize) {
    let area = mask.count() as f64;
    let pick = |all: bool, target: f64| {
        let mut best: Option<(f64, usize)> = None;
        for k in range.candidates() {
            let a = naive(mask, k, all).count();
            if all && a == 0 {
                continue;
            }
            let gap = (a as f64 - target).abs();
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, k));
            }
        }
        best.map_or(1, |b| b.1)
    };
    (pick(true, 0.8 * area), pick(false, 1.2 * area))
}

fn random_mask(rng: &mut ChaCha8Rng) -> BinaryMask {
    let (w, h) = (rng.random_range(8..48), rng.random_range(8..48));
    let mut m = BinaryMask::new(w, h);
    for _ in 0..rng.random_range(1..5) {
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0 + 1..=w), rng.random_range(y0 + 1..=h));
        m = m.or(&BinaryMask::rect(w, h, x0, y0, x1, y1));
    }
    if rng.random_bool(0.5) {
        for _ in 0..w * h / 20 {
            let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
            m.set(x, y, rng.random_bool(0.5));
        }
    }
    if m.is_empty() {
        m.set(w / 2, h / 2, true);
    }
    m
}

fn morphology_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let range = KernelRange::default();
    for i in 0..200 {
        let m = random_mask(&mut rng);
        let (w, h) = (m.width(), m.height());
        let mut prev_e = m.clone();
        let mut prev_d = m.clone();
        for k in (1..=11).step_by(2) {
            let e = erode(&m, k).map_err(|e| e.to_string())?;
            let d = dilate(&m, k).map_err(|e| e.to_string())?;
            ensure(e == naive(&m, k, true) && d == naive(&m, k, false), format!("mask {i}, k {k}: oracle"))?;
            ensure(e.is_subset_of(&prev_e) && prev_d.is_subset_of(&d), format!("mask {i}, k {k}: monotonicity"))?;
            ensure(e.is_subset_of(&m) && m.is_subset_of(&d), format!("mask {i}, k {k}: extensivity"))?;
            // duality holds away from the frame border, where padding differs
            let dual = dilate(&m.complement(), k).map_err(|e| e.to_string())?.complement();
            let r = k / 2;
            for y in r..h.saturating_sub(r) {
                for x in r..w.saturating_sub(r) {
                    ensure(dual.get(x, y) == e.get(x, y), format!("mask {i}, k {k}: duality at ({x}, {y})"))?;
                }
            }
            prev_e = e;
            prev_d = d;
        }

        let t = make_trimap(&m, &KernelPolicy::default()).map_err(|e| e.to_string())?;
        for y in 0..h {
            for x in 0..w {
                let n = t.fg.get(x, y) as u8 + t.bg.get(x, y) as u8 + t.band.get(x, y) as u8;
                ensure(n == 1, format!("mask {i}: ({x}, {y}) in {n} trimap regions"))?;
            }
        }
        let chosen = select_kernels(&m, &range).map_err(|e| e.to_string())?;
        ensure(chosen == naive_kernels(&m, &range), format!("mask {i}: kernels {chosen:?}"))?;
        ensure((t.erode_kernel, t.dilate_kernel) == chosen, format!("mask {i}: trimap kernels"))?;
    }
    Ok("200 random masks".into())
}

/// A textured frame whose values survive 8-bit PNG round trips exactly.
fn synth_source() -> SynthSource {
    let image = ImagePlane::from_fn(64, 64, 3, |x, y, c| {
        let v = ((x * 7 + y * 13 + c * 29) % 64 + 96) as f32;
        v / 255.0
    });
    let mask = common::disk(64, 64, 32.0, 30.0, 9.0);
    SynthSource {
        id: "src".into(),
        image,
        mask,
    }
}

fn quantize(img: &ImagePlane) -> Vec<u8> {
    img.data().iter().map(|v| (v * 255.0).round() as u8).collect()
}

fn video_synth() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("synthetic");
    let src = synth_source();
    let cfg = SynthConfig {
        count: 10,
        length: 30,
        seed: 2,
        ..SynthConfig::default()
    };
    let manifest_path = emit_dataset(&out, std::slice::from_ref(&src), &cfg).map_err(|e| e.to_string())?;
    let plate = fill_background(&src.image, &src.mask).map_err(|e| e.to_string())?;
    let sprite = Sprite::from_pair(&src.image, &src.mask).map_err(|e| e.to_string())?;
    let (w, h) = (64i64, 64i64);

    let mut static_frames = 0;
    let mut sequences = 0;
    for split in ["train", "test"] {
        let Ok(entries) = std::fs::read_dir(out.join(split)) else { continue };
        for seq in entries {
            let seq = seq.map_err(|e| e.to_string())?.path();
            let text = std::fs::read_to_string(seq.join("spec.json")).map_err(|e| e.to_string())?;
            let spec: SequenceSpec = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let positions = spec.fg_positions();
            let offsets = spec.bg_offsets();
            for t in 0..spec.length {
                let frame = ImagePlane::load(seq.join(format!("frame_{t:05}.png"))).map_err(|e| e.to_string())?;
                let mask = BinaryMask::load(seq.join(format!("mask_{t:05}.png"))).map_err(|e| e.to_string())?;
                let (px, py) = positions[t];
                let (ox, oy) = offsets[t];
                let expected_mask = BinaryMask::from_fn(64, 64, |x, y| {
                    let (sx, sy) = (x as i64 - px, y as i64 - py);
                    sx >= 0
                        && sy >= 0
                        && (sx as usize) < sprite.width()
                        && (sy as usize) < sprite.height()
                        && sprite.alpha.get(sx as usize, sy as usize)
                });
                ensure(mask == expected_mask, format!("{}: mask {t} misplaced", seq.display()))?;
                let expected = ImagePlane::from_fn(64, 64, 3, |x, y, c| {
                    if mask.get(x, y) {
                        sprite.rgb.get((x as i64 - px) as usize, (y as i64 - py) as usize, c)
                    } else {
                        let sx = (x as i64 - ox).rem_euclid(w) as usize;
                        let sy = (y as i64 - oy).rem_euclid(h) as usize;
                        plate.get(sx, sy, c)
                    }
                });
                ensure(quantize(&frame) == quantize(&expected), format!("{}: frame {t} differs", seq.display()))?;
            }
            for &(s, e) in &spec.static_segments {
                for t in s..e {
                    let rel = (
                        positions[t].0 - offsets[t].0 - (positions[t - 1].0 - offsets[t - 1].0),
                        positions[t].1 - offsets[t].1 - (positions[t - 1].1 - offsets[t - 1].1),
                    );
                    ensure(rel == (0, 0), format!("{}: frame {t} moves {rel:?}", seq.display()))?;
                    static_frames += 1;
                }
            }
            sequences += 1;
        }
    }
    ensure(sequences == 10, format!("{sequences} sequences on disk"))?;
    ensure(static_frames > 0, "no static segment was sampled")?;

    let manifest = Manifest::load(&manifest_path).map_err(|e| e.to_string())?;
    ensure(manifest.examples.len() == 300, format!("{} manifest entries", manifest.examples.len()))?;
    let rep = score_dataset(&manifest, &ScoreConfig::default()).map_err(|e| e.to_string())?;
    ensure(rep.failures.is_empty(), format!("{} frames failed", rep.failures.len()))?;
    let finite = rep
        .per_example
        .iter()
        .all(|r| r.s_rf.is_finite() && r.s_b.is_finite() && r.s_alpha.is_finite() && r.d2.is_none_or(f64::is_finite));
    ensure(finite, "non-finite score")?;
    let m = rep.summary.means.as_ref().ok_or("no dataset means")?;
    Ok(format!(
        "{sequences} x {} frames, {static_frames} static steps, S_alpha {:.3}",
        cfg.length, m.s_alpha
    ))
}

fn human_comparison() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let reports = [report("a", 0.9, 0.2), report("b", 0.5, 0.5), report("c", 0.1, 0.8), report("d", 0.3, 0.1)];
    let path = dir.path().join("human.csv");
    let mut csv = String::from("id,time_seconds\n");
    for r in &reports {
        csv.push_str(&format!("{},{}\n", r.example_id, 10.0 * r.s_alpha));
    }
    std::fs::write(&path, csv).map_err(|e| e.to_string())?;
    let human = HumanRanking::load(&path).map_err(|e| e.to_string())?;
    let taus = camoscore::rank::compare_with_human(&reports, &human, TauVariant::B).map_err(|e| e.to_string())?;
    let sa = taus
        .iter()
        .find(|(k, _)| *k == RankKey::SAlpha)
        .and_then(|(_, t)| t.as_ref().ok().copied())
        .ok_or("no S_alpha tau")?;
    ensure(sa == 1.0, format!("S_alpha tau {sa}"))?;
    Ok("pipeline runs on a fixture; published human-study values need the original study data".into())
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "table linear combination", s(1), table_regression),
        run(2, "external feature/contour ingestion", s(10), external_ingestion),
        run(3, "Frechet distance suite", s(30), frechet_suite),
        run(4, "score ordering fixtures", s(10), fixture_ordering),
        run(5, "Kendall tau and calibration", s(10), kendall_suite),
        run(6, "morphology and trimap properties", s(20), morphology_suite),
        run(7, "video synthesis end to end", s(60), video_synth),
        run(8, "human comparison pipeline", s(10), human_comparison),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

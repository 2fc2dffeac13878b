use std::path::{Path, PathBuf};
use std::process::Command;

use camoscore::score::ManifestEntry;
use camoscore::{BinaryMask, DatasetKind, ImagePlane, Manifest};
use jsonschema::{Registry, Validator};
use serde_json::Value;

const BASE: &str = "json-schema:///";

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn validator(name: &str) -> Validator {
    let mut registry = Registry::new();
    for entry in std::fs::read_dir(schema_dir()).unwrap() {
        let path = entry.unwrap().path();
        let file = path.file_name().unwrap().to_string_lossy().into_owned();
        registry = registry.add(format!("{BASE}{file}"), read_json(&path)).unwrap();
    }
    let registry = registry.prepare().unwrap();
    jsonschema::options()
        .with_base_uri(BASE)
        .with_registry(&registry)
        .build(&read_json(&schema_dir().join(name)))
        .unwrap()
}

fn assert_valid(name: &str, instance: &Value) {
    let v = validator(name);
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

fn run(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_camoscore")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn fixture(dir: &Path) -> PathBuf {
    let mask = BinaryMask::from_fn(48, 48, |x, y| (x as i32 - 24).pow(2) + (y as i32 - 24).pow(2) < 64);
    let mut examples = Vec::new();
    for i in 0..3 {
        let img = ImagePlane::from_fn(48, 48, 3, |x, y, c| {
            let base = ((x / 8 + y / 8) % 2) as f32 * 0.2 + 0.3;
            if mask.get(x, y) { base + 0.1 * i as f32 * (c == 0) as u8 as f32 } else { base }
        });
        img.save_png(dir.join(format!("im{i}.png"))).unwrap();
        mask.save_png(dir.join(format!("im{i}_mask.png"))).unwrap();
        examples.push(ManifestEntry {
            id: format!("im{i}"),
            image: format!("im{i}.png").into(),
            mask: format!("im{i}_mask.png").into(),
            group: Some(format!("seq{}", i / 2)),
        });
    }
    let path = dir.join("manifest.json");
    Manifest {
        dataset_id: "schema-fixture".into(),
        kind: DatasetKind::Video,
        examples,
    }
    .save(&path)
    .unwrap();
    path
}

#[test]
fn emitted_documents_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = fixture(d);
    assert_valid("manifest.schema.json", &read_json(&manifest));

    let s = |p: &Path| p.to_str().unwrap().to_string();
    let score: Value = serde_json::from_slice(&run(&["score", &s(&d.join("im1.png")), &s(&d.join("im1_mask.png"))])).unwrap();
    assert_valid("score_report.schema.json", &score);

    let out = d.join("out");
    run(&["score-dataset", &s(&manifest), "--out-dir", &s(&out)]);
    let report = read_json(&out.join("report.json"));
    assert_valid("dataset_report.schema.json", &report);

    let human = d.join("human.csv");
    std::fs::write(&human, "id,score\nim0,1\nim1,3\nim2,2\n").unwrap();
    let calibration: Value = serde_json::from_slice(&run(&["calibrate-alpha", &s(&out.join("report.json")), &s(&human)])).unwrap();
    assert_valid("calibration.schema.json", &calibration);

    let synth = d.join("synth");
    run(&["synth-video", "--sources", &s(&manifest), "--out", &s(&synth), "--count", "5", "--length", "3"]);
    for name in ["manifest.json", "manifest_train.json", "manifest_test.json"] {
        assert_valid("manifest.schema.json", &read_json(&synth.join(name)));
    }
    for split in ["train", "test"] {
        for seq in std::fs::read_dir(synth.join(split)).unwrap() {
            assert_valid("sequence_spec.schema.json", &read_json(&seq.unwrap().path().join("spec.json")));
        }
    }
}

#[test]
fn schemas_reject_malformed_documents() {
    let v = validator("score_report.schema.json");
    let mut r: Value = serde_json::json!({
        "example_id": "a", "s_rf": 0.5, "s_b": 0.5, "s_alpha": 0.5, "alpha": 0.35, "d2": null,
        "warnings": [], "crop": {"x0": 0, "y0": 0, "x1": 4, "y1": 4}, "kernels": [3, 5],
        "config_hash": "0123456789abcdef", "extractor_id": "x", "feature_dim": 17
    });
    assert!(v.is_valid(&r));
    r["s_rf"] = serde_json::json!(1.5);
    assert!(!v.is_valid(&r));

    let m = validator("manifest.schema.json");
    let video = serde_json::json!({
        "dataset_id": "d", "kind": "video", "examples": [{"id": "a", "image": "a.png", "mask": "m.png"}]
    });
    assert!(!m.is_valid(&video));
}

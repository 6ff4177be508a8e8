use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exposure_core::fixtures::{bundled, listing_scenario, straight_line_scenario, without_time};
use exposure_core::write_gpx;
use serde_json::Value;
use tempfile::TempDir;

fn exposure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exposure"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Files {
    dir: TempDir,
    gpx: PathBuf,
    cameras: PathBuf,
}

fn listing() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let (gpx, cameras) = listing_scenario().export(dir.path()).unwrap();
    Files { dir, gpx, cameras }
}

#[test]
fn single_segment_prints_one_object() {
    let f = listing();
    let v = stdout_json(&exposure(&["analyze", "--cameras", s(&f.cameras), s(&f.gpx)]));
    assert!(v.is_object());
    assert_eq!(v["total_distance"], 1538.83);
    assert_eq!(v["dist_percentage"], 2.67);
    assert_eq!(v["number_of_unique_cams"], 2);
    assert_eq!(v["cameras"]["133"]["camera model"], "Zmodo ZP-IBH23-S");
    assert_eq!(v["cameras"]["199"]["distance_in_camera_fov"], 17.5);
}

#[test]
fn several_files_give_ordered_array() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = straight_line_scenario(6.0, 10.0, 5.0, 1.4);
    let (gpx, cameras) = scenario.export(dir.path()).unwrap();
    let second = dir.path().join("b.gpx");
    std::fs::copy(&gpx, &second).unwrap();
    let v = stdout_json(&exposure(&["analyze", "--cameras", s(&cameras), s(&gpx), s(&second)]));
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[0]["file"], s(&gpx));
    assert_eq!(arr[1]["file"], s(&second));
}

#[test]
fn index_modes_and_worker_counts_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut inputs = Vec::new();
    let mut db = None;
    for sc in bundled().into_iter().filter(|s| s.name.starts_with("field")) {
        let (gpx, cams) = sc.export(dir.path()).unwrap();
        inputs.push(gpx);
        db.get_or_insert(cams);
    }
    let db = db.unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["analyze", "--cameras", s(&db)];
        args.extend_from_slice(extra);
        args.extend(inputs.iter().map(|p| s(p)));
        let out = exposure(&args);
        assert!(out.status.success());
        out.stdout
    };
    let base = run(&["--index", "grid", "--workers", "1"]);
    assert_eq!(run(&["--index", "bruteforce", "--workers", "1"]), base);
    assert_eq!(run(&["--index", "grid", "--workers", "4"]), base);
}

#[test]
fn jsonl_and_geojson_modes() {
    let f = listing();
    let out = exposure(&["analyze", "--format", "jsonl", "--cameras", s(&f.cameras), s(&f.gpx), s(&f.gpx)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);

    let v = stdout_json(&exposure(&["analyze", "--format", "geojson", "--cameras", s(&f.cameras), s(&f.gpx)]));
    assert_eq!(v["type"], "FeatureCollection");
    let features = v["features"].as_array().unwrap();
    // the track plus one stretch per camera
    assert_eq!(features.len(), 3);
    assert_eq!(features[1]["properties"]["covered"], true);
}

#[test]
fn output_file_and_overrides() {
    let f = listing();
    let out_path = f.dir.path().join("report.json");
    let out = exposure(&[
        "analyze",
        "--radius",
        "20",
        "--cameras",
        s(&f.cameras),
        "--output",
        s(&out_path),
        s(&f.gpx),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(v["cameras"]["133"]["radius"], "20.0");
    assert!(v["exposure_distance"].as_f64().unwrap() > 41.14);
}

#[test]
fn config_file_is_used_and_flags_win() {
    let f = listing();
    let cfg = f.dir.path().join("run.toml");
    std::fs::write(&cfg, "cameras = \"listing.cameras.json\"\nformat = \"jsonl\"\n").unwrap();
    let out = exposure(&["analyze", "--config", s(&cfg), s(&f.gpx)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);

    let out = exposure(&["analyze", "--config", s(&cfg), "--format", "array", s(&f.gpx)]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("{\n    \"file\""));
}

#[test]
fn untimestamped_input_has_no_time_fields() {
    let f = listing();
    let bare = f.dir.path().join("bare.gpx");
    std::fs::write(&bare, write_gpx(&without_time(&listing_scenario().gpx))).unwrap();
    let out = exposure(&["analyze", "--cameras", s(&f.cameras), s(&bare)]);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["exposure_distance"], 41.14);
    for key in ["avg_speed", "time_percentage", "exposure_time", "time_in_camera_fov"] {
        assert!(!text.contains(key), "{key}");
    }
}

#[test]
fn scrubbed_analysis_matches() {
    let f = listing();
    let mut doc = listing_scenario().gpx;
    doc.metadata.author = Some("Jane Runner".into());
    doc.tracks[0].description = Some("morning loop".into());
    std::fs::write(&f.gpx, write_gpx(&doc)).unwrap();

    let scrubbed = f.dir.path().join("scrubbed.gpx");
    assert!(exposure(&["scrub", s(&f.gpx), "--output", s(&scrubbed)]).status.success());
    let text = std::fs::read_to_string(&scrubbed).unwrap();
    assert!(!text.contains("Jane Runner") && !text.contains("morning loop"));

    let plain = exposure(&["analyze", "--cameras", s(&f.cameras), s(&f.gpx)]);
    let flagged = exposure(&["analyze", "--scrub", "--cameras", s(&f.cameras), s(&f.gpx)]);
    assert_eq!(plain.stdout, flagged.stdout);
}

#[test]
fn validate_reports_counts() {
    let f = listing();
    let out = exposure(&["validate", "--cameras", s(&f.cameras), s(&f.gpx)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("2 cameras"));
    assert!(text.contains("1 tracks, 1 segments (1 timestamped, 0 too short), 310 points"), "{text}");
}

#[test]
fn exit_codes() {
    let f = listing();
    let missing = f.dir.path().join("missing.gpx");
    assert_eq!(exposure(&["analyze", "--cameras", s(&f.cameras), s(&missing)]).status.code(), Some(2));
    assert_eq!(exposure(&["analyze", "--cameras", s(&missing), s(&f.gpx)]).status.code(), Some(2));

    let dup = f.dir.path().join("dup.json");
    std::fs::write(&dup, r#"{"7": {"latitude": 62.0, "longitude": 25.0}, "7": {"latitude": 62.1, "longitude": 25.0}}"#).unwrap();
    let out = exposure(&["analyze", "--cameras", s(&dup), s(&f.gpx)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains('7'));
    assert_eq!(exposure(&["validate", "--cameras", s(&dup), s(&f.gpx)]).status.code(), Some(3));

    for bad in [
        vec!["analyze", "--resolution", "-1", "--cameras", s(&f.cameras), s(&f.gpx)],
        vec!["analyze", "--workers", "0", "--cameras", s(&f.cameras), s(&f.gpx)],
        vec!["analyze", "--distance", "manhattan", "--cameras", s(&f.cameras), s(&f.gpx)],
        vec!["analyze", "--fov", "400", "--cameras", s(&f.cameras), s(&f.gpx)],
        vec!["analyze", s(&f.gpx)],
        vec!["analyze", "--bogus"],
    ] {
        assert_eq!(exposure(&bad).status.code(), Some(4), "{bad:?}");
    }

    let backwards = f.dir.path().join("backwards.gpx");
    std::fs::write(
        &backwards,
        r#"<gpx version="1.1" creator="t"><trk><trkseg>
<trkpt lat="62.24" lon="25.74"><time>2022-01-01T10:00:10Z</time></trkpt>
<trkpt lat="62.2401" lon="25.74"><time>2022-01-01T10:00:00Z</time></trkpt>
</trkseg></trk></gpx>"#,
    )
    .unwrap();
    let out = exposure(&["validate", "--cameras", s(&f.cameras), s(&backwards)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leg 0"));
    assert_eq!(exposure(&["analyze", "--cameras", s(&f.cameras), s(&backwards)]).status.code(), Some(5));

    let broken = f.dir.path().join("broken.gpx");
    std::fs::write(&broken, "<gpx><trk>").unwrap();
    assert_eq!(exposure(&["analyze", "--cameras", s(&f.cameras), s(&broken)]).status.code(), Some(5));
}

#[test]
fn bench_summary() {
    let f = listing();
    let v = stdout_json(&exposure(&["bench", "--reps", "1", "--cameras", s(&f.cameras), s(&f.gpx)]));
    assert_eq!(v["repetitions"], 1);
    assert_eq!(v["low_confidence"], true);
    assert_eq!(v["segments"].as_array().unwrap().len(), 1);
    assert!(v["segments"][0]["load_ms"].as_f64().unwrap() > 0.0);

    let v = stdout_json(&exposure(&["analyze", "--bench", "3", "--cameras", s(&f.cameras), s(&f.gpx)]));
    assert_eq!(v["repetitions"], 3);
    assert_eq!(v["low_confidence"], false);

    let empty = f.dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let v = stdout_json(&exposure(&["bench", "--reps", "2", "--cameras", s(&empty), s(&f.gpx)]));
    assert_eq!(v["cameras"], 0);
}

#[test]
fn empty_database_gives_zero_exposure() {
    let f = listing();
    let empty = f.dir.path().join("empty.json");
    std::fs::write(&empty, "{}").unwrap();
    let v = stdout_json(&exposure(&["analyze", "--cameras", s(&empty), s(&f.gpx)]));
    assert_eq!(v["exposure_distance"], 0.0);
    assert_eq!(v["number_of_unique_cams"], 0);
    assert!(v["cameras"].as_object().unwrap().is_empty());
}

#[test]
fn fixtures_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = exposure(&["fixtures", s(dir.path())]);
    assert!(out.status.success());
    assert!(dir.path().join("listing.gpx").exists());
    assert!(dir.path().join("listing.cameras.json").exists());
}

//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::time::Instant;

use exposure_core::camera::apply_overrides;
use exposure_core::fixtures::{
    bundled, default_field_bbox, listing_scenario, random_field_scenario, straight_line_scenario,
    without_time, Scenario,
};
use exposure_core::geo::{euclidean_distance, haversine_distance, GeoPoint, EARTH_RADIUS_M};
use exposure_core::report::render_json;
use exposure_core::{AnalysisOptions, Analyzer, ExposureReport, IndexMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn analyze(s: &Scenario, options: AnalysisOptions) -> Vec<ExposureReport> {
    let analyzer = Analyzer::for_document(&s.cameras, &s.gpx, options).unwrap();
    analyzer.reports(&s.gpx).unwrap()
}

fn single(s: &Scenario, options: AnalysisOptions) -> ExposureReport {
    analyze(s, options).remove(0)
}

fn listing_fields() -> Outcome {
    let s = listing_scenario();
    let r = single(&s, AnalysisOptions::default());
    let value: serde_json::Value = serde_json::from_slice(&render_json(&r)).unwrap();
    let keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
    let expected_keys = [
        "file",
        "track",
        "segment",
        "total_distance",
        "number_of_unique_cams",
        "exposure_distance",
        "dist_percentage",
        "camera_distance_avg",
        "camera_distance_median",
        "avg_speed",
        "time_percentage",
        "exposure_time",
        "cameras",
    ];
    let cam_keys: Vec<Vec<String>> = value["cameras"]
        .as_object()
        .unwrap()
        .values()
        .map(|c| c.as_object().unwrap().keys().cloned().collect())
        .collect();
    let cam_ok = cam_keys.len() == 2
        && cam_keys.iter().all(|k| {
            k.ends_with(&["time_in_camera_fov".into(), "distance_in_camera_fov".into()])
                && k.iter().any(|x| x == "radius")
        });
    let ids: Vec<&str> = r.cameras.ids().collect();
    let pct = 100.0 * r.exposure_distance / r.total_distance;
    let speed = r.avg_speed.unwrap();
    let pass = keys == expected_keys
        && cam_ok
        && ids == ["133", "199"]
        && (r.dist_percentage - pct).abs() <= 0.01
        && (r.dist_percentage - 2.67).abs() <= 0.01
        && (speed - 4.99).abs() <= 0.01;
    outcome(
        pass,
        format!(
            "exposure {:.4} m of {:.2} m, dist_percentage {:.4}, avg_speed {:.4} km/h, cameras {:?}",
            r.exposure_distance, r.total_distance, r.dist_percentage, speed, ids
        ),
    )
}

fn geodesy_tolerance() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let lat = rng.random_range(-65.0..65.0);
        let lon = rng.random_range(-179.0..179.0);
        let a = GeoPoint::new(lat, lon).unwrap();
        let d = rng.random_range(0.0..700.0);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let dlat = (d * theta.cos() / EARTH_RADIUS_M).to_degrees();
        let dlon = (d * theta.sin() / (EARTH_RADIUS_M * lat.to_radians().cos())).to_degrees();
        let b = GeoPoint::new((lat + dlat).clamp(-65.0, 65.0), lon + dlon).unwrap();
        if haversine_distance(&a, &b) > 700.0 {
            continue;
        }
        worst = worst.max((euclidean_distance(&a, &b) - haversine_distance(&a, &b)).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    outcome(
        worst <= 1.0 && elapsed < 5.0,
        format!("max |euclidean - haversine| {worst:.3e} m in {elapsed:.3} s"),
    )
}

fn chord_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for offset in [0.0, 2.0, 4.0, 6.0, 8.0, 9.5] {
        let s = straight_line_scenario(offset, 10.0, 5.0, 1.4);
        let r = single(&s, AnalysisOptions::default());
        worst = worst.max((r.exposure_distance - s.expected_union_distance).abs());
    }
    outcome(worst <= 1.0, format!("max chord error {worst:.4} m"))
}

fn constant_speed_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut fixtures = bundled();
    fixtures.extend([2.0, 4.0, 8.0].map(|d| straight_line_scenario(d, 10.0, 5.0, 1.4)));
    for s in &fixtures {
        let r = single(s, AnalysisOptions::default());
        worst = worst.max((r.time_percentage.unwrap() - r.dist_percentage).abs());
        n += 1;
    }
    outcome(worst <= 0.1, format!("{n} fixtures, max |time% - dist%| {worst:.2e}"))
}

fn index_equivalence() -> Outcome {
    let mut mismatches = Vec::new();
    for seed in 1..=100u64 {
        let s = random_field_scenario(seed, (seed as usize) * 10, default_field_bbox());
        let grid = analyze(&s, AnalysisOptions::default());
        let brute = analyze(
            &s,
            AnalysisOptions {
                index_mode: IndexMode::BruteForce,
                geofence: false,
                ..Default::default()
            },
        );
        let unfenced = analyze(
            &s,
            AnalysisOptions {
                geofence: false,
                ..Default::default()
            },
        );
        let g: Vec<Vec<u8>> = grid.iter().map(render_json).collect();
        let b: Vec<Vec<u8>> = brute.iter().map(render_json).collect();
        let u: Vec<Vec<u8>> = unfenced.iter().map(render_json).collect();
        if g != b || g != u {
            mismatches.push(seed);
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("100 seeds, 10..1000 cameras, mismatching seeds {mismatches:?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let resolution = 0.5;
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut transitions_total = 0;
    for seed in 1..=50u64 {
        let s = random_field_scenario(1000 + seed, 450, default_field_bbox());
        let r = single(&s, AnalysisOptions::default());
        let transitions = s.oracle_transitions.unwrap();
        transitions_total += transitions;
        let err = (r.exposure_distance - s.expected_union_distance).abs();
        let tol = 2.0 * resolution * transitions as f64 + 1e-6;
        worst_ratio = worst_ratio.max(err / tol);
        if err > tol {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "50 seeds, {transitions_total} transitions, worst error at {:.1}% of tolerance, failing seeds {failures:?}",
            worst_ratio * 100.0
        ),
    )
}

fn performance_envelope() -> Outcome {
    let s = random_field_scenario(766, 450, default_field_bbox());
    let options = AnalysisOptions::default();
    let analyzer = Analyzer::for_document(&s.cameras, &s.gpx, options).unwrap();
    let seg = s.segment();
    let reps = 10;
    let started = Instant::now();
    for _ in 0..reps {
        let a = analyzer.analyze_segment(&s.gpx.source_name, 0, 0, seg).unwrap();
        std::hint::black_box(analyzer.report(&a));
    }
    let mean_ms = started.elapsed().as_secs_f64() * 1000.0 / reps as f64;
    let total = exposure_core::gpx::segment_baseline(seg, options.distance_method)
        .unwrap()
        .total_distance;
    outcome(
        mean_ms <= 50.0,
        format!("450 cameras, {total:.0} m segment, mean {mean_ms:.3} ms over {reps} runs (reference 4 ms)"),
    )
}

fn resolution_convergence() -> Outcome {
    let mut worst: f64 = 0.0;
    let fixtures = bundled();
    for s in &fixtures {
        let coarse = single(s, AnalysisOptions::default());
        let fine = single(
            s,
            AnalysisOptions {
                resolution: 0.05,
                ..Default::default()
            },
        );
        worst = worst.max((coarse.exposure_distance - fine.exposure_distance).abs());
    }
    outcome(
        worst <= 1.0,
        format!("{} fixtures, max |union(0.5) - union(0.05)| {worst:.4} m", fixtures.len()),
    )
}

fn monotonicity() -> Outcome {
    let mut violations = Vec::new();
    let mut time_leaks = Vec::new();
    for s in bundled() {
        let base = |radius: f64| {
            let mut t = s.clone();
            t.cameras = apply_overrides(&s.cameras, Some(radius), None).unwrap();
            single(&t, AnalysisOptions::default())
        };
        let (r10, r20) = (base(10.0), base(20.0));
        let mut ok = r20.exposure_distance + 1e-9 >= r10.exposure_distance;
        for (id, c) in &r10.cameras.0 {
            let grown = r20.cameras.get(id).map_or(0.0, |c| c.distance_in_camera_fov);
            ok &= grown + 1e-9 >= c.distance_in_camera_fov;
        }
        if !ok {
            violations.push(s.name.clone());
        }

        let timed = single(&s, AnalysisOptions::default());
        let mut untimed_s = s.clone();
        untimed_s.gpx = without_time(&s.gpx);
        let untimed = single(&untimed_s, AnalysisOptions::default());
        let time_absent = untimed.avg_speed.is_none()
            && untimed.time_percentage.is_none()
            && untimed.exposure_time.is_none()
            && untimed.cameras.0.iter().all(|(_, c)| c.time_in_camera_fov.is_none());
        let same_distances = untimed.total_distance == timed.total_distance
            && untimed.exposure_distance == timed.exposure_distance
            && untimed.dist_percentage == timed.dist_percentage
            && untimed.camera_distance_avg == timed.camera_distance_avg
            && untimed.camera_distance_median == timed.camera_distance_median
            && untimed.cameras.ids().eq(timed.cameras.ids())
            && untimed
                .cameras
                .0
                .iter()
                .zip(&timed.cameras.0)
                .all(|((_, a), (_, b))| a.distance_in_camera_fov == b.distance_in_camera_fov);
        if !(time_absent && same_distances) {
            time_leaks.push(s.name.clone());
        }
    }
    outcome(
        violations.is_empty() && time_leaks.is_empty(),
        format!("radius 10 -> 20 violations {violations:?}; untimestamped mismatches {time_leaks:?}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("report fields, dist_percentage and avg_speed", listing_fields),
        ("euclidean vs haversine within 1 m up to 700 m", geodesy_tolerance),
        ("chord oracle within 1 m", chord_oracle),
        ("constant-speed time% vs dist% within 0.1", constant_speed_consistency),
        ("grid, brute-force and geofenced reports identical", index_equivalence),
        ("fine-step oracle within 2 x resolution per transition", oracle_equivalence),
        ("450 cameras / 766 m under 50 ms per segment", performance_envelope),
        ("resolution 0.5 vs 0.05 within 1 m", resolution_convergence),
        ("radius monotonicity and untimestamped inputs", monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} - {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

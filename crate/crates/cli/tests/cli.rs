mod support;

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;

use bodyscene::body_model::{facing_camera, pose_mesh, BodyParams};
use bodyscene::camera::Camera;
use bodyscene::compositor::load_bundle;
use bodyscene::correspondence::{DisplacementField, MultiChannelMap};
use bodyscene::fixtures::{random_params, RoomSpec};
use bodyscene::placement::{audit_placement, PlacementRecord, Verdict};
use bodyscene::raster::rasterize;
use bodyscene::scene_io::{read_json, read_pfm, read_rgb, write_json, write_png, Mask};
use bodyscene::Vec3;
use support::*;

const OPEN: &str = "open_room";
const OCCUPIED: &str = "occupied_room";

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn fit_plane_recovers_fixture_floor() {
    let run = bodyscene(["fit-plane", "--config", &config(OPEN)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let plane = plane_from_json(&serde_json::from_str(&run.stdout).unwrap());
    let (normal, d) = floor_truth(OPEN);
    let angle = plane.normal.dot(&normal).clamp(-1.0, 1.0).acos().to_degrees();
    assert!(angle < 1.0, "normal off by {angle} degrees");
    assert!((plane.d - d).abs() < 0.02);
}

#[test]
fn fit_plane_writes_plane_and_manifest() {
    let dir = tmp();
    let out = dir.path().join("fit");
    let run = bodyscene(["fit-plane", "--config", &config(OPEN), "--out", &s(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(out.join("plane.json").is_file());
    let manifest = read_value(&out.join("manifest.json"));
    assert_eq!(manifest["stage"], "fit-plane");
    assert_eq!(manifest["config"]["seed"], 0);
    assert!(manifest["config"].get("out").is_none());
}

#[test]
fn scene_without_floor_pixels_exits_2() {
    let run = bodyscene(["fit-plane", "--config", &config(OPEN), "--floor-classes", "rug"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("no floor pixels"), "{}", run.stderr);
}

#[test]
fn missing_depth_file_exits_1() {
    let dir = tmp();
    let missing = dir.path().join("nope.png");
    let run = bodyscene(["fit-plane", "--config", &config(OPEN), "--depth", &s(&missing)]);
    assert_eq!(run.code, 1, "{}", run.stderr);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(
        bodyscene(["fit-plane", "--scene", &s(&fixture(OPEN))]).code,
        1,
        "seed is required"
    );
    assert_eq!(
        bodyscene(["fit-plane", "--config", &config(OPEN), "--ransac-threshold", "-1"]).code,
        1
    );
    assert_eq!(bodyscene(["no-such-command"]).code, 1);
    assert_eq!(bodyscene(["--help"]).code, 0);
}

#[test]
fn open_room_placements_are_physically_valid() {
    let dir = tmp();
    let out = dir.path().join("place");
    let run = bodyscene(["place", "--config", &config(OPEN), "--out", &s(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let table = read_value(&out.join("placements.json"));
    let plane = plane_from_json(&table["plane"]);
    let assets = fixture_assets(OPEN);
    let records: Vec<PlacementRecord> = serde_json::from_value(table["candidates"].clone()).unwrap();
    let accepted: Vec<_> = records.iter().filter(|r| r.verdict == Verdict::Accepted).collect();
    assert!(!accepted.is_empty());
    assert_eq!(table["accepted"].as_u64().unwrap() as usize, accepted.len());
    for r in accepted {
        assert!(r.collision_count <= 25);
        let audit = audit_placement(&assets, &placed_params(OPEN, r), &plane).unwrap();
        assert!(audit.up_deviation < 1e-6, "{audit:?}");
        assert!(audit.lowest_gap.abs() < 0.01, "{audit:?}");
    }
}

#[test]
fn occupied_room_exits_3_with_table() {
    let dir = tmp();
    let out = dir.path().join("place");
    let run = bodyscene(["place", "--config", &config(OCCUPIED), "--out", &s(&out)]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    let table = read_value(&out.join("placements.json"));
    let candidates = table["candidates"].as_array().unwrap();
    assert!(!candidates.is_empty());
    assert!(candidates.iter().all(|c| c["verdict"] == "collision"));
    assert_eq!(table["accepted"], 0);
}

#[test]
fn place_is_deterministic_and_seeded_yaw_changes_with_seed() {
    let dir = tmp();
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let args = [
            "place",
            "--config",
            &config(OPEN),
            "--yaw-policy",
            "seeded",
            "--seed",
            seed,
            "--out",
            &s(&out),
        ];
        assert_eq!(bodyscene(args).code, 0);
        std::fs::read(out.join("placements.json")).unwrap()
    };
    let a = run("4", "a");
    assert_eq!(a, run("4", "b"));
    assert_ne!(a, run("5", "c"));
}

fn room_anchor(room_point: Vec3) -> String {
    let p = RoomSpec::open().room_to_camera(&room_point);
    format!("--anchor={},{},{}", p.x, p.y, p.z)
}

#[test]
fn composite_behind_desk_is_partly_occluded() {
    let dir = tmp();
    let out = dir.path().join("bundle");
    let anchor = room_anchor(Vec3::new(0.0, 0.0, 3.5));
    let run = bodyscene(["composite", "--config", &config(OPEN), &anchor, "--out", &s(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (bundle, manifest) = load_bundle(&out).unwrap();
    assert!(bundle.stats.occlusion_fraction > 0.0, "{:?}", bundle.stats);
    assert!(bundle.person_mask.is_subset_of(&bundle.silhouette));
    assert!(bundle.person_mask.count() < bundle.silhouette.count());
    assert!(bundle.person_mask.count() > 0);
    assert!(manifest.provenance.placement.is_some());
    assert_eq!(manifest.provenance.seed, Some(0));
}

#[test]
fn composite_in_front_of_desk_is_unoccluded() {
    let dir = tmp();
    let out = dir.path().join("bundle");
    let anchor = room_anchor(Vec3::new(0.0, 0.0, 1.9));
    let run = bodyscene(["composite", "--config", &config(OPEN), &anchor, "--out", &s(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (bundle, _) = load_bundle(&out).unwrap();
    assert!(bundle.stats.covered_pixels > 0);
    assert_eq!(bundle.stats.occlusion_fraction, 0.0);
    assert_eq!(bundle.person_mask, bundle.silhouette);
}

#[test]
fn composite_rerun_from_manifest_is_bit_identical() {
    let dir = tmp();
    let first = dir.path().join("first");
    let run = bodyscene(["composite", "--config", &config(OPEN), "--out", &s(&first)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let manifest = read_value(&first.join("manifest.json"));
    let rerun_cfg = dir.path().join("rerun.json");
    write_json(&rerun_cfg, &manifest["provenance"]["config"]).unwrap();
    let second = dir.path().join("second");
    let run = bodyscene(["composite", "--config", &s(&rerun_cfg), "--out", &s(&second)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(tree(&first), tree(&second));
}

fn write_params(dir: &Path, name: &str, params: &BodyParams) -> String {
    let path = dir.join(name);
    write_json(&path, params).unwrap();
    s(&path)
}

fn displace(dir: &Path, source: &BodyParams, target: &BodyParams) -> (std::path::PathBuf, DisplacementField) {
    let src = write_params(dir, "source.json", source);
    let tgt = write_params(dir, "target.json", target);
    let out = dir.join("field");
    let args = [
        "displace",
        "--scene",
        &s(&fixture(OPEN)),
        "--assets",
        &s(&fixture(OPEN).join("body.json")),
        "--source-params",
        &src,
        "--params",
        &tgt,
        "--out",
        &s(&out),
    ];
    let run = bodyscene(args);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let field = DisplacementField::from_float_map(&read_pfm(&out.join("field.pfm")).unwrap()).unwrap();
    (out, field)
}

fn camera() -> Camera {
    read_json(&fixture(OPEN).join("camera.json")).unwrap()
}

#[test]
fn displace_identical_params_gives_zero_field() {
    let dir = tmp();
    let params = facing_camera(Vec3::new(0.0, -0.5, 3.0));
    let (out, field) = displace(dir.path(), &params, &params);
    assert!(field.valid_count() > 500);
    let (w, h) = field.size();
    for v in 0..h {
        for u in 0..w {
            if let Some([dx, dy]) = field.get(u, v) {
                // barycentric reconstruction of the pixel center is exact up to rounding
                assert!(dx.abs() < 1e-9 && dy.abs() < 1e-9, "({dx}, {dy}) at ({u},{v})");
            }
        }
    }
    assert_eq!(
        read_rgb(&out.join("warped.png")).unwrap(),
        read_rgb(&out.join("source.png")).unwrap()
    );
}

#[test]
fn displace_translation_matches_perspective_shift() {
    let dir = tmp();
    let source = facing_camera(Vec3::new(0.0, -0.5, 3.0));
    let shift = Vec3::new(0.12, -0.05, 0.0);
    let mut target = source.clone();
    target.set_translation(&(source.translation() + shift));
    let (_, field) = displace(dir.path(), &source, &target);
    // an in-plane shift moves every surface point by f·shift/z pixels
    let cam = camera();
    let raster = rasterize(&cam, &pose_mesh(&fixture_assets(OPEN), &target).unwrap()).unwrap();
    let mut checked = 0;
    for v in 0..cam.height {
        for u in 0..cam.width {
            let Some(z) = raster.depth(u, v) else {
                assert!(field.get(u, v).is_none());
                continue;
            };
            let [dx, dy] = field.get(u, v).expect("covered pixel has an offset");
            assert!((dx + cam.fx * shift.x / z).abs() < 1e-4, "dx {dx} at ({u},{v})");
            assert!((dy + cam.fy * shift.y / z).abs() < 1e-4, "dy {dy} at ({u},{v})");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn displace_warp_reconstructs_articulated_target() {
    let dir = tmp();
    let source = random_params(17, 0, 0.4, 3.0);
    let target = random_params(17, 1, 0.4, 3.0);
    let (out, field) = displace(dir.path(), &source, &target);
    let cam = camera();
    let assets = fixture_assets(OPEN);
    let src = pose_mesh(&assets, &source).unwrap();
    let tgt = pose_mesh(&assets, &target).unwrap();
    let rs = rasterize(&cam, &src).unwrap();
    let rt = rasterize(&cam, &tgt).unwrap();
    let load = |name: &str| MultiChannelMap::from_rgb8(&read_rgb(&out.join(name)).unwrap());
    let (err, n) = common::doubly_visible_error(
        &cam,
        &src,
        &rs,
        &rt,
        &field,
        &load("warped.png"),
        &load("target.png"),
        0.02,
    );
    assert!(n > 300, "only {n} doubly visible pixels");
    assert!(err < 2.0 / 255.0, "mean error {err}");
}

/// Foreground mask over the left half of the fixture image.
fn half_mask(dir: &Path) -> String {
    let path = dir.join("half_mask.png");
    if !path.exists() {
        let cam = camera();
        let mask = Mask::from_fn(cam.width, cam.height, |u, _| u < cam.width / 2);
        write_png(&path, &mask.to_image()).unwrap();
    }
    s(&path)
}

fn perturb(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let scene = fixture(OPEN);
    let mut args = vec![
        "perturb".to_string(),
        "--image".into(),
        s(&scene.join("rgb.png")),
        "--mask".into(),
        half_mask(dir),
        "--out".into(),
        s(&out),
    ];
    args.extend(extra.iter().map(|a| a.to_string()));
    let run = bodyscene(&args);
    assert_eq!(run.code, 0, "{}", run.stderr);
    out
}

#[test]
fn identity_perturbation_is_exact() {
    let dir = tmp();
    let out = perturb(dir.path(), "id", &["--identity", "true"]);
    assert_eq!(
        read_rgb(&out.join("perturbed.png")).unwrap(),
        read_rgb(&out.join("original.png")).unwrap()
    );
}

#[test]
fn seeded_perturbation_reproduces_triplet() {
    let dir = tmp();
    let a = perturb(dir.path(), "a", &["--seed", "9"]);
    let b = perturb(dir.path(), "b", &["--seed", "9"]);
    assert_eq!(tree(&a), tree(&b));
    assert!(a.join("params.json").is_file());
    let c = perturb(dir.path(), "c", &["--seed", "10"]);
    assert_ne!(
        tree(&a).get(Path::new("perturbed.png")),
        tree(&c).get(Path::new("perturbed.png"))
    );
}

#[test]
fn perturb_without_seed_or_identity_is_a_usage_error() {
    let dir = tmp();
    let scene = fixture(OPEN);
    let run = bodyscene([
        "perturb",
        "--image",
        &s(&scene.join("rgb.png")),
        "--mask",
        &half_mask(dir.path()),
        "--out",
        &s(&dir.path().join("x")),
    ]);
    assert_eq!(run.code, 1);
}

#[test]
fn ssim_of_identical_files_is_one() {
    let rgb = s(&fixture(OPEN).join("rgb.png"));
    let run = bodyscene(["ssim", &rgb, &rgb]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let v: serde_json::Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(v["ssim"].as_f64().unwrap(), 1.0);
    assert_eq!(v["l1_sum"].as_f64().unwrap(), 0.0);
    assert_eq!(v["l1_mean"].as_f64().unwrap(), 0.0);
}

#[test]
fn ssim_of_different_images_is_below_one() {
    let a = s(&fixture(OPEN).join("rgb.png"));
    let b = s(&fixture(OCCUPIED).join("rgb.png"));
    let run = bodyscene(["ssim", &a, &b]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let v: serde_json::Value = serde_json::from_str(&run.stdout).unwrap();
    assert!(v["ssim"].as_f64().unwrap() < 1.0);
    assert!(v["l1_sum"].as_f64().unwrap() > 0.0);
}

#[test]
fn pipeline_manifest_reproduces_output_tree() {
    let dir = tmp();
    let first = dir.path().join("first");
    let run = bodyscene(["pipeline", "--config", &config(OPEN), "--out", &s(&first)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let manifest = read_value(&first.join("manifest.json"));
    let listed: Vec<String> = serde_json::from_value(manifest["files"].clone()).unwrap();
    let written: Vec<String> = tree(&first).keys().map(|p| p.display().to_string()).collect();
    assert_eq!(listed, written);
    let rerun_cfg = dir.path().join("rerun.json");
    write_json(&rerun_cfg, &manifest["config"]).unwrap();
    let second = dir.path().join("second");
    let run = bodyscene(["pipeline", "--config", &s(&rerun_cfg), "--out", &s(&second)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(tree(&first), tree(&second));
}

#[test]
fn pipeline_on_occupied_room_exits_3_with_manifest() {
    let dir = tmp();
    let out = dir.path().join("run");
    let run = bodyscene(["pipeline", "--config", &config(OCCUPIED), "--out", &s(&out)]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    assert!(out.join("placements.json").is_file());
    assert!(out.join("manifest.json").is_file());
    assert!(!out.join("bundle").exists());
}

#[test]
fn flags_override_config_values() {
    let dir = tmp();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        bodyscene(["fit-plane", "--config", &config(OPEN), "--out", &s(&a)]).code,
        0
    );
    assert_eq!(
        bodyscene(["fit-plane", "--config", &config(OPEN), "--seed", "77", "--out", &s(&b)]).code,
        0
    );
    assert_eq!(read_value(&a.join("manifest.json"))["config"]["seed"], 0);
    assert_eq!(read_value(&b.join("manifest.json"))["config"]["seed"], 77);
}

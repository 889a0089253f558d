//! Helpers for driving the built binary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use bodyscene::body_model::{BodyAssets, BodyParams};
use bodyscene::ground_plane::Plane;
use bodyscene::placement::PlacementRecord;
use bodyscene::{Mat3, Vec3};
use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn bodyscene<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_bodyscene"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn config(name: &str) -> String {
    fixture(name).join("pipeline.json").display().to_string()
}

/// Every file under `dir` keyed by its relative path.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn read_value(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).expect("file exists")).expect("valid json")
}

pub fn vec3(v: &Value) -> Vec3 {
    Vec3::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap(), v[2].as_f64().unwrap())
}

/// Known floor plane written by the fixture generator.
pub fn floor_truth(name: &str) -> (Vec3, f64) {
    let v = read_value(&fixture(name).join("floor_truth.json"));
    (vec3(&v["normal"]), v["d"].as_f64().unwrap())
}

pub fn plane_from_json(v: &Value) -> Plane {
    Plane {
        normal: vec3(&v["normal"]),
        d: v["d"].as_f64().unwrap(),
        inlier_indices: Vec::new(),
        rms_residual: v["rms"].as_f64().unwrap(),
    }
}

pub fn fixture_assets(name: &str) -> BodyAssets {
    BodyAssets::load(&fixture(name).join("body.json")).unwrap()
}

/// The fixture's body params re-posed by a placement record.
pub fn placed_params(name: &str, record: &PlacementRecord) -> BodyParams {
    let mut params: BodyParams = serde_json::from_value(read_value(&fixture(name).join("params.json"))).unwrap();
    let r = record.rotation;
    params.set_root_rotation(&Mat3::from_row_slice(&[
        r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
    ]));
    params.set_translation(&Vec3::from(record.translation));
    params
}

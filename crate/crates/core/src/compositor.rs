//! Depth-ordered compositing of a rendered person into a scene frame.
//!
//! A covered pixel shows the person iff the model depth is strictly below the
//! scene depth; missing scene depth (0) counts as infinitely far.

use std::collections::BTreeMap;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::body_model::BodyParams;
use crate::correspondence::{ChannelHeader, DensePoseMap};
use crate::error::{Error, Result};
use crate::placement::PlacementRecord;
use crate::raster::{silhouette, RasterMap};
use crate::scene_io::{
    read_json, read_mask, read_pfm, read_rgb, write_json, write_pfm, write_png, DepthMap, FloatMap, Mask, SceneFrame,
};

pub const BUNDLE_SCHEMA: &str = "husc-bundle-v1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositeStats {
    pub covered_pixels: usize,
    pub visible_pixels: usize,
    pub occlusion_fraction: f64,
    /// Visible person pixels whose scene depth was missing.
    pub invalid_scene_depth_pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeBundle {
    pub rgb: RgbImage,
    pub person_mask: Mask,
    pub silhouette: Mask,
    pub depth: DepthMap,
    pub dense_pose: DensePoseMap,
    pub body_params: BodyParams,
    pub stats: CompositeStats,
}

impl CompositeBundle {
    pub fn occlusion_fraction(&self) -> f64 {
        self.stats.occlusion_fraction
    }
}

fn check(layer: &str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            layer: layer.into(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Whether a person sample at `model_depth` is in front of the scene sample.
pub fn person_wins(model_depth: f64, scene_depth: f32) -> bool {
    !(scene_depth > 0.0) || model_depth < scene_depth as f64
}

pub fn composite(
    frame: &SceneFrame,
    person_rgb: &RgbImage,
    person_raster: &RasterMap,
    dense_pose: &DensePoseMap,
    params: &BodyParams,
) -> Result<CompositeBundle> {
    let size = frame.size();
    check(
        "person rgb",
        size,
        (person_rgb.width() as usize, person_rgb.height() as usize),
    )?;
    check("person raster", size, person_raster.size())?;
    check("dense pose", size, dense_pose.size())?;
    let (w, h) = size;
    let mut rgb = frame.rgb.clone();
    let mut depth = frame.depth.clone();
    let mut mask = Mask::new(w, h);
    let mut stats = CompositeStats::default();
    for v in 0..h {
        for u in 0..w {
            let Some(model) = person_raster.depth(u, v) else {
                continue;
            };
            stats.covered_pixels += 1;
            let scene = frame.depth.get(u, v);
            if person_wins(model, scene) {
                stats.visible_pixels += 1;
                if !(scene > 0.0) {
                    stats.invalid_scene_depth_pixels += 1;
                }
                mask.set(u, v, true);
                rgb.put_pixel(u as u32, v as u32, *person_rgb.get_pixel(u as u32, v as u32));
                depth.set(u, v, model as f32);
            }
        }
    }
    stats.occlusion_fraction = if stats.covered_pixels == 0 {
        0.0
    } else {
        (stats.covered_pixels - stats.visible_pixels) as f64 / stats.covered_pixels as f64
    };
    Ok(CompositeBundle {
        rgb,
        dense_pose: dense_pose.restricted_to(&mask)?,
        person_mask: mask,
        silhouette: silhouette(person_raster),
        depth,
        body_params: params.clone(),
        stats,
    })
}

/// Where a bundle came from; everything needed to rerun the stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub placement: Option<PlacementRecord>,
    pub asset_hash: Option<String>,
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub schema: String,
    /// Layer name to path relative to the bundle directory.
    pub files: BTreeMap<String, String>,
    pub stats: CompositeStats,
    pub provenance: Provenance,
}

const FILES: [(&str, &str); 7] = [
    ("rgb", "rgb.png"),
    ("mask", "mask.png"),
    ("silhouette", "silhouette.png"),
    ("depth", "depth.pfm"),
    ("dense_pose", "dense_pose.pfm"),
    ("dense_pose_header", "dense_pose.json"),
    ("params", "params.json"),
];

/// Writes every layer plus `manifest.json`; returns the manifest.
pub fn export_bundle(bundle: &CompositeBundle, out_dir: &Path, provenance: &Provenance) -> Result<BundleManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = |name: &str| out_dir.join(name);
    write_png(&path("rgb.png"), &bundle.rgb)?;
    write_png(&path("mask.png"), &bundle.person_mask.to_image())?;
    write_png(&path("silhouette.png"), &bundle.silhouette.to_image())?;
    let (w, h) = bundle.depth.size();
    write_pfm(
        &path("depth.pfm"),
        &FloatMap {
            width: w,
            height: h,
            channels: 1,
            data: bundle.depth.as_slice().to_vec(),
        },
    )?;
    write_pfm(&path("dense_pose.pfm"), &bundle.dense_pose.to_float_map())?;
    write_json(&path("dense_pose.json"), &bundle.dense_pose.header())?;
    write_json(&path("params.json"), &bundle.body_params)?;
    let manifest = BundleManifest {
        schema: BUNDLE_SCHEMA.into(),
        files: FILES.iter().map(|(k, f)| (k.to_string(), f.to_string())).collect(),
        stats: bundle.stats,
        provenance: provenance.clone(),
    };
    write_json(&path("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Reads a bundle written by [`export_bundle`].
pub fn load_bundle(dir: &Path) -> Result<(CompositeBundle, BundleManifest)> {
    let manifest: BundleManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.schema != BUNDLE_SCHEMA {
        return Err(Error::format(
            "bundle manifest",
            format!("unknown schema {:?}", manifest.schema),
        ));
    }
    let file = |key: &str| -> Result<std::path::PathBuf> {
        manifest
            .files
            .get(key)
            .map(|f| dir.join(f))
            .ok_or_else(|| Error::format("bundle manifest", format!("missing {key} entry")))
    };
    let depth_map = read_pfm(&file("depth")?)?;
    if depth_map.channels != 1 {
        return Err(Error::format("bundle depth", "expected one channel"));
    }
    let header: ChannelHeader = read_json(&file("dense_pose_header")?)?;
    let dense_pose = DensePoseMap::from_float_map(&read_pfm(&file("dense_pose")?)?)?;
    if header != dense_pose.header() {
        return Err(Error::format("dense pose header", "does not match the PFM layer"));
    }
    let bundle = CompositeBundle {
        rgb: read_rgb(&file("rgb")?)?,
        person_mask: read_mask(&file("mask")?)?,
        silhouette: read_mask(&file("silhouette")?)?,
        depth: DepthMap::from_vec(depth_map.width, depth_map.height, depth_map.data)?,
        dense_pose,
        body_params: read_json(&file("params")?)?,
        stats: manifest.stats,
    };
    Ok((bundle, manifest))
}

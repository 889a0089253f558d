use bodyscene::body_model::{facing_camera, generate_desk_model, pose_mesh};
use bodyscene::camera::Camera;
use bodyscene::compositor::{composite, export_bundle, load_bundle, person_wins, Provenance};
use bodyscene::correspondence::{dense_pose_map, DensePoseMap};
use bodyscene::raster::{rasterize, render_vertex_colors, RasterMap};
use bodyscene::scene_io::{DepthMap, LabelMap, SceneFrame};
use bodyscene::Vec3;
use image::{Rgb, RgbImage};

fn cam() -> Camera {
    Camera::new(120.0, 120.0, 63.5, 63.5, 128, 128).unwrap()
}

/// Scene at 2 m on the left half and 4 m on the right, with a hole of missing depth.
fn step_scene() -> SceneFrame {
    let mut depth = DepthMap::filled(128, 128, 4.0);
    for v in 0..128 {
        for u in 0..64 {
            depth.set(u, v, 2.0);
        }
    }
    for v in 10..20 {
        for u in 60..70 {
            depth.set(u, v, 0.0);
        }
    }
    SceneFrame::new(
        RgbImage::from_fn(128, 128, |u, v| Rgb([u as u8, v as u8, 77])),
        depth,
        LabelMap::filled(128, 128, 0),
        [(0u8, "wall".to_string())].into_iter().collect(),
        cam(),
    )
    .unwrap()
}

fn person(z: f64) -> (RasterMap, RgbImage, DensePoseMap, bodyscene::body_model::BodyParams) {
    let assets = generate_desk_model(1000, 7).unwrap();
    let params = facing_camera(Vec3::new(-0.3, -1.0, z));
    let mesh = pose_mesh(&assets, &params).unwrap();
    let raster = rasterize(&cam(), &mesh).unwrap();
    let colors = render_vertex_colors(&raster, &mesh, &assets.vertex_colors())
        .unwrap()
        .to_rgb8();
    let dp = dense_pose_map(&raster, &mesh);
    (raster, colors, dp, params)
}

#[test]
fn straddling_depth_step_matches_per_pixel_oracle() {
    let scene = step_scene();
    let (raster, rgb, dp, params) = person(2.5);
    let b = composite(&scene, &rgb, &raster, &dp, &params).unwrap();
    let mut covered = 0;
    for v in 0..128 {
        for u in 0..128 {
            let expect = match raster.depth(u, v) {
                Some(z) => {
                    covered += 1;
                    let s = scene.depth.get(u, v);
                    s == 0.0 || z < s as f64
                }
                None => false,
            };
            assert_eq!(b.person_mask.get(u, v), expect, "({u},{v})");
            assert_eq!(
                person_wins(raster.depth(u, v).unwrap_or(f64::INFINITY), scene.depth.get(u, v))
                    && raster.depth(u, v).is_some(),
                expect
            );
            if !expect {
                assert_eq!(
                    b.rgb.get_pixel(u as u32, v as u32),
                    scene.rgb.get_pixel(u as u32, v as u32)
                );
                assert!(b.dense_pose.get(u, v).is_none());
            }
            let s = scene.depth.get(u, v);
            if s > 0.0 {
                assert!(b.depth.get(u, v) <= s);
            }
        }
    }
    assert!(b.person_mask.count() > 0 && b.person_mask.count() < covered);
    assert!(b.stats.occlusion_fraction > 0.0 && b.stats.occlusion_fraction < 1.0);
    assert!(b.person_mask.is_subset_of(&b.silhouette));
}

#[test]
fn export_then_reload_is_bit_identical() {
    let (raster, rgb, dp, params) = person(2.5);
    let b = composite(&step_scene(), &rgb, &raster, &dp, &params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let prov = Provenance {
        seed: Some(9),
        asset_hash: Some("abc".into()),
        ..Provenance::default()
    };
    let manifest = export_bundle(&b, dir.path(), &prov).unwrap();
    for rel in manifest.files.values() {
        assert!(dir.path().join(rel).is_file(), "{rel}");
    }
    let (back, m2) = load_bundle(dir.path()).unwrap();
    assert_eq!(back, b);
    assert_eq!(m2, manifest);

    // exporting the reloaded bundle reproduces every byte
    let again = tempfile::tempdir().unwrap();
    export_bundle(&back, again.path(), &prov).unwrap();
    for name in manifest
        .files
        .values()
        .chain(std::iter::once(&"manifest.json".to_string()))
    {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap()
        );
    }
}

#[test]
fn empty_coverage_bundle_exports() {
    let scene = step_scene();
    let empty = RasterMap::empty(128, 128);
    let b = composite(
        &scene,
        &scene.rgb,
        &empty,
        &DensePoseMap::empty(128, 128),
        &Default::default(),
    )
    .unwrap();
    assert_eq!(b.rgb, scene.rgb);
    assert_eq!(b.depth, scene.depth);
    let dir = tempfile::tempdir().unwrap();
    export_bundle(&b, dir.path(), &Provenance::default()).unwrap();
    let (back, _) = load_bundle(dir.path()).unwrap();
    assert_eq!(back.person_mask.count(), 0);
    assert_eq!(back, b);
}

//! Stage implementations behind each subcommand.

use std::path::Path;

use bodyscene::body_model::{facing_camera, generate_desk_model, pose_mesh, BodyAssets, BodyParams, PosedMesh};
use bodyscene::camera::{Camera, PointCloud};
use bodyscene::compositor::{composite as composite_layers, export_bundle, CompositeBundle, Provenance};
use bodyscene::correspondence::{body_displacement_field, dense_pose_map, warp, MultiChannelMap};
use bodyscene::fixtures::{occupied_room, open_room};
use bodyscene::ground_plane::{fit_plane_ransac, Plane, PlaneSummary};
use bodyscene::metrics::{compare, SsimConfig};
use bodyscene::perturb::{perturb_foreground, sample_perturbation, write_triplet, PerturbationParams};
use bodyscene::placement::{
    check_collision, evaluate_candidates, place_body, sample_floor_grid, Placement, PlacementConfig, PlacementRecord,
    Verdict,
};
use bodyscene::raster::{rasterize, render_vertex_colors, RasterMap};
use bodyscene::rng::{substream, tags};
use bodyscene::scene_io::{
    floor_mask, load_scene, read_json, read_mask, read_rgb, write_json, write_png, Mask, SceneFrame,
};
use bodyscene::{body_model, Vec3};
use image::RgbImage;
use rand::Rng;
use serde::Serialize;

use crate::config::{PipelineConfig, DEFAULT_DESK_VERTICES, DESK_MODEL_SEED};
use crate::{CliError, EXIT_NO_PLACEMENT};

pub const PIPELINE_SCHEMA: &str = "husc-pipeline-v1";
pub const RUN_SCHEMA: &str = "husc-run-v1";

type CliResult<T> = Result<T, CliError>;

fn at(stage: &'static str) -> impl Fn(bodyscene::Error) -> CliError {
    move |e| CliError::stage(stage, e)
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

/// Per-stage manifest: the resolved configuration that produced a directory.
#[derive(Serialize)]
struct RunManifest<'a, T: Serialize> {
    schema: &'static str,
    stage: &'a str,
    config: serde_json::Value,
    result: T,
}

fn write_run_manifest<T: Serialize>(dir: &Path, stage: &str, cfg: &PipelineConfig, result: T) -> CliResult<()> {
    let manifest = RunManifest {
        schema: RUN_SCHEMA,
        stage,
        config: cfg.for_manifest(),
        result,
    };
    write_json(&dir.join("manifest.json"), &manifest).map_err(at("manifest"))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| bodyscene::Error::io(dir, e).into())
}

fn load_frame(cfg: &PipelineConfig) -> CliResult<SceneFrame> {
    load_scene(&cfg.scene_paths()?).map_err(at("scene"))
}

fn load_assets(cfg: &PipelineConfig) -> CliResult<BodyAssets> {
    match &cfg.assets {
        Some(path) => BodyAssets::load(path),
        None => generate_desk_model(cfg.desk_vertices.unwrap_or(DEFAULT_DESK_VERTICES), DESK_MODEL_SEED),
    }
    .map_err(at("assets"))
}

fn load_params(path: Option<&Path>) -> CliResult<Option<BodyParams>> {
    let Some(path) = path else { return Ok(None) };
    let params: BodyParams = read_json(path).map_err(at("params"))?;
    params.validate().map_err(at("params"))?;
    Ok(Some(params))
}

/// Body parameters for placement; only pose and shape matter here.
fn body_params(cfg: &PipelineConfig) -> CliResult<BodyParams> {
    Ok(load_params(cfg.params.as_deref())?.unwrap_or_else(|| facing_camera(Vec3::zeros())))
}

struct FloorFit {
    mask: Mask,
    cloud: PointCloud,
    plane: Plane,
}

fn fit_floor(frame: &SceneFrame, cfg: &PipelineConfig, seed: u64) -> CliResult<FloorFit> {
    let mask = floor_mask(frame, &cfg.floor_classes()?);
    if mask.count() == 0 {
        return Err(CliError {
            code: 2,
            message: "fit-plane: no floor pixels with valid depth for the configured floor classes".into(),
        });
    }
    let cloud = frame
        .camera
        .back_project(&frame.depth, Some(&mask))
        .map_err(at("fit-plane"))?;
    let plane = fit_plane_ransac(&cloud.points, cfg.threshold(), cfg.iterations(), seed).map_err(at("fit-plane"))?;
    Ok(FloorFit { mask, cloud, plane })
}

/// Written to `placements.json`: every candidate with its verdict.
#[derive(Serialize)]
struct PlacementTable {
    seed: u64,
    plane: PlaneSummary,
    accepted: usize,
    candidates: Vec<PlacementRecord>,
}

struct Placed {
    floor: FloorFit,
    scene_cloud: PointCloud,
    floor_indices: Vec<usize>,
    placements: Vec<Placement>,
}

impl Placed {
    fn accepted(&self) -> Vec<&Placement> {
        self.placements
            .iter()
            .filter(|p| p.verdict == Verdict::Accepted)
            .collect()
    }

    fn table(&self, seed: u64) -> PlacementTable {
        PlacementTable {
            seed,
            plane: self.floor.plane.summary(),
            accepted: self.accepted().len(),
            candidates: self.placements.iter().map(Placement::record).collect(),
        }
    }
}

fn placement_config(cfg: &PipelineConfig, seed: u64) -> PlacementConfig {
    PlacementConfig {
        yaw: cfg.yaw_policy(),
        collision_tolerance: cfg.tolerance(),
        seed,
    }
}

fn run_place(
    frame: &SceneFrame,
    assets: &BodyAssets,
    params: &BodyParams,
    cfg: &PipelineConfig,
    seed: u64,
) -> CliResult<Placed> {
    let floor = fit_floor(frame, cfg, seed)?;
    let inliers: Vec<Vec3> = floor
        .plane
        .inlier_indices
        .iter()
        .map(|&i| floor.cloud.points[i])
        .collect();
    let anchors = sample_floor_grid(&floor.plane, &inliers, cfg.spacing(), cfg.support()).map_err(at("place"))?;
    let scene_cloud = frame.camera.back_project(&frame.depth, None).map_err(at("place"))?;
    let floor_indices: Vec<usize> = (0..scene_cloud.len())
        .filter(|&i| {
            let (u, v) = scene_cloud.pixels[i];
            floor.mask.get(u, v)
        })
        .collect();
    let placements = evaluate_candidates(
        assets,
        params,
        &floor.plane,
        &anchors,
        &scene_cloud.points,
        &floor_indices,
        &placement_config(cfg, seed),
    )
    .map_err(at("place"))?;
    Ok(Placed {
        floor,
        scene_cloud,
        floor_indices,
        placements,
    })
}

fn no_placement(candidates: usize) -> CliError {
    CliError {
        code: EXIT_NO_PLACEMENT,
        message: format!("place: none of {candidates} candidates was accepted"),
    }
}

/// The placement to composite: the configured anchor, or a seeded pick among accepted candidates.
fn choose_placement(
    placed: &Placed,
    assets: &BodyAssets,
    params: &BodyParams,
    cfg: &PipelineConfig,
    seed: u64,
) -> CliResult<Placement> {
    let plane = &placed.floor.plane;
    if let Some(anchor) = cfg.anchor() {
        let point = plane.project(&anchor);
        let yaw = cfg.yaw_policy().yaw_for(seed, 0);
        let target = place_body(assets, params, plane, &point, yaw).map_err(at("composite"))?;
        let capsules = body_model::body_capsules(assets, &target).map_err(at("composite"))?;
        let report = check_collision(
            &capsules,
            &placed.scene_cloud.points,
            &placed.floor_indices,
            cfg.tolerance(),
        );
        let rotation = target.root_rotation();
        return Ok(Placement {
            rotation,
            translation: target.translation(),
            grid_cell: [0, 0],
            anchor: point,
            yaw,
            verdict: report.verdict,
            collision_count: report.count,
            view_adjustment: rotation * params.root_rotation().transpose(),
            params: target,
        });
    }
    let accepted = placed.accepted();
    if accepted.is_empty() {
        return Err(no_placement(placed.placements.len()));
    }
    let pick = substream(seed, tags::PLACEMENT_PICK, 0).random_range(0..accepted.len());
    Ok(accepted[pick].clone())
}

/// Person appearance at the target pose: the supplied image warped from the
/// source pose, or per-vertex colors.
fn person_appearance(
    camera: &Camera,
    assets: &BodyAssets,
    source: &BodyParams,
    target_mesh: &PosedMesh,
    raster: &RasterMap,
    person_rgb: Option<&Path>,
) -> CliResult<RgbImage> {
    match person_rgb {
        Some(path) => {
            let image = read_rgb(path).map_err(at("person rgb"))?;
            let source_mesh = pose_mesh(assets, source).map_err(at("correspondence"))?;
            let field =
                body_displacement_field(camera, &source_mesh, target_mesh, raster).map_err(at("correspondence"))?;
            let warped = warp(&MultiChannelMap::from_rgb8(&image), &field, 0.0).map_err(at("correspondence"))?;
            Ok(warped.to_rgb8())
        }
        None => Ok(render_vertex_colors(raster, target_mesh, &assets.vertex_colors())
            .map_err(at("render"))?
            .to_rgb8()),
    }
}

fn render_composite(
    frame: &SceneFrame,
    assets: &BodyAssets,
    params: &BodyParams,
    placement: &Placement,
    cfg: &PipelineConfig,
) -> CliResult<CompositeBundle> {
    let mesh = pose_mesh(assets, &placement.params).map_err(at("render"))?;
    let raster = rasterize(&frame.camera, &mesh).map_err(at("render"))?;
    let person = person_appearance(&frame.camera, assets, params, &mesh, &raster, cfg.person_rgb.as_deref())?;
    let dense = dense_pose_map(&raster, &mesh);
    composite_layers(frame, &person, &raster, &dense, &placement.params).map_err(at("composite"))
}

pub fn fit_plane(cfg: &PipelineConfig) -> CliResult<()> {
    let seed = cfg.seed()?;
    let frame = load_frame(cfg)?;
    let summary = fit_floor(&frame, cfg, seed)?.plane.summary();
    if let Some(out) = &cfg.out {
        ensure_dir(out)?;
        write_json(&out.join("plane.json"), &summary).map_err(at("fit-plane"))?;
        write_run_manifest(out, "fit-plane", cfg, &summary)?;
    }
    print_json(&summary);
    Ok(())
}

pub fn place(cfg: &PipelineConfig) -> CliResult<()> {
    let seed = cfg.seed()?;
    let frame = load_frame(cfg)?;
    let assets = load_assets(cfg)?;
    let params = body_params(cfg)?;
    let placed = run_place(&frame, &assets, &params, cfg, seed)?;
    let table = placed.table(seed);
    match &cfg.out {
        Some(out) => {
            ensure_dir(out)?;
            write_json(&out.join("placements.json"), &table).map_err(at("place"))?;
            write_run_manifest(out, "place", cfg, table.accepted)?;
        }
        None => print_json(&table),
    }
    if table.accepted == 0 {
        return Err(no_placement(table.candidates.len()));
    }
    Ok(())
}

fn provenance(cfg: &PipelineConfig, seed: u64, assets: &BodyAssets, placement: &Placement) -> Provenance {
    Provenance {
        seed: Some(seed),
        placement: Some(placement.record()),
        asset_hash: Some(assets.content_hash()),
        config: Some(cfg.for_manifest()),
    }
}

pub fn composite(cfg: &PipelineConfig) -> CliResult<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let frame = load_frame(cfg)?;
    let assets = load_assets(cfg)?;
    let params = body_params(cfg)?;
    let placed = run_place(&frame, &assets, &params, cfg, seed)?;
    let placement = choose_placement(&placed, &assets, &params, cfg, seed)?;
    let bundle = render_composite(&frame, &assets, &params, &placement, cfg)?;
    let manifest = export_bundle(&bundle, out, &provenance(cfg, seed, &assets, &placement)).map_err(at("export"))?;
    print_json(&manifest.stats);
    Ok(())
}

#[derive(Serialize)]
struct FieldSummary {
    width: usize,
    height: usize,
    valid_pixels: usize,
    max_abs_offset: f64,
}

pub fn displace(cfg: &PipelineConfig) -> CliResult<()> {
    let out = cfg.out_dir()?;
    let camera_path = cfg
        .camera
        .clone()
        .or_else(|| cfg.scene.as_ref().map(|d| d.join("camera.json")))
        .ok_or_else(|| CliError::usage("--camera or --scene is required"))?;
    let camera: Camera = read_json(&camera_path).map_err(at("camera"))?;
    camera.validate().map_err(at("camera"))?;
    let assets = load_assets(cfg)?;
    let source =
        load_params(cfg.source_params.as_deref())?.ok_or_else(|| CliError::usage("--source-params is required"))?;
    let target = load_params(cfg.params.as_deref())?.ok_or_else(|| CliError::usage("--params is required"))?;
    let source_mesh = pose_mesh(&assets, &source).map_err(at("source pose"))?;
    let target_mesh = pose_mesh(&assets, &target).map_err(at("target pose"))?;
    let source_raster = rasterize(&camera, &source_mesh).map_err(at("render"))?;
    let target_raster = rasterize(&camera, &target_mesh).map_err(at("render"))?;
    let field =
        body_displacement_field(&camera, &source_mesh, &target_mesh, &target_raster).map_err(at("correspondence"))?;
    let colors = assets.vertex_colors();
    let source_render = render_vertex_colors(&source_raster, &source_mesh, &colors).map_err(at("render"))?;
    let target_render = render_vertex_colors(&target_raster, &target_mesh, &colors).map_err(at("render"))?;
    let appearance = match &cfg.person_rgb {
        Some(path) => MultiChannelMap::from_rgb8(&read_rgb(path).map_err(at("person rgb"))?),
        None => source_render.clone(),
    };
    let warped = warp(&appearance, &field, 0.0).map_err(at("correspondence"))?;

    let (width, height) = field.size();
    let mut max_abs_offset: f64 = 0.0;
    for v in 0..height {
        for u in 0..width {
            if let Some([dx, dy]) = field.get(u, v) {
                max_abs_offset = max_abs_offset.max(dx.abs()).max(dy.abs());
            }
        }
    }
    let summary = FieldSummary {
        width,
        height,
        valid_pixels: field.valid_count(),
        max_abs_offset,
    };
    ensure_dir(out)?;
    let write = |name: &str, img: &RgbImage| write_png(&out.join(name), img).map_err(at("displace"));
    bodyscene::scene_io::write_pfm(&out.join("field.pfm"), &field.to_float_map()).map_err(at("displace"))?;
    write_json(&out.join("field.json"), &field.header()).map_err(at("displace"))?;
    write("source.png", &source_render.to_rgb8())?;
    write("target.png", &target_render.to_rgb8())?;
    write("warped.png", &warped.to_rgb8())?;
    write_run_manifest(out, "displace", cfg, &summary)?;
    print_json(&summary);
    Ok(())
}

fn perturbation_params(cfg: &PipelineConfig) -> CliResult<PerturbationParams> {
    if cfg.identity == Some(true) {
        Ok(PerturbationParams::identity())
    } else {
        Ok(sample_perturbation(cfg.seed()?))
    }
}

pub fn perturb(cfg: &PipelineConfig) -> CliResult<()> {
    let out = cfg.out_dir()?;
    let image = read_rgb(
        cfg.image
            .as_deref()
            .ok_or_else(|| CliError::usage("--image is required"))?,
    )
    .map_err(at("image"))?;
    let mask = read_mask(
        cfg.mask
            .as_deref()
            .ok_or_else(|| CliError::usage("--mask is required"))?,
    )
    .map_err(at("mask"))?;
    let params = perturbation_params(cfg)?;
    write_triplet(out, &image, &mask, &params).map_err(at("perturb"))?;
    write_run_manifest(out, "perturb", cfg, params)?;
    print_json(&params);
    Ok(())
}

pub fn ssim(a: &Path, b: &Path) -> CliResult<()> {
    let a = MultiChannelMap::from_rgb8(&read_rgb(a).map_err(at("ssim"))?);
    let b = MultiChannelMap::from_rgb8(&read_rgb(b).map_err(at("ssim"))?);
    print_json(&compare(&a, &b, &SsimConfig::default()).map_err(at("ssim"))?);
    Ok(())
}

#[derive(Serialize)]
struct PipelineManifest {
    schema: &'static str,
    seed: u64,
    config: serde_json::Value,
    asset_hash: String,
    accepted: usize,
    /// Output files relative to the output directory, sorted.
    files: Vec<String>,
}

pub fn pipeline(cfg: &PipelineConfig) -> CliResult<()> {
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let frame = load_frame(cfg)?;
    let assets = load_assets(cfg)?;
    let params = body_params(cfg)?;
    ensure_dir(out)?;
    let mut files = vec!["manifest.json".to_string()];

    let placed = run_place(&frame, &assets, &params, cfg, seed)?;
    write_json(&out.join("plane.json"), &placed.floor.plane.summary()).map_err(at("fit-plane"))?;
    let table = placed.table(seed);
    write_json(&out.join("placements.json"), &table).map_err(at("place"))?;
    files.extend(["plane.json".into(), "placements.json".into()]);
    let finish = |files: &mut Vec<String>| -> CliResult<()> {
        files.sort();
        let manifest = PipelineManifest {
            schema: PIPELINE_SCHEMA,
            seed,
            config: cfg.for_manifest(),
            asset_hash: assets.content_hash(),
            accepted: table.accepted,
            files: files.clone(),
        };
        write_json(&out.join("manifest.json"), &manifest).map_err(at("manifest"))
    };
    if table.accepted == 0 && cfg.anchor.is_none() {
        finish(&mut files)?;
        return Err(no_placement(table.candidates.len()));
    }

    let placement = choose_placement(&placed, &assets, &params, cfg, seed)?;
    let bundle = render_composite(&frame, &assets, &params, &placement, cfg)?;
    let bundle_manifest = export_bundle(
        &bundle,
        &out.join("bundle"),
        &provenance(cfg, seed, &assets, &placement),
    )
    .map_err(at("export"))?;
    files.extend(bundle_manifest.files.values().map(|f| format!("bundle/{f}")));
    files.push("bundle/manifest.json".into());

    let perturbation = perturbation_params(cfg)?;
    let triplet = write_triplet(&out.join("harmonize"), &bundle.rgb, &bundle.person_mask, &perturbation)
        .map_err(at("perturb"))?;
    files.extend(
        triplet
            .iter()
            .filter_map(|p| p.file_name())
            .map(|f| format!("harmonize/{}", f.to_string_lossy())),
    );

    let perturbed = perturb_foreground(&bundle.rgb, &bundle.person_mask, &perturbation).map_err(at("perturb"))?;
    let comparison = compare(
        &MultiChannelMap::from_rgb8(&bundle.rgb),
        &MultiChannelMap::from_rgb8(&perturbed),
        &SsimConfig::default(),
    )
    .map_err(at("metrics"))?;
    write_json(&out.join("metrics.json"), &comparison).map_err(at("metrics"))?;
    files.push("metrics.json".into());
    finish(&mut files)?;
    print_json(&bundle.stats);
    Ok(())
}

/// Writes a synthetic room with the desk model, camera-facing params and a
/// `pipeline.json` that runs the full pipeline on it.
pub fn fixture(occupied: bool, seed: u64, out: &Path) -> CliResult<()> {
    let room = if occupied { occupied_room(seed) } else { open_room(seed) };
    room.save(out).map_err(at("fixture"))?;
    generate_desk_model(DEFAULT_DESK_VERTICES, DESK_MODEL_SEED)
        .and_then(|a| a.save(&out.join("body.json")))
        .map_err(at("fixture"))?;
    write_json(&out.join("params.json"), &facing_camera(Vec3::zeros())).map_err(at("fixture"))?;
    let config = PipelineConfig {
        scene: Some(".".into()),
        assets: Some("body.json".into()),
        params: Some("params.json".into()),
        seed: Some(seed),
        ..PipelineConfig::default()
    };
    write_json(&out.join("pipeline.json"), &config).map_err(at("fixture"))?;
    #[derive(Serialize)]
    struct Truth {
        normal: [f64; 3],
        d: f64,
    }
    write_json(
        &out.join("floor_truth.json"),
        &Truth {
            normal: room.floor_normal.into(),
            d: room.floor_d,
        },
    )
    .map_err(at("fixture"))
}

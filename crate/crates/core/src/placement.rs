//! Physically plausible placement of a body on a support plane.
//!
//! Candidate anchors come from a regular grid over the floor inliers. Each
//! candidate rotates the body so its up axis matches the plane normal, spins
//! it about the normal by a yaw, drops it so the lowest vertex touches the
//! plane, and is rejected if too many non-floor scene points fall inside the
//! body's capsule approximation.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::body_model::{body_capsules, pose_mesh, BodyAssets, BodyParams};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{axis_rotation, plane_basis, point_segment_distance_sq, Mat3, Vec3};
use crate::ground_plane::Plane;
use crate::rng::{self, tags};

pub const DEFAULT_COLLISION_TOLERANCE: usize = 25;
pub const DEFAULT_GRID_SPACING: f64 = 0.5;
pub const DEFAULT_MIN_SUPPORT: usize = 20;
/// Largest anchor-to-plane distance accepted as "on the support plane" (meters).
pub const SUPPORT_TOLERANCE: f64 = 0.01;

/// Segment `[endpoint_a, endpoint_b]` swept by a sphere of `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub endpoint_a: Vec3,
    pub endpoint_b: Vec3,
    pub radius: f64,
}

impl Capsule {
    /// Strict containment: distance to the axis segment below the radius.
    pub fn contains(&self, p: &Vec3) -> bool {
        point_segment_distance_sq(p, &self.endpoint_a, &self.endpoint_b) < self.radius * self.radius
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let r = Vec3::repeat(self.radius);
        (
            self.endpoint_a.inf(&self.endpoint_b) - r,
            self.endpoint_a.sup(&self.endpoint_b) + r,
        )
    }
}

/// Floor grid cell centroid used as a placement candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAnchor {
    /// `[column, row]` along the in-plane basis `(e1, e2)`.
    pub cell: [i64; 2],
    pub point: Vec3,
    pub support: usize,
}

/// Centroids of the grid cells holding at least `min_support` projected floor
/// points, row-major by cell index. The result does not depend on point order.
pub fn sample_floor_grid(
    plane: &Plane,
    floor_points: &[Vec3],
    spacing: f64,
    min_support: usize,
) -> Result<Vec<GridAnchor>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    let (e1, e2) = plane_basis(&plane.normal);
    let origin = -plane.normal * plane.d;
    let mut cells: BTreeMap<(i64, i64), Vec<Vec3>> = BTreeMap::new();
    for p in floor_points {
        let q = plane.project(p);
        let rel = q - origin;
        let col = (rel.dot(&e1) / spacing).floor() as i64;
        let row = (rel.dot(&e2) / spacing).floor() as i64;
        cells.entry((row, col)).or_default().push(q);
    }
    let mut anchors = Vec::new();
    for ((row, col), mut pts) in cells {
        if pts.len() < min_support.max(1) {
            continue;
        }
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
        let centroid = pts.iter().fold(Vec3::zeros(), |s, p| s + p) / pts.len() as f64;
        anchors.push(GridAnchor {
            cell: [col, row],
            point: plane.project(&centroid),
            support: pts.len(),
        });
    }
    Ok(anchors)
}

fn check_unit(v: &Vec3) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NonUnitVector { norm });
    }
    Ok(())
}

/// Minimal rotation taking `up` onto `normal`.
///
/// Antiparallel inputs turn by π about the first canonical axis that is not
/// parallel to `up`, with its `up` component removed.
pub fn align_up_to_normal(up: &Vec3, normal: &Vec3) -> Result<Mat3> {
    check_unit(up)?;
    check_unit(normal)?;
    let (up, normal) = (up.normalize(), normal.normalize());
    let cross = up.cross(&normal);
    let s = cross.norm();
    let c = up.dot(&normal);
    if s < 1e-12 {
        if c > 0.0 {
            return Ok(Mat3::identity());
        }
        let axis = (0..3)
            .map(|i| {
                let mut e = Vec3::zeros();
                e[i] = 1.0;
                e - up * up.dot(&e)
            })
            .find(|a| a.norm() > 1e-6)
            .expect("some canonical axis is not parallel to a unit vector");
        return Ok(axis_rotation(&axis, std::f64::consts::PI));
    }
    Ok(axis_rotation(&(cross / s), s.atan2(c)))
}

/// Re-poses `params` so the body stands on `plane` at `anchor`, turned by `yaw` about the normal.
///
/// The root rotation becomes `R_yaw · R_align · R_root`. The translation puts
/// the root joint over the anchor (along the normal) and lifts the body until
/// its lowest vertex is on the plane.
pub fn place_body(
    assets: &BodyAssets,
    params: &BodyParams,
    plane: &Plane,
    anchor: &Vec3,
    yaw: f64,
) -> Result<BodyParams> {
    params.validate()?;
    if !yaw.is_finite() || !anchor.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidParams("yaw and anchor must be finite".into()));
    }
    check_unit(&plane.normal)?;
    let n = plane.normal;
    let root = params.root_rotation();
    let align = align_up_to_normal(&(root * assets.up_axis()).normalize(), &n)?;
    let rotation = axis_rotation(&n, yaw) * align * root;

    let mut placed = params.clone();
    placed.set_root_rotation(&rotation);
    placed.set_translation(&Vec3::zeros());
    let mesh = pose_mesh(assets, &placed)?;
    let lowest = mesh
        .vertices
        .iter()
        .map(|v| plane.signed_distance(v))
        .fold(f64::INFINITY, f64::min);
    let to_anchor = anchor - mesh.joints[0];
    let tangential = to_anchor - n * n.dot(&to_anchor);
    placed.set_translation(&(tangential - n * lowest));
    Ok(placed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Collision,
    OffSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionReport {
    pub verdict: Verdict,
    pub count: usize,
}

/// Counts non-floor scene points strictly inside any capsule.
pub fn check_collision(
    capsules: &[Capsule],
    scene_points: &[Vec3],
    floor_indices: &[usize],
    tolerance_count: usize,
) -> CollisionReport {
    check_collision_with(capsules, scene_points, floor_indices, tolerance_count, Exec::default())
}

type Voxel = (i64, i64, i64);

fn voxel(p: &Vec3, cell: f64) -> Voxel {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

/// Voxel-hashed collision count; cell size is twice the largest radius.
pub fn check_collision_with(
    capsules: &[Capsule],
    scene_points: &[Vec3],
    floor_indices: &[usize],
    tolerance_count: usize,
    exec: Exec,
) -> CollisionReport {
    let mut excluded = vec![false; scene_points.len()];
    for &i in floor_indices {
        if let Some(e) = excluded.get_mut(i) {
            *e = true;
        }
    }
    let max_radius = capsules.iter().map(|c| c.radius).fold(0.0, f64::max);
    let mut hit = vec![false; scene_points.len()];
    if max_radius > 0.0 && !scene_points.is_empty() {
        let cell = 2.0 * max_radius;
        let mut grid: HashMap<Voxel, Vec<u32>> = HashMap::new();
        for (i, p) in scene_points.iter().enumerate() {
            if !excluded[i] && p.iter().all(|c| c.is_finite()) {
                grid.entry(voxel(p, cell)).or_default().push(i as u32);
            }
        }
        let per_capsule = exec.map_range(capsules.len(), |k| {
            let cap = &capsules[k];
            let (lo, hi) = cap.bounds();
            let (lo, hi) = (voxel(&lo, cell), voxel(&hi, cell));
            let mut inside = Vec::new();
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        if let Some(ids) = grid.get(&(x, y, z)) {
                            inside.extend(ids.iter().copied().filter(|&i| cap.contains(&scene_points[i as usize])));
                        }
                    }
                }
            }
            inside
        });
        for i in per_capsule.into_iter().flatten() {
            hit[i as usize] = true;
        }
    }
    let count = hit.iter().filter(|&&h| h).count();
    CollisionReport {
        verdict: if count > tolerance_count {
            Verdict::Collision
        } else {
            Verdict::Accepted
        },
        count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum YawPolicy {
    Fixed { yaw: f64 },
    Seeded,
}

impl Default for YawPolicy {
    fn default() -> Self {
        YawPolicy::Fixed { yaw: 0.0 }
    }
}

impl YawPolicy {
    /// Yaw for candidate `index`; seeded yaw is uniform in `[0, 2π)`.
    pub fn yaw_for(&self, seed: u64, index: usize) -> f64 {
        match *self {
            YawPolicy::Fixed { yaw } => yaw,
            YawPolicy::Seeded => {
                use rand::Rng;
                rng::substream(seed, tags::YAW, index as u64).random_range(0.0..std::f64::consts::TAU)
            }
        }
    }
}

/// One evaluated placement candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub grid_cell: [i64; 2],
    pub anchor: Vec3,
    pub yaw: f64,
    pub verdict: Verdict,
    pub collision_count: usize,
    /// Relative rotation from the original root orientation to the placed one.
    pub view_adjustment: Mat3,
    pub params: BodyParams,
}

fn rows(m: &Mat3) -> [[f64; 3]; 3] {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

/// JSON form of a placement; matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub cell: [i64; 2],
    pub anchor: [f64; 3],
    pub yaw: f64,
    pub verdict: Verdict,
    pub collision_count: usize,
    pub view_adjustment: [[f64; 3]; 3],
}

impl Placement {
    pub fn record(&self) -> PlacementRecord {
        PlacementRecord {
            rotation: rows(&self.rotation),
            translation: self.translation.into(),
            cell: self.grid_cell,
            anchor: self.anchor.into(),
            yaw: self.yaw,
            verdict: self.verdict,
            collision_count: self.collision_count,
            view_adjustment: rows(&self.view_adjustment),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementConfig {
    pub yaw: YawPolicy,
    pub collision_tolerance: usize,
    pub seed: u64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            yaw: YawPolicy::default(),
            collision_tolerance: DEFAULT_COLLISION_TOLERANCE,
            seed: 0,
        }
    }
}

pub fn evaluate_candidates(
    assets: &BodyAssets,
    params: &BodyParams,
    plane: &Plane,
    anchors: &[GridAnchor],
    scene_points: &[Vec3],
    floor_indices: &[usize],
    config: &PlacementConfig,
) -> Result<Vec<Placement>> {
    evaluate_candidates_with(
        assets,
        params,
        plane,
        anchors,
        scene_points,
        floor_indices,
        config,
        Exec::default(),
    )
}

/// Places and collision-checks every anchor, in anchor order.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_candidates_with(
    assets: &BodyAssets,
    params: &BodyParams,
    plane: &Plane,
    anchors: &[GridAnchor],
    scene_points: &[Vec3],
    floor_indices: &[usize],
    config: &PlacementConfig,
    exec: Exec,
) -> Result<Vec<Placement>> {
    let original = params.root_rotation();
    exec.map_range(anchors.len(), |i| {
        let anchor = &anchors[i];
        let yaw = config.yaw.yaw_for(config.seed, i);
        let placed = place_body(assets, params, plane, &anchor.point, yaw)?;
        let rotation = placed.root_rotation();
        let on_support = plane.signed_distance(&anchor.point).abs() <= SUPPORT_TOLERANCE;
        let (verdict, count) = if on_support {
            let caps = body_capsules(assets, &placed)?;
            let report = check_collision_with(
                &caps,
                scene_points,
                floor_indices,
                config.collision_tolerance,
                Exec::Serial,
            );
            (report.verdict, report.count)
        } else {
            (Verdict::OffSupport, 0)
        };
        Ok(Placement {
            rotation,
            translation: placed.translation(),
            grid_cell: anchor.cell,
            anchor: anchor.point,
            yaw,
            verdict,
            collision_count: count,
            view_adjustment: rotation * original.transpose(),
            params: placed,
        })
    })
    .into_iter()
    .collect()
}

/// Measured physical-validity quantities of a placed body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementAudit {
    /// Angle between the posed up axis and the plane normal (radians).
    pub up_deviation: f64,
    /// Smallest signed vertex-to-plane distance (meters).
    pub lowest_gap: f64,
    pub orthonormality_error: f64,
    pub determinant: f64,
}

pub fn audit_placement(assets: &BodyAssets, params: &BodyParams, plane: &Plane) -> Result<PlacementAudit> {
    let mesh = pose_mesh(assets, params)?;
    let r = params.root_rotation();
    let up = r * assets.up_axis();
    Ok(PlacementAudit {
        up_deviation: up.cross(&plane.normal).norm().atan2(up.dot(&plane.normal)),
        lowest_gap: mesh
            .vertices
            .iter()
            .map(|v| plane.signed_distance(v))
            .fold(f64::INFINITY, f64::min),
        orthonormality_error: crate::geom::orthonormality_error(&r),
        determinant: r.determinant(),
    })
}

//! Parametric articulated body mesh with linear blend skinning.
//!
//! A body is described by 24 per-joint axis-angle rotations, 10 linear shape
//! coefficients and a camera-space translation. Posing applies shape offsets,
//! regresses joints from the shaped template, composes joint rotations down
//! the kinematic tree (each joint pivots about its own rest location) and
//! blends the per-joint rigid transforms with the skinning weights.
//!
//! [`generate_desk_model`] builds a capsule humanoid with the same 24-joint
//! layout so that nothing here depends on licensed model data.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{axis_angle, point_segment_distance_sq, rodrigues, Mat3, Vec3};
use crate::placement::Capsule;
use crate::rng;
use crate::scene_io;

pub const JOINT_COUNT: usize = 24;
pub const SHAPE_COUNT: usize = 10;
pub const ASSET_FORMAT: &str = "husc-body-v1";

/// Smallest capsule radius in meters.
pub const MIN_CAPSULE_RADIUS: f64 = 0.01;

/// SMPL joint order; parents always precede children.
pub const JOINT_NAMES: [&str; JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

pub const SMPL_PARENTS: [Option<usize>; JOINT_COUNT] = [
    None,
    Some(0),
    Some(0),
    Some(0),
    Some(1),
    Some(2),
    Some(3),
    Some(4),
    Some(5),
    Some(6),
    Some(7),
    Some(8),
    Some(9),
    Some(9),
    Some(9),
    Some(12),
    Some(13),
    Some(14),
    Some(16),
    Some(17),
    Some(18),
    Some(19),
    Some(20),
    Some(21),
];

/// Template mesh plus skinning assets.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyAssets {
    template_vertices: Vec<Vec3>,
    faces: Arc<[[u32; 3]]>,
    kinematic_parents: Vec<Option<usize>>,
    joint_regressor: Vec<Vec<(usize, f64)>>,
    /// vertex-major, `JOINT_COUNT` per vertex
    skinning_weights: Vec<f64>,
    /// vertex-major, `SHAPE_COUNT` offsets per vertex
    shape_basis: Vec<Vec3>,
    up_axis: Vec3,
    vertex_parts: Arc<[u8]>,
    vertex_uv: Arc<[[f64; 2]]>,
}

impl BodyAssets {
    /// Validates the raw arrays and derives part labels and uv charts.
    ///
    /// `skinning_weights` is vertex-major with 24 weights per vertex;
    /// `shape_basis` is vertex-major with 10 offsets per vertex.
    pub fn new(
        template_vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        kinematic_parents: Vec<Option<usize>>,
        joint_regressor: Vec<Vec<(usize, f64)>>,
        skinning_weights: Vec<f64>,
        shape_basis: Vec<Vec3>,
        up_axis: Vec3,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidAssets(m));
        let n = template_vertices.len();
        if n == 0 {
            return bad("template has no vertices".into());
        }
        if template_vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return bad("template vertex is not finite".into());
        }
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i as usize >= n)) {
            return bad(format!("face {f:?} indexes past {n} vertices"));
        }
        if kinematic_parents.len() != JOINT_COUNT || joint_regressor.len() != JOINT_COUNT {
            return bad(format!("expected {JOINT_COUNT} joints"));
        }
        if kinematic_parents[0].is_some() {
            return bad("joint 0 must be the root".into());
        }
        for (j, p) in kinematic_parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                _ => return bad(format!("joint {j} needs a parent with a lower index")),
            }
        }
        for (j, row) in joint_regressor.iter().enumerate() {
            if row.is_empty() || row.iter().any(|&(v, w)| v >= n || !w.is_finite()) {
                return bad(format!("joint regressor row {j} is empty or out of range"));
            }
        }
        if skinning_weights.len() != n * JOINT_COUNT {
            return bad("skinning weights must have 24 entries per vertex".into());
        }
        for (v, row) in skinning_weights.chunks_exact(JOINT_COUNT).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
                return bad(format!(
                    "skinning weights of vertex {v} are negative or do not sum to 1"
                ));
            }
        }
        if shape_basis.len() != n * SHAPE_COUNT {
            return bad("shape basis must have exactly 10 channels".into());
        }
        if shape_basis.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return bad("shape basis is not finite".into());
        }
        if (up_axis.norm() - 1.0).abs() > 1e-6 {
            return bad(format!("up axis must be unit length, has norm {}", up_axis.norm()));
        }

        let vertex_parts: Vec<u8> = skinning_weights
            .chunks_exact(JOINT_COUNT)
            .map(|row| dominant(row) as u8)
            .collect();
        let vertex_uv = part_charts(&template_vertices, &vertex_parts);
        Ok(BodyAssets {
            template_vertices,
            faces: faces.into(),
            kinematic_parents,
            joint_regressor,
            skinning_weights,
            shape_basis,
            up_axis: up_axis.normalize(),
            vertex_parts: vertex_parts.into(),
            vertex_uv: vertex_uv.into(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.template_vertices.len()
    }

    pub fn template_vertices(&self) -> &[Vec3] {
        &self.template_vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn kinematic_parents(&self) -> &[Option<usize>] {
        &self.kinematic_parents
    }

    pub fn joint_regressor(&self) -> &[Vec<(usize, f64)>] {
        &self.joint_regressor
    }

    pub fn skinning_row(&self, vertex: usize) -> &[f64] {
        &self.skinning_weights[vertex * JOINT_COUNT..(vertex + 1) * JOINT_COUNT]
    }

    pub fn shape_offset(&self, vertex: usize, coefficient: usize) -> Vec3 {
        self.shape_basis[vertex * SHAPE_COUNT + coefficient]
    }

    pub fn up_axis(&self) -> Vec3 {
        self.up_axis
    }

    /// Part label of each vertex (its dominant skinning joint).
    pub fn vertex_parts(&self) -> &[u8] {
        &self.vertex_parts
    }

    /// Per-part chart coordinates in `[0, 1]²`.
    pub fn vertex_uv(&self) -> &[[f64; 2]] {
        &self.vertex_uv
    }

    /// Kinematic bones as `(parent, child)` joint pairs, ordered by child.
    pub fn bones(&self) -> Vec<(usize, usize)> {
        (1..JOINT_COUNT)
            .map(|j| (self.kinematic_parents[j].expect("validated"), j))
            .collect()
    }

    /// Template plus shape offsets.
    pub fn shaped_template(&self, shape: &[f64; SHAPE_COUNT]) -> Vec<Vec3> {
        self.template_vertices
            .iter()
            .enumerate()
            .map(|(v, t)| {
                let mut p = *t;
                for (k, &b) in shape.iter().enumerate() {
                    if b != 0.0 {
                        p += self.shape_offset(v, k) * b;
                    }
                }
                p
            })
            .collect()
    }

    pub fn regress_joints(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        self.joint_regressor
            .iter()
            .map(|row| row.iter().fold(Vec3::zeros(), |acc, &(v, w)| acc + vertices[v] * w))
            .collect()
    }

    /// Smooth per-vertex colors in `[0, 1]` derived from the template position.
    pub fn vertex_colors(&self) -> Vec<[f64; 3]> {
        self.template_vertices
            .iter()
            .map(|p| {
                [
                    0.5 + 0.35 * (3.1 * p.x + 1.3 * p.y).sin(),
                    0.5 + 0.35 * (2.3 * p.y + 0.7).sin(),
                    0.5 + 0.35 * (2.9 * p.z + 1.9 * p.x + 0.4 * p.y).cos(),
                ]
            })
            .collect()
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let n = self.vertex_count();
        let file = AssetFile {
            format: ASSET_FORMAT.into(),
            vertex_count: n,
            joint_count: JOINT_COUNT,
            shape_count: SHAPE_COUNT,
            template_vertices: encode_f32(self.template_vertices.iter().flat_map(|v| v.iter().copied())),
            faces: encode_u32(self.faces.iter().flatten().copied()),
            kinematic_parents: self
                .kinematic_parents
                .iter()
                .map(|p| p.map_or(-1, |p| p as i64))
                .collect(),
            joint_regressor: self.joint_regressor.clone(),
            skinning_weights: encode_f32(self.skinning_weights.iter().copied()),
            // [vertex][xyz][coefficient]
            shape_basis: encode_f32((0..n).flat_map(|v| {
                (0..3).flat_map(move |axis| (0..SHAPE_COUNT).map(move |k| self.shape_basis[v * SHAPE_COUNT + k][axis]))
            })),
            up_axis: [self.up_axis.x, self.up_axis.y, self.up_axis.z],
        };
        let mut bytes = serde_json::to_vec_pretty(&file).expect("asset file serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let file: AssetFile = serde_json::from_slice(bytes).map_err(|e| Error::format("body assets", e.to_string()))?;
        if file.format != ASSET_FORMAT {
            return Err(Error::format(
                "body assets",
                format!("unsupported format {:?}", file.format),
            ));
        }
        if file.joint_count != JOINT_COUNT || file.shape_count != SHAPE_COUNT {
            return Err(Error::format("body assets", "expected 24 joints and 10 shape channels"));
        }
        let n = file.vertex_count;
        let template = decode_f32(&file.template_vertices, n * 3, "template_vertices")?;
        let faces = decode_u32(&file.faces, "faces")?;
        if faces.len() % 3 != 0 {
            return Err(Error::format("body assets", "face array is not a multiple of 3"));
        }
        let weights = decode_f32(&file.skinning_weights, n * JOINT_COUNT, "skinning_weights")?;
        let basis = decode_f32(&file.shape_basis, n * 3 * SHAPE_COUNT, "shape_basis")?;
        let mut shape_basis = vec![Vec3::zeros(); n * SHAPE_COUNT];
        for v in 0..n {
            for axis in 0..3 {
                for k in 0..SHAPE_COUNT {
                    shape_basis[v * SHAPE_COUNT + k][axis] = basis[(v * 3 + axis) * SHAPE_COUNT + k];
                }
            }
        }
        let parents = file
            .kinematic_parents
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect();
        BodyAssets::new(
            template.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            faces.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            parents,
            file.joint_regressor,
            weights,
            shape_basis,
            Vec3::from(file.up_axis),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        scene_io::write_bytes(path, &self.to_json_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_bytes(&bytes).map_err(|e| match e {
            Error::Format { what, detail } => Error::Format {
                what,
                detail: format!("{}: {detail}", path.display()),
            },
            other => other,
        })
    }

    /// SHA-256 of the serialized asset file, hex encoded.
    pub fn content_hash(&self) -> String {
        Sha256::digest(self.to_json_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct AssetFile {
    format: String,
    vertex_count: usize,
    joint_count: usize,
    shape_count: usize,
    template_vertices: String,
    faces: String,
    kinematic_parents: Vec<i64>,
    joint_regressor: Vec<Vec<(usize, f64)>>,
    skinning_weights: String,
    shape_basis: String,
    up_axis: [f64; 3],
}

fn encode_f32(values: impl Iterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(|x| (x as f32).to_le_bytes()).collect();
    B64.encode(bytes)
}

fn encode_u32(values: impl Iterator<Item = u32>) -> String {
    let bytes: Vec<u8> = values.flat_map(|x| x.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_bytes(data: &str, field: &str) -> Result<Vec<u8>> {
    let bytes = B64
        .decode(data)
        .map_err(|e| Error::format("body assets", format!("{field}: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            "body assets",
            format!("{field}: length not a multiple of 4"),
        ));
    }
    Ok(bytes)
}

fn decode_f32(data: &str, expected: usize, field: &str) -> Result<Vec<f64>> {
    let bytes = decode_bytes(data, field)?;
    if bytes.len() != expected * 4 {
        return Err(Error::format(
            "body assets",
            format!("{field}: expected {expected} values, found {}", bytes.len() / 4),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn decode_u32(data: &str, field: &str) -> Result<Vec<u32>> {
    Ok(decode_bytes(data, field)?
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn dominant(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &w) in row.iter().enumerate() {
        if w > row[best] {
            best = j;
        }
    }
    best
}

/// Projects each part's vertices onto the part's two leading principal axes,
/// min-max normalized to `[0, 1]²`.
fn part_charts(vertices: &[Vec3], parts: &[u8]) -> Vec<[f64; 2]> {
    let mut uv = vec![[0.5, 0.5]; vertices.len()];
    for part in 0..JOINT_COUNT as u8 {
        let members: Vec<usize> = (0..vertices.len()).filter(|&i| parts[i] == part).collect();
        if members.is_empty() {
            continue;
        }
        let centroid = members.iter().fold(Vec3::zeros(), |acc, &i| acc + vertices[i]) / members.len() as f64;
        let mut cov = Mat3::zeros();
        for &i in &members {
            let d = vertices[i] - centroid;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let axes: Vec<Vec3> = order[..2]
            .iter()
            .map(|&k| {
                let e: Vec3 = eig.eigenvectors.column(k).into();
                // sign fixed by the largest-magnitude component
                let imax = e.iamax();
                if e[imax] < 0.0 {
                    -e
                } else {
                    e
                }
            })
            .collect();
        let coords: Vec<[f64; 2]> = members
            .iter()
            .map(|&i| {
                let d = vertices[i] - centroid;
                [d.dot(&axes[0]), d.dot(&axes[1])]
            })
            .collect();
        for c in 0..2 {
            let lo = coords.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
            let hi = coords.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max);
            for (k, &i) in members.iter().enumerate() {
                uv[i][c] = if hi > lo {
                    ((coords[k][c] - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.5
                };
            }
        }
    }
    uv
}

/// Pose, shape and camera-space translation of one body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    /// Per-joint axis-angle rotations (radians).
    pub pose: [[f64; 3]; JOINT_COUNT],
    pub shape: [f64; SHAPE_COUNT],
    /// Meters, camera space.
    pub translation: [f64; 3],
}

impl Default for BodyParams {
    fn default() -> Self {
        BodyParams {
            pose: [[0.0; 3]; JOINT_COUNT],
            shape: [0.0; SHAPE_COUNT],
            translation: [0.0; 3],
        }
    }
}

impl BodyParams {
    pub fn validate(&self) -> Result<()> {
        let all = self.pose.iter().flatten().chain(&self.shape).chain(&self.translation);
        if let Some(x) = all.into_iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite value {x}")));
        }
        for (j, aa) in self.pose.iter().enumerate() {
            let angle = Vec3::from(*aa).norm();
            if angle >= TAU {
                return Err(Error::InvalidParams(format!(
                    "joint {j} rotation angle {angle} is not below 2π"
                )));
            }
        }
        Ok(())
    }

    pub fn joint_rotation(&self, joint: usize) -> Mat3 {
        rodrigues(&Vec3::from(self.pose[joint]))
    }

    pub fn root_rotation(&self) -> Mat3 {
        self.joint_rotation(0)
    }

    pub fn set_root_rotation(&mut self, rotation: &Mat3) {
        let aa = axis_angle(rotation);
        self.pose[0] = [aa.x, aa.y, aa.z];
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn set_translation(&mut self, t: &Vec3) {
        self.translation = [t.x, t.y, t.z];
    }
}

/// Skinned mesh in camera space.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Arc<[[u32; 3]]>,
    pub per_vertex_part: Arc<[u8]>,
    pub per_vertex_uv: Arc<[[f64; 2]]>,
    /// Posed joint locations, empty for meshes not produced by skinning.
    pub joints: Vec<Vec3>,
}

impl PosedMesh {
    /// Bare triangle mesh with part 0 and chart origin on every vertex.
    pub fn from_triangles(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        let n = vertices.len();
        PosedMesh {
            vertices,
            faces: faces.into(),
            per_vertex_part: vec![0u8; n].into(),
            per_vertex_uv: vec![[0.0, 0.0]; n].into(),
            joints: Vec::new(),
        }
    }

    pub fn same_topology(&self, other: &PosedMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }
}

/// World transform `x ↦ rotation·x + offset` of every joint, before translation.
struct JointTransforms {
    rotations: Vec<Mat3>,
    offsets: Vec<Vec3>,
}

fn joint_transforms(assets: &BodyAssets, params: &BodyParams, rest_joints: &[Vec3]) -> JointTransforms {
    let mut rotations = Vec::with_capacity(JOINT_COUNT);
    let mut offsets = Vec::with_capacity(JOINT_COUNT);
    for j in 0..JOINT_COUNT {
        let local = params.joint_rotation(j);
        let pivot = rest_joints[j];
        // rotate about the joint's own rest location, then apply the parent
        let pivot_shift = pivot - local * pivot;
        match assets.kinematic_parents[j] {
            None => {
                rotations.push(local);
                offsets.push(pivot_shift);
            }
            Some(p) => {
                let (rp, op) = (rotations[p], offsets[p]);
                rotations.push(rp * local);
                offsets.push(rp * pivot_shift + op);
            }
        }
    }
    JointTransforms { rotations, offsets }
}

/// Skins the body for `params`.
pub fn pose_mesh(assets: &BodyAssets, params: &BodyParams) -> Result<PosedMesh> {
    params.validate()?;
    let shaped = assets.shaped_template(&params.shape);
    let rest_joints = assets.regress_joints(&shaped);
    let xf = joint_transforms(assets, params, &rest_joints);
    let t = params.translation();

    let vertices = shaped
        .iter()
        .enumerate()
        .map(|(v, x)| {
            let mut m = Mat3::zeros();
            let mut b = Vec3::zeros();
            for (j, &w) in assets.skinning_row(v).iter().enumerate() {
                if w != 0.0 {
                    m += xf.rotations[j] * w;
                    b += xf.offsets[j] * w;
                }
            }
            m * x + b + t
        })
        .collect();
    let joints = (0..JOINT_COUNT)
        .map(|j| xf.rotations[j] * rest_joints[j] + xf.offsets[j] + t)
        .collect();
    Ok(PosedMesh {
        vertices,
        faces: assets.faces.clone(),
        per_vertex_part: assets.vertex_parts.clone(),
        per_vertex_uv: assets.vertex_uv.clone(),
        joints,
    })
}

/// Per-bone bounding capsules of the posed body.
///
/// Each vertex belongs to the nearest bone leaving its dominant joint (or,
/// for leaf joints, the bone ending there); a capsule's radius is the largest
/// vertex-to-segment distance among its vertices, at least 1 cm.
pub fn body_capsules(assets: &BodyAssets, params: &BodyParams) -> Result<Vec<Capsule>> {
    let mesh = pose_mesh(assets, params)?;
    Ok(capsules_for_mesh(assets, &mesh))
}

pub(crate) fn capsules_for_mesh(assets: &BodyAssets, mesh: &PosedMesh) -> Vec<Capsule> {
    let bones = assets.bones();
    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); JOINT_COUNT];
    let mut incoming: Vec<Option<usize>> = vec![None; JOINT_COUNT];
    for (b, &(p, c)) in bones.iter().enumerate() {
        outgoing[p].push(b);
        incoming[c] = Some(b);
    }
    let mut radius_sq = vec![0.0f64; bones.len()];
    for (v, x) in mesh.vertices.iter().enumerate() {
        let part = assets.vertex_parts[v] as usize;
        let candidates: &[usize] = if outgoing[part].is_empty() {
            incoming[part].as_slice()
        } else {
            &outgoing[part]
        };
        let mut best: Option<(usize, f64)> = None;
        for &b in candidates {
            let (p, c) = bones[b];
            let d = point_segment_distance_sq(x, &mesh.joints[p], &mesh.joints[c]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((b, d));
            }
        }
        if let Some((b, d)) = best {
            radius_sq[b] = radius_sq[b].max(d);
        }
    }
    bones
        .iter()
        .zip(radius_sq)
        .map(|(&(p, c), r2)| Capsule {
            endpoint_a: mesh.joints[p],
            endpoint_b: mesh.joints[c],
            radius: r2.sqrt().max(MIN_CAPSULE_RADIUS),
        })
        .collect()
}

/// Rest joint locations of the desk model (meters, +Y up, feet near y = 0).
const DESK_JOINTS: [[f64; 3]; JOINT_COUNT] = [
    [0.0, 0.95, 0.0],
    [0.09, 0.88, 0.0],
    [-0.09, 0.88, 0.0],
    [0.0, 1.07, 0.0],
    [0.10, 0.50, 0.0],
    [-0.10, 0.50, 0.0],
    [0.0, 1.20, 0.0],
    [0.11, 0.09, 0.0],
    [-0.11, 0.09, 0.0],
    [0.0, 1.33, 0.0],
    [0.12, 0.04, 0.13],
    [-0.12, 0.04, 0.13],
    [0.0, 1.50, 0.0],
    [0.07, 1.42, 0.0],
    [-0.07, 1.42, 0.0],
    [0.0, 1.63, 0.0],
    [0.18, 1.42, 0.0],
    [-0.18, 1.42, 0.0],
    [0.38, 1.22, 0.0],
    [-0.38, 1.22, 0.0],
    [0.56, 1.04, 0.0],
    [-0.56, 1.04, 0.0],
    [0.62, 0.98, 0.0],
    [-0.62, 0.98, 0.0],
];

/// Cross-section width radius of the bone ending at each joint (index 0 unused).
const DESK_BONE_RADII: [f64; JOINT_COUNT] = [
    0.0, 0.08, 0.08, 0.13, 0.075, 0.075, 0.14, 0.055, 0.055, 0.15, 0.045, 0.045, 0.10, 0.06, 0.06, 0.09, 0.06, 0.06,
    0.05, 0.05, 0.04, 0.04, 0.04, 0.04,
];

/// Depth radius relative to width radius; keeps each part's thinnest axis front-to-back.
const DESK_DEPTH_RATIO: f64 = 0.7;
const MIN_VERTICES_PER_BONE: usize = 8;

fn round_f32(v: Vec3) -> Vec3 {
    v.map(|c| c as f32 as f64)
}

/// Procedural 24-joint capsule humanoid standing on y = 0, facing +Z.
///
/// Every bone gets an elliptic tube whose end rings are centred on its joints
/// plus two pole vertices; all tube vertices are rigidly bound to the bone's
/// parent joint. Joints regress as the mean of the ring centred on them.
/// Shape channel 0 scales the body uniformly by 10% per unit; the remaining
/// channels are zero. Coordinates are f32-representable so the asset file
/// round-trips exactly.
pub fn generate_desk_model(vertex_budget: usize, seed: u64) -> Result<BodyAssets> {
    let bones: Vec<(usize, usize)> = (1..JOINT_COUNT)
        .map(|j| (SMPL_PARENTS[j].expect("non-root"), j))
        .collect();
    let per_bone = vertex_budget / bones.len();
    if per_bone < MIN_VERTICES_PER_BONE {
        return Err(Error::BudgetTooSmall {
            budget: vertex_budget,
            per_bone: MIN_VERTICES_PER_BONE,
            bones: bones.len(),
        });
    }
    let mut segments = (((per_bone - 2) as f64).sqrt() as usize).clamp(3, 16);
    let mut rings = (per_bone - 2) / segments;
    if rings < 2 {
        segments = 3;
        rings = (per_bone - 2) / 3;
    }

    let mut rng = rng::substream(seed, rng::tags::DESK_MODEL, 0);
    let joints: Vec<Vec3> = DESK_JOINTS.iter().map(|j| Vec3::from(*j)).collect();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut owner = Vec::new();
    let mut ring_of_joint: Vec<Option<Vec<usize>>> = vec![None; JOINT_COUNT];

    for &(p, c) in &bones {
        let (a, b) = (joints[p], joints[c]);
        let axis = (b - a).normalize();
        let depth_dir = {
            let z = Vec3::z() - axis * axis.z;
            if z.norm() > 1e-6 {
                z.normalize()
            } else {
                Vec3::x()
            }
        };
        let width_dir = axis.cross(&depth_dir).normalize();
        let radius = DESK_BONE_RADII[c] * (1.0 + 0.05 * rng.random_range(-1.0..1.0));
        let depth_radius = radius * DESK_DEPTH_RATIO;
        // quarter-step phase: no two ring vertices mirror each other across the width axis
        let step = TAU / segments as f64;
        let phase = step / 4.0 + rng.random_range(-1.0..1.0) * step / 16.0;

        // per-ring twist keeps rings apart when a part's chart spans the cross-section;
        // total twist stays under step/8 so 2·phi never hits a multiple of step
        let twist = step / (8.0 * rings as f64);

        let base = vertices.len() as u32;
        vertices.push(round_f32(a - axis * radius + width_dir * (0.2 * radius)));
        for r in 0..rings {
            let center = a + (b - a) * (r as f64 / (rings - 1) as f64);
            for k in 0..segments {
                let phi = phase + twist * r as f64 + step * k as f64;
                vertices.push(round_f32(
                    center + width_dir * (radius * phi.cos()) + depth_dir * (depth_radius * phi.sin()),
                ));
            }
        }
        vertices.push(round_f32(b + axis * radius - width_dir * (0.2 * radius)));
        let ring = |r: usize, k: usize| base + 1 + (r * segments + k % segments) as u32;
        let pole_b = base + 1 + (rings * segments) as u32;
        for k in 0..segments {
            faces.push([base, ring(0, k + 1), ring(0, k)]);
            for r in 0..rings - 1 {
                faces.push([ring(r, k), ring(r, k + 1), ring(r + 1, k + 1)]);
                faces.push([ring(r, k), ring(r + 1, k + 1), ring(r + 1, k)]);
            }
            faces.push([pole_b, ring(rings - 1, k), ring(rings - 1, k + 1)]);
        }
        owner.extend(std::iter::repeat_n(p, 2 + rings * segments));

        let ring_indices = |r: usize| (0..segments).map(move |k| ring(r, k) as usize).collect::<Vec<_>>();
        ring_of_joint[c] = Some(ring_indices(rings - 1));
        if ring_of_joint[p].is_none() && p == 0 {
            ring_of_joint[p] = Some(ring_indices(0));
        }
    }

    let n = vertices.len();
    let mut weights = vec![0.0; n * JOINT_COUNT];
    for (v, &j) in owner.iter().enumerate() {
        weights[v * JOINT_COUNT + j] = 1.0;
    }
    let regressor = ring_of_joint
        .into_iter()
        .map(|ring| {
            let ring = ring.expect("every joint touches a bone");
            let w = 1.0 / ring.len() as f64;
            ring.into_iter().map(|v| (v, w)).collect()
        })
        .collect();
    let mut shape_basis = vec![Vec3::zeros(); n * SHAPE_COUNT];
    for (v, x) in vertices.iter().enumerate() {
        shape_basis[v * SHAPE_COUNT] = round_f32(x * 0.1);
    }
    BodyAssets::new(
        vertices,
        faces,
        SMPL_PARENTS.to_vec(),
        regressor,
        weights,
        shape_basis,
        Vec3::y(),
    )
}

/// Params that stand the desk model upright facing the camera at `translation`.
///
/// The model frame is +Y up / +Z forward while the camera frame is +Y down /
/// +Z forward, so the root is turned by π about X.
pub fn facing_camera(translation: Vec3) -> BodyParams {
    let mut params = BodyParams::default();
    params.pose[0] = [PI, 0.0, 0.0];
    params.set_translation(&translation);
    params
}

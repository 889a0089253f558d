//! Synthetic, seeded inputs: ray-cast rooms with known floor planes and
//! randomized body parameters. Used by tests, benches and the CLI `fixture`
//! command so nothing depends on external datasets.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;

use crate::body_model::{facing_camera, BodyParams, JOINT_COUNT};
use crate::camera::Camera;
use crate::error::Result;
use crate::geom::{Mat3, Vec3};
use crate::rng::{self, tags};
use crate::scene_io::{save_scene, DepthMap, LabelMap, Legend, SceneFrame, ScenePaths};

pub const LABEL_UNLABELED: u8 = 0;
pub const LABEL_FLOOR: u8 = 1;
pub const LABEL_WALL: u8 = 2;
pub const LABEL_CEILING: u8 = 3;
pub const LABEL_DESK: u8 = 4;
pub const LABEL_CABINET: u8 = 5;

/// Depth noise standard deviation before millimeter quantization (meters).
pub const DEPTH_NOISE: f64 = 0.002;

pub fn room_camera() -> Camera {
    Camera::new(280.0, 280.0, 159.5, 119.5, 320, 240).expect("valid intrinsics")
}

pub fn room_legend() -> Legend {
    [
        (LABEL_UNLABELED, "unlabeled"),
        (LABEL_FLOOR, "floor"),
        (LABEL_WALL, "wall"),
        (LABEL_CEILING, "ceiling"),
        (LABEL_DESK, "desk"),
        (LABEL_CABINET, "cabinet"),
    ]
    .into_iter()
    .map(|(id, name)| (id, name.to_string()))
    .collect()
}

/// Axis-aligned box in room coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
    pub label: u8,
}

impl Aabb {
    /// Entry distance along the ray, if the ray hits the box in front of its origin.
    fn hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let a = (self.min[i] - origin[i]) / dir[i];
            let b = (self.max[i] - origin[i]) / dir[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

/// Room layout. Room coordinates: x right, y up from the floor, z away from
/// the camera; the room spans `|x| ≤ half_width`, `0 ≤ z ≤ back_wall`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    pub camera_height: f64,
    /// Downward tilt of the optical axis (radians).
    pub pitch: f64,
    pub half_width: f64,
    pub back_wall: f64,
    pub ceiling: f64,
    pub boxes: Vec<Aabb>,
}

impl RoomSpec {
    /// Open room with one desk in front of the back wall.
    pub fn open() -> Self {
        RoomSpec {
            camera_height: 1.6,
            pitch: 20f64.to_radians(),
            half_width: 2.5,
            back_wall: 6.0,
            ceiling: 2.8,
            boxes: vec![Aabb {
                min: Vec3::new(-0.6, 0.0, 2.4),
                max: Vec3::new(0.6, 0.75, 3.0),
                label: LABEL_DESK,
            }],
        }
    }

    /// A block filling the room from 0.9 m upward; the floor is only seen
    /// from underneath it, so every standing body intersects its underside.
    pub fn occupied() -> Self {
        RoomSpec {
            camera_height: 0.45,
            pitch: 0.0,
            half_width: 2.5,
            back_wall: 3.2,
            ceiling: 2.8,
            boxes: vec![Aabb {
                min: Vec3::new(-2.5, 0.9, -1.0),
                max: Vec3::new(2.5, 2.8, 3.2),
                label: LABEL_CABINET,
            }],
        }
    }

    /// Columns are the camera axes expressed in room coordinates.
    ///
    /// Camera +Y points down in the image, so this is a reflection, not a
    /// rotation; only directions and distances are used.
    pub fn camera_axes(&self) -> Mat3 {
        let (s, c) = self.pitch.sin_cos();
        Mat3::from_columns(&[Vec3::x(), Vec3::new(0.0, -c, -s), Vec3::new(0.0, -s, c)])
    }

    pub fn camera_position(&self) -> Vec3 {
        Vec3::new(0.0, self.camera_height, 0.0)
    }

    pub fn room_to_camera(&self, p: &Vec3) -> Vec3 {
        self.camera_axes().transpose() * (p - self.camera_position())
    }

    /// Floor plane `n·x + d = 0` in camera coordinates, normal toward the room's up.
    pub fn floor_plane(&self) -> (Vec3, f64) {
        let n = self.camera_axes().transpose() * Vec3::y();
        (n, self.camera_height)
    }

    fn cast(&self, dir: &Vec3) -> Option<(f64, u8, Vec3)> {
        let o = self.camera_position();
        let mut best: Option<(f64, u8)> = None;
        let mut consider = |t: f64, label: u8| {
            if t > 0.0 && t.is_finite() && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, label));
            }
        };
        if dir.y < 0.0 {
            consider(-o.y / dir.y, LABEL_FLOOR);
        }
        if dir.y > 0.0 {
            consider((self.ceiling - o.y) / dir.y, LABEL_CEILING);
        }
        if dir.x != 0.0 {
            consider((self.half_width.copysign(dir.x) - o.x) / dir.x, LABEL_WALL);
        }
        if dir.z > 0.0 {
            consider((self.back_wall - o.z) / dir.z, LABEL_WALL);
        }
        for b in &self.boxes {
            if let Some(t) = b.hit(&o, dir) {
                consider(t, b.label);
            }
        }
        best.map(|(t, label)| (t, label, o + dir * t))
    }
}

fn shade(label: u8, p: &Vec3) -> [u8; 3] {
    let checker = ((p.x / 0.5).floor() + (p.z / 0.5).floor()) as i64 % 2 == 0;
    match label {
        LABEL_FLOOR if checker => [150, 120, 90],
        LABEL_FLOOR => [130, 100, 75],
        LABEL_WALL => {
            let g = (200.0 - 20.0 * p.y).clamp(0.0, 255.0) as u8;
            [g, g, (g as f64 * 0.95) as u8]
        }
        LABEL_CEILING => [225, 225, 220],
        LABEL_DESK => [90, 60, 40],
        LABEL_CABINET => [70, 90, 110],
        _ => [0, 0, 0],
    }
}

/// Ray-cast scene with its ground-truth floor plane (camera coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct RoomFixture {
    pub spec: RoomSpec,
    pub frame: SceneFrame,
    pub floor_normal: Vec3,
    pub floor_d: f64,
}

impl RoomFixture {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
        save_scene(&self.frame, &ScenePaths::in_dir(dir))
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Renders `spec` at the room camera; depth is noisy and millimeter-quantized
/// so it survives a 16-bit PNG round trip unchanged.
pub fn render_room(spec: &RoomSpec, seed: u64) -> RoomFixture {
    let cam = room_camera();
    let axes = spec.camera_axes();
    let (w, h) = cam.size();
    let mut rng = rng::substream(seed, tags::FIXTURE, 0);
    let mut rgb = RgbImage::new(w as u32, h as u32);
    let mut depth = DepthMap::filled(w, h, 0.0);
    let mut labels = LabelMap::filled(w, h, LABEL_UNLABELED);
    for v in 0..h {
        for u in 0..w {
            let ray = Vec3::new((u as f64 - cam.cx) / cam.fx, (v as f64 - cam.cy) / cam.fy, 1.0);
            let noise = gaussian(&mut rng) * DEPTH_NOISE;
            if let Some((t, label, p)) = spec.cast(&(axes * ray)) {
                let mm = ((t + noise) * 1000.0).round().max(1.0);
                depth.set(u, v, mm as f32 / 1000.0);
                labels.set(u, v, label);
                rgb.put_pixel(u as u32, v as u32, Rgb(shade(label, &p)));
            }
        }
    }
    let frame = SceneFrame::new(rgb, depth, labels, room_legend(), cam).expect("fixture layers agree");
    let (floor_normal, floor_d) = spec.floor_plane();
    RoomFixture {
        spec: spec.clone(),
        frame,
        floor_normal,
        floor_d,
    }
}

pub fn open_room(seed: u64) -> RoomFixture {
    render_room(&RoomSpec::open(), seed)
}

pub fn occupied_room(seed: u64) -> RoomFixture {
    render_room(&RoomSpec::occupied(), seed)
}

/// Upright, camera-facing params with every non-root joint turned by up to
/// `max_angle` radians about a random axis, placed near `(0, 0, depth)`.
pub fn random_params(seed: u64, index: u64, max_angle: f64, depth: f64) -> BodyParams {
    let mut rng = rng::substream(seed, tags::FIXTURE, 1 + index);
    let mut params = facing_camera(Vec3::new(
        rng.random_range(-0.3..0.3),
        rng.random_range(-1.2..-0.9),
        depth + rng.random_range(-0.3..0.3),
    ));
    for j in 1..JOINT_COUNT {
        let axis = Vec3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng)).normalize();
        let angle = rng.random_range(0.0..max_angle);
        params.pose[j] = (axis * angle).into();
    }
    params
}

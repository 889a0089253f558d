//! Software z-buffer rasterizer.
//!
//! Pixel centers are sampled at integer coordinates with the top-left fill
//! rule. Barycentric weights and depth are perspective-correct, so a covered
//! pixel records exactly the surface point hit by its camera ray. Faces with
//! any vertex at or behind the image plane are culled. Depth ties closer than
//! [`DEPTH_TIE_EPS`] go to the lower face index.

use crate::body_model::PosedMesh;
use crate::camera::{Camera, MIN_DEPTH};
use crate::correspondence::MultiChannelMap;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::scene_io::Mask;

pub const NO_FACE: u32 = u32::MAX;
pub const DEPTH_TIE_EPS: f64 = 1e-9;

/// Visibility record of one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub face: u32,
    /// Weights of the face's vertices in their stored order.
    pub bary: [f64; 3],
    pub depth: f64,
}

const EMPTY: Sample = Sample {
    face: NO_FACE,
    bary: [0.0; 3],
    depth: f64::INFINITY,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RasterMap {
    width: usize,
    height: usize,
    samples: Vec<Sample>,
}

impl RasterMap {
    pub fn empty(width: usize, height: usize) -> Self {
        RasterMap {
            width,
            height,
            samples: vec![EMPTY; width * height],
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Overwrites one pixel's visibility record.
    pub fn set_sample(&mut self, u: usize, v: usize, sample: Option<Sample>) {
        self.samples[v * self.width + u] = sample.unwrap_or(EMPTY);
    }

    pub fn sample(&self, u: usize, v: usize) -> Option<&Sample> {
        let s = &self.samples[v * self.width + u];
        (s.face != NO_FACE).then_some(s)
    }

    pub fn face(&self, u: usize, v: usize) -> Option<u32> {
        self.sample(u, v).map(|s| s.face)
    }

    pub fn depth(&self, u: usize, v: usize) -> Option<f64> {
        self.sample(u, v).map(|s| s.depth)
    }

    pub fn covered_count(&self) -> usize {
        self.samples.iter().filter(|s| s.face != NO_FACE).count()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
}

struct FaceSetup {
    index: u32,
    /// screen positions in a winding with positive area
    screen: [[f64; 2]; 3],
    inv_z: [f64; 3],
    /// original vertex slot of each winding position
    slot: [usize; 3],
    area: f64,
    top_left: [bool; 3],
    x_range: (usize, usize),
    y_range: (usize, usize),
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

fn setup(camera: &Camera, mesh: &PosedMesh, index: usize) -> Option<FaceSetup> {
    let f = mesh.faces[index];
    let p = f.map(|i| mesh.vertices[i as usize]);
    if p.iter().any(|q| q.z <= MIN_DEPTH) {
        return None;
    }
    let mut screen = p.map(|q| [camera.fx * q.x / q.z + camera.cx, camera.fy * q.y / q.z + camera.cy]);
    let mut inv_z = p.map(|q| 1.0 / q.z);
    let mut slot = [0, 1, 2];
    let mut area = edge(screen[0], screen[1], screen[2]);
    if area.abs() < 1e-12 || !area.is_finite() {
        return None;
    }
    if area < 0.0 {
        screen.swap(1, 2);
        inv_z.swap(1, 2);
        slot.swap(1, 2);
        area = -area;
    }
    let xs = screen.map(|s| s[0]);
    let ys = screen.map(|s| s[1]);
    let lo_x = xs.iter().copied().fold(f64::INFINITY, f64::min).ceil().max(0.0);
    let hi_x = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor();
    let lo_y = ys.iter().copied().fold(f64::INFINITY, f64::min).ceil().max(0.0);
    let hi_y = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor();
    let hi_x = hi_x.min(camera.width as f64 - 1.0);
    let hi_y = hi_y.min(camera.height as f64 - 1.0);
    if lo_x > hi_x || lo_y > hi_y {
        return None;
    }
    // edge k is opposite vertex k
    let top_left = [
        is_top_left(screen[1], screen[2]),
        is_top_left(screen[2], screen[0]),
        is_top_left(screen[0], screen[1]),
    ];
    Some(FaceSetup {
        index: index as u32,
        screen,
        inv_z,
        slot,
        area,
        top_left,
        x_range: (lo_x as usize, hi_x as usize),
        y_range: (lo_y as usize, hi_y as usize),
    })
}

impl FaceSetup {
    fn shade(&self, u: usize, v: usize) -> Option<Sample> {
        let p = [u as f64, v as f64];
        let s = &self.screen;
        let e = [edge(s[1], s[2], p), edge(s[2], s[0], p), edge(s[0], s[1], p)];
        for k in 0..3 {
            if e[k] < 0.0 || (e[k] == 0.0 && !self.top_left[k]) {
                return None;
            }
        }
        let w = e.map(|x| x / self.area);
        let q = [w[0] * self.inv_z[0], w[1] * self.inv_z[1], w[2] * self.inv_z[2]];
        let sum = q[0] + q[1] + q[2];
        let mut bary = [0.0; 3];
        for k in 0..3 {
            bary[self.slot[k]] = q[k] / sum;
        }
        Some(Sample {
            face: self.index,
            bary,
            depth: 1.0 / sum,
        })
    }
}

pub fn rasterize(camera: &Camera, mesh: &PosedMesh) -> Result<RasterMap> {
    rasterize_with(camera, mesh, Exec::default())
}

/// Rasterizes `mesh`; rows are independent so `exec` never changes the result.
pub fn rasterize_with(camera: &Camera, mesh: &PosedMesh, exec: Exec) -> Result<RasterMap> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if mesh.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument("mesh vertex is not finite".into()));
    }
    let (w, h) = camera.size();
    let faces: Vec<FaceSetup> = (0..mesh.faces.len()).filter_map(|i| setup(camera, mesh, i)).collect();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); h];
    for (k, f) in faces.iter().enumerate() {
        for row in &mut rows[f.y_range.0..=f.y_range.1] {
            row.push(k);
        }
    }
    let mut raster = RasterMap::empty(w, h);
    exec.for_each_chunk_mut(&mut raster.samples, w, |v, line| {
        for &k in &rows[v] {
            let f = &faces[k];
            for u in f.x_range.0..=f.x_range.1 {
                if let Some(s) = f.shade(u, v) {
                    if s.depth < line[u].depth - DEPTH_TIE_EPS {
                        line[u] = s;
                    }
                }
            }
        }
    });
    Ok(raster)
}

/// Pixels owned by some face.
pub fn silhouette(raster: &RasterMap) -> Mask {
    let (w, h) = raster.size();
    Mask::from_fn(w, h, |u, v| raster.face(u, v).is_some())
}

/// Interpolates per-vertex attributes (`channels` values per vertex) with the
/// raster's barycentric weights; uncovered pixels are 0.
pub fn interpolate_attributes(
    raster: &RasterMap,
    mesh: &PosedMesh,
    values: &[f64],
    channels: usize,
) -> Result<MultiChannelMap> {
    if values.len() != mesh.vertices.len() * channels {
        return Err(Error::InvalidArgument(format!(
            "expected {} attribute values, got {}",
            mesh.vertices.len() * channels,
            values.len()
        )));
    }
    let (w, h) = raster.size();
    let mut out = MultiChannelMap::filled(w, h, channels, 0.0);
    for v in 0..h {
        for u in 0..w {
            if let Some(s) = raster.sample(u, v) {
                let face = mesh.faces[s.face as usize];
                for c in 0..channels {
                    let x: f64 = (0..3)
                        .map(|k| s.bary[k] * values[face[k] as usize * channels + c])
                        .sum();
                    out.set(u, v, c, x);
                }
            }
        }
    }
    Ok(out)
}

/// Renders per-vertex RGB colors in `[0, 1]`.
pub fn render_vertex_colors(raster: &RasterMap, mesh: &PosedMesh, colors: &[[f64; 3]]) -> Result<MultiChannelMap> {
    let flat: Vec<f64> = colors.iter().flatten().copied().collect();
    interpolate_attributes(raster, mesh, &flat, 3)
}

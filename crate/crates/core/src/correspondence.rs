//! Dense body correspondences between two posed meshes of the same topology.
//!
//! For every pixel covered by the target body, the displacement field stores
//! the offset from that pixel to the projection of the corresponding source
//! surface point (same face, same barycentric weights). Warping gathers
//! through the field, so `warp(source_image, field)` moves source content
//! onto the target layout.

use serde::{Deserialize, Serialize};

use crate::body_model::PosedMesh;
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::Vec3;
use crate::raster::RasterMap;
use crate::scene_io::{FloatMap, Mask};
use image::{Rgb, RgbImage};

/// Float image with interleaved channels, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelMap {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl MultiChannelMap {
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        MultiChannelMap {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "map buffer has {} samples, expected {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(MultiChannelMap {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for v in 0..height {
            for u in 0..width {
                for c in 0..channels {
                    data.push(f(u, v, c));
                }
            }
        }
        MultiChannelMap {
            width,
            height,
            channels,
            data,
        }
    }

    /// Unit-scale copy of an 8-bit RGB image.
    pub fn from_rgb8(img: &RgbImage) -> Self {
        MultiChannelMap {
            width: img.width() as usize,
            height: img.height() as usize,
            channels: 3,
            data: img.as_raw().iter().map(|&x| x as f64 / 255.0).collect(),
        }
    }

    /// Rounds the first three channels from unit scale to 8 bits.
    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |u, v| {
            let px = self.pixel(u as usize, v as usize);
            let q = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
            let c = |k: usize| q(px[k.min(self.channels - 1)]);
            Rgb([c(0), c(1), c(2)])
        })
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn get(&self, u: usize, v: usize, c: usize) -> f64 {
        self.data[(v * self.width + u) * self.channels + c]
    }

    pub fn set(&mut self, u: usize, v: usize, c: usize, x: f64) {
        self.data[(v * self.width + u) * self.channels + c] = x;
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let i = (v * self.width + u) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Bilinear sample at continuous position `(x, y)`, clamped to the edge.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (ax, ay) = (x - x0 as f64, y - y0 as f64);
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let top = self.get(x0, y0, c) * (1.0 - ax) + self.get(x1, y0, c) * ax;
            let bottom = self.get(x0, y1, c) * (1.0 - ax) + self.get(x1, y1, c) * ax;
            *o = top * (1.0 - ay) + bottom * ay;
        }
    }

    pub fn to_float_map(&self) -> FloatMap {
        FloatMap {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&x| x as f32).collect(),
        }
    }
}

/// Per-pixel 2D offsets (pixels) with a validity flag; invalid pixels hold (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    offsets: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

/// Channel names of the field's PFM export.
pub const FIELD_CHANNELS: [&str; 3] = ["dx", "dy", "valid"];
/// Channel names of the dense pose PFM export; part is -1 where empty.
pub const DENSE_POSE_CHANNELS: [&str; 3] = ["part", "u", "v"];

/// JSON companion naming the channels of a multi-channel PFM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelHeader {
    pub kind: String,
    pub width: usize,
    pub height: usize,
    pub channels: Vec<String>,
}

impl DisplacementField {
    pub fn invalid(width: usize, height: usize) -> Self {
        DisplacementField {
            width,
            height,
            offsets: vec![[0.0; 2]; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Every pixel valid with the same offset.
    pub fn constant(width: usize, height: usize, offset: [f64; 2]) -> Self {
        DisplacementField {
            width,
            height,
            offsets: vec![offset; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> Option<[f64; 2]> {
        let i = v * self.width + u;
        self.valid[i].then_some(self.offsets[i])
    }

    /// Marks `(u, v)` valid with `offset`, or invalid (zeroed) when `None`.
    pub fn set(&mut self, u: usize, v: usize, offset: Option<[f64; 2]>) {
        let i = v * self.width + u;
        match offset {
            Some(o) if o[0].is_finite() && o[1].is_finite() => {
                self.offsets[i] = o;
                self.valid[i] = true;
            }
            _ => {
                self.offsets[i] = [0.0; 2];
                self.valid[i] = false;
            }
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    pub fn validity_mask(&self) -> Mask {
        Mask::from_fn(self.width, self.height, |u, v| self.valid[v * self.width + u])
    }

    /// Adds an externally estimated correction on valid pixels (`M = ΔM + M_B`).
    pub fn with_correction(&self, correction: &DisplacementField) -> Result<Self> {
        check_size("correction field", self.size(), correction.size())?;
        let mut out = self.clone();
        for i in 0..self.valid.len() {
            if self.valid[i] && correction.valid[i] {
                out.offsets[i][0] += correction.offsets[i][0];
                out.offsets[i][1] += correction.offsets[i][1];
            }
        }
        Ok(out)
    }

    pub fn to_float_map(&self) -> FloatMap {
        let data = self
            .offsets
            .iter()
            .zip(&self.valid)
            .flat_map(|(o, &ok)| [o[0] as f32, o[1] as f32, if ok { 1.0 } else { 0.0 }])
            .collect();
        FloatMap {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn from_float_map(map: &FloatMap) -> Result<Self> {
        if map.channels != 3 {
            return Err(Error::format("displacement field", "expected 3 channels"));
        }
        let mut field = DisplacementField::invalid(map.width, map.height);
        for (i, px) in map.data.chunks_exact(3).enumerate() {
            if px[2] > 0.5 {
                field.offsets[i] = [px[0] as f64, px[1] as f64];
                field.valid[i] = true;
            }
        }
        Ok(field)
    }

    pub fn header(&self) -> ChannelHeader {
        ChannelHeader {
            kind: "displacement-field".into(),
            width: self.width,
            height: self.height,
            channels: FIELD_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn check_size(layer: &str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            layer: layer.into(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Body part and chart coordinates of one visible surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensePoint {
    pub part: u8,
    pub uv: [f32; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensePoseMap {
    width: usize,
    height: usize,
    entries: Vec<Option<DensePoint>>,
}

impl DensePoseMap {
    pub fn empty(width: usize, height: usize) -> Self {
        DensePoseMap {
            width,
            height,
            entries: vec![None; width * height],
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> Option<DensePoint> {
        self.entries[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, entry: Option<DensePoint>) {
        self.entries[v * self.width + u] = entry;
    }

    /// Keeps only the entries inside `mask`.
    pub fn restricted_to(&self, mask: &Mask) -> Result<Self> {
        check_size("mask", self.size(), mask.size())?;
        let mut out = self.clone();
        for (i, &on) in mask.as_slice().iter().enumerate() {
            if !on {
                out.entries[i] = None;
            }
        }
        Ok(out)
    }

    pub fn to_float_map(&self) -> FloatMap {
        let data = self
            .entries
            .iter()
            .flat_map(|e| match e {
                Some(p) => [p.part as f32, p.uv[0], p.uv[1]],
                None => [-1.0, 0.0, 0.0],
            })
            .collect();
        FloatMap {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn from_float_map(map: &FloatMap) -> Result<Self> {
        if map.channels != 3 {
            return Err(Error::format("dense pose", "expected 3 channels"));
        }
        let entries = map
            .data
            .chunks_exact(3)
            .map(|px| {
                (px[0] >= 0.0).then(|| DensePoint {
                    part: px[0] as u8,
                    uv: [px[1], px[2]],
                })
            })
            .collect();
        Ok(DensePoseMap {
            width: map.width,
            height: map.height,
            entries,
        })
    }

    pub fn header(&self) -> ChannelHeader {
        ChannelHeader {
            kind: "dense-pose".into(),
            width: self.width,
            height: self.height,
            channels: DENSE_POSE_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn body_displacement_field(
    camera: &Camera,
    source: &PosedMesh,
    target: &PosedMesh,
    target_raster: &RasterMap,
) -> Result<DisplacementField> {
    body_displacement_field_with(camera, source, target, target_raster, Exec::default())
}

/// Offsets from each target-covered pixel to the projection of the matching
/// source surface point. Pixels whose source point is behind the camera are invalid.
pub fn body_displacement_field_with(
    camera: &Camera,
    source: &PosedMesh,
    target: &PosedMesh,
    target_raster: &RasterMap,
    exec: Exec,
) -> Result<DisplacementField> {
    if !source.same_topology(target) {
        return Err(Error::TopologyMismatch(format!(
            "source has {} vertices / {} faces, target {} / {}",
            source.vertices.len(),
            source.faces.len(),
            target.vertices.len(),
            target.faces.len()
        )));
    }
    check_size("target raster", camera.size(), target_raster.size())?;
    let (w, h) = camera.size();
    let rows = exec.map_range(h, |v| {
        (0..w)
            .map(|u| {
                let s = target_raster.sample(u, v)?;
                let face = source.faces[s.face as usize];
                let point = (0..3).fold(Vec3::zeros(), |acc, k| {
                    acc + source.vertices[face[k] as usize] * s.bary[k]
                });
                let q = camera.project(&point).ok()?;
                Some([q.u - u as f64, q.v - v as f64])
            })
            .collect::<Vec<_>>()
    });
    let mut field = DisplacementField::invalid(w, h);
    for (v, row) in rows.into_iter().enumerate() {
        for (u, o) in row.into_iter().enumerate() {
            field.set(u, v, o);
        }
    }
    Ok(field)
}

/// Part of the barycentric-dominant vertex and interpolated chart coordinates.
pub fn dense_pose_map(raster: &RasterMap, mesh: &PosedMesh) -> DensePoseMap {
    let (w, h) = raster.size();
    let mut out = DensePoseMap::empty(w, h);
    for v in 0..h {
        for u in 0..w {
            let Some(s) = raster.sample(u, v) else {
                continue;
            };
            let face = mesh.faces[s.face as usize];
            let mut k_max = 0;
            for k in 1..3 {
                if s.bary[k] > s.bary[k_max] {
                    k_max = k;
                }
            }
            let mut uv = [0.0f64; 2];
            for k in 0..3 {
                let t = mesh.per_vertex_uv[face[k] as usize];
                uv[0] += s.bary[k] * t[0];
                uv[1] += s.bary[k] * t[1];
            }
            out.set(
                u,
                v,
                Some(DensePoint {
                    part: mesh.per_vertex_part[face[k_max] as usize],
                    uv: [uv[0].clamp(0.0, 1.0) as f32, uv[1].clamp(0.0, 1.0) as f32],
                }),
            );
        }
    }
    out
}

pub fn warp(map: &MultiChannelMap, field: &DisplacementField, fill: f64) -> Result<MultiChannelMap> {
    warp_with(map, field, fill, Exec::default())
}

/// Gathers `map` at `p + offset(p)` on valid pixels; `fill` elsewhere.
pub fn warp_with(map: &MultiChannelMap, field: &DisplacementField, fill: f64, exec: Exec) -> Result<MultiChannelMap> {
    check_size("displacement field", map.size(), field.size())?;
    let (w, h) = map.size();
    let ch = map.channels();
    let mut out = MultiChannelMap::filled(w, h, ch, fill);
    exec.for_each_chunk_mut(&mut out.data, w * ch, |v, line| {
        for u in 0..w {
            if let Some(o) = field.get(u, v) {
                map.sample_bilinear(u as f64 + o[0], v as f64 + o[1], &mut line[u * ch..(u + 1) * ch]);
            }
        }
    });
    Ok(out)
}

/// Resamples a field to a new grid: nearest-neighbour validity, bilinear
/// offsets over valid neighbours, offsets scaled by the grid ratio.
pub fn rescale_field(field: &DisplacementField, new_width: usize, new_height: usize) -> Result<DisplacementField> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::InvalidArgument("rescale target must be at least 1x1".into()));
    }
    let (w, h) = field.size();
    let sx = w as f64 / new_width as f64;
    let sy = h as f64 / new_height as f64;
    let mut out = DisplacementField::invalid(new_width, new_height);
    for v in 0..new_height {
        for u in 0..new_width {
            let x = ((u as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let y = ((v as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
            let (nx, ny) = (x.round() as usize, y.round() as usize);
            if field.get(nx, ny).is_none() {
                continue;
            }
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (ax, ay) = (x - x0 as f64, y - y0 as f64);
            let taps = [
                (x0, y0, (1.0 - ax) * (1.0 - ay)),
                (x1, y0, ax * (1.0 - ay)),
                (x0, y1, (1.0 - ax) * ay),
                (x1, y1, ax * ay),
            ];
            let mut acc = [0.0; 2];
            let mut total = 0.0;
            for (tx, ty, wt) in taps {
                if wt > 0.0 {
                    if let Some(o) = field.get(tx, ty) {
                        acc[0] += o[0] * wt;
                        acc[1] += o[1] * wt;
                        total += wt;
                    }
                }
            }
            out.set(u, v, Some([acc[0] / total / sx, acc[1] / total / sy]));
        }
    }
    Ok(out)
}

//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls the rasterizer, the field builder or the filters under
//! test; each oracle recomputes its quantity from first principles.
#![allow(dead_code)]

use bodyscene::body_model::PosedMesh;
use bodyscene::camera::Camera;
use bodyscene::correspondence::{DisplacementField, MultiChannelMap};
use bodyscene::metrics::SsimConfig;
use bodyscene::placement::Capsule;
use bodyscene::raster::RasterMap;
use bodyscene::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub face: usize,
    pub t: f64,
    pub bary: [f64; 3],
}

/// Möller–Trumbore intersection of the ray `t·dir` (origin at the camera).
fn intersect(dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<(f64, [f64; 3])> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let s = -a;
    let bu = s.dot(&p) / det;
    let q = s.cross(&e1);
    let bv = dir.dot(&q) / det;
    let bw = 1.0 - bu - bv;
    if bu < 0.0 || bv < 0.0 || bw < 0.0 {
        return None;
    }
    let t = e2.dot(&q) / det;
    (t > 0.0).then_some((t, [bw, bu, bv]))
}

/// Nearest ray/triangle hit through every pixel center. Faces are only
/// tested inside their projected pixel bounding box (a cheap prefilter).
pub fn ray_cast(camera: &Camera, mesh: &PosedMesh) -> Vec<Option<Hit>> {
    let (w, h) = camera.size();
    let mut hits: Vec<Option<Hit>> = vec![None; w * h];
    for (f, face) in mesh.faces.iter().enumerate() {
        let vs = face.map(|i| mesh.vertices[i as usize]);
        if vs.iter().any(|v| v.z <= 1e-6) {
            continue;
        }
        let px: Vec<(f64, f64)> = vs
            .iter()
            .map(|v| (camera.fx * v.x / v.z + camera.cx, camera.fy * v.y / v.z + camera.cy))
            .collect();
        let lo_u = px.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let hi_u = px
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min((w - 1) as f64);
        let lo_v = px.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let hi_v = px
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min((h - 1) as f64);
        if hi_u < 0.0 || hi_v < 0.0 {
            continue;
        }
        for v in lo_v..=hi_v as usize {
            for u in lo_u..=hi_u as usize {
                let dir = Vec3::new(
                    (u as f64 - camera.cx) / camera.fx,
                    (v as f64 - camera.cy) / camera.fy,
                    1.0,
                );
                if let Some((t, bary)) = intersect(&dir, &vs[0], &vs[1], &vs[2]) {
                    let slot = &mut hits[v * w + u];
                    if slot.is_none_or(|old| t < old.t - 1e-9) {
                        *slot = Some(Hit { face: f, t, bary });
                    }
                }
            }
        }
    }
    hits
}

/// Smallest barycentric weight: how close a hit is to a triangle edge.
pub fn edge_margin(h: &Hit) -> f64 {
    h.bary.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Barycentric weights of the pixel-center ray's crossing with the plane of
/// `(a, b, c)`, without an inside test.
pub fn ray_barycentric(camera: &Camera, u: usize, v: usize, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<[f64; 3]> {
    let dir = Vec3::new(
        (u as f64 - camera.cx) / camera.fx,
        (v as f64 - camera.cy) / camera.fy,
        1.0,
    );
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let s = -a;
    let bu = s.dot(&p) / det;
    let bv = dir.dot(&s.cross(&e1)) / det;
    Some([1.0 - bu - bv, bu, bv])
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FieldComparison {
    pub max_error: f64,
    pub compared: usize,
    /// Pixels where the oracle and the raster picked different faces (edges and ties).
    pub face_disagreements: usize,
    pub validity_mismatches: usize,
}

/// Compares a field against projections of exact barycentric source points,
/// using the ray-cast hit on the target mesh for the barycentric weights.
pub fn compare_field(
    camera: &Camera,
    source: &PosedMesh,
    target: &PosedMesh,
    raster: &RasterMap,
    field: &DisplacementField,
) -> FieldComparison {
    let hits = ray_cast(camera, target);
    let (w, h) = camera.size();
    let mut out = FieldComparison::default();
    for v in 0..h {
        for u in 0..w {
            let got = field.get(u, v);
            let Some(hit) = hits[v * w + u] else {
                if got.is_some() {
                    out.validity_mismatches += 1;
                }
                continue;
            };
            if raster.face(u, v) != Some(hit.face as u32) {
                out.face_disagreements += 1;
                continue;
            }
            let face = source.faces[hit.face];
            let p = (0..3).fold(Vec3::zeros(), |acc, k| {
                acc + source.vertices[face[k] as usize] * hit.bary[k]
            });
            let expect = (p.z > 1e-6).then(|| {
                [
                    camera.fx * p.x / p.z + camera.cx - u as f64,
                    camera.fy * p.y / p.z + camera.cy - v as f64,
                ]
            });
            match (got, expect) {
                (Some(g), Some(e)) => {
                    out.compared += 1;
                    out.max_error = out.max_error.max((g[0] - e[0]).abs()).max((g[1] - e[1]).abs());
                }
                (None, None) => {}
                _ => out.validity_mismatches += 1,
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
/// Mean absolute channel error of `warped` against `target` on pixels where
/// the field is valid and every bilinear tap lands on source-visible surface
/// within `depth_tol` of the source point's depth.
pub fn doubly_visible_error(
    camera: &Camera,
    source: &PosedMesh,
    source_raster: &RasterMap,
    target_raster: &RasterMap,
    field: &DisplacementField,
    warped: &MultiChannelMap,
    target: &MultiChannelMap,
    depth_tol: f64,
) -> (f64, usize) {
    let (w, h) = camera.size();
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in 0..h {
        for u in 0..w {
            let (Some(o), Some(s)) = (field.get(u, v), target_raster.sample(u, v)) else {
                continue;
            };
            let face = source.faces[s.face as usize];
            let p = (0..3).fold(Vec3::zeros(), |acc, k| {
                acc + source.vertices[face[k] as usize] * s.bary[k]
            });
            let (x, y) = (u as f64 + o[0], v as f64 + o[1]);
            if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
                continue;
            }
            let taps = [
                (x.floor(), y.floor()),
                (x.ceil(), y.floor()),
                (x.floor(), y.ceil()),
                (x.ceil(), y.ceil()),
            ];
            let visible = taps.iter().all(|&(tx, ty)| {
                source_raster
                    .depth(tx as usize, ty as usize)
                    .is_some_and(|d| (d - p.z).abs() < depth_tol)
            });
            if !visible {
                continue;
            }
            for c in 0..3 {
                sum += (warped.get(u, v, c) - target.get(u, v, c)).abs();
            }
            n += 3;
        }
    }
    (if n == 0 { 0.0 } else { sum / n as f64 }, n / 3)
}

/// Point-in-capsule count over all (point, capsule) pairs.
pub fn brute_force_collisions(capsules: &[Capsule], points: &[Vec3], excluded: &[usize]) -> usize {
    points
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            !excluded.contains(i)
                && capsules.iter().any(|c| {
                    let ab = c.endpoint_b - c.endpoint_a;
                    let len2 = ab.norm_squared();
                    let t = if len2 > 0.0 {
                        ((*p - c.endpoint_a).dot(&ab) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    (*p - (c.endpoint_a + ab * t)).norm_squared() < c.radius * c.radius
                })
        })
        .count()
}

/// SSIM with the full 2D Gaussian window summed directly at every window position.
pub fn direct_ssim(a: &MultiChannelMap, b: &MultiChannelMap, cfg: &SsimConfig) -> f64 {
    let (w, h) = a.size();
    let win = cfg.window;
    let half = (win / 2) as f64;
    let mut weights = vec![0.0; win * win];
    let mut total = 0.0;
    for j in 0..win {
        for i in 0..win {
            let r2 = (i as f64 - half).powi(2) + (j as f64 - half).powi(2);
            let g = (-r2 / (2.0 * cfg.sigma * cfg.sigma)).exp();
            weights[j * win + i] = g;
            total += g;
        }
    }
    weights.iter_mut().for_each(|g| *g /= total);
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let mut acc = 0.0;
    for c in 0..a.channels() {
        let mut s = 0.0;
        for y in 0..=h - win {
            for x in 0..=w - win {
                let (mut ma, mut mb) = (0.0, 0.0);
                for j in 0..win {
                    for i in 0..win {
                        let g = weights[j * win + i];
                        ma += g * a.get(x + i, y + j, c);
                        mb += g * b.get(x + i, y + j, c);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for j in 0..win {
                    for i in 0..win {
                        let g = weights[j * win + i];
                        let da = a.get(x + i, y + j, c) - ma;
                        let db = b.get(x + i, y + j, c) - mb;
                        va += g * da * da;
                        vb += g * db * db;
                        cov += g * da * db;
                    }
                }
                s += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        acc += s / ((w - win + 1) * (h - win + 1)) as f64;
    }
    acc / a.channels() as f64
}

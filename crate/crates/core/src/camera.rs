//! Full-perspective pinhole camera without lens distortion.
//!
//! Pixel centers sit at integer coordinates; `(u, v)` is column, row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scene_io::{DepthMap, Mask};

/// Points closer than this to the image plane are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Image-plane position of a projected point plus its camera-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Back-projected points with the pixel each one came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub pixels: Vec<(usize, usize)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "camera focal lengths must be positive and finite (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("camera image size must be at least 1x1".into()));
        }
        Ok(())
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn project(&self, point: &Vec3) -> Result<Projection> {
        if point.z <= MIN_DEPTH {
            return Err(Error::BehindCamera { z: point.z });
        }
        Ok(Projection {
            u: self.fx * point.x / point.z + self.cx,
            v: self.fy * point.y / point.z + self.cy,
            depth: point.z,
        })
    }

    /// Camera-space point seen at image position `(u, v)` with depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    /// Back-projects every valid-depth pixel (optionally restricted to `mask`).
    pub fn back_project(&self, depth: &DepthMap, mask: Option<&Mask>) -> Result<PointCloud> {
        if depth.size() != self.size() {
            return Err(Error::DimensionMismatch {
                layer: "depth".into(),
                expected: self.size(),
                found: depth.size(),
            });
        }
        if let Some(m) = mask {
            if m.size() != self.size() {
                return Err(Error::DimensionMismatch {
                    layer: "mask".into(),
                    expected: self.size(),
                    found: m.size(),
                });
            }
        }
        let mut cloud = PointCloud::default();
        for v in 0..self.height {
            for u in 0..self.width {
                let z = depth.get(u, v);
                if !(z > 0.0) || !z.is_finite() {
                    continue;
                }
                if mask.is_some_and(|m| !m.get(u, v)) {
                    continue;
                }
                cloud.points.push(self.unproject(u as f64, v as f64, z as f64));
                cloud.pixels.push((u, v));
            }
        }
        Ok(cloud)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_and_closed_form() {
        let p = cam().project(&Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (320.0, 240.0, 2.0));
        let p = cam().project(&Vec3::new(1.0, 0.0, 2.0)).unwrap();
        assert_eq!(p.u, 570.0);
    }

    #[test]
    fn behind_camera_rejected() {
        assert!(matches!(
            cam().project(&Vec3::new(0.0, 0.0, 1e-7)),
            Err(Error::BehindCamera { .. })
        ));
        assert!(cam().project(&Vec3::new(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn project_unproject_round_trip() {
        let p = Vec3::new(0.37, -0.81, 2.9);
        let q = cam().project(&p).unwrap();
        let back = cam().unproject(q.u, q.v, q.depth);
        assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn constant_plane_back_projection() {
        let c = Camera::new(100.0, 80.0, 15.5, 11.5, 32, 24).unwrap();
        let depth = DepthMap::filled(32, 24, 2.0);
        let cloud = c.back_project(&depth, None).unwrap();
        assert_eq!(cloud.len(), 32 * 24);
        assert!(cloud.points.iter().all(|p| p.z == 2.0));
        // pixel (0, 0) is the first emitted point
        let p0 = cloud.points[0];
        assert!((p0.x - (0.0 - 15.5) * 2.0 / 100.0).abs() < 1e-15);
        assert!((p0.y - (0.0 - 11.5) * 2.0 / 80.0).abs() < 1e-15);
        let last = cloud.points[cloud.len() - 1];
        assert!((last.x - (31.0 - 15.5) * 2.0 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_depth_is_skipped() {
        let c = Camera::new(100.0, 100.0, 4.0, 4.0, 8, 8).unwrap();
        let depth = DepthMap::filled(8, 8, 0.0);
        assert!(c.back_project(&depth, None).unwrap().is_empty());
    }

    #[test]
    fn mask_and_dimension_checks() {
        let c = Camera::new(100.0, 100.0, 4.0, 4.0, 8, 8).unwrap();
        let depth = DepthMap::filled(8, 8, 1.5);
        let mut mask = Mask::new(8, 8);
        mask.set(3, 5, true);
        let cloud = c.back_project(&depth, Some(&mask)).unwrap();
        assert_eq!(cloud.pixels, vec![(3, 5)]);
        let wrong = DepthMap::filled(4, 8, 1.0);
        assert!(matches!(
            c.back_project(&wrong, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(Camera::new(0.0, 1.0, 0.0, 0.0, 1, 1).is_err());
        assert!(Camera::new(1.0, 1.0, 0.0, 0.0, 0, 1).is_err());
    }
}

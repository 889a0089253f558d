//! Support-plane estimation from a floor point cloud.
//!
//! RANSAC proposes planes from three-point samples; the winning consensus
//! set is refit with total least squares and then re-thresholded against
//! the refit plane, so reported inliers always satisfy the threshold.

use nalgebra::SymmetricEigen;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{Mat3, Vec3};
use crate::rng::{self, tags};

pub const DEFAULT_THRESHOLD: f64 = 0.02;
pub const DEFAULT_ITERATIONS: usize = 1000;
/// Minimum support beyond the three sample points for a hypothesis to count.
pub const MIN_SUPPORT: usize = 3;

/// `n·x + d = 0`, with `n` oriented toward camera-up (`n·(0,-1,0) ≥ 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub d: f64,
    pub inlier_indices: Vec<usize>,
    pub rms_residual: f64,
}

/// JSON form of a plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSummary {
    pub normal: [f64; 3],
    pub d: f64,
    pub rms: f64,
    pub num_inliers: usize,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.d
    }

    /// Projection of `p` onto the plane.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.normal * self.signed_distance(p)
    }

    pub fn summary(&self) -> PlaneSummary {
        PlaneSummary {
            normal: [self.normal.x, self.normal.y, self.normal.z],
            d: self.d,
            rms: self.rms_residual,
            num_inliers: self.inlier_indices.len(),
        }
    }

    /// Angle between the normals of two planes, in radians.
    pub fn normal_angle_to(&self, normal: &Vec3) -> f64 {
        let c = self.normal.cross(normal).norm();
        c.atan2(self.normal.dot(normal))
    }
}

fn orient(normal: Vec3, d: f64) -> (Vec3, f64) {
    let key = [-normal.y, -normal.z, -normal.x];
    let flip = key.iter().find(|&&k| k != 0.0).is_some_and(|&k| k < 0.0);
    if flip {
        (-normal, -d)
    } else {
        (normal, d)
    }
}

fn rms(points: &[Vec3], indices: &[usize], normal: &Vec3, d: f64) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let ss: f64 = indices.iter().map(|&i| (normal.dot(&points[i]) + d).powi(2)).sum();
    (ss / indices.len() as f64).sqrt()
}

fn tls(points: &[Vec3], indices: &[usize]) -> Result<(Vec3, f64)> {
    if indices.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "plane fit needs at least 3 points, got {}",
            indices.len()
        )));
    }
    let n = indices.len() as f64;
    let centroid = indices.iter().fold(Vec3::zeros(), |a, &i| a + points[i]) / n;
    let mut cov = Mat3::zeros();
    for &i in indices {
        let q = points[i] - centroid;
        cov += q * q.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, top) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(top > 0.0) || mid <= top * 1e-12 {
        return Err(Error::DegenerateGeometry("points are coincident or collinear".into()));
    }
    let normal = eig.eigenvectors.column(order[0]).normalize();
    Ok(orient(normal, -normal.dot(&centroid)))
}

/// Total-least-squares plane through all points.
pub fn fit_plane_lsq(points: &[Vec3]) -> Result<Plane> {
    let all: Vec<usize> = (0..points.len()).collect();
    let (normal, d) = tls(points, &all)?;
    Ok(Plane {
        normal,
        d,
        rms_residual: rms(points, &all, &normal, d),
        inlier_indices: all,
    })
}

/// Winning three-point hypothesis alongside the refit plane.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacOutcome {
    pub plane: Plane,
    pub hypothesis_normal: Vec3,
    pub hypothesis_d: f64,
    pub hypothesis_inliers: Vec<usize>,
    pub iteration: usize,
}

impl RansacOutcome {
    /// RMS of the raw hypothesis over its own consensus set.
    pub fn hypothesis_rms(&self, points: &[Vec3]) -> f64 {
        rms(
            points,
            &self.hypothesis_inliers,
            &self.hypothesis_normal,
            self.hypothesis_d,
        )
    }

    /// RMS of the refit plane over the hypothesis consensus set.
    pub fn refit_rms_on_hypothesis_inliers(&self, points: &[Vec3]) -> f64 {
        rms(points, &self.hypothesis_inliers, &self.plane.normal, self.plane.d)
    }
}

pub fn fit_plane_ransac(points: &[Vec3], threshold: f64, iterations: usize, seed: u64) -> Result<Plane> {
    fit_plane_ransac_with(points, threshold, iterations, seed, Exec::default()).map(|o| o.plane)
}

fn hypothesis(points: &[Vec3], seed: u64, iteration: usize) -> Option<(Vec3, f64)> {
    let mut rng = rng::substream(seed, tags::RANSAC, iteration as u64);
    let s = index::sample(&mut rng, points.len(), 3);
    let (a, b, c) = (points[s.index(0)], points[s.index(1)], points[s.index(2)]);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if !(len > 1e-12) {
        return None;
    }
    let n = n / len;
    Some(orient(n, -n.dot(&a)))
}

fn consensus(points: &[Vec3], normal: &Vec3, d: f64, threshold: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| (normal.dot(&points[i]) + d).abs() <= threshold)
        .collect()
}

/// RANSAC with an explicit execution mode; returns the hypothesis details too.
///
/// Iteration `i` draws its sample from its own RNG substream, so the
/// hypotheses do not depend on evaluation order. The kept hypothesis has the
/// largest consensus, earliest iteration on ties.
pub fn fit_plane_ransac_with(
    points: &[Vec3],
    threshold: f64,
    iterations: usize,
    seed: u64,
    exec: Exec,
) -> Result<RansacOutcome> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if !(threshold > 0.0) || iterations == 0 {
        return Err(Error::InvalidArgument(
            "RANSAC needs threshold > 0 and at least one iteration".into(),
        ));
    }
    let counts = exec.map_range(iterations, |it| {
        hypothesis(points, seed, it).map(|(n, d)| {
            let count = points.iter().filter(|p| (n.dot(p) + d).abs() <= threshold).count();
            (count, n, d)
        })
    });
    let mut best: Option<(usize, usize, Vec3, f64)> = None;
    for (it, h) in counts.into_iter().enumerate() {
        if let Some((count, n, d)) = h {
            if best.is_none_or(|(c, ..)| count > c) {
                best = Some((count, it, n, d));
            }
        }
    }
    let Some((count, iteration, hn, hd)) = best.filter(|b| b.0 >= 3 + MIN_SUPPORT) else {
        return Err(Error::EstimationFailure(format!(
            "no plane hypothesis reached {MIN_SUPPORT} supporting points beyond its sample \
             (threshold {threshold} m, {iterations} iterations)"
        )));
    };
    debug_assert!(count >= 3 + MIN_SUPPORT);
    let hypothesis_inliers = consensus(points, &hn, hd, threshold);
    let (normal, d) =
        tls(points, &hypothesis_inliers).map_err(|e| Error::EstimationFailure(format!("refit failed: {e}")))?;
    let inliers = consensus(points, &normal, d, threshold);
    let plane = Plane {
        normal,
        d,
        rms_residual: rms(points, &inliers, &normal, d),
        inlier_indices: inliers,
    };
    Ok(RansacOutcome {
        plane,
        hypothesis_normal: hn,
        hypothesis_d: hd,
        hypothesis_inliers,
        iteration,
    })
}

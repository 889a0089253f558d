//! Foreground appearance perturbation for harmonization training pairs.
//!
//! Inside the mask each pixel goes through, in order: unit scale, gamma,
//! saturation about Rec.601 luma, per-channel gain and bias, clamp, 8-bit
//! rounding. Pixels outside the mask are copied untouched.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tags};
use crate::scene_io::{write_json, write_png, Mask};

pub const GAIN_RANGE: (f64, f64) = (0.6, 1.4);
pub const BIAS_RANGE: (f64, f64) = (-0.15, 0.15);
pub const SATURATION_RANGE: (f64, f64) = (0.5, 1.5);
pub const GAMMA_RANGE: (f64, f64) = (0.7, 1.4);
/// Draws with every factor this close to identity are resampled.
pub const NEAR_IDENTITY: f64 = 0.02;
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];
pub const TRIPLET_SCHEMA: &str = "husc-harmonize-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub gain: [f64; 3],
    pub bias: [f64; 3],
    pub saturation: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl PerturbationParams {
    pub fn identity() -> Self {
        PerturbationParams {
            gain: [1.0; 3],
            bias: [0.0; 3],
            saturation: 1.0,
            gamma: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let within = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
        let ok = self.gain.iter().all(|&g| within(g, GAIN_RANGE))
            && self.bias.iter().all(|&b| within(b, BIAS_RANGE))
            && within(self.saturation, SATURATION_RANGE)
            && within(self.gamma, GAMMA_RANGE);
        if !ok {
            return Err(Error::InvalidParams(format!(
                "perturbation outside documented ranges: {self:?}"
            )));
        }
        Ok(())
    }

    /// Every factor within [`NEAR_IDENTITY`] of its identity value.
    pub fn is_near_identity(&self) -> bool {
        let near = |x: f64, id: f64| (x - id).abs() <= NEAR_IDENTITY;
        self.gain.iter().all(|&g| near(g, 1.0))
            && self.bias.iter().all(|&b| near(b, 0.0))
            && near(self.saturation, 1.0)
            && near(self.gamma, 1.0)
    }

    fn apply(&self, px: [u8; 3]) -> [u8; 3] {
        let mut c = px.map(|x| (x as f64 / 255.0).powf(self.gamma));
        let luma = LUMA[0] * c[0] + LUMA[1] * c[1] + LUMA[2] * c[2];
        for (k, x) in c.iter_mut().enumerate() {
            let s = luma + self.saturation * (*x - luma);
            *x = (self.gain[k] * s + self.bias[k]).clamp(0.0, 1.0);
        }
        c.map(|x| (x * 255.0).round() as u8)
    }
}

/// Uniform draw within the documented ranges, resampling near-identity draws.
pub fn sample_perturbation(seed: u64) -> PerturbationParams {
    let mut rng = rng::substream(seed, tags::PERTURB, 0);
    let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
    loop {
        let p = PerturbationParams {
            gain: [draw(GAIN_RANGE), draw(GAIN_RANGE), draw(GAIN_RANGE)],
            bias: [draw(BIAS_RANGE), draw(BIAS_RANGE), draw(BIAS_RANGE)],
            saturation: draw(SATURATION_RANGE),
            gamma: draw(GAMMA_RANGE),
            seed,
        };
        if !p.is_near_identity() {
            return p;
        }
    }
}

fn check_mask(img_size: (u32, u32), mask: &Mask) -> Result<()> {
    let expected = (img_size.0 as usize, img_size.1 as usize);
    if mask.size() != expected {
        return Err(Error::DimensionMismatch {
            layer: "mask".into(),
            expected,
            found: mask.size(),
        });
    }
    Ok(())
}

pub fn perturb_foreground(image: &RgbImage, mask: &Mask, params: &PerturbationParams) -> Result<RgbImage> {
    check_mask(image.dimensions(), mask)?;
    let mut out = image.clone();
    for (u, v, px) in out.enumerate_pixels_mut() {
        if mask.get(u as usize, v as usize) {
            *px = Rgb(params.apply(px.0));
        }
    }
    Ok(out)
}

/// Mask blurred by a `(2r+1)²` box, normalized by the in-bounds tap count.
pub fn feather_alpha(mask: &Mask, radius: usize) -> Vec<f64> {
    let (w, h) = mask.size();
    // summed-area table with a zero border row and column
    let mut sat = vec![0u64; (w + 1) * (h + 1)];
    for v in 0..h {
        for u in 0..w {
            sat[(v + 1) * (w + 1) + u + 1] =
                mask.get(u, v) as u64 + sat[v * (w + 1) + u + 1] + sat[(v + 1) * (w + 1) + u] - sat[v * (w + 1) + u];
        }
    }
    let mut alpha = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (u0, u1) = (u.saturating_sub(radius), (u + radius + 1).min(w));
            let (v0, v1) = (v.saturating_sub(radius), (v + radius + 1).min(h));
            let on = sat[v1 * (w + 1) + u1] + sat[v0 * (w + 1) + u0] - sat[v0 * (w + 1) + u1] - sat[v1 * (w + 1) + u0];
            alpha.push(on as f64 / ((u1 - u0) * (v1 - v0)) as f64);
        }
    }
    alpha
}

/// `alpha·fg + (1 − alpha)·bg` with a box-feathered mask as alpha.
pub fn feathered_blend(
    foreground: &RgbImage,
    mask: &Mask,
    background: &RgbImage,
    feather_radius: usize,
) -> Result<RgbImage> {
    check_mask(foreground.dimensions(), mask)?;
    if background.dimensions() != foreground.dimensions() {
        let d = |i: &RgbImage| (i.width() as usize, i.height() as usize);
        return Err(Error::DimensionMismatch {
            layer: "background".into(),
            expected: d(foreground),
            found: d(background),
        });
    }
    let alpha = feather_alpha(mask, feather_radius);
    let w = foreground.width() as usize;
    Ok(RgbImage::from_fn(foreground.width(), foreground.height(), |u, v| {
        let a = alpha[v as usize * w + u as usize];
        let (f, b) = (foreground.get_pixel(u, v).0, background.get_pixel(u, v).0);
        Rgb(std::array::from_fn(|k| {
            if a >= 1.0 {
                f[k]
            } else if a <= 0.0 {
                b[k]
            } else {
                (a * f[k] as f64 + (1.0 - a) * b[k] as f64).round() as u8
            }
        }))
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletManifest {
    pub schema: String,
    pub original: String,
    pub mask: String,
    pub perturbed: String,
    pub params: PerturbationParams,
}

/// Writes `original.png`, `mask.png`, `perturbed.png` and `params.json`; returns the written paths.
pub fn write_triplet(
    dir: &Path,
    original: &RgbImage,
    mask: &Mask,
    params: &PerturbationParams,
) -> Result<Vec<PathBuf>> {
    let perturbed = perturb_foreground(original, mask, params)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = TripletManifest {
        schema: TRIPLET_SCHEMA.into(),
        original: "original.png".into(),
        mask: "mask.png".into(),
        perturbed: "perturbed.png".into(),
        params: *params,
    };
    let paths: Vec<PathBuf> = ["original.png", "mask.png", "perturbed.png", "params.json"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_png(&paths[0], original)?;
    write_png(&paths[1], &mask.to_image())?;
    write_png(&paths[2], &perturbed)?;
    write_json(&paths[3], &manifest)?;
    Ok(paths)
}

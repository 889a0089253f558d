//! Image similarity metrics on unit-scale float images.

use serde::{Deserialize, Serialize};

use crate::correspondence::MultiChannelMap;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Gaussian-window SSIM constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "SSIM window must be odd, got {}",
                self.window
            )));
        }
        if !(self.sigma > 0.0) || !(self.dynamic_range > 0.0) {
            return Err(Error::InvalidArgument(
                "SSIM sigma and dynamic range must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Normalized 1D Gaussian taps; the 2D window is their outer product.
    pub fn kernel(&self) -> Vec<f64> {
        let c = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| (-(i as f64 - c).powi(2) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|g| g / total).collect()
    }
}

/// JSON output of the image comparison command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageComparison {
    pub ssim: f64,
    pub l1_sum: f64,
    pub l1_mean: f64,
}

fn same_shape(a: &MultiChannelMap, b: &MultiChannelMap) -> Result<()> {
    if a.size() != b.size() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch {
            layer: format!("image ({} vs {} channels)", a.channels(), b.channels()),
            expected: a.size(),
            found: b.size(),
        });
    }
    Ok(())
}

pub fn ssim(a: &MultiChannelMap, b: &MultiChannelMap, config: &SsimConfig) -> Result<f64> {
    ssim_with(a, b, config, Exec::default())
}

/// Mean SSIM over all fully inside windows, stride 1, averaged over channels.
///
/// The Gaussian filter is applied separably (rows, then columns). Each output
/// row is summed left to right and rows are added top to bottom, so both
/// execution modes give the same bits.
pub fn ssim_with(a: &MultiChannelMap, b: &MultiChannelMap, config: &SsimConfig, exec: Exec) -> Result<f64> {
    config.validate()?;
    same_shape(a, b)?;
    let (w, h) = a.size();
    let win = config.window;
    if w < win || h < win {
        return Err(Error::InvalidArgument(format!(
            "image {w}x{h} is smaller than the {win}x{win} SSIM window"
        )));
    }
    let g = config.kernel();
    let c1 = (config.k1 * config.dynamic_range).powi(2);
    let c2 = (config.k2 * config.dynamic_range).powi(2);
    let (ow, oh) = (w - win + 1, h - win + 1);
    let channels = a.channels();

    let mut total = 0.0;
    for c in 0..channels {
        // horizontal pass: five moments per (row, output column)
        let horiz = exec.map_range(h, |y| {
            let mut out = vec![[0.0f64; 5]; ow];
            for (x, o) in out.iter_mut().enumerate() {
                let mut m = [0.0; 5];
                for (k, &gk) in g.iter().enumerate() {
                    let p = a.get(x + k, y, c);
                    let q = b.get(x + k, y, c);
                    m[0] += gk * p;
                    m[1] += gk * q;
                    m[2] += gk * p * p;
                    m[3] += gk * q * q;
                    m[4] += gk * p * q;
                }
                *o = m;
            }
            out
        });
        let row_sums = exec.map_range(oh, |y| {
            let mut sum = 0.0;
            for x in 0..ow {
                let mut m = [0.0; 5];
                for (k, &gk) in g.iter().enumerate() {
                    let r = &horiz[y + k][x];
                    for i in 0..5 {
                        m[i] += gk * r[i];
                    }
                }
                sum += ssim_from_moments(&m, c1, c2);
            }
            sum
        });
        total += row_sums.iter().sum::<f64>() / (ow * oh) as f64;
    }
    Ok(total / channels as f64)
}

/// Luminance-contrast-structure product from windowed moments
/// `[μa, μb, E[a²], E[b²], E[ab]]`.
pub fn ssim_from_moments(m: &[f64; 5], c1: f64, c2: f64) -> f64 {
    let (mu_a, mu_b) = (m[0], m[1]);
    let var_a = m[2] - mu_a * mu_a;
    let var_b = m[3] - mu_b * mu_b;
    let cov = m[4] - mu_a * mu_b;
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Sum of absolute channel differences, or its per-sample mean when `mean` is set.
pub fn l1_distance(a: &MultiChannelMap, b: &MultiChannelMap, mean: bool) -> Result<f64> {
    same_shape(a, b)?;
    let sum: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum();
    Ok(if mean && !a.as_slice().is_empty() {
        sum / a.as_slice().len() as f64
    } else {
        sum
    })
}

pub fn compare(a: &MultiChannelMap, b: &MultiChannelMap, config: &SsimConfig) -> Result<ImageComparison> {
    Ok(ImageComparison {
        ssim: ssim(a, b, config)?,
        l1_sum: l1_distance(a, b, false)?,
        l1_mean: l1_distance(a, b, true)?,
    })
}

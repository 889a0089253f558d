//! Pipeline configuration: a JSON file merged with command-line flags.
//!
//! Flag names are the kebab-case form of the field names. A flag that is
//! given always wins over the file; relative paths in a file resolve against
//! the file's directory.

use std::path::{Path, PathBuf};

use bodyscene::ground_plane::{DEFAULT_ITERATIONS, DEFAULT_THRESHOLD};
use bodyscene::placement::{YawPolicy, DEFAULT_COLLISION_TOLERANCE, DEFAULT_GRID_SPACING, DEFAULT_MIN_SUPPORT};
use bodyscene::scene_io::{read_json, FloorClassSet, ScenePaths};
use bodyscene::Vec3;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Vertex budget of the built-in desk model when no asset file is given.
pub const DEFAULT_DESK_VERTICES: usize = 1200;
/// Seed of the built-in desk model; fixed so assets do not vary with the run seed.
pub const DESK_MODEL_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum YawMode {
    Fixed,
    Seeded,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory with rgb.png, depth.png, labels.png, legend.json, camera.json
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Scene color image (overrides the scene directory)
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub rgb: Option<PathBuf>,
    /// Scene depth, 16-bit millimeter PNG or PFM meters
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub depth: Option<PathBuf>,
    /// Scene label image (8-bit class ids)
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Class id to name JSON map
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub legend: Option<PathBuf>,
    /// Camera intrinsics JSON
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Body asset file; the built-in desk model when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Vertex budget of the built-in desk model
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub desk_vertices: Option<usize>,
    /// Body parameters JSON (target pose); upright and camera-facing when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Source body parameters JSON for correspondence fields
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub source_params: Option<PathBuf>,
    /// Image of the person rendered at the source parameters
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub person_rgb: Option<PathBuf>,
    /// Image to perturb
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Foreground mask PNG for perturbation
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Apply identity perturbation parameters instead of sampling
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub identity: Option<bool>,
    /// Support class names, comma separated
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long, value_delimiter = ',')]
    pub floor_classes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub ransac_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub ransac_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub grid_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub min_support: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long, value_enum)]
    pub yaw_policy: Option<YawMode>,
    /// Yaw in radians for the fixed policy
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long, allow_hyphen_values = true)]
    pub yaw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub collision_tolerance: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Placement anchor `x,y,z` in camera space (projected onto the floor plane)
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub anchor: Option<Vec<f64>>,
    /// Output directory
    #[serde(skip_serializing_if = "Option::is_none")]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn rebase(path: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = path {
        if p.as_os_str() == "." {
            *p = base.to_path_buf();
        } else if p.is_relative() {
            *p = base.join(&*p);
        }
    }
}

impl PipelineConfig {
    fn rebase_paths(&mut self, base: &Path) {
        for p in [
            &mut self.scene,
            &mut self.rgb,
            &mut self.depth,
            &mut self.labels,
            &mut self.legend,
            &mut self.camera,
            &mut self.assets,
            &mut self.params,
            &mut self.source_params,
            &mut self.person_rgb,
            &mut self.image,
            &mut self.mask,
            &mut self.out,
        ] {
            rebase(p, base);
        }
    }

    /// Reads `file` (if any) and overlays every flag that was given.
    pub fn merged(file: Option<&Path>, flags: &PipelineConfig) -> Result<PipelineConfig, CliError> {
        let mut base = match file {
            Some(path) => {
                let mut cfg: PipelineConfig = read_json(path).map_err(CliError::from)?;
                cfg.rebase_paths(path.parent().unwrap_or(Path::new(".")));
                cfg
            }
            None => PipelineConfig::default(),
        };
        let mut value = serde_json::to_value(&base).expect("config serializes");
        let over = serde_json::to_value(flags).expect("config serializes");
        if let (Some(dst), Some(src)) = (value.as_object_mut(), over.as_object()) {
            for (k, v) in src {
                if !v.is_null() {
                    dst.insert(k.clone(), v.clone());
                }
            }
        }
        base = serde_json::from_value(value).map_err(|e| CliError::usage(format!("config: {e}")))?;
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, x: Option<f64>| match x {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::usage(format!("{name} must be positive, got {v}"))),
            _ => Ok(()),
        };
        positive("ransac-threshold", self.ransac_threshold)?;
        positive("grid-spacing", self.grid_spacing)?;
        if self.ransac_iterations == Some(0) {
            return Err(CliError::usage("ransac-iterations must be at least 1"));
        }
        if let Some(y) = self.yaw {
            if !y.is_finite() {
                return Err(CliError::usage("yaw must be finite"));
            }
        }
        if let Some(a) = &self.anchor {
            if a.len() != 3 || a.iter().any(|x| !x.is_finite()) {
                return Err(CliError::usage("anchor needs three finite coordinates"));
            }
        }
        if self.floor_classes.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(CliError::usage("floor-classes must not be empty"));
        }
        Ok(())
    }

    pub fn scene_paths(&self) -> Result<ScenePaths, CliError> {
        let dir = self.scene.clone();
        let pick = |explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf, CliError> {
            explicit
                .clone()
                .or_else(|| dir.as_ref().map(|d| d.join(name)))
                .ok_or_else(|| CliError::usage(format!("no scene directory and no path for {name}")))
        };
        Ok(ScenePaths {
            rgb: pick(&self.rgb, "rgb.png")?,
            depth: pick(&self.depth, "depth.png")?,
            labels: pick(&self.labels, "labels.png")?,
            legend: pick(&self.legend, "legend.json")?,
            camera: pick(&self.camera, "camera.json")?,
        })
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::usage("--out is required"))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::usage("--seed is required for stochastic stages"))
    }

    pub fn floor_classes(&self) -> Result<FloorClassSet, CliError> {
        match &self.floor_classes {
            Some(names) => FloorClassSet::new(names).map_err(CliError::from),
            None => Ok(FloorClassSet::default()),
        }
    }

    pub fn threshold(&self) -> f64 {
        self.ransac_threshold.unwrap_or(DEFAULT_THRESHOLD)
    }

    pub fn iterations(&self) -> usize {
        self.ransac_iterations.unwrap_or(DEFAULT_ITERATIONS)
    }

    pub fn spacing(&self) -> f64 {
        self.grid_spacing.unwrap_or(DEFAULT_GRID_SPACING)
    }

    pub fn support(&self) -> usize {
        self.min_support.unwrap_or(DEFAULT_MIN_SUPPORT)
    }

    pub fn tolerance(&self) -> usize {
        self.collision_tolerance.unwrap_or(DEFAULT_COLLISION_TOLERANCE)
    }

    pub fn yaw_policy(&self) -> YawPolicy {
        match self.yaw_policy.unwrap_or(YawMode::Fixed) {
            YawMode::Fixed => YawPolicy::Fixed {
                yaw: self.yaw.unwrap_or(0.0),
            },
            YawMode::Seeded => YawPolicy::Seeded,
        }
    }

    pub fn anchor(&self) -> Option<Vec3> {
        self.anchor.as_ref().map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    /// The configuration as recorded in output manifests: everything but the
    /// output directory, so reruns into other directories write identical bytes.
    pub fn for_manifest(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_value(c).expect("config serializes")
    }
}

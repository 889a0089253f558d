//! Scene frames (RGB, metric depth, semantic labels, legend, camera) and the
//! raster file formats used throughout: PNG layers, PFM float maps, JSON.
//!
//! Depth uses 0 as the invalid sentinel. 16-bit PNG depth stores millimeters;
//! PFM depth stores meters. PFM payloads are written little-endian (scale
//! `-1.0`), rows bottom to top.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};

/// Per-pixel metric depth; 0 marks missing measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        DepthMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "depth buffer has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, z: f32) {
        self.data[v * self.width + u] = z;
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        let z = self.get(u, v);
        z > 0.0 && z.is_finite()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Mask { width, height, data }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, on: bool) {
        self.data[v * self.width + u] = on;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    /// True if every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.size() == other.size() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |u, v| {
            Luma([if self.get(u as usize, v as usize) { 255 } else { 0 }])
        })
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Mask::from_fn(img.width() as usize, img.height() as usize, |u, v| {
            img.get_pixel(u as u32, v as u32)[0] > 127
        })
    }
}

/// Per-pixel semantic class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn filled(width: usize, height: usize, id: u8) -> Self {
        LabelMap {
            width,
            height,
            data: vec![id; width * height],
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, id: u8) {
        self.data[v * self.width + u] = id;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("label buffer matches its dimensions")
    }

    pub fn from_image(img: &GrayImage) -> Self {
        LabelMap {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().clone(),
        }
    }
}

/// Class id to class name.
pub type Legend = BTreeMap<u8, String>;

/// One background image with aligned depth and semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFrame {
    pub rgb: RgbImage,
    pub depth: DepthMap,
    pub labels: LabelMap,
    pub legend: Legend,
    pub camera: Camera,
}

impl SceneFrame {
    pub fn new(rgb: RgbImage, depth: DepthMap, labels: LabelMap, legend: Legend, camera: Camera) -> Result<Self> {
        camera.validate()?;
        let expected = camera.size();
        let rgb_size = (rgb.width() as usize, rgb.height() as usize);
        for (layer, found) in [("rgb", rgb_size), ("depth", depth.size()), ("labels", labels.size())] {
            if found != expected {
                return Err(Error::DimensionMismatch {
                    layer: layer.into(),
                    expected,
                    found,
                });
            }
        }
        if let Some(&z) = depth.as_slice().iter().find(|z| !(**z >= 0.0)) {
            return Err(Error::InvalidArgument(format!("depth must be non-negative, found {z}")));
        }
        if let Some(&id) = labels.data.iter().find(|id| !legend.contains_key(id)) {
            return Err(Error::UnknownLabel { id });
        }
        Ok(SceneFrame {
            rgb,
            depth,
            labels,
            legend,
            camera,
        })
    }

    pub fn size(&self) -> (usize, usize) {
        self.camera.size()
    }
}

/// Class names treated as support surfaces. Names are matched lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorClassSet(BTreeSet<String>);

impl FloorClassSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = names.into_iter().map(|s| s.as_ref().to_lowercase()).collect();
        if set.is_empty() {
            return Err(Error::InvalidArgument("floor class set is empty".into()));
        }
        Ok(FloorClassSet(set))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(&name.to_lowercase())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for FloorClassSet {
    /// The NYUv2 support classes: floor, rug, floor mat, yoga mat.
    fn default() -> Self {
        FloorClassSet::new(["floor", "rug", "floor mat", "yoga mat"]).expect("non-empty")
    }
}

/// Pixels whose class is a support class and whose depth is valid.
pub fn floor_mask(frame: &SceneFrame, floor_classes: &FloorClassSet) -> Mask {
    let floor_ids: BTreeSet<u8> = frame
        .legend
        .iter()
        .filter(|(_, name)| floor_classes.contains(name))
        .map(|(&id, _)| id)
        .collect();
    let (w, h) = frame.size();
    Mask::from_fn(w, h, |u, v| {
        floor_ids.contains(&frame.labels.get(u, v)) && frame.depth.is_valid(u, v)
    })
}

/// File locations of the five scene layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenePaths {
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub labels: PathBuf,
    pub legend: PathBuf,
    pub camera: PathBuf,
}

impl ScenePaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        ScenePaths {
            rgb: dir.join("rgb.png"),
            depth: dir.join("depth.png"),
            labels: dir.join("labels.png"),
            legend: dir.join("legend.json"),
            camera: dir.join("camera.json"),
        }
    }
}

pub fn load_scene(paths: &ScenePaths) -> Result<SceneFrame> {
    let rgb = read_rgb(&paths.rgb)?;
    let depth = read_depth(&paths.depth)?;
    let labels = LabelMap::from_image(&read_gray(&paths.labels)?);
    let legend = read_legend(&paths.legend)?;
    let camera: Camera = read_json(&paths.camera)?;
    SceneFrame::new(rgb, depth, labels, legend, camera)
}

pub fn save_scene(frame: &SceneFrame, paths: &ScenePaths) -> Result<()> {
    write_png(&paths.rgb, &frame.rgb)?;
    write_depth(&paths.depth, &frame.depth)?;
    write_png(&paths.labels, &frame.labels.to_image())?;
    write_legend(&paths.legend, &frame.legend)?;
    write_json(&paths.camera, &frame.camera)
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Reads depth in meters from a 16-bit millimeter PNG or a single-channel PFM.
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    if is_pfm(path) {
        let map = read_pfm(path)?;
        if map.channels != 1 {
            return Err(Error::format(
                "depth PFM",
                format!("{}: expected 1 channel, found {}", path.display(), map.channels),
            ));
        }
        return DepthMap::from_vec(map.width, map.height, map.data);
    }
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?
        .into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.as_raw().iter().map(|&mm| mm as f32 / 1000.0).collect();
    DepthMap::from_vec(w, h, data)
}

/// Writes depth as PFM meters or 16-bit PNG millimeters, chosen by extension.
pub fn write_depth(path: &Path, depth: &DepthMap) -> Result<()> {
    let (w, h) = depth.size();
    if is_pfm(path) {
        return write_pfm(
            path,
            &FloatMap {
                width: w,
                height: h,
                channels: 1,
                data: depth.as_slice().to_vec(),
            },
        );
    }
    let mm: Vec<u16> = depth
        .as_slice()
        .iter()
        .map(|&m| (m as f64 * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, mm).expect("depth buffer matches dimensions");
    write_png(path, &img)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?
        .into_rgb8())
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    Ok(image::open(path)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?
        .into_luma8())
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    Ok(Mask::from_image(&read_gray(path)?))
}

pub fn write_png<P>(path: &Path, img: &ImageBuffer<P, Vec<P::Subpixel>>) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
}

pub fn read_legend(path: &Path) -> Result<Legend> {
    let raw: BTreeMap<String, String> = read_json(path)?;
    raw.into_iter()
        .map(|(k, name)| {
            k.trim()
                .parse::<u8>()
                .map(|id| (id, name))
                .map_err(|_| Error::format("legend", format!("{}: bad class id {k:?}", path.display())))
        })
        .collect()
}

pub fn write_legend(path: &Path, legend: &Legend) -> Result<()> {
    // numeric key order, not lexicographic
    let mut body = String::from("{\n");
    for (i, (id, name)) in legend.iter().enumerate() {
        let sep = if i + 1 == legend.len() { "" } else { "," };
        body.push_str(&format!(
            "  \"{id}\": {}{sep}\n",
            serde_json::to_string(name).expect("string serializes")
        ));
    }
    body.push_str("}\n");
    write_bytes(path, body.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Row-major float raster with 1 or 3 interleaved channels, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

pub fn encode_pfm(map: &FloatMap) -> Result<Vec<u8>> {
    let tag = match map.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::InvalidArgument(format!("PFM holds 1 or 3 channels, got {c}"))),
    };
    if map.data.len() != map.width * map.height * map.channels {
        return Err(Error::InvalidArgument("PFM buffer size mismatch".into()));
    }
    let mut out = format!("{tag}\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    let row_len = map.width * map.channels;
    for row in (0..map.height).rev() {
        for &x in &map.data[row * row_len..(row + 1) * row_len] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatMap> {
    let bad = |detail: &str| Error::format("PFM", detail.to_string());
    // three whitespace-separated header tokens after the tag, then one whitespace byte
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    pos += 1;
    let channels = match tokens[0] {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(bad("unknown tag")),
    };
    let width: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f32 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
    let little = scale < 0.0;
    let n = width * height * channels;
    let payload = bytes.get(pos..pos + 4 * n).ok_or_else(|| bad("truncated payload"))?;
    let mut data = vec![0f32; n];
    let row_len = width * channels;
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let x = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let file_row = i / row_len;
        let row = height - 1 - file_row;
        data[row * row_len + i % row_len] = x;
    }
    Ok(FloatMap {
        width,
        height,
        channels,
        data,
    })
}

pub fn read_pfm(path: &Path) -> Result<FloatMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes).map_err(|e| match e {
        Error::Format { what, detail } => Error::Format {
            what,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

pub fn write_pfm(path: &Path, map: &FloatMap) -> Result<()> {
    write_bytes(path, &encode_pfm(map)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera(w: usize, h: usize) -> Camera {
        Camera::new(50.0, 50.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    }

    fn legend() -> Legend {
        [
            (0u8, "wall".to_string()),
            (1, "Floor".to_string()),
            (2, "rug".to_string()),
        ]
        .into_iter()
        .collect()
    }

    fn half_floor_frame() -> SceneFrame {
        let (w, h) = (16, 12);
        let mut labels = LabelMap::filled(w, h, 0);
        for v in h / 2..h {
            for u in 0..w {
                labels.set(u, v, 1);
            }
        }
        SceneFrame::new(
            RgbImage::new(w as u32, h as u32),
            DepthMap::filled(w, h, 2.0),
            labels,
            legend(),
            camera(w, h),
        )
        .unwrap()
    }

    #[test]
    fn floor_mask_matches_constructed_half() {
        let frame = half_floor_frame();
        let mask = floor_mask(&frame, &FloorClassSet::default());
        let expected = Mask::from_fn(16, 12, |_, v| v >= 6);
        assert_eq!(mask, expected);
    }

    #[test]
    fn floor_mask_excludes_invalid_depth_and_non_floor() {
        let mut frame = half_floor_frame();
        frame.depth.set(3, 10, 0.0);
        let mask = floor_mask(&frame, &FloorClassSet::default());
        assert!(!mask.get(3, 10));
        assert_eq!(mask.count(), 16 * 6 - 1);

        let no_floor = FloorClassSet::new(["yoga mat"]).unwrap();
        assert_eq!(floor_mask(&frame, &no_floor).count(), 0);
    }

    #[test]
    fn empty_floor_set_rejected() {
        assert!(FloorClassSet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let err = SceneFrame::new(
            RgbImage::new(32, 32),
            DepthMap::filled(64, 64, 1.0),
            LabelMap::filled(64, 64, 0),
            legend(),
            camera(64, 64),
        )
        .unwrap_err();
        match err {
            Error::DimensionMismatch { layer, .. } => assert_eq!(layer, "rgb"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let err = SceneFrame::new(
            RgbImage::new(4, 4),
            DepthMap::filled(4, 4, 1.0),
            LabelMap::filled(4, 4, 9),
            legend(),
            camera(4, 4),
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { id: 9 }));
    }

    #[test]
    fn depth_png_is_millimeters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.png");
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(2, 1, vec![2500, 0]).unwrap();
        img.save(&path).unwrap();
        let depth = read_depth(&path).unwrap();
        assert_eq!(depth.get(0, 0), 2.5);
        assert_eq!(depth.get(1, 0), 0.0);
    }

    #[test]
    fn pfm_layout() {
        let map = FloatMap {
            width: 2,
            height: 2,
            channels: 1,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let bytes = encode_pfm(&map).unwrap();
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        // bottom row first
        let payload = &bytes[bytes.len() - 16..];
        assert_eq!(&payload[..4], &3.0f32.to_le_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap(), map);
        assert!(encode_pfm(&FloatMap {
            width: 1,
            height: 1,
            channels: 2,
            data: vec![0.0; 2]
        })
        .is_err());
    }

    #[test]
    fn pfm_big_endian_accepted() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&7.5f32.to_be_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap().data, vec![7.5]);
    }
}

//! On-disk depth datasets.
//!
//! A dataset is a directory holding `manifest.toml` and one binary raster
//! per frame. Raster layout, all little-endian:
//!
//! | offset | size        | content                  |
//! |--------|-------------|--------------------------|
//! | 0      | 8           | ASCII magic `DPTHFRM1`   |
//! | 8      | 4           | width, u32               |
//! | 12     | 4           | height, u32              |
//! | 16     | 2 * w * h   | row-major depth, u16     |
//!
//! Depth is stored in the manifest's unit; the manifest's invalid value
//! (normally 0) marks unmatched pixels.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radiometry::IlluminationMode;

pub const SCHEMA_VERSION: u32 = 1;
pub const FRAME_MAGIC: &[u8; 8] = b"DPTHFRM1";
pub const MANIFEST_FILE: &str = "manifest.toml";
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Perpendicular,
    Tilted,
    Simulated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthUnit {
    #[default]
    Millimeters,
    /// 0.1 mm steps, for sub-millimeter noise levels.
    TenthMillimeters,
    Meters,
}

impl DepthUnit {
    pub fn per_meter(self) -> f64 {
        match self {
            DepthUnit::Millimeters => 1_000.0,
            DepthUnit::TenthMillimeters => 10_000.0,
            DepthUnit::Meters => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capture {
    /// Camera-to-surface distance in meters; absent for tilted captures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_distance: Option<f64>,
    pub frame_count: usize,
    /// Frame path relative to the dataset directory. `{frame}` is replaced
    /// by the zero-padded five-digit frame index.
    pub frame_file: String,
}

impl Capture {
    pub fn frame_path(&self, frame: usize) -> String {
        self.frame_file.replace("{frame}", &format!("{frame:05}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub experiment_kind: ExperimentKind,
    pub illumination: IlluminationMode,
    pub depth_unit: DepthUnit,
    #[serde(default)]
    pub invalid_value: u16,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub notes: String,
    pub captures: Vec<Capture>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Format("frame dimensions must be nonzero".into()));
        }
        if self.captures.is_empty() {
            return Err(Error::Format("dataset declares no captures".into()));
        }
        for (i, c) in self.captures.iter().enumerate() {
            if c.frame_count < 1 {
                return Err(Error::Format(format!("capture {i} has no frames")));
            }
            if !c.frame_file.contains("{frame}") && c.frame_count > 1 {
                return Err(Error::Format(format!("capture {i} frame pattern lacks {{frame}}")));
            }
            match (self.experiment_kind, c.nominal_distance) {
                (ExperimentKind::Perpendicular, None) => {
                    return Err(Error::Format(format!(
                        "perpendicular capture {i} lacks a nominal distance"
                    )));
                }
                (_, Some(d)) if !(d > 0.0 && d.is_finite()) => {
                    return Err(Error::Format(format!("capture {i} has nominal distance {d}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.captures.iter().map(|c| c.frame_count).sum()
    }

    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Raw stored value to meters; invalid entries become NaN.
    #[inline]
    pub fn to_meters(&self, raw: u16) -> f64 {
        if raw == self.invalid_value || raw == 0 {
            f64::NAN
        } else {
            raw as f64 / self.depth_unit.per_meter()
        }
    }

    /// Meters to the stored unit, rounding to the nearest step. Invalid
    /// ranges map to the sentinel.
    pub fn from_meters(&self, z: f64) -> Result<u16> {
        if !(z > 0.0 && z.is_finite()) {
            return Ok(self.invalid_value);
        }
        let v = (z * self.depth_unit.per_meter()).round();
        if v > u16::MAX as f64 {
            return Err(Error::Serialization(format!(
                "range {z} m exceeds the 16-bit limit of {:?}",
                self.depth_unit
            )));
        }
        Ok(v as u16)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, values: Vec<u16>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Format(format!(
                "{} values do not fill a {width}x{height} frame",
                values.len()
            )));
        }
        Ok(DepthFrame { width, height, values })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 2 * self.values.len());
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != FRAME_MAGIC {
            return Err(Error::Format("missing depth frame magic".into()));
        }
        let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
        let n = width as usize * height as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 2 * n {
            return Err(Error::Format(format!(
                "frame body has {} bytes, header declares {width}x{height}",
                body.len()
            )));
        }
        let values = body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        Ok(DepthFrame { width, height, values })
    }
}

/// An opened dataset. Frames are read from disk on demand.
#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
    manifest: DatasetManifest,
}

pub fn read_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let path = manifest_path.as_ref();
    let path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DatasetManifest =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    manifest.validate()?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let ds = Dataset { root, manifest };
    for (c, cap) in ds.manifest.captures.iter().enumerate() {
        for f in 0..cap.frame_count {
            let p = ds.frame_path(c, f);
            if !p.is_file() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
    }
    Ok(ds)
}

impl Dataset {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn frame_path(&self, capture: usize, frame: usize) -> PathBuf {
        self.root.join(self.manifest.captures[capture].frame_path(frame))
    }

    pub fn frame(&self, capture: usize, frame: usize) -> Result<DepthFrame> {
        let p = self.frame_path(capture, frame);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let f = DepthFrame::decode(&bytes).map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
        if f.width != self.manifest.width || f.height != self.manifest.height {
            return Err(Error::Format(format!(
                "{} is {}x{}, manifest declares {}x{}",
                p.display(),
                f.width,
                f.height,
                self.manifest.width,
                self.manifest.height
            )));
        }
        Ok(f)
    }

    /// Frame converted to meters, NaN where invalid.
    pub fn frame_meters(&self, capture: usize, frame: usize) -> Result<Vec<f64>> {
        Ok(self
            .frame(capture, frame)?
            .values
            .iter()
            .map(|&v| self.manifest.to_meters(v))
            .collect())
    }

    /// `(capture, frame)` for every frame in manifest order.
    pub fn frame_ids(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.manifest
            .captures
            .iter()
            .enumerate()
            .flat_map(|(c, cap)| (0..cap.frame_count).map(move |f| (c, f)))
    }
}

/// Writes the manifest and frames of a dataset into `dir`.
/// `frames[c][f]` is frame `f` of capture `c`.
pub fn write_dataset(dir: impl AsRef<Path>, manifest: &DatasetManifest, frames: &[Vec<DepthFrame>]) -> Result<()> {
    let writer = DatasetWriter::create(dir, manifest)?;
    if frames.len() != manifest.captures.len() {
        return Err(Error::Format("frame lists do not match the manifest captures".into()));
    }
    for (c, fs) in frames.iter().enumerate() {
        if fs.len() != manifest.captures[c].frame_count {
            return Err(Error::Format(format!(
                "capture {c} frame count differs from the manifest"
            )));
        }
        for (f, frame) in fs.iter().enumerate() {
            writer.write_frame(c, f, frame)?;
        }
    }
    Ok(())
}

/// Incremental dataset writer for frame streams that do not fit in memory.
pub struct DatasetWriter {
    root: PathBuf,
    manifest: DatasetManifest,
}

impl DatasetWriter {
    pub fn create(dir: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<Self> {
        manifest.validate()?;
        let root = dir.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let text = toml::to_string(manifest).map_err(|e| Error::Serialization(e.to_string()))?;
        let mp = root.join(MANIFEST_FILE);
        fs::write(&mp, text).map_err(|e| Error::io(&mp, e))?;
        Ok(DatasetWriter {
            root,
            manifest: manifest.clone(),
        })
    }

    pub fn write_frame(&self, capture: usize, frame: usize, data: &DepthFrame) -> Result<()> {
        let cap = self
            .manifest
            .captures
            .get(capture)
            .ok_or_else(|| Error::Format(format!("no capture {capture}")))?;
        if frame >= cap.frame_count {
            return Err(Error::Format(format!("capture {capture} has no frame {frame}")));
        }
        if data.width != self.manifest.width || data.height != self.manifest.height {
            return Err(Error::Format(format!(
                "frame is {}x{}, manifest declares {}x{}",
                data.width, data.height, self.manifest.width, self.manifest.height
            )));
        }
        let p = self.root.join(cap.frame_path(frame));
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&p, data.encode()).map_err(|e| Error::io(&p, e))
    }
}

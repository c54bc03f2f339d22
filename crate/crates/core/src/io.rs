//! Text and JSON file formats: correspondence lists, prediction records and camera files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::{CameraIntrinsics, NormalizedPoint};
use crate::twoview::Correspondence;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Self::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Parses `x1 y1 x2 y2` lines. Blank lines and lines starting with `#` are ignored.
pub fn parse_correspondences(path: &Path, text: &str) -> Result<Vec<Correspondence<f64>>, IoError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::parse(path, i + 1, e.to_string()))?;
        let [x1, y1, x2, y2] = vals[..] else {
            return Err(IoError::parse(path, i + 1, format!("expected 4 values, found {}", vals.len())));
        };
        let c = Correspondence::from_coords(x1, y1, x2, y2);
        if !c.is_finite() {
            return Err(IoError::parse(path, i + 1, "non-finite coordinate"));
        }
        out.push(c);
    }
    Ok(out)
}

pub fn read_correspondences(path: &Path) -> Result<Vec<Correspondence<f64>>, IoError> {
    parse_correspondences(path, &read_text(path)?)
}

pub fn format_correspondences(corrs: &[Correspondence<f64>]) -> String {
    let mut s = String::new();
    for c in corrs {
        let _ = writeln!(s, "{} {} {} {}", c.p1.x, c.p1.y, c.p2.x, c.p2.y);
    }
    s
}

pub fn write_correspondences(path: &Path, corrs: &[Correspondence<f64>]) -> Result<(), IoError> {
    write_text(path, &format_correspondences(corrs))
}

/// Converts pixel-coordinate correspondences to the normalized plane of `k`.
pub fn pixels_to_normalized(
    corrs: &[Correspondence<f64>],
    k: &CameraIntrinsics<f64>,
) -> Vec<Correspondence<f64>> {
    let conv = |p: &NormalizedPoint<f64>| {
        k.pixel_to_normalized(&crate::distortion::PixelPoint::new(p.x, p.y))
    };
    corrs
        .iter()
        .map(|c| Correspondence::new(conv(&c.p1), conv(&c.p2)))
        .collect()
}

/// One per-frame parameter prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub frame: String,
    pub lambda: f64,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    serde_json::from_str(&read_text(path)?).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    write_text(path, &(text + "\n"))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, IoError> {
    read_json(path)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), IoError> {
    write_json(path, records)
}

/// Pinhole camera description for undistorted frames.
///
/// ```text
/// fx fy cx cy      (pixels)
/// k1 k2 p1 p2 k3   (always zero)
/// width height
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub distortion: [f64; 5],
    pub width: u32,
    pub height: u32,
}

impl CameraFile {
    pub fn from_intrinsics(k: &CameraIntrinsics<f64>) -> Self {
        let fp = k.focal_px();
        let pp = k.principal_point_px();
        Self {
            fx: fp,
            fy: fp,
            cx: pp.u,
            cy: pp.v,
            distortion: [0.0; 5],
            width: k.width,
            height: k.height,
        }
    }

    pub fn to_text(&self) -> String {
        let d = self.distortion.map(|v| if v == 0.0 { "0".to_string() } else { format!("{v:?}") });
        format!(
            "{:?} {:?} {:?} {:?}\n{}\n{} {}\n",
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            d.join(" "),
            self.width,
            self.height
        )
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, IoError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut floats = |n: usize, line: usize| -> Result<Vec<f64>, IoError> {
            let l = lines.next().ok_or_else(|| IoError::parse(path, line, "missing line"))?;
            let v = l
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| IoError::parse(path, line, e.to_string()))?;
            if v.len() != n {
                return Err(IoError::parse(path, line, format!("expected {n} values, found {}", v.len())));
            }
            Ok(v)
        };
        let k = floats(4, 1)?;
        let d = floats(5, 2)?;
        let s = floats(2, 3)?;
        let dim = |v: f64| {
            (v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64)
                .then_some(v as u32)
                .ok_or_else(|| IoError::parse(path, 3, "image size must be a positive integer"))
        };
        Ok(Self {
            fx: k[0],
            fy: k[1],
            cx: k[2],
            cy: k[3],
            distortion: [d[0], d[1], d[2], d[3], d[4]],
            width: dim(s[0])?,
            height: dim(s[1])?,
        })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Self::parse(path, &read_text(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        write_text(path, &self.to_text())
    }
}

//! Synthetic uncalibrated images with known camera parameters.
//!
//! Each output is produced from a calibrated source image by a single inverse map.
//! For every output pixel `p`:
//!
//! ```text
//! s_d = normalize(p; f, cx, cy, 960×320)       distorted point of the new camera
//! s_u = f(s_d; λ) · s_d                        undistort with the sampled λ
//! q   = denormalize(s_u; source intrinsics)    position in the source image
//! ```
//!
//! followed by a bilinear lookup at `q`. This composes distortion, the crop that moves
//! the principal point and the resize that changes the focal length. Pixels mapping
//! outside the source are black.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::{CameraIntrinsics, DistortionError, DistortionModel, PixelPoint};
use crate::imaging;

pub const OUTPUT_WIDTH: u32 = 960;
pub const OUTPUT_HEIGHT: u32 = 320;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERRORS_FILE: &str = "manifest_errors.json";

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid {name} range [{lo}, {hi}]")]
    InvalidRange {
        name: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("no output pixel maps inside the source image")]
    EmptyOverlap,
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl DatagenError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub cx_range: (f64, f64),
    pub cy_range: (f64, f64),
    pub f_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub per_image_count: usize,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            cx_range: (0.45, 0.55),
            cy_range: (0.45, 0.55),
            f_range: (0.6, 1.8),
            lambda_range: (-1.0, 0.0),
            per_image_count: 10,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let check = |name, (lo, hi): (f64, f64), ok: bool| {
            if lo.is_finite() && hi.is_finite() && lo <= hi && ok {
                Ok(())
            } else {
                Err(DatagenError::InvalidRange { name, lo, hi })
            }
        };
        let unit = |(lo, hi): (f64, f64)| lo > 0.0 && hi < 1.0;
        check("cx", self.cx_range, unit(self.cx_range))?;
        check("cy", self.cy_range, unit(self.cy_range))?;
        check("f", self.f_range, self.f_range.0 > 0.0)?;
        check("lambda", self.lambda_range, true)
    }
}

/// Target camera parameters of one generated image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledParams {
    pub lambda: f64,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Independent uniform draws; `index` selects a separate stream of the seeded generator.
pub fn sample_params(ranges: &ParamRanges, seed: u64, index: u64) -> SampledParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    SampledParams {
        lambda: uniform(&mut rng, ranges.lambda_range),
        f: uniform(&mut rng, ranges.f_range),
        cx: uniform(&mut rng, ranges.cx_range),
        cy: uniform(&mut rng, ranges.cy_range),
    }
}

/// Point maps between a calibrated source camera and a distorted target camera.
#[derive(Debug, Clone, Copy)]
pub struct WarpMap {
    pub src_k: CameraIntrinsics<f64>,
    pub dst_k: CameraIntrinsics<f64>,
    pub dst_model: DistortionModel<f64>,
}

impl WarpMap {
    /// Source position seen by a destination pixel.
    pub fn dst_to_src(&self, p: &PixelPoint<f64>) -> Option<PixelPoint<f64>> {
        let sd = self.dst_k.pixel_to_normalized(p);
        let su = self.dst_model.undistort(&sd).ok()?;
        su.is_finite().then(|| self.src_k.normalized_to_pixel(&su))
    }

    /// Destination position of a source pixel.
    pub fn src_to_dst(&self, p: &PixelPoint<f64>) -> Option<PixelPoint<f64>> {
        let su = self.src_k.pixel_to_normalized(p);
        let sd = self.dst_model.distort(&su).ok()?;
        sd.is_finite().then(|| self.dst_k.normalized_to_pixel(&sd))
    }
}

pub fn warp_image(
    src: &RgbImage,
    src_k: &CameraIntrinsics<f64>,
    dst_k: &CameraIntrinsics<f64>,
    dst_model: &DistortionModel<f64>,
) -> Result<RgbImage, DatagenError> {
    src_k.validate()?;
    dst_k.validate()?;
    let map = WarpMap {
        src_k: src_k.with_size(src.width(), src.height()),
        dst_k: *dst_k,
        dst_model: *dst_model,
    };
    let (out, mapped) = imaging::remap(src, dst_k.width, dst_k.height, |p| map.dst_to_src(&p));
    if mapped == 0 {
        return Err(DatagenError::EmptyOverlap);
    }
    Ok(out)
}

/// One generated image and its ground-truth parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledImage {
    /// File name relative to the output directory.
    pub image: String,
    /// File name of the calibrated source image.
    pub source: String,
    pub lambda: f64,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl LabeledImage {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics<f64>, DistortionError> {
        CameraIntrinsics::new(self.f, self.cx, self.cy, self.width, self.height)
    }

    pub fn model(&self) -> DistortionModel<f64> {
        DistortionModel::division(self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub file: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatagenConfig {
    pub ranges: ParamRanges,
    pub seed: u64,
    /// Normalized intrinsics of every source image; pixel size comes from the file.
    pub source_f: f64,
    pub source_cx: f64,
    pub source_cy: f64,
    pub output_width: u32,
    pub output_height: u32,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            ranges: ParamRanges::default(),
            seed: 0,
            // 718.856 px focal length on 1241 px wide frames
            source_f: 0.5793,
            source_cx: 0.5,
            source_cy: 0.5,
            output_width: OUTPUT_WIDTH,
            output_height: OUTPUT_HEIGHT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSummary {
    pub records: Vec<LabeledImage>,
    pub errors: Vec<FileError>,
    pub written: usize,
    pub skipped: usize,
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

/// Readable image files of `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, DatagenError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| DatagenError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn output_name(source: &Path, k: usize) -> String {
    let stem = source
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image");
    format!("{stem}_{k:02}.png")
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

enum Outcome {
    Written(LabeledImage),
    Skipped(LabeledImage),
    Failed(FileError),
}

/// Renders `per_image_count` images per source into `output_dir` and writes
/// `manifest.json` (array of [`LabeledImage`]) plus `manifest_errors.json`.
///
/// Parameters of output `k` of the `i`-th source (sorted by name) are
/// `sample_params(ranges, seed, i·count + k)`. Existing outputs are kept and only
/// listed in the manifest.
pub fn generate_dataset(
    input_dir: &Path,
    output_dir: &Path,
    cfg: &DatagenConfig,
) -> Result<DatasetSummary, DatagenError> {
    cfg.ranges.validate()?;
    let sources = list_images(input_dir)?;
    fs::create_dir_all(output_dir).map_err(|e| DatagenError::io(output_dir, e))?;
    let count = cfg.ranges.per_image_count;

    let outcomes: Vec<Vec<Outcome>> = sources
        .par_iter()
        .enumerate()
        .map(|(i, src_path)| {
            let jobs: Vec<(usize, String, LabeledImage)> = (0..count)
                .map(|k| {
                    let p = sample_params(&cfg.ranges, cfg.seed, (i * count + k) as u64);
                    let name = output_name(src_path, k);
                    let rec = LabeledImage {
                        image: name.clone(),
                        source: file_name(src_path),
                        lambda: p.lambda,
                        f: p.f,
                        cx: p.cx,
                        cy: p.cy,
                        width: cfg.output_width,
                        height: cfg.output_height,
                    };
                    (k, name, rec)
                })
                .collect();
            if jobs.iter().all(|(_, n, _)| output_dir.join(n).is_file()) {
                return jobs
                    .into_iter()
                    .map(|(_, _, r)| Outcome::Skipped(r))
                    .collect();
            }
            let src = match image::open(src_path) {
                Ok(img) => img.to_rgb8(),
                Err(e) => {
                    return vec![Outcome::Failed(FileError {
                        file: file_name(src_path),
                        error: e.to_string(),
                    })]
                }
            };
            jobs.into_par_iter()
                .map(|(_, name, rec)| {
                    let out_path = output_dir.join(&name);
                    if out_path.is_file() {
                        return Outcome::Skipped(rec);
                    }
                    match render_record(&src, cfg, &rec).and_then(|img| {
                        img.save(&out_path).map_err(|source| DatagenError::Image {
                            path: out_path.clone(),
                            source,
                        })
                    }) {
                        Ok(()) => Outcome::Written(rec),
                        Err(e) => Outcome::Failed(FileError {
                            file: name,
                            error: e.to_string(),
                        }),
                    }
                })
                .collect()
        })
        .collect();

    let mut summary = DatasetSummary::default();
    for o in outcomes.into_iter().flatten() {
        match o {
            Outcome::Written(r) => {
                summary.written += 1;
                summary.records.push(r);
            }
            Outcome::Skipped(r) => {
                summary.skipped += 1;
                summary.records.push(r);
            }
            Outcome::Failed(e) => summary.errors.push(e),
        }
    }
    write_json(&output_dir.join(MANIFEST_FILE), &summary.records)?;
    write_json(&output_dir.join(ERRORS_FILE), &summary.errors)?;
    Ok(summary)
}

/// Renders the image described by a manifest record from its source image.
pub fn render_record(
    src: &RgbImage,
    cfg: &DatagenConfig,
    rec: &LabeledImage,
) -> Result<RgbImage, DatagenError> {
    let src_k = CameraIntrinsics::new(
        cfg.source_f,
        cfg.source_cx,
        cfg.source_cy,
        src.width(),
        src.height(),
    )?;
    warp_image(src, &src_k, &rec.intrinsics()?, &rec.model())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DatagenError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| DatagenError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<LabeledImage>, DatagenError> {
    let text = fs::read_to_string(path).map_err(|e| DatagenError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

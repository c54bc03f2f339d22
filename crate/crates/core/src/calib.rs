//! Sequence calibration: per-frame estimates, median aggregation, evaluation metrics,
//! undistortion of images and export of the resulting pinhole camera.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::{CameraIntrinsics, DistortionError, DistortionModel, PixelPoint};
use crate::imaging;
use crate::io::{self, CameraFile, IoError, PredictionRecord};
use crate::ransac::{self, RansacConfig};

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("no estimates to work with")]
    EmptyInput,
    #[error("ground truth {0} is zero")]
    ZeroGroundTruth(Param),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("invalid estimate: {0}")]
    InvalidEstimate(&'static str),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Geometric,
    Learned,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Lambda,
    F,
    Cx,
    Cy,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Lambda, Param::F, Param::Cx, Param::Cy];

    pub fn name(self) -> &'static str {
        match self {
            Param::Lambda => "lambda",
            Param::F => "f",
            Param::Cx => "cx",
            Param::Cy => "cy",
        }
    }
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Division-model parameter plus width/height normalized intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEstimate {
    pub lambda: f64,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub provenance: Provenance,
}

impl CalibrationEstimate {
    pub fn new(lambda: f64, f: f64, cx: f64, cy: f64, provenance: Provenance) -> Self {
        Self {
            lambda,
            f,
            cx,
            cy,
            provenance,
        }
    }

    pub fn from_prediction(r: &PredictionRecord, provenance: Provenance) -> Self {
        Self::new(r.lambda, r.f, r.cx, r.cy, provenance)
    }

    pub fn validate(&self) -> Result<(), CalibError> {
        if !(-1.0..=0.0).contains(&self.lambda) {
            return Err(CalibError::InvalidEstimate("lambda must lie in [-1, 0]"));
        }
        if !(self.f > 0.0 && self.cx > 0.0 && self.cy > 0.0) || !self.f.is_finite() {
            return Err(CalibError::InvalidEstimate("f, cx and cy must be positive"));
        }
        Ok(())
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Lambda => self.lambda,
            Param::F => self.f,
            Param::Cx => self.cx,
            Param::Cy => self.cy,
        }
    }

    pub fn intrinsics(&self, width: u32, height: u32) -> Result<CameraIntrinsics<f64>, DistortionError> {
        CameraIntrinsics::new(self.f, self.cx, self.cy, width, height)
    }

    pub fn model(&self) -> DistortionModel<f64> {
        DistortionModel::division(self.lambda)
    }
}

/// Lower median: the `(n − 1)/2`-th order statistic.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[(values.len() - 1) / 2])
}

/// Component-wise lower median of the first `min(n_frames, len)` estimates. The
/// provenance of the first estimate is kept.
pub fn aggregate(per_frame: &[CalibrationEstimate], n_frames: usize) -> Result<CalibrationEstimate, CalibError> {
    let window = &per_frame[..n_frames.min(per_frame.len())];
    let first = window.first().ok_or(CalibError::EmptyInput)?;
    let med = |p: Param| {
        let mut v: Vec<f64> = window.iter().map(|e| e.get(p)).collect();
        lower_median(&mut v).unwrap()
    };
    Ok(CalibrationEstimate::new(
        med(Param::Lambda),
        med(Param::F),
        med(Param::Cx),
        med(Param::Cy),
        first.provenance,
    ))
}

/// `|est − gt| / |gt|` for every parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub lambda: f64,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
}

impl ErrorReport {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Lambda => self.lambda,
            Param::F => self.f,
            Param::Cx => self.cx,
            Param::Cy => self.cy,
        }
    }
}

pub fn relative_errors(est: &CalibrationEstimate, gt: &CalibrationEstimate) -> Result<ErrorReport, CalibError> {
    let rel = |p: Param| {
        let g = gt.get(p);
        if g == 0.0 {
            Err(CalibError::ZeroGroundTruth(p))
        } else {
            Ok((est.get(p) - g).abs() / g.abs())
        }
    };
    Ok(ErrorReport {
        lambda: rel(Param::Lambda)?,
        f: rel(Param::F)?,
        cx: rel(Param::Cx)?,
        cy: rel(Param::Cy)?,
    })
}

/// Empirical CDF evaluated at each distinct value: `(value, fraction ≤ value)`.
pub fn cdf(errors: &[f64]) -> Result<Vec<(f64, f64)>, CalibError> {
    if errors.is_empty() {
        return Err(CalibError::EmptyInput);
    }
    let mut v = errors.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &e) in v.iter().enumerate() {
        if i + 1 < n && v[i + 1] == e {
            continue;
        }
        let frac = if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 };
        out.push((e, frac));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrespondenceUnits {
    /// Coordinates already on the normalized image plane.
    Normalized,
    /// Pixel coordinates of an image of the given size, normalized with the priors.
    Pixels { width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricConfig {
    pub ransac: RansacConfig<f64>,
    pub n_frames: usize,
    /// Intrinsics reported with the geometric λ (the two-view path does not observe them).
    pub f_prior: f64,
    pub cx_prior: f64,
    pub cy_prior: f64,
    pub units: CorrespondenceUnits,
}

impl Default for GeometricConfig {
    fn default() -> Self {
        Self {
            ransac: RansacConfig::default(),
            n_frames: 100,
            f_prior: 1.0,
            cx_prior: 0.5,
            cy_prior: 0.5,
            units: CorrespondenceUnits::Normalized,
        }
    }
}

#[derive(Debug, Clone)]
pub enum CalibrationSource<'a> {
    /// Directory of correspondence files, one per consecutive frame pair (sorted by name).
    Correspondences { dir: &'a Path, cfg: GeometricConfig },
    /// Predictions JSON file.
    Predictions { path: &'a Path, n_frames: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub frame: String,
    pub estimate: Option<CalibrationEstimate>,
    pub inliers: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceCalibration {
    pub estimate: CalibrationEstimate,
    pub frames: Vec<FrameLog>,
    pub failures: usize,
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>, CalibError> {
    let rd = std::fs::read_dir(dir).map_err(|_| CalibError::MissingInput(dir.display().to_string()))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn geometric_frame(path: &Path, cfg: &GeometricConfig) -> FrameLog {
    let frame = file_label(path);
    let run = || -> Result<(f64, usize), String> {
        let mut corrs = io::read_correspondences(path).map_err(|e| e.to_string())?;
        if let CorrespondenceUnits::Pixels { width, height } = cfg.units {
            let k = CameraIntrinsics::new(cfg.f_prior, cfg.cx_prior, cfg.cy_prior, width, height)
                .map_err(|e| e.to_string())?;
            corrs = io::pixels_to_normalized(&corrs, &k);
        }
        let r = ransac::estimate(&corrs, &cfg.ransac).map_err(|e| e.to_string())?;
        Ok((r.lambda, r.inlier_count()))
    };
    match run() {
        Ok((lambda, inliers)) => FrameLog {
            frame,
            estimate: Some(CalibrationEstimate::new(
                lambda,
                cfg.f_prior,
                cfg.cx_prior,
                cfg.cy_prior,
                Provenance::Geometric,
            )),
            inliers: Some(inliers),
            error: None,
        },
        Err(e) => FrameLog {
            frame,
            estimate: None,
            inliers: None,
            error: Some(e),
        },
    }
}

/// Estimates every frame of the window and aggregates the successful ones.
///
/// Geometric mode runs RANSAC on the first `n_frames` correspondence files and reports
/// the configured priors for `f`, `cx` and `cy`. Per-frame failures are logged and
/// counted.
pub fn calibrate_sequence(source: &CalibrationSource<'_>) -> Result<SequenceCalibration, CalibError> {
    let frames: Vec<FrameLog> = match source {
        CalibrationSource::Correspondences { dir, cfg } => {
            let files = list_files(dir)?;
            if files.is_empty() {
                return Err(CalibError::MissingInput(format!("no correspondence files in {}", dir.display())));
            }
            let window = &files[..cfg.n_frames.min(files.len())];
            window.par_iter().map(|p| geometric_frame(p, cfg)).collect()
        }
        CalibrationSource::Predictions { path, n_frames } => {
            if !path.is_file() {
                return Err(CalibError::MissingInput(path.display().to_string()));
            }
            let records = io::read_predictions(path)?;
            if records.is_empty() {
                return Err(CalibError::MissingInput(format!("{} has no records", path.display())));
            }
            records
                .iter()
                .take(*n_frames)
                .map(|r| FrameLog {
                    frame: r.frame.clone(),
                    estimate: Some(CalibrationEstimate::from_prediction(r, Provenance::Learned)),
                    inliers: None,
                    error: None,
                })
                .collect()
        }
    };
    let ok: Vec<CalibrationEstimate> = frames.iter().filter_map(|f| f.estimate).collect();
    let failures = frames.len() - ok.len();
    let estimate = aggregate(&ok, ok.len())?;
    Ok(SequenceCalibration {
        estimate,
        frames,
        failures,
    })
}

/// Point maps between a distorted image and its undistorted pinhole rendering.
#[derive(Debug, Clone, Copy)]
pub struct UndistortMap {
    pub src_k: CameraIntrinsics<f64>,
    pub model: DistortionModel<f64>,
    pub out_k: CameraIntrinsics<f64>,
}

impl UndistortMap {
    pub fn new(est: &CalibrationEstimate, src_width: u32, src_height: u32, out_k: &CameraIntrinsics<f64>) -> Result<Self, CalibError> {
        Ok(Self {
            src_k: est.intrinsics(src_width, src_height)?,
            model: est.model(),
            out_k: *out_k,
        })
    }

    /// Distorted source position of an undistorted output pixel.
    pub fn out_to_src(&self, p: &PixelPoint<f64>) -> Option<PixelPoint<f64>> {
        let su = self.out_k.pixel_to_normalized(p);
        let sd = self.model.distort(&su).ok()?;
        sd.is_finite().then(|| self.src_k.normalized_to_pixel(&sd))
    }

    /// Undistorted output position of a distorted source pixel.
    pub fn src_to_out(&self, p: &PixelPoint<f64>) -> Option<PixelPoint<f64>> {
        let sd = self.src_k.pixel_to_normalized(p);
        let su = self.model.undistort(&sd).ok()?;
        su.is_finite().then(|| self.out_k.normalized_to_pixel(&su))
    }
}

/// Renders `img` as seen by the pinhole camera `out_k`; unmapped pixels are black.
pub fn undistort_image(
    img: &RgbImage,
    est: &CalibrationEstimate,
    out_k: &CameraIntrinsics<f64>,
) -> Result<RgbImage, CalibError> {
    out_k.validate()?;
    let map = UndistortMap::new(est, img.width(), img.height(), out_k)?;
    Ok(imaging::remap(img, out_k.width, out_k.height, |p| map.out_to_src(&p)).0)
}

/// Writes the pinhole camera of the undistorted frames.
pub fn export_camera_file(
    est: &CalibrationEstimate,
    out_k: &CameraIntrinsics<f64>,
    path: &Path,
) -> Result<CameraFile, CalibError> {
    est.validate()?;
    out_k.validate()?;
    let cam = CameraFile::from_intrinsics(out_k);
    cam.write(path)?;
    Ok(cam)
}

/// Centered window of `(ox, oy, width, height)` pixels with aspect ratio `aspect` (w/h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropWindow {
    pub ox: f64,
    pub oy: f64,
    pub width: f64,
    pub height: f64,
}

impl CropWindow {
    pub fn centered(width: u32, height: u32, aspect: f64) -> Self {
        let (w, h) = (width as f64, height as f64);
        if w / h > aspect {
            let cw = h * aspect;
            Self { ox: (w - cw) / 2.0, oy: 0.0, width: cw, height: h }
        } else {
            let ch = w / aspect;
            Self { ox: 0.0, oy: (h - ch) / 2.0, width: w, height: ch }
        }
    }

    /// Parameters predicted on the crop, expressed for the full `width × height` image:
    /// `f = f_c·cw/W`, `cx = (cx_c·cw + ox)/W`, `cy = (cy_c·ch + oy)/H`, `λ` unchanged.
    pub fn to_full(&self, est: &CalibrationEstimate, width: u32, height: u32) -> CalibrationEstimate {
        let (w, h) = (width as f64, height as f64);
        CalibrationEstimate {
            f: est.f * self.width / w,
            cx: (est.cx * self.width + self.ox) / w,
            cy: (est.cy * self.height + self.oy) / h,
            ..*est
        }
    }

    /// Inverse of [`Self::to_full`].
    pub fn to_crop(&self, est: &CalibrationEstimate, width: u32, height: u32) -> CalibrationEstimate {
        let (w, h) = (width as f64, height as f64);
        CalibrationEstimate {
            f: est.f * w / self.width,
            cx: (est.cx * w - self.ox) / self.width,
            cy: (est.cy * h - self.oy) / self.height,
            ..*est
        }
    }
}

/// Per-frame relative errors of predictions against ground truth, matched by frame name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub frames: Vec<(String, ErrorReport)>,
    /// Predicted frames without ground truth.
    pub unmatched: Vec<String>,
}

pub fn evaluate(predictions: &[PredictionRecord], ground_truth: &[PredictionRecord]) -> Result<Evaluation, CalibError> {
    let gt: std::collections::HashMap<&str, &PredictionRecord> =
        ground_truth.iter().map(|r| (r.frame.as_str(), r)).collect();
    let mut frames = Vec::new();
    let mut unmatched = Vec::new();
    for p in predictions {
        match gt.get(p.frame.as_str()) {
            Some(g) => frames.push((
                p.frame.clone(),
                relative_errors(
                    &CalibrationEstimate::from_prediction(p, Provenance::Learned),
                    &CalibrationEstimate::from_prediction(g, Provenance::GroundTruth),
                )?,
            )),
            None => unmatched.push(p.frame.clone()),
        }
    }
    if frames.is_empty() {
        return Err(CalibError::EmptyInput);
    }
    Ok(Evaluation { frames, unmatched })
}

impl Evaluation {
    /// `frame,param,relative_error` rows.
    pub fn errors_csv(&self) -> String {
        let mut s = String::from("frame,param,relative_error\n");
        for (frame, r) in &self.frames {
            for p in Param::ALL {
                s.push_str(&format!("{frame},{p},{}\n", r.get(p)));
            }
        }
        s
    }

    pub fn cdf(&self, p: Param) -> Vec<(f64, f64)> {
        let v: Vec<f64> = self.frames.iter().map(|(_, r)| r.get(p)).collect();
        cdf(&v).expect("evaluation has at least one frame")
    }

    /// `threshold,fraction` rows for one parameter.
    pub fn cdf_csv(&self, p: Param) -> String {
        let mut s = String::from("threshold,fraction\n");
        for (t, f) in self.cdf(p) {
            s.push_str(&format!("{t},{f}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{GeneralSceneConfig, Motion};
    use image::Rgb;
    use proptest::prelude::*;

    fn est(lambda: f64, f: f64, cx: f64, cy: f64) -> CalibrationEstimate {
        CalibrationEstimate::new(lambda, f, cx, cy, Provenance::Learned)
    }

    #[test]
    fn medians() {
        let e = est(-0.4, 1.1, 0.5, 0.48);
        assert_eq!(aggregate(&[e; 7], 100).unwrap(), e);
        let odd: Vec<_> = [-0.1, -0.2, -0.3].iter().map(|&l| est(l, 1.0, 0.5, 0.5)).collect();
        assert_eq!(aggregate(&odd, 3).unwrap().lambda, -0.2);
        let mut v: Vec<_> = (0..99).map(|_| est(-0.4, 1.0, 0.5, 0.5)).collect();
        v.push(est(-0.9, 1.0, 0.5, 0.5));
        assert_eq!(aggregate(&v, 100).unwrap().lambda, -0.4);
        // lower median for even counts
        let even: Vec<_> = [-0.1, -0.2, -0.3, -0.4].iter().map(|&l| est(l, 1.0, 0.5, 0.5)).collect();
        assert_eq!(aggregate(&even, 4).unwrap().lambda, -0.3);
        // only the window counts
        assert_eq!(aggregate(&even, 1).unwrap().lambda, -0.1);
        assert!(matches!(aggregate(&[], 5), Err(CalibError::EmptyInput)));
        assert!(matches!(aggregate(&even, 0), Err(CalibError::EmptyInput)));
    }

    #[test]
    fn relative_error_values() {
        let gt = est(-0.39, 1.0, 0.5, 0.5);
        assert_eq!(relative_errors(&gt, &gt).unwrap(), ErrorReport { lambda: 0.0, f: 0.0, cx: 0.0, cy: 0.0 });
        let r = relative_errors(&est(-0.35, 1.2, 0.5, 0.5), &gt).unwrap();
        assert!((r.lambda - 0.04 / 0.39).abs() < 1e-12);
        assert!((r.lambda - 0.1026).abs() < 5e-5);
        assert!((r.f - 0.2).abs() < 1e-12);
        assert!(matches!(
            relative_errors(&gt, &est(0.0, 1.0, 0.5, 0.5)),
            Err(CalibError::ZeroGroundTruth(Param::Lambda))
        ));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(cdf(&[0.1, 0.3, 0.1]).unwrap(), vec![(0.1, 2.0 / 3.0), (0.3, 1.0)]);
        assert_eq!(cdf(&[0.7]).unwrap(), vec![(0.7, 1.0)]);
        assert!(matches!(cdf(&[]), Err(CalibError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_ends_at_one(v in proptest::collection::vec(0.0f64..5.0, 1..60)) {
            let c = cdf(&v).unwrap();
            prop_assert_eq!(c.last().unwrap().1, 1.0);
            for w in c.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
            }
        }

        #[test]
        fn aggregate_is_permutation_invariant(mut v in proptest::collection::vec(-1.0f64..0.0, 1..30), seed: u64) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a: Vec<_> = v.iter().map(|&l| est(l, 1.0, 0.5, 0.5)).collect();
            v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b: Vec<_> = v.iter().map(|&l| est(l, 1.0, 0.5, 0.5)).collect();
            prop_assert_eq!(aggregate(&a, a.len()).unwrap(), aggregate(&b, b.len()).unwrap());
        }

        #[test]
        fn one_changed_input_moves_the_median_at_most_one_order_statistic(
            v in proptest::collection::vec(-1.0f64..0.0, 3..30), idx: usize, new in -5.0f64..5.0
        ) {
            let a: Vec<_> = v.iter().map(|&l| est(l, 1.0, 0.5, 0.5)).collect();
            let mut b = a.clone();
            b[idx % v.len()].lambda = new;
            let m0 = aggregate(&a, a.len()).unwrap().lambda;
            let m1 = aggregate(&b, b.len()).unwrap().lambda;
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            let k = (s.len() - 1) / 2;
            let lo = s[k.saturating_sub(1)];
            let hi = s[(k + 1).min(s.len() - 1)];
            prop_assert!(m1 >= lo && m1 <= hi, "{} -> {} not in [{}, {}]", m0, m1, lo, hi);
        }

        #[test]
        fn relative_errors_vanish_only_at_equality(l in -1.0f64..-0.01, f in 0.5f64..2.0, dl in -0.1f64..0.1) {
            let gt = est(l, f, 0.5, 0.5);
            let e = est(l + dl, f, 0.5, 0.5);
            let r = relative_errors(&e, &gt).unwrap();
            prop_assert_eq!(r.lambda == 0.0, dl == 0.0);
        }

        #[test]
        fn crop_conversion_round_trip(w in 100u32..4000, h in 100u32..4000, f in 0.3f64..2.0,
                                      cx in 0.3f64..0.7, cy in 0.3f64..0.7) {
            let crop = CropWindow::centered(w, h, 3.0);
            prop_assert!((crop.width / crop.height - 3.0).abs() < 1e-9);
            prop_assert!(crop.width <= w as f64 + 1e-9 && crop.height <= h as f64 + 1e-9);
            let e = est(-0.3, f, cx, cy);
            let back = crop.to_crop(&crop.to_full(&e, w, h), w, h);
            prop_assert!((back.f - f).abs() < 1e-12 && (back.cx - cx).abs() < 1e-12 && (back.cy - cy).abs() < 1e-12);
        }
    }

    #[test]
    fn crop_conversion_preserves_pixel_geometry() {
        // 1280×720 cropped to 3:1 keeps the full width and a 426.67-pixel band
        let crop = CropWindow::centered(1280, 720, 3.0);
        assert_eq!(crop.width, 1280.0);
        assert!((crop.oy - (720.0 - 1280.0 / 3.0) / 2.0).abs() < 1e-12);
        let on_crop = est(-0.5, 0.8, 0.5, 0.5);
        let full = crop.to_full(&on_crop, 1280, 720);
        assert_eq!(full.lambda, -0.5);
        assert!((full.f * 1280.0 - 0.8 * 1280.0).abs() < 1e-9);
        assert!((full.cy * 720.0 - 360.0).abs() < 1e-9);
        let tall = CropWindow::centered(500, 1000, 3.0);
        assert_eq!(tall.ox, 0.0);
        assert!((tall.height - 500.0 / 3.0).abs() < 1e-12);
    }

    fn write_pairs(dir: &Path, lambdas: &[f64]) {
        for (i, &l) in lambdas.iter().enumerate() {
            let s = GeneralSceneConfig { lambda: l, motion: Motion::Sideways, ..Default::default() }
                .generate(60, i as u64)
                .unwrap();
            io::write_correspondences(&dir.join(format!("{i:06}.txt")), &s.correspondences).unwrap();
        }
    }

    #[test]
    fn geometric_sequence() {
        let dir = tempfile::tempdir().unwrap();
        write_pairs(dir.path(), &[-0.35; 7]);
        std::fs::write(dir.path().join("zzz_broken.txt"), "1 2 3\n").unwrap();
        let cfg = GeometricConfig { n_frames: 100, ..Default::default() };
        let r = calibrate_sequence(&CalibrationSource::Correspondences { dir: dir.path(), cfg }).unwrap();
        assert_eq!(r.frames.len(), 8);
        assert_eq!(r.failures, 1);
        assert!(r.frames[7].error.is_some());
        assert!((r.estimate.lambda + 0.35).abs() < 1e-3);
        assert_eq!((r.estimate.f, r.estimate.cx, r.estimate.cy), (1.0, 0.5, 0.5));
        assert_eq!(r.estimate.provenance, Provenance::Geometric);

        let cfg = GeometricConfig { n_frames: 3, ..Default::default() };
        let r = calibrate_sequence(&CalibrationSource::Correspondences { dir: dir.path(), cfg }).unwrap();
        assert_eq!((r.frames.len(), r.failures), (3, 0));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            calibrate_sequence(&CalibrationSource::Correspondences { dir: empty.path(), cfg }),
            Err(CalibError::MissingInput(_))
        ));
    }

    #[test]
    fn pixel_correspondences_use_priors() {
        let dir = tempfile::tempdir().unwrap();
        let k = CameraIntrinsics::new(1.0, 0.5, 0.5, 1000, 400).unwrap();
        let s = GeneralSceneConfig { lambda: -0.2, motion: Motion::Sideways, ..Default::default() }
            .generate(60, 3)
            .unwrap();
        let px: Vec<_> = s
            .correspondences
            .iter()
            .map(|c| {
                let a = k.normalized_to_pixel(&c.p1);
                let b = k.normalized_to_pixel(&c.p2);
                crate::twoview::Correspondence::from_coords(a.u, a.v, b.u, b.v)
            })
            .collect();
        io::write_correspondences(&dir.path().join("0.txt"), &px).unwrap();
        let cfg = GeometricConfig {
            units: CorrespondenceUnits::Pixels { width: 1000, height: 400 },
            ..Default::default()
        };
        let r = calibrate_sequence(&CalibrationSource::Correspondences { dir: dir.path(), cfg }).unwrap();
        assert!((r.estimate.lambda + 0.2).abs() < 1e-6);
    }

    #[test]
    fn predictions_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.json");
        let rec = PredictionRecord { frame: "f".into(), lambda: -0.3, f: 0.9, cx: 0.51, cy: 0.49 };
        let records: Vec<_> = (0..100).map(|i| PredictionRecord { frame: format!("{i:04}.png"), ..rec.clone() }).collect();
        io::write_predictions(&path, &records).unwrap();
        let r = calibrate_sequence(&CalibrationSource::Predictions { path: &path, n_frames: 100 }).unwrap();
        assert_eq!(r.estimate, CalibrationEstimate::from_prediction(&rec, Provenance::Learned));
        assert_eq!(r.frames.len(), 100);

        io::write_predictions(&path, &[]).unwrap();
        assert!(matches!(
            calibrate_sequence(&CalibrationSource::Predictions { path: &path, n_frames: 100 }),
            Err(CalibError::MissingInput(_))
        ));
        assert!(matches!(
            calibrate_sequence(&CalibrationSource::Predictions { path: &dir.path().join("nope.json"), n_frames: 1 }),
            Err(CalibError::MissingInput(_))
        ));
    }

    #[test]
    fn undistort_identity() {
        let img = RgbImage::from_fn(64, 24, |x, y| Rgb([(x * 4) as u8, (y * 10) as u8, ((x + y) % 256) as u8]));
        let e = est(0.0, 0.8, 0.5, 0.5);
        let k = e.intrinsics(64, 24).unwrap();
        let out = undistort_image(&img, &e, &k).unwrap();
        for (a, b) in out.pixels().zip(img.pixels()) {
            for c in 0..3 {
                assert!((a[c] as i32 - b[c] as i32).abs() <= 1);
            }
        }
    }

    #[test]
    fn undistort_maps_are_inverse() {
        let e = est(-0.7, 1.1, 0.47, 0.52);
        let out_k = CameraIntrinsics::new(0.9, 0.5, 0.5, 1200, 400).unwrap();
        let m = UndistortMap::new(&e, 960, 320, &out_k).unwrap();
        for (u, v) in [(5.0, 5.0), (480.0, 160.0), (950.0, 300.0)] {
            let p = PixelPoint::new(u, v);
            let q = m.out_to_src(&m.src_to_out(&p).unwrap()).unwrap();
            assert!((q.u - u).abs() < 1e-9 && (q.v - v).abs() < 1e-9);
        }
    }

    #[test]
    fn camera_file_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("camera.txt");
        let e = est(-0.4, 1.0, 0.5, 0.5);
        let out_k = e.intrinsics(960, 320).unwrap();
        let cam = export_camera_file(&e, &out_k, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "960.0 960.0 480.0 160.0\n0 0 0 0 0\n960 320\n");
        assert_eq!(CameraFile::read(&path).unwrap(), cam);
        let zero = est(0.0, 1.0, 0.5, 0.5);
        assert_eq!(export_camera_file(&zero, &out_k, &path).unwrap().distortion, [0.0; 5]);
        assert!(matches!(
            export_camera_file(&est(0.3, 1.0, 0.5, 0.5), &out_k, &path),
            Err(CalibError::InvalidEstimate(_))
        ));
    }

    #[test]
    fn evaluation_csv() {
        let gt = vec![
            PredictionRecord { frame: "a".into(), lambda: -0.4, f: 1.0, cx: 0.5, cy: 0.5 },
            PredictionRecord { frame: "b".into(), lambda: -0.2, f: 2.0, cx: 0.5, cy: 0.5 },
        ];
        let pred = vec![
            PredictionRecord { frame: "a".into(), lambda: -0.3, f: 1.0, cx: 0.5, cy: 0.5 },
            PredictionRecord { frame: "b".into(), lambda: -0.2, f: 1.5, cx: 0.5, cy: 0.5 },
            PredictionRecord { frame: "c".into(), lambda: -0.2, f: 1.5, cx: 0.5, cy: 0.5 },
        ];
        let ev = evaluate(&pred, &gt).unwrap();
        assert_eq!(ev.unmatched, vec!["c".to_string()]);
        let csv = ev.errors_csv();
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
        assert!(csv.contains("b,f,0.25\n"));
        assert_eq!(ev.cdf_csv(Param::F), "threshold,fraction\n0,0.5\n0.25,1\n");
        assert!(matches!(evaluate(&pred[2..], &gt), Err(CalibError::EmptyInput)));
    }
}

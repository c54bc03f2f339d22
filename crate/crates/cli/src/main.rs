//! `radcal`: radial distortion calibration from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use radcal_core::calib::{
    self, CalibrationEstimate, CalibrationSource, CorrespondenceUnits, CropWindow, GeometricConfig, Param,
    Provenance,
};
use radcal_core::datagen::{self, DatagenConfig, LabeledImage, ParamRanges};
use radcal_core::degeneracy::{self, FamilyCheckConfig, SpreadConfig, SpreadMode, SpreadSource};
use radcal_core::distortion::CameraIntrinsics;
use radcal_core::io::{self as rio, PredictionRecord};
use radcal_core::ransac::RansacConfig;
use radcal_core::synth::{GeneralSceneConfig, Motion};

#[derive(Parser, Debug)]
#[command(name = "radcal", version, about = "Radial distortion calibration tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate camera parameters of a sequence and aggregate them with a median
    Calibrate(CalibrateArgs),
    /// Render distorted images through a pinhole camera
    Undistort(UndistortArgs),
    /// Relative errors of predictions against ground truth
    Eval(EvalArgs),
    /// Forward-motion ambiguity experiments
    #[command(subcommand)]
    Degeneracy(DegeneracyCommand),
    /// Generate distorted training images with known parameters
    Datagen(DatagenArgs),
}

fn parse_pair<T: std::str::FromStr>(s: &str, sep: char) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s
        .split_once(sep)
        .ok_or_else(|| format!("expected two values separated by '{sep}'"))?;
    let a = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((a, b))
}

fn range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = parse_pair::<f64>(s, ',')?;
    if a > b {
        return Err(format!("empty range [{a}, {b}]"));
    }
    Ok((a, b))
}

fn size(s: &str) -> Result<(u32, u32), String> {
    parse_pair(s, 'x')
}

#[derive(Args, Debug)]
#[command(after_help = "Predictions made on a centered crop of aspect A (width/height) of a W×H frame \
are converted back with --crop-source WxH:\n  f = f_c·cw/W   cx = (cx_c·cw + ox)/W   cy = (cy_c·ch + oy)/H   λ unchanged\n\
where (ox, oy, cw, ch) is the crop window in pixels.")]
struct CalibrateArgs {
    /// Directory of correspondence files (`x1 y1 x2 y2` per line), one per frame pair
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    corr_dir: Option<PathBuf>,
    /// Predictions JSON: array of {frame, lambda, f, cx, cy}
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Number of leading frames to aggregate
    #[arg(long, default_value_t = 100)]
    n_frames: usize,
    #[command(flatten)]
    ransac: RansacArgs,
    /// Focal length reported by the geometric path (and used to normalize pixel input)
    #[arg(long, default_value_t = 1.0)]
    f_prior: f64,
    #[arg(long, default_value_t = 0.5)]
    cx_prior: f64,
    #[arg(long, default_value_t = 0.5)]
    cy_prior: f64,
    /// Correspondences are pixel coordinates of WxH frames
    #[arg(long, value_parser = size)]
    pixels: Option<(u32, u32)>,
    /// Original frame size WxH of predictions made on a centered crop
    #[arg(long, value_parser = size)]
    crop_source: Option<(u32, u32)>,
    /// Aspect ratio (width/height) of the crop
    #[arg(long, default_value_t = 3.0)]
    train_aspect: f64,
    /// Write the aggregated estimate as JSON
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the per-frame log as JSON
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RansacArgs {
    /// Sampson inlier threshold on the normalized plane
    #[arg(long, default_value_t = 2e-4)]
    threshold: f64,
    #[arg(long, default_value_t = 0.999)]
    confidence: f64,
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    #[arg(long, value_parser = range, default_value = "-1,0", allow_hyphen_values = true)]
    lambda_range: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RansacArgs {
    fn config(&self) -> RansacConfig<f64> {
        RansacConfig {
            threshold: self.threshold,
            confidence: self.confidence,
            max_iterations: self.max_iterations,
            lambda_range: self.lambda_range,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
struct UndistortArgs {
    /// Image file or directory of images
    #[arg(long)]
    input: PathBuf,
    /// Output file (single input) or directory
    #[arg(long)]
    output: PathBuf,
    /// Estimate JSON as written by `calibrate --output`
    #[arg(long, conflicts_with_all = ["lambda", "f", "cx", "cy"])]
    estimate: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    f: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    cx: f64,
    #[arg(long, default_value_t = 0.5)]
    cy: f64,
    /// Output focal length (width-normalized); defaults to the estimate's
    #[arg(long)]
    out_f: Option<f64>,
    #[arg(long)]
    out_cx: Option<f64>,
    #[arg(long)]
    out_cy: Option<f64>,
    /// Output size WxH; defaults to the input size
    #[arg(long, value_parser = size)]
    out_size: Option<(u32, u32)>,
    /// Write the pinhole camera of the output frames
    #[arg(long)]
    camera_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Ground truth: predictions-format JSON or a datagen manifest
    #[arg(long)]
    ground_truth: PathBuf,
    /// Directory for errors.csv and cdf_<param>.csv
    #[arg(long)]
    output: PathBuf,
}

#[derive(Subcommand, Debug)]
enum DegeneracyCommand {
    /// Check that fake distortion/depth pairs reproduce forward-motion observations
    Verify(VerifyArgs),
    /// Distribution of λ estimates over repeated trials
    Spread(SpreadArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    scenes: usize,
    #[arg(long, default_value_t = 100)]
    fakes: usize,
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MotionArg {
    Forward,
    Sideways,
    General,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    PerMinimalSample,
    PerRansac,
}

#[derive(Args, Debug)]
struct SpreadArgs {
    #[arg(long, value_enum, default_value = "forward")]
    motion: MotionArg,
    #[arg(long, value_enum, default_value = "per-minimal-sample")]
    mode: ModeArg,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Correspondence file used for every trial instead of synthetic scenes
    #[arg(long)]
    corr: Option<PathBuf>,
    /// True λ of the synthetic scenes
    #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Gaussian noise on distorted coordinates, in pixels
    #[arg(long, default_value_t = degeneracy::DEFAULT_NOISE_PX)]
    noise_px: f64,
    /// Image width the pixel noise refers to
    #[arg(long, default_value_t = degeneracy::REFERENCE_WIDTH_PX)]
    image_width: u32,
    /// Focal length in image widths used to convert pixel noise
    #[arg(long, default_value_t = 1.0)]
    focal: f64,
    #[arg(long, default_value_t = 2e-4)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for estimates.txt, histogram.txt and summary.json
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DatagenArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Images generated per input image
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = range, default_value = "0.45,0.55")]
    cx_range: (f64, f64),
    #[arg(long, value_parser = range, default_value = "0.45,0.55")]
    cy_range: (f64, f64),
    #[arg(long, value_parser = range, default_value = "0.6,1.8")]
    f_range: (f64, f64),
    #[arg(long, value_parser = range, default_value = "-1,0", allow_hyphen_values = true)]
    lambda_range: (f64, f64),
    /// Width-normalized focal length of the calibrated inputs
    #[arg(long, default_value_t = DatagenConfig::default().source_f)]
    source_f: f64,
    #[arg(long, default_value_t = 0.5)]
    source_cx: f64,
    #[arg(long, default_value_t = 0.5)]
    source_cy: f64,
    /// Output size WxH
    #[arg(long, value_parser = size, default_value = "960x320")]
    size: (u32, u32),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Calibrate(a) => calibrate(a),
        Command::Undistort(a) => undistort(a),
        Command::Eval(a) => eval(a),
        Command::Degeneracy(DegeneracyCommand::Verify(a)) => verify(a),
        Command::Degeneracy(DegeneracyCommand::Spread(a)) => spread(a),
        Command::Datagen(a) => generate(a),
    }
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let result = match (&a.corr_dir, &a.predictions) {
        (Some(dir), _) => {
            let cfg = GeometricConfig {
                ransac: a.ransac.config(),
                n_frames: a.n_frames,
                f_prior: a.f_prior,
                cx_prior: a.cx_prior,
                cy_prior: a.cy_prior,
                units: match a.pixels {
                    Some((width, height)) => CorrespondenceUnits::Pixels { width, height },
                    None => CorrespondenceUnits::Normalized,
                },
            };
            calib::calibrate_sequence(&CalibrationSource::Correspondences { dir, cfg })?
        }
        (None, Some(path)) => calib::calibrate_sequence(&CalibrationSource::Predictions {
            path,
            n_frames: a.n_frames,
        })?,
        (None, None) => bail!("one of --corr-dir or --predictions is required"),
    };
    let mut estimate = result.estimate;
    if let Some((w, h)) = a.crop_source {
        estimate = CropWindow::centered(w, h, a.train_aspect).to_full(&estimate, w, h);
    }
    for f in result.frames.iter().filter(|f| f.error.is_some()) {
        eprintln!("{}: {}", f.frame, f.error.as_deref().unwrap_or_default());
    }
    if let Some(path) = &a.log {
        rio::write_json(path, &result.frames)?;
    }
    if let Some(path) = &a.output {
        rio::write_json(path, &estimate)?;
    }
    println!(
        "frames {} failed {}\nlambda {}\nf {}\ncx {}\ncy {}",
        result.frames.len(),
        result.failures,
        estimate.lambda,
        estimate.f,
        estimate.cx,
        estimate.cy
    );
    Ok(())
}

fn load_estimate(a: &UndistortArgs) -> Result<CalibrationEstimate> {
    if let Some(path) = &a.estimate {
        return Ok(rio::read_json(path)?);
    }
    match (a.lambda, a.f) {
        (Some(lambda), Some(f)) => Ok(CalibrationEstimate::new(lambda, f, a.cx, a.cy, Provenance::Geometric)),
        _ => bail!("give --estimate or both --lambda and --f"),
    }
}

fn undistort(a: UndistortArgs) -> Result<()> {
    let est = load_estimate(&a)?;
    est.validate()?;
    let inputs: Vec<PathBuf> = if a.input.is_dir() {
        datagen::list_images(&a.input)?
    } else {
        vec![a.input.clone()]
    };
    if inputs.is_empty() {
        bail!("no images in {}", a.input.display());
    }
    let single = !a.input.is_dir();
    if !single {
        fs::create_dir_all(&a.output).with_context(|| a.output.display().to_string())?;
    }
    let mut out_k = None;
    for path in &inputs {
        let img = image::open(path)
            .with_context(|| path.display().to_string())?
            .to_rgb8();
        let (w, h) = a.out_size.unwrap_or(img.dimensions());
        let k = CameraIntrinsics::new(
            a.out_f.unwrap_or(est.f),
            a.out_cx.unwrap_or(est.cx),
            a.out_cy.unwrap_or(est.cy),
            w,
            h,
        )?;
        let out = calib::undistort_image(&img, &est, &k)?;
        let dest = if single {
            a.output.clone()
        } else {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            a.output.join(format!("{stem}.png"))
        };
        out.save(&dest).with_context(|| dest.display().to_string())?;
        out_k.get_or_insert(k);
    }
    if let (Some(path), Some(k)) = (&a.camera_file, out_k) {
        calib::export_camera_file(&est, &k, path)?;
    }
    println!("undistorted {} image(s)", inputs.len());
    Ok(())
}

fn load_ground_truth(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    if let Ok(records) = serde_json::from_str::<Vec<PredictionRecord>>(&text) {
        return Ok(records);
    }
    let manifest: Vec<LabeledImage> =
        serde_json::from_str(&text).with_context(|| format!("{}: neither predictions nor manifest", path.display()))?;
    Ok(manifest
        .into_iter()
        .map(|r| PredictionRecord {
            frame: r.image,
            lambda: r.lambda,
            f: r.f,
            cx: r.cx,
            cy: r.cy,
        })
        .collect())
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = rio::read_predictions(&a.predictions)?;
    let gt = load_ground_truth(&a.ground_truth)?;
    let ev = calib::evaluate(&pred, &gt)?;
    fs::create_dir_all(&a.output).with_context(|| a.output.display().to_string())?;
    rio::write_text(&a.output.join("errors.csv"), &ev.errors_csv())?;
    for p in Param::ALL {
        rio::write_text(&a.output.join(format!("cdf_{p}.csv")), &ev.cdf_csv(p))?;
    }
    if !ev.unmatched.is_empty() {
        eprintln!("{} prediction(s) without ground truth", ev.unmatched.len());
    }
    for p in Param::ALL {
        let mut v: Vec<f64> = ev.frames.iter().map(|(_, r)| r.get(p)).collect();
        let med = calib::lower_median(&mut v).unwrap_or(f64::NAN);
        println!("{p} median relative error {med}");
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    let cfg = FamilyCheckConfig {
        scenes: a.scenes,
        fakes_per_scene: a.fakes,
        points: a.points,
        seed: a.seed,
        ..Default::default()
    };
    let r = degeneracy::family_check(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}

fn spread(a: SpreadArgs) -> Result<()> {
    let source = match &a.corr {
        Some(path) => SpreadSource::Fixed(rio::read_correspondences(path)?),
        None => SpreadSource::Synthetic {
            scene: GeneralSceneConfig {
                lambda: a.lambda,
                motion: match a.motion {
                    MotionArg::Forward => Motion::Forward,
                    MotionArg::Sideways => Motion::Sideways,
                    MotionArg::General => Motion::General,
                },
                noise_sigma: degeneracy::pixel_noise_to_normalized(a.noise_px, a.focal, a.image_width),
                ..Default::default()
            },
            points: a.points,
        },
    };
    let cfg = SpreadConfig {
        mode: match a.mode {
            ModeArg::PerMinimalSample => SpreadMode::PerMinimalSample,
            ModeArg::PerRansac => SpreadMode::PerRansac,
        },
        trials: a.trials,
        seed: a.seed,
        threshold: a.threshold,
        ..Default::default()
    };
    let r = degeneracy::lambda_spread_experiment(&source, &cfg)?;
    if let Some(dir) = &a.output {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        rio::write_text(&dir.join("estimates.txt"), &r.estimates_text())?;
        rio::write_text(&dir.join("histogram.txt"), &r.histogram.to_lines())?;
        rio::write_json(&dir.join("summary.json"), &r.summary)?;
    }
    println!("{}", serde_json::to_string_pretty(&r.summary)?);
    Ok(())
}

fn generate(a: DatagenArgs) -> Result<()> {
    let cfg = DatagenConfig {
        ranges: ParamRanges {
            cx_range: a.cx_range,
            cy_range: a.cy_range,
            f_range: a.f_range,
            lambda_range: a.lambda_range,
            per_image_count: a.count,
        },
        seed: a.seed,
        source_f: a.source_f,
        source_cx: a.source_cx,
        source_cy: a.source_cy,
        output_width: a.size.0,
        output_height: a.size.1,
    };
    let s = datagen::generate_dataset(&a.input, &a.output, &cfg)?;
    for e in &s.errors {
        eprintln!("{}: {}", e.file, e.error);
    }
    println!(
        "{} records ({} written, {} existing), {} error(s)",
        s.records.len(),
        s.written,
        s.skipped,
        s.errors.len()
    );
    Ok(())
}

//! Forward-motion degeneracy of two-view distortion self-calibration.
//!
//! Under pure forward motion by `t_z = 1` a point at depth `Z1` projects to
//! undistorted observations related by `s_u² = Z1/(Z1 − 1) · s_u¹`. In terms of the
//! distorted observations and undistortion factors,
//!
//! ```text
//! f(s_d²; θ₂) · s_d² = Z1/(Z1 − 1) · f(s_d¹; θ₁) · s_d¹
//! ```
//!
//! Any other pair of distortions (θ₁′, θ₂′) explains the same observations exactly
//! once each depth is replaced by
//!
//! ```text
//! Z1′ = α·Z1 / ((α − 1)·Z1 + 1),   α = f(s_d²; θ₂′) f(s_d¹; θ₁) / (f(s_d¹; θ₁′) f(s_d²; θ₂))
//! ```
//!
//! This module builds such scenes and fake solutions and measures how exactly the
//! fake solution reproduces the observations. It also runs the instability
//! experiment that compares λ estimates under forward and sideways motion.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::{DistortionError, DistortionModel, ModelKind, NormalizedPoint};
use crate::ransac::{self, RansacConfig, RansacError};
use crate::scalar::Scalar;
use crate::solver::{self, SAMPLE_SIZE};
use crate::synth::GeneralSceneConfig;
use crate::twoview::Correspondence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegeneracyError {
    #[error("invalid depth range: need 1 < zmin <= zmax")]
    InvalidDepthRange,
    #[error("(α − 1)·Z1 + 1 vanishes for Z1 = {z1}, α = {alpha}")]
    SingularDenominator { z1: f64, alpha: f64 },
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error("scene and correspondences have different lengths")]
    LengthMismatch,
    #[error("not enough correspondences for a trial: {0}")]
    NotEnoughCorrespondences(usize),
    #[error(transparent)]
    Ransac(#[from] RansacError),
}

/// Points seen by a camera that moves forward by one unit along its optical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardScene<T: Scalar> {
    /// Points in camera-1 coordinates.
    pub points: Vec<Vector3<T>>,
    pub t_z: T,
    pub theta1: DistortionModel<T>,
    pub theta2: DistortionModel<T>,
}

impl<T: Scalar> ForwardScene<T> {
    pub fn from_points(
        points: Vec<Vector3<T>>,
        theta1: DistortionModel<T>,
        theta2: DistortionModel<T>,
    ) -> Self {
        Self {
            points,
            t_z: T::one(),
            theta1,
            theta2,
        }
    }

    /// Undistorted projections `(s_u¹, s_u²)` of every point.
    pub fn undistorted_projections(&self) -> Vec<(NormalizedPoint<T>, NormalizedPoint<T>)> {
        self.points
            .iter()
            .map(|p| {
                let z2 = p.z - self.t_z;
                (
                    NormalizedPoint::new(p.x / p.z, p.y / p.z),
                    NormalizedPoint::new(p.x / z2, p.y / z2),
                )
            })
            .collect()
    }

    /// Distorted observations in both views.
    pub fn project(&self) -> Result<Vec<Correspondence<T>>, DegeneracyError> {
        self.undistorted_projections()
            .into_iter()
            .map(|(u1, u2)| {
                Ok(Correspondence::new(
                    self.theta1.distort(&u1)?,
                    self.theta2.distort(&u2)?,
                ))
            })
            .collect()
    }
}

/// Random forward-motion scene; undistorted radii stay below `fov_limit` in both views.
pub fn generate_forward_scene<T: Scalar>(
    n: usize,
    depth_range: (T, T),
    theta1: DistortionModel<T>,
    theta2: DistortionModel<T>,
    fov_limit: T,
    seed: u64,
) -> Result<(ForwardScene<T>, Vec<Correspondence<T>>), DegeneracyError> {
    let (zmin, zmax) = depth_range;
    if !(zmin > T::one() && zmin <= zmax) || n == 0 {
        return Err(DegeneracyError::InvalidDepthRange);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (zmin.to_f64_lossy(), zmax.to_f64_lossy());
    let fov = fov_limit.to_f64_lossy();
    let points = (0..n)
        .map(|_| {
            let z = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            // |s_u²| = Z/(Z−1)·|s_u¹| ≤ fov
            let r = fov * (z - 1.0) / z * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Vector3::new(T::lit(r * a.cos() * z), T::lit(r * a.sin() * z), T::lit(z))
        })
        .collect();
    let scene = ForwardScene::from_points(points, theta1, theta2);
    let corrs = scene.project()?;
    Ok((scene, corrs))
}

/// `α = f(s_d²; θ₂′) f(s_d¹; θ₁) / (f(s_d¹; θ₁′) f(s_d²; θ₂))`.
pub fn alpha<T: Scalar>(
    sd1: &NormalizedPoint<T>,
    sd2: &NormalizedPoint<T>,
    theta1: &DistortionModel<T>,
    theta2: &DistortionModel<T>,
    theta1_fake: &DistortionModel<T>,
    theta2_fake: &DistortionModel<T>,
) -> Result<T, DegeneracyError> {
    let num = theta2_fake.undistortion_factor(sd2)? * theta1.undistortion_factor(sd1)?;
    let den = theta1_fake.undistortion_factor(sd1)? * theta2.undistortion_factor(sd2)?;
    Ok(num / den)
}

/// `Z1′ = α·Z1 / ((α − 1)·Z1 + 1)`.
pub fn fake_depth<T: Scalar>(z1: T, alpha: T) -> Result<T, DegeneracyError> {
    let den = (alpha - T::one()) * z1 + T::one();
    if den == T::zero() || !den.is_finite() {
        return Err(DegeneracyError::SingularDenominator {
            z1: z1.to_f64_lossy(),
            alpha: alpha.to_f64_lossy(),
        });
    }
    Ok(alpha * z1 / den)
}

/// Alternative distortion pair with per-point depths that reproduce the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeSolution<T: Scalar> {
    pub theta1_fake: DistortionModel<T>,
    pub theta2_fake: DistortionModel<T>,
    pub depths_fake: Vec<T>,
    /// Whether each fake point lies in front of both cameras (`Z1′ > t_z`).
    /// Members of the family that violate this are still exact algebraic solutions.
    pub in_front: Vec<bool>,
}

impl<T: Scalar> FakeSolution<T> {
    pub fn construct(
        scene: &ForwardScene<T>,
        corrs: &[Correspondence<T>],
        theta1_fake: DistortionModel<T>,
        theta2_fake: DistortionModel<T>,
    ) -> Result<Self, DegeneracyError> {
        if scene.points.len() != corrs.len() {
            return Err(DegeneracyError::LengthMismatch);
        }
        let mut depths_fake = Vec::with_capacity(corrs.len());
        let mut in_front = Vec::with_capacity(corrs.len());
        for (p, c) in scene.points.iter().zip(corrs) {
            let a = alpha(
                &c.p1,
                &c.p2,
                &scene.theta1,
                &scene.theta2,
                &theta1_fake,
                &theta2_fake,
            )?;
            let z = fake_depth(p.z, a)?;
            in_front.push(z > scene.t_z);
            depths_fake.push(z);
        }
        Ok(Self {
            theta1_fake,
            theta2_fake,
            depths_fake,
            in_front,
        })
    }

    /// The zero-distortion member of the family.
    pub fn pinhole(
        scene: &ForwardScene<T>,
        corrs: &[Correspondence<T>],
    ) -> Result<Self, DegeneracyError> {
        Self::construct(
            scene,
            corrs,
            DistortionModel::identity(),
            DistortionModel::identity(),
        )
    }
}

/// Largest violation of the forward-motion relation by the fake solution:
/// `max |f(s_d²; θ₂′)·s_d² − Z1′/(Z1′ − 1)·f(s_d¹; θ₁′)·s_d¹|`.
pub fn verify_ambiguity<T: Scalar>(
    scene: &ForwardScene<T>,
    corrs: &[Correspondence<T>],
    fake: &FakeSolution<T>,
) -> Result<T, DegeneracyError> {
    if fake.depths_fake.len() != corrs.len() {
        return Err(DegeneracyError::LengthMismatch);
    }
    let mut worst = T::zero();
    for (c, &z) in corrs.iter().zip(&fake.depths_fake) {
        let lhs = c.p2.scale(fake.theta2_fake.undistortion_factor(&c.p2)?);
        let ratio = z / (z - scene.t_z);
        let rhs =
            c.p1.scale(ratio * fake.theta1_fake.undistortion_factor(&c.p1)?);
        let d = lhs.distance(&rhs);
        if !(d <= worst) {
            worst = d;
        }
    }
    Ok(worst)
}

/// Largest `|s_d¹ × (s_d² − s_d¹)|`: zero when every displacement points along the
/// ray from the principal point.
pub fn radial_displacement_defect<T: Scalar>(corrs: &[Correspondence<T>]) -> T {
    corrs
        .iter()
        .map(|c| {
            let dx = c.p2.x - c.p1.x;
            let dy = c.p2.y - c.p1.y;
            (c.p1.x * dy - c.p1.y * dx).abs()
        })
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Settings of a randomized check of the fake-solution family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheckConfig {
    pub scenes: usize,
    pub fakes_per_scene: usize,
    pub points: usize,
    pub depth_range: (f64, f64),
    /// Division-model λ of the true camera, shared by both views.
    pub true_lambda_range: (f64, f64),
    /// λ range of the fake distortions (division or polynomial, per view).
    pub fake_lambda_range: (f64, f64),
    pub fov_limit: f64,
    pub seed: u64,
}

impl Default for FamilyCheckConfig {
    fn default() -> Self {
        Self {
            scenes: 100,
            fakes_per_scene: 100,
            points: 50,
            depth_range: (1.5, 30.0),
            true_lambda_range: (-0.9, -0.1),
            fake_lambda_range: (-1.0, 0.5),
            fov_limit: 0.9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheckReport {
    pub scenes: usize,
    pub fakes_checked: usize,
    /// Largest [`verify_ambiguity`] residual over every fake solution.
    pub max_residual: f64,
    /// Largest residual of the zero-distortion member, one per scene.
    pub max_pinhole_residual: f64,
    /// Fake solutions with at least one point not in front of both cameras.
    pub with_points_behind: usize,
    /// Draws rejected because a fake depth was undefined.
    pub singular_draws: usize,
}

fn factor_defined(t: &DistortionModel<f64>, max_r: f64) -> bool {
    match t.kind {
        ModelKind::Division => t.max_valid_radius().is_none_or(|m| max_r < m),
        ModelKind::Polynomial => 1.0 + t.lambda * max_r * max_r > 0.0,
    }
}

struct SceneCheck {
    max_residual: f64,
    pinhole: f64,
    behind: usize,
    singular: usize,
}

fn check_scene(cfg: &FamilyCheckConfig, seed: u64) -> Result<SceneCheck, DegeneracyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = cfg.true_lambda_range;
    let truth = DistortionModel::division(lo + (hi - lo) * rng.random::<f64>());
    let (scene, corrs) =
        generate_forward_scene(cfg.points, cfg.depth_range, truth, truth, cfg.fov_limit, rng.random())?;
    let pinhole = verify_ambiguity(&scene, &corrs, &FakeSolution::pinhole(&scene, &corrs)?)?;
    let max_r = corrs
        .iter()
        .map(|c| c.p1.radius().max(c.p2.radius()))
        .fold(0.0, f64::max);
    let (flo, fhi) = cfg.fake_lambda_range;
    let pick = |rng: &mut ChaCha8Rng| loop {
        let l = flo + (fhi - flo) * rng.random::<f64>();
        let t = if rng.random::<bool>() {
            DistortionModel::division(l)
        } else {
            DistortionModel::polynomial(l)
        };
        if factor_defined(&t, max_r) {
            return t;
        }
    };
    let mut out = SceneCheck {
        max_residual: 0.0,
        pinhole,
        behind: 0,
        singular: 0,
    };
    let mut done = 0;
    while done < cfg.fakes_per_scene {
        let (t1, t2) = (pick(&mut rng), pick(&mut rng));
        let fake = match FakeSolution::construct(&scene, &corrs, t1, t2) {
            Ok(f) => f,
            Err(DegeneracyError::SingularDenominator { .. }) => {
                out.singular += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        out.max_residual = out.max_residual.max(verify_ambiguity(&scene, &corrs, &fake)?);
        if fake.in_front.iter().any(|ok| !ok) {
            out.behind += 1;
        }
        done += 1;
    }
    Ok(out)
}

/// Builds random forward scenes and random fake distortion pairs and reports how well
/// the fake solutions reproduce the observations.
pub fn family_check(cfg: &FamilyCheckConfig) -> Result<FamilyCheckReport, DegeneracyError> {
    let checks = (0..cfg.scenes)
        .into_par_iter()
        .map(|i| check_scene(cfg, trial_seed(cfg.seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FamilyCheckReport {
        scenes: cfg.scenes,
        fakes_checked: cfg.scenes * cfg.fakes_per_scene,
        max_residual: checks.iter().map(|c| c.max_residual).fold(0.0, f64::max),
        max_pinhole_residual: checks.iter().map(|c| c.pinhole).fold(0.0, f64::max),
        with_points_behind: checks.iter().map(|c| c.behind).sum(),
        singular_draws: checks.iter().map(|c| c.singular).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadMode {
    /// One estimate per random minimal sample.
    PerMinimalSample,
    /// One RANSAC estimate per trial.
    PerRansac,
}

/// Where each trial's correspondences come from.
#[derive(Debug, Clone)]
pub enum SpreadSource {
    /// A fresh synthetic scene of `points` correspondences per trial.
    Synthetic {
        scene: GeneralSceneConfig,
        points: usize,
    },
    /// A fixed correspondence set (e.g. loaded from a file).
    Fixed(Vec<Correspondence<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadConfig {
    pub mode: SpreadMode,
    pub trials: usize,
    pub seed: u64,
    /// Minimal-sample estimates outside this range are excluded.
    pub lambda_range: (f64, f64),
    /// Sampson inlier threshold for RANSAC trials.
    pub threshold: f64,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        Self {
            mode: SpreadMode::PerMinimalSample,
            trials: 500,
            seed: 0,
            lambda_range: (-1.0, 0.0),
            threshold: 2e-4,
        }
    }
}

pub const HISTOGRAM_BINS: usize = 50;
pub const DEFAULT_NOISE_PX: f64 = 0.5;
pub const REFERENCE_WIDTH_PX: u32 = 1242;

/// Pixel noise expressed in normalized coordinates of a camera with focal `f` (in widths).
pub fn pixel_noise_to_normalized(sigma_px: f64, f: f64, width: u32) -> f64 {
    sigma_px / (f * width as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Uniform bins over `[lo, hi]`; the upper edge belongs to the last bin and values
    /// outside the interval are ignored.
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0usize; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            if !(v >= lo && v <= hi) || bins == 0 {
                continue;
            }
            let idx = if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[idx] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }

    /// One `lo hi count` line per bin.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.counts.iter().enumerate() {
            let (a, b) = self.bin_edges(i);
            out.push_str(&format!("{a:.6} {b:.6} {c}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub count: usize,
    /// Trials that produced no estimate in range.
    pub excluded: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub mode: SpreadMode,
    pub estimates: Vec<f64>,
    pub summary: SpreadSummary,
    pub histogram: Histogram,
}

impl SpreadReport {
    /// One estimate per line.
    pub fn estimates_text(&self) -> String {
        self.estimates
            .iter()
            .map(|v| format!("{v:.10}\n"))
            .collect()
    }
}

pub fn summarize(values: &[f64], excluded: usize) -> SpreadSummary {
    let n = values.len();
    let mean = if n > 0 {
        values.iter().sum::<f64>() / n as f64
    } else {
        f64::NAN
    };
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    SpreadSummary {
        count: n,
        excluded,
        mean,
        std,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    // splitmix64 step keeps per-trial seeds well separated
    let mut z = seed
        ^ (trial as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// The minimal sample's estimate is its lowest-residual candidate in range.
fn minimal_sample_estimate(
    corrs: &[Correspondence<f64>],
    cfg: &SpreadConfig,
    seed: u64,
) -> Option<f64> {
    let idx = ransac::sample_indices(corrs.len(), seed, 0);
    let sample: Vec<_> = idx.iter().map(|&i| corrs[i]).collect();
    solver::solve(&sample, cfg.lambda_range)
        .ok()?
        .first()
        .map(|c| c.lambda)
}

fn trial_correspondences(
    source: &SpreadSource,
    seed: u64,
) -> Result<std::borrow::Cow<'_, [Correspondence<f64>]>, DegeneracyError> {
    match source {
        SpreadSource::Synthetic { scene, points } => Ok(std::borrow::Cow::Owned(
            scene.generate(*points, seed)?.correspondences,
        )),
        SpreadSource::Fixed(c) => Ok(std::borrow::Cow::Borrowed(c.as_slice())),
    }
}

/// Runs `cfg.trials` independent λ estimations and summarizes their distribution.
pub fn lambda_spread_experiment(
    source: &SpreadSource,
    cfg: &SpreadConfig,
) -> Result<SpreadReport, DegeneracyError> {
    let needed = match source {
        SpreadSource::Synthetic { points, .. } => *points,
        SpreadSource::Fixed(c) => c.len(),
    };
    if needed < SAMPLE_SIZE {
        return Err(DegeneracyError::NotEnoughCorrespondences(needed));
    }
    let results: Vec<Result<Option<f64>, DegeneracyError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(cfg.seed, trial);
            let corrs = trial_correspondences(source, seed)?;
            Ok(match cfg.mode {
                SpreadMode::PerMinimalSample => minimal_sample_estimate(&corrs, cfg, seed),
                SpreadMode::PerRansac => {
                    let rc = RansacConfig {
                        threshold: cfg.threshold,
                        lambda_range: cfg.lambda_range,
                        seed,
                        ..RansacConfig::default()
                    };
                    match ransac::estimate(&corrs, &rc) {
                        Ok(r) => Some(r.lambda),
                        Err(RansacError::NoModelFound) => None,
                        Err(e) => return Err(e.into()),
                    }
                }
            })
        })
        .collect();
    let mut estimates = Vec::with_capacity(cfg.trials);
    let mut excluded = 0;
    for r in results {
        match r? {
            Some(l) => estimates.push(l),
            None => excluded += 1,
        }
    }
    let summary = summarize(&estimates, excluded);
    let histogram = Histogram::build(&estimates, -1.0, 0.0, HISTOGRAM_BINS);
    Ok(SpreadReport {
        mode: cfg.mode,
        estimates,
        summary,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Motion;
    use approx::assert_abs_diff_eq;

    fn div(l: f64) -> DistortionModel<f64> {
        DistortionModel::division(l)
    }

    #[test]
    fn on_axis_point_projects_to_origin() {
        let scene =
            ForwardScene::from_points(vec![Vector3::new(0.0, 0.0, 2.0)], div(-0.5), div(-0.5));
        let c = scene.project().unwrap();
        assert_eq!(c[0].p1, NormalizedPoint::origin());
        assert_eq!(c[0].p2, NormalizedPoint::origin());
    }

    #[test]
    fn forward_scale_factor() {
        let scene =
            ForwardScene::from_points(vec![Vector3::new(1.2, -0.7, 10.0)], div(0.0), div(0.0));
        let (u1, u2) = scene.undistorted_projections()[0];
        assert_abs_diff_eq!(u2.radius(), u1.radius() * 10.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u1.x * u2.y - u1.y * u2.x, 0.0, epsilon = 1e-15);
        // identity distortion: observations equal the undistorted projections
        let c = scene.project().unwrap()[0];
        assert_eq!((c.p1, c.p2), (u1, u2));
    }

    #[test]
    fn generated_scene_respects_relation_and_fov() {
        let (scene, corrs) =
            generate_forward_scene(50, (1.5, 30.0), div(-0.6), div(-0.3), 0.9, 3).unwrap();
        for (p, (u1, u2)) in scene.points.iter().zip(scene.undistorted_projections()) {
            let k = p.z / (p.z - 1.0);
            assert!(u2.distance(&u1.scale(k)) < 1e-12);
            assert!(u2.radius() <= 0.9 + 1e-12);
        }
        for c in &corrs {
            assert!(c.is_finite());
        }
        assert!(radial_displacement_defect(&corrs) < 1e-10);
    }

    #[test]
    fn invalid_depth_range() {
        assert_eq!(
            generate_forward_scene(5, (1.0, 3.0), div(0.0), div(0.0), 0.5, 0).unwrap_err(),
            DegeneracyError::InvalidDepthRange
        );
        assert_eq!(
            generate_forward_scene(5, (4.0, 3.0), div(0.0), div(0.0), 0.5, 0).unwrap_err(),
            DegeneracyError::InvalidDepthRange
        );
    }

    #[test]
    fn alpha_values() {
        let sd1 = NormalizedPoint::new(0.4, 0.3);
        let sd2 = NormalizedPoint::new(0.45, 0.35);
        let t = div(-0.5);
        assert_abs_diff_eq!(
            alpha(&sd1, &sd2, &t, &t, &t, &t).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let id = DistortionModel::identity();
        let a = alpha(&sd1, &sd2, &t, &t, &id, &id).unwrap();
        assert_abs_diff_eq!(a, 0.8375 / 0.875, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.95714286, epsilon = 1e-8);
        let f = div(-0.2);
        assert_abs_diff_eq!(
            alpha(&sd1, &sd1, &t, &t, &f, &f).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn fake_depth_values() {
        assert_eq!(fake_depth(10.0, 1.0).unwrap(), 10.0);
        assert_abs_diff_eq!(fake_depth(10.0, 2.0).unwrap(), 20.0 / 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fake_depth(1e9, 2.0).unwrap(), 2.0, epsilon = 1e-8);
        assert!(matches!(
            fake_depth(2.0, 0.5),
            Err(DegeneracyError::SingularDenominator { .. })
        ));
    }

    #[test]
    fn alpha_one_is_a_fixed_point() {
        for z in [1.5, 2.0, 7.3, 100.0, 1e6] {
            assert_eq!(fake_depth(z, 1.0).unwrap(), z);
        }
    }

    #[test]
    fn truth_and_pinhole_and_other_fakes_explain_the_data() {
        let (scene, corrs) =
            generate_forward_scene(50, (1.5, 30.0), div(-0.6), div(-0.6), 0.9, 11).unwrap();
        let truth = FakeSolution::construct(&scene, &corrs, div(-0.6), div(-0.6)).unwrap();
        assert!(verify_ambiguity(&scene, &corrs, &truth).unwrap() < 1e-12);
        let pin = FakeSolution::pinhole(&scene, &corrs).unwrap();
        assert!(verify_ambiguity(&scene, &corrs, &pin).unwrap() < 1e-10);
        let other = FakeSolution::construct(&scene, &corrs, div(-0.2), div(-0.2)).unwrap();
        assert!(verify_ambiguity(&scene, &corrs, &other).unwrap() < 1e-10);
        // a wrong depth breaks the relation
        let mut broken = other.clone();
        broken.depths_fake[3] *= 1.01;
        assert!(verify_ambiguity(&scene, &corrs, &broken).unwrap() > 1e-6);
    }

    #[test]
    fn random_fake_family() {
        let cfg = FamilyCheckConfig {
            scenes: 4,
            fakes_per_scene: 100,
            seed: 12,
            ..Default::default()
        };
        let r = family_check(&cfg).unwrap();
        assert_eq!(r.fakes_checked, 400);
        assert!(r.max_residual < 1e-10, "{r:?}");
        assert!(r.max_pinhole_residual < 1e-10);
        assert_eq!(family_check(&cfg).unwrap(), r);
    }

    #[test]
    fn factor_domain() {
        assert!(factor_defined(&div(-1.0), 0.99));
        assert!(!factor_defined(&div(-1.0), 1.0));
        assert!(factor_defined(&div(0.4), 10.0));
        assert!(!factor_defined(&DistortionModel::polynomial(-1.0), 1.0));
        assert!(factor_defined(&DistortionModel::polynomial(-0.5), 1.0));
    }

    #[test]
    fn cheirality_flags_are_recorded() {
        // A strong fake distortion pushes some fake depths behind camera 2.
        let (scene, corrs) =
            generate_forward_scene(50, (1.5, 30.0), div(-0.9), div(-0.9), 0.9, 13).unwrap();
        let fake = FakeSolution::construct(&scene, &corrs, div(0.0), div(-0.9)).unwrap();
        assert_eq!(fake.in_front.len(), 50);
        for (z, ok) in fake.depths_fake.iter().zip(&fake.in_front) {
            assert_eq!(*ok, *z > 1.0);
        }
        assert!(verify_ambiguity(&scene, &corrs, &fake).unwrap() < 1e-10);
    }

    #[test]
    fn histogram_binning() {
        let h = Histogram::build(&[-1.0, -0.99, -0.5, 0.0, 0.5], -1.0, 0.0, 50);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[25], 1);
        assert_eq!(h.counts[49], 1);
        assert_eq!(h.to_lines().lines().count(), 50);
    }

    fn spread(motion: Motion, noise: f64, trials: usize) -> SpreadReport {
        let source = SpreadSource::Synthetic {
            scene: GeneralSceneConfig {
                lambda: -0.4,
                motion,
                noise_sigma: noise,
                ..Default::default()
            },
            points: 100,
        };
        let cfg = SpreadConfig {
            trials,
            seed: 7,
            ..Default::default()
        };
        lambda_spread_experiment(&source, &cfg).unwrap()
    }

    #[test]
    fn noise_free_sideways_estimates_are_exact() {
        let r = spread(Motion::Sideways, 0.0, 40);
        assert_eq!(r.estimates.len(), 40);
        for l in &r.estimates {
            assert!((l + 0.4).abs() < 1e-6, "{l}");
        }
    }

    #[test]
    fn sideways_estimates_bracket_truth_at_default_noise() {
        let r = spread(
            Motion::Sideways,
            pixel_noise_to_normalized(DEFAULT_NOISE_PX, 1.0, REFERENCE_WIDTH_PX),
            100,
        );
        assert!(r.summary.count > 50);
        assert!((r.summary.mean + 0.4).abs() < 3.0 * r.summary.std);
    }

    #[test]
    fn forward_motion_spreads_far_more_than_sideways_at_low_noise() {
        let side = spread(Motion::Sideways, 1e-6, 100);
        let fwd = spread(Motion::Forward, 1e-6, 100);
        assert!(
            fwd.summary.std >= 10.0 * side.summary.std,
            "{:?} vs {:?}",
            fwd.summary,
            side.summary
        );
        // noise-free forward motion has no isolated solution at all
        let exact = spread(Motion::Forward, 0.0, 20);
        assert!(exact.summary.max - exact.summary.min > 0.5);
    }

    #[test]
    fn ransac_mode_and_fixed_source() {
        let s = GeneralSceneConfig {
            lambda: -0.3,
            motion: Motion::Sideways,
            ..Default::default()
        }
        .generate(60, 2)
        .unwrap();
        let cfg = SpreadConfig {
            mode: SpreadMode::PerRansac,
            trials: 3,
            ..Default::default()
        };
        let r = lambda_spread_experiment(&SpreadSource::Fixed(s.correspondences.clone()), &cfg)
            .unwrap();
        assert_eq!(r.estimates.len(), 3);
        for l in &r.estimates {
            assert!((l + 0.3).abs() < 1e-6);
        }
        assert!(matches!(
            lambda_spread_experiment(&SpreadSource::Fixed(s.correspondences[..5].to_vec()), &cfg),
            Err(DegeneracyError::NotEnoughCorrespondences(5))
        ));
    }
}

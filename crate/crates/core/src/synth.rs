//! Synthetic two-view scenes with known pose and division-model distortion.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distortion::{DistortionError, DistortionModel, NormalizedPoint};
use crate::twoview::{sampson_residual, Correspondence, EssentialMatrix, RelativePose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    /// Translation dominated by the x axis plus a small rotation.
    Sideways,
    /// Pure translation along the optical axis, no rotation.
    Forward,
    /// Random translation direction and random rotation.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralSceneConfig {
    /// Division-model parameter shared by both views.
    pub lambda: f64,
    pub motion: Motion,
    /// Depth range of the points in camera 1.
    pub depth_range: (f64, f64),
    /// Largest undistorted radius accepted in either view.
    pub fov_radius: f64,
    /// Length of the translation between the camera centers.
    pub baseline: f64,
    /// Largest rotation angle (radians) for sideways/general motion.
    pub max_rotation: f64,
    /// Standard deviation of Gaussian noise added to every distorted coordinate.
    pub noise_sigma: f64,
    /// Fraction of correspondences replaced by uniform random pairs.
    pub outlier_fraction: f64,
    /// Outlier pairs are redrawn while their Sampson residual under the true geometry is
    /// below this value.
    pub outlier_margin: f64,
}

impl Default for GeneralSceneConfig {
    fn default() -> Self {
        Self {
            lambda: -0.3,
            motion: Motion::General,
            depth_range: (2.0, 8.0),
            fov_radius: 0.8,
            baseline: 1.0,
            max_rotation: 0.25,
            noise_sigma: 0.0,
            outlier_fraction: 0.0,
            outlier_margin: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub lambda: f64,
    pub pose: RelativePose<f64>,
    /// Points in camera-1 coordinates; outliers keep the point they replaced.
    pub points: Vec<Vector3<f64>>,
    /// Observed distorted correspondences (noise and outliers applied).
    pub correspondences: Vec<Correspondence<f64>>,
    pub is_outlier: Vec<bool>,
}

/// Uniformly distributed axis, angle uniform in `[0, max_angle]`.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, max_angle: f64) -> Matrix3<f64> {
    let axis = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v;
        }
    };
    let angle = rng.random_range(0.0..=max_angle);
    *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix()
}

fn random_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> NormalizedPoint<f64> {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    NormalizedPoint::new(r * a.cos(), r * a.sin())
}

impl GeneralSceneConfig {
    fn sample_pose(&self, rng: &mut ChaCha8Rng) -> RelativePose<f64> {
        match self.motion {
            Motion::Forward => RelativePose::new(Matrix3::identity(), Vector3::z() * self.baseline),
            Motion::Sideways => {
                let t = Vector3::new(
                    1.0,
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                )
                .normalize()
                    * self.baseline;
                RelativePose::new(random_rotation(rng, self.max_rotation), t)
            }
            Motion::General => {
                let t = loop {
                    let v = Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 0.1 && n <= 1.0 {
                        break v / n * self.baseline;
                    }
                };
                RelativePose::new(random_rotation(rng, self.max_rotation), t)
            }
        }
    }

    /// Generates `n` correspondences; deterministic in `seed`.
    pub fn generate(&self, n: usize, seed: u64) -> Result<SyntheticScene, DistortionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = self.sample_pose(&mut rng);
        let model = DistortionModel::division(self.lambda);
        let (zmin, zmax) = self.depth_range;
        let mut points = Vec::with_capacity(n);
        let mut correspondences = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while points.len() < n {
            attempts += 1;
            if attempts > 1000 * (n + 10) {
                return Err(DistortionError::InvalidIntrinsics(
                    "scene configuration leaves no visible points",
                ));
            }
            let s1 = random_in_disk(&mut rng, self.fov_radius);
            let z = rng.random_range(zmin..=zmax);
            let x1 = s1.to_homogeneous() * z;
            let x2 = pose.to_camera2(&x1);
            if x2.z < 0.1 * zmin {
                continue;
            }
            let s2 = NormalizedPoint::new(x2.x / x2.z, x2.y / x2.z);
            if s2.radius() > self.fov_radius {
                continue;
            }
            let (Ok(d1), Ok(d2)) = (model.distort(&s1), model.distort(&s2)) else {
                continue;
            };
            points.push(x1);
            correspondences.push(Correspondence::new(d1, d2));
        }

        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise_sigma).expect("finite sigma");
            for c in &mut correspondences {
                c.p1.x += normal.sample(&mut rng);
                c.p1.y += normal.sample(&mut rng);
                c.p2.x += normal.sample(&mut rng);
                c.p2.y += normal.sample(&mut rng);
            }
        }

        let mut is_outlier = vec![false; n];
        let n_out = (self.outlier_fraction * n as f64).round() as usize;
        if n_out > 0 {
            let extent = model
                .distorted_radius(self.fov_radius)
                .unwrap_or(self.fov_radius);
            let e = EssentialMatrix::from_pose(&pose);
            for idx in rand::seq::index::sample(&mut rng, n, n_out.min(n)) {
                is_outlier[idx] = true;
                for _ in 0..1000 {
                    let c = Correspondence::new(
                        random_in_disk(&mut rng, extent),
                        random_in_disk(&mut rng, extent),
                    );
                    correspondences[idx] = c;
                    if sampson_residual(&c, &e, self.lambda) >= self.outlier_margin {
                        break;
                    }
                }
            }
        }

        Ok(SyntheticScene {
            lambda: self.lambda,
            pose,
            points,
            correspondences,
            is_outlier,
        })
    }
}

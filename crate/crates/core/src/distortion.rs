//! One-parameter radial distortion models and camera intrinsics.
//!
//! Distortion is expressed through the undistortion scaling `f(s_d; λ)` that maps a
//! distorted point `s_d` on the normalized image plane to its undistorted position
//! `s_u = f(s_d; λ) · s_d`:
//!
//! ```text
//! division:    f = 1 / (1 + λ r²)
//! polynomial:  f = 1 + λ r²
//! ```
//!
//! with `r = |s_d|`. Both models reduce to the identity at `λ = 0`.
//!
//! Pixel coordinates are continuous: pixel `(i, j)` covers `[i, i+1) × [j, j+1)` and
//! its center sits at `(i + 0.5, j + 0.5)`. Intrinsics use a single focal length
//! (square pixels) normalized by image width; `cx` is normalized by width and `cy`
//! by height.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistortionError {
    #[error("distorted radius {radius} is outside the valid range (r_max = {max})")]
    RadiusOutOfRange { radius: f64, max: f64 },
    #[error("no real distorted radius for undistorted radius {radius} (λ = {lambda})")]
    NoRealRoot { radius: f64, lambda: f64 },
    #[error("polynomial inversion did not converge for undistorted radius {radius}")]
    NonConvergence { radius: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// A point on the normalized image plane (distorted or undistorted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> NormalizedPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn radius_squared(&self) -> T {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn radius(&self) -> T {
        self.radius_squared().sqrt()
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Homogeneous ray `[x, y, 1]`.
    pub fn to_homogeneous(&self) -> nalgebra::Vector3<T> {
        nalgebra::Vector3::new(self.x, self.y, T::one())
    }
}

/// A continuous pixel coordinate (see the module docs for the pixel-center convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> PixelPoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    /// Center of the pixel with integer indices `(col, row)`.
    pub fn center_of(col: usize, row: usize) -> Self {
        let half = T::lit(0.5);
        Self::new(
            T::from_usize(col).unwrap() + half,
            T::from_usize(row).unwrap() + half,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Division,
    Polynomial,
}

/// One-parameter radial distortion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionModel<T> {
    pub kind: ModelKind,
    pub lambda: T,
}

const NEWTON_MAX_ITERATIONS: usize = 50;
const NEWTON_TOLERANCE: f64 = 1e-12;

impl<T: Scalar> DistortionModel<T> {
    pub fn division(lambda: T) -> Self {
        Self {
            kind: ModelKind::Division,
            lambda,
        }
    }

    pub fn polynomial(lambda: T) -> Self {
        Self {
            kind: ModelKind::Polynomial,
            lambda,
        }
    }

    /// The pinhole model (`λ = 0`).
    pub fn identity() -> Self {
        Self::division(T::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.lambda == T::zero()
    }

    /// Largest admissible distorted radius, or `None` when unbounded.
    ///
    /// Only the division model with `λ < 0` is bounded: `1 + λ r²` vanishes at
    /// `r = 1/sqrt(-λ)`.
    pub fn max_valid_radius(&self) -> Option<T> {
        match self.kind {
            ModelKind::Division if self.lambda < T::zero() => {
                Some(T::one() / (-self.lambda).sqrt())
            }
            _ => None,
        }
    }

    /// Undistortion factor `f(s_d; λ)` evaluated at a distorted point.
    pub fn undistortion_factor(&self, p: &NormalizedPoint<T>) -> Result<T, DistortionError> {
        self.factor_at_radius_squared(p.radius_squared())
    }

    pub(crate) fn factor_at_radius_squared(&self, r2: T) -> Result<T, DistortionError> {
        match self.kind {
            ModelKind::Division => {
                let denom = T::one() + self.lambda * r2;
                if let Some(max) = self.max_valid_radius() {
                    if denom <= T::zero() || r2 >= max * max {
                        return Err(DistortionError::RadiusOutOfRange {
                            radius: r2.sqrt().to_f64_lossy(),
                            max: max.to_f64_lossy(),
                        });
                    }
                }
                Ok(T::one() / denom)
            }
            ModelKind::Polynomial => Ok(T::one() + self.lambda * r2),
        }
    }

    /// Maps a distorted point to its undistorted position.
    pub fn undistort(&self, p: &NormalizedPoint<T>) -> Result<NormalizedPoint<T>, DistortionError> {
        if self.is_identity() {
            return Ok(*p);
        }
        Ok(p.scale(self.undistortion_factor(p)?))
    }

    /// Maps an undistorted point to its distorted position (inverse of [`Self::undistort`]).
    pub fn distort(&self, p: &NormalizedPoint<T>) -> Result<NormalizedPoint<T>, DistortionError> {
        let ru = p.radius();
        if self.is_identity() || ru == T::zero() {
            return Ok(*p);
        }
        let rd = self.distorted_radius(ru)?;
        Ok(p.scale(rd / ru))
    }

    /// Distorted radius `r_d` whose undistorted radius equals `ru` (`ru ≥ 0`).
    pub fn distorted_radius(&self, ru: T) -> Result<T, DistortionError> {
        if self.is_identity() || ru == T::zero() {
            return Ok(ru);
        }
        match self.kind {
            ModelKind::Division => self.division_distorted_radius(ru),
            ModelKind::Polynomial => self.polynomial_distorted_radius(ru),
        }
    }

    // Root of λ·ru·rd² − rd + ru = 0 continuous with rd = ru at λ → 0, written in the
    // rationalized form 2·ru / (1 + sqrt(1 − 4λru²)) which equals
    // (1 − sqrt(1 − 4λru²)) / (2λru) without cancellation for small |λ·ru|.
    fn division_distorted_radius(&self, ru: T) -> Result<T, DistortionError> {
        let lambda = self.lambda;
        let two = T::lit(2.0);
        if (lambda * ru).abs() < T::lit(1e-12) {
            return Ok(ru);
        }
        let disc = T::one() - T::lit(4.0) * lambda * ru * ru;
        if disc < T::zero() {
            return Err(DistortionError::NoRealRoot {
                radius: ru.to_f64_lossy(),
                lambda: lambda.to_f64_lossy(),
            });
        }
        Ok(two * ru / (T::one() + disc.sqrt()))
    }

    // Newton iteration on g(r) = λr³ + r − ru starting from r = ru. For λ < 0 the
    // function is concave and increasing up to r = 1/sqrt(−3λ); for λ > 0 it is convex
    // and increasing. In both cases the iterates approach the root monotonically.
    fn polynomial_distorted_radius(&self, ru: T) -> Result<T, DistortionError> {
        let lambda = self.lambda;
        let three = T::lit(3.0);
        let tol = T::lit(NEWTON_TOLERANCE);
        let fail = || DistortionError::NonConvergence {
            radius: ru.to_f64_lossy(),
        };
        if lambda < T::zero() {
            // Largest value r + λr³ attains on the monotone branch.
            let r_peak = T::one() / (-three * lambda).sqrt();
            let peak = r_peak + lambda * r_peak * r_peak * r_peak;
            if ru > peak {
                return Err(fail());
            }
        }
        let mut r = ru;
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let g = lambda * r * r * r + r - ru;
            let dg = three * lambda * r * r + T::one();
            if dg <= T::zero() {
                return Err(fail());
            }
            let step = g / dg;
            r -= step;
            if step.abs() <= tol * (T::one() + r.abs()) {
                return Ok(r);
            }
        }
        Err(fail())
    }
}

impl<T: Scalar> Default for DistortionModel<T> {
    fn default() -> Self {
        Self::identity()
    }
}

/// Pinhole intrinsics with a single focal length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    /// Focal length divided by image width.
    pub f: T,
    /// Principal point x divided by image width.
    pub cx: T,
    /// Principal point y divided by image height.
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Scalar> CameraIntrinsics<T> {
    pub fn new(f: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, DistortionError> {
        let k = Self {
            f,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), DistortionError> {
        if !(self.f > T::zero()) {
            return Err(DistortionError::InvalidIntrinsics("f must be positive"));
        }
        if !(self.cx > T::zero() && self.cx < T::one()) {
            return Err(DistortionError::InvalidIntrinsics("cx must lie in (0, 1)"));
        }
        if !(self.cy > T::zero() && self.cy < T::one()) {
            return Err(DistortionError::InvalidIntrinsics("cy must lie in (0, 1)"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(DistortionError::InvalidIntrinsics(
                "image dimensions must be at least 1",
            ));
        }
        Ok(())
    }

    /// Same normalized parameters at a different resolution.
    pub fn with_size(&self, width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            ..*self
        }
    }

    fn width_t(&self) -> T {
        T::from_u32(self.width).unwrap()
    }

    fn height_t(&self) -> T {
        T::from_u32(self.height).unwrap()
    }

    /// Focal length in pixels (identical on both axes).
    pub fn focal_px(&self) -> T {
        self.f * self.width_t()
    }

    /// Principal point in continuous pixel coordinates.
    pub fn principal_point_px(&self) -> PixelPoint<T> {
        PixelPoint::new(self.cx * self.width_t(), self.cy * self.height_t())
    }

    pub fn pixel_to_normalized(&self, px: &PixelPoint<T>) -> NormalizedPoint<T> {
        let fp = self.focal_px();
        let pp = self.principal_point_px();
        NormalizedPoint::new((px.u - pp.u) / fp, (px.v - pp.v) / fp)
    }

    pub fn normalized_to_pixel(&self, p: &NormalizedPoint<T>) -> PixelPoint<T> {
        let fp = self.focal_px();
        let pp = self.principal_point_px();
        PixelPoint::new(p.x * fp + pp.u, p.y * fp + pp.v)
    }
}

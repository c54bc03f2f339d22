//! Two-view epipolar geometry on radially distorted observations.
//!
//! Frame convention: a [`RelativePose`] `(R, t)` places camera 2 in the frame of
//! camera 1, so a 3D point satisfies `X1 = R·X2 + t` and `t` is the center of camera 2
//! seen from camera 1. Pure forward motion by one unit is `(I, [0, 0, 1])`. The
//! essential matrix is `E = [t]ₓR` and the epipolar constraint reads
//! `x1ᵀ · E · x2 = 0`.
//!
//! Distorted observations enter the constraint through the division-model lift
//! `[x_d, y_d, 1 + λ(x_d² + y_d²)]`, the same λ being used in both views.

use nalgebra::{Matrix3, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::{DistortionModel, NormalizedPoint};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoViewError {
    #[error("cannot project the zero matrix onto the essential manifold")]
    ZeroMatrix,
    #[error("essential matrix has rank below 2")]
    DegenerateE,
    #[error("no pose candidate places any point in front of both cameras")]
    NoPositiveDepth,
    #[error("viewing rays are parallel")]
    ParallelRays,
    #[error("translation has zero length")]
    ZeroTranslation,
    #[error("no correspondences supplied")]
    NoCorrespondences,
}

/// A pair of observed (distorted) normalized points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence<T> {
    pub p1: NormalizedPoint<T>,
    pub p2: NormalizedPoint<T>,
}

impl<T: Scalar> Correspondence<T> {
    pub fn new(p1: NormalizedPoint<T>, p2: NormalizedPoint<T>) -> Self {
        Self { p1, p2 }
    }

    pub fn from_coords(x1: T, y1: T, x2: T, y2: T) -> Self {
        Self::new(NormalizedPoint::new(x1, y1), NormalizedPoint::new(x2, y2))
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix<T: Scalar>(pub Matrix3<T>);

impl<T: Scalar> EssentialMatrix<T> {
    /// `E = [t]ₓ R`.
    pub fn from_pose(pose: &RelativePose<T>) -> Self {
        Self(pose.translation.cross_matrix() * pose.rotation)
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose<T: Scalar> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Scalar> RelativePose<T> {
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Unit forward motion along the optical axis (`t_z = 1`).
    pub fn forward() -> Self {
        Self::new(Matrix3::identity(), Vector3::z())
    }

    /// Point expressed in camera 2 given its camera-1 coordinates.
    pub fn to_camera2(&self, x1: &Vector3<T>) -> Vector3<T> {
        self.rotation.transpose() * (x1 - self.translation)
    }

    pub fn is_rotation_valid(&self, tol: T) -> bool {
        let rtr = self.rotation.transpose() * self.rotation;
        (rtr - Matrix3::identity()).amax() < tol
            && (self.rotation.determinant() - T::one()).abs() < tol
    }
}

/// Division-model lift `[x, y, 1 + λ(x² + y²)]`.
#[inline]
pub fn lift<T: Scalar>(p: &NormalizedPoint<T>, lambda: T) -> Vector3<T> {
    Vector3::new(p.x, p.y, T::one() + lambda * p.radius_squared())
}

/// `lift(p1, λ)ᵀ · E · lift(p2, λ)`.
pub fn algebraic_residual<T: Scalar>(
    c: &Correspondence<T>,
    e: &EssentialMatrix<T>,
    lambda: T,
) -> T {
    lift(&c.p1, lambda).dot(&(e.0 * lift(&c.p2, lambda)))
}

/// First-order geometric distance of a correspondence to the lifted epipolar
/// constraint, in normalized-plane units.
///
/// The algebraic residual is divided by the norm of its gradient with respect to the
/// four observed coordinates, including the λ-dependent third lift component.
pub fn sampson_residual<T: Scalar>(c: &Correspondence<T>, e: &EssentialMatrix<T>, lambda: T) -> T {
    let l1 = lift(&c.p1, lambda);
    let l2 = lift(&c.p2, lambda);
    let el2 = e.0 * l2;
    let etl1 = e.0.transpose() * l1;
    let r = l1.dot(&el2);
    if r == T::zero() {
        return T::zero();
    }
    let two_lambda = T::lit(2.0) * lambda;
    let gx1 = el2[0] + two_lambda * c.p1.x * el2[2];
    let gy1 = el2[1] + two_lambda * c.p1.y * el2[2];
    let gx2 = etl1[0] + two_lambda * c.p2.x * etl1[2];
    let gy2 = etl1[1] + two_lambda * c.p2.y * etl1[2];
    let g2 = gx1 * gx1 + gy1 * gy1 + gx2 * gx2 + gy2 * gy2;
    if g2 == T::zero() {
        return T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
    }
    r.abs() / g2.sqrt()
}

fn svd_with_proper_factors<T: Scalar>(m: &Matrix3<T>) -> (Matrix3<T>, Vector3<T>, Matrix3<T>) {
    let svd = SVD::new(*m, true, true);
    let mut u = svd.u.expect("requested U");
    let mut v_t = svd.v_t.expect("requested Vᵀ");
    let mut s = svd.singular_values;
    // nalgebra returns singular values sorted in descending order for 3×3 inputs, but
    // sort explicitly to be safe.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    if order != [0, 1, 2] {
        let (u0, vt0, s0) = (u, v_t, s);
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &u0.column(src));
            v_t.set_row(dst, &vt0.row(src));
            s[dst] = s0[src];
        }
    }
    // Flipping the singular vectors of the smallest singular value makes both factors
    // proper rotations while leaving U·diag(s₁, s₂, 0)·Vᵀ unchanged.
    if u.determinant() < T::zero() {
        u.column_mut(2).neg_mut();
    }
    if v_t.determinant() < T::zero() {
        v_t.row_mut(2).neg_mut();
    }
    (u, s, v_t)
}

/// Closest matrix (Frobenius norm) with singular values `(1, 1, 0)`.
pub fn project_to_essential<T: Scalar>(m: &Matrix3<T>) -> Result<EssentialMatrix<T>, TwoViewError> {
    if m.amax() == T::zero() || !m.iter().all(|v| v.is_finite()) {
        return Err(TwoViewError::ZeroMatrix);
    }
    let (u, _, v_t) = svd_with_proper_factors(m);
    let d = Matrix3::from_diagonal(&Vector3::new(T::one(), T::one(), T::zero()));
    Ok(EssentialMatrix(u * d * v_t))
}

/// The four `(R, t)` factorizations of an essential matrix, with unit `t`.
///
/// Order: `(R₁, t)`, `(R₁, −t)`, `(R₂, t)`, `(R₂, −t)` where `R₁ = U·W·Vᵀ`,
/// `R₂ = U·Wᵀ·Vᵀ` and `t = u₃`.
pub fn decompose<T: Scalar>(e: &EssentialMatrix<T>) -> Result<[RelativePose<T>; 4], TwoViewError> {
    let (u, s, v_t) = svd_with_proper_factors(&e.0);
    if !(s[0] > T::zero()) || s[1] <= s[0] * T::lit(1e-9) {
        return Err(TwoViewError::DegenerateE);
    }
    let w = Matrix3::new(
        T::zero(),
        -T::one(),
        T::zero(),
        T::one(),
        T::zero(),
        T::zero(),
        T::zero(),
        T::zero(),
        T::one(),
    );
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t: Vector3<T> = u.column(2).into_owned();
    Ok([
        RelativePose::new(r1, t),
        RelativePose::new(r1, -t),
        RelativePose::new(r2, t),
        RelativePose::new(r2, -t),
    ])
}

/// Midpoint triangulation result, in camera-1 coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulated<T: Scalar> {
    pub point: Vector3<T>,
    /// Depth along camera 1's optical axis.
    pub depth1: T,
    /// Depth along camera 2's optical axis.
    pub depth2: T,
}

const PARALLEL_RAY_ANGLE: f64 = 1e-8;

/// Midpoint triangulation of an undistorted correspondence.
pub fn triangulate<T: Scalar>(
    c: &Correspondence<T>,
    pose: &RelativePose<T>,
) -> Result<Triangulated<T>, TwoViewError> {
    let d1 = c.p1.to_homogeneous();
    let d2 = pose.rotation * c.p2.to_homogeneous();
    let angle = d1.cross(&d2).norm().atan2(d1.dot(&d2));
    if angle.abs() <= T::lit(PARALLEL_RAY_ANGLE) {
        return Err(TwoViewError::ParallelRays);
    }
    // Minimize |z1·d1 − (t + z2·d2)|² over (z1, z2).
    let t = pose.translation;
    let a11 = d1.dot(&d1);
    let a12 = -d1.dot(&d2);
    let a22 = d2.dot(&d2);
    let b1 = d1.dot(&t);
    let b2 = -d2.dot(&t);
    let det = a11 * a22 - a12 * a12;
    if det.abs() <= T::eps() * a11 * a22 {
        return Err(TwoViewError::ParallelRays);
    }
    let z1 = (b1 * a22 - a12 * b2) / det;
    let z2 = (a11 * b2 - a12 * b1) / det;
    let point = (d1 * z1 + t + d2 * z2) * T::lit(0.5);
    Ok(Triangulated {
        point,
        depth1: z1,
        depth2: z2,
    })
}

/// Picks the pose candidate that places the most correspondences in front of both
/// cameras after undistortion with the division model at `lambda`.
///
/// Ties are broken by the lowest candidate index. Correspondences that cannot be
/// undistorted or triangulated do not count for any candidate.
pub fn select_by_cheirality<T: Scalar>(
    candidates: &[RelativePose<T>],
    correspondences: &[Correspondence<T>],
    lambda: T,
) -> Result<RelativePose<T>, TwoViewError> {
    if correspondences.is_empty() {
        return Err(TwoViewError::NoCorrespondences);
    }
    let model = DistortionModel::division(lambda);
    let undistorted: Vec<Correspondence<T>> = correspondences
        .iter()
        .filter_map(|c| {
            Some(Correspondence::new(
                model.undistort(&c.p1).ok()?,
                model.undistort(&c.p2).ok()?,
            ))
        })
        .collect();
    let mut best: Option<(usize, usize)> = None;
    for (idx, pose) in candidates.iter().enumerate() {
        let count = undistorted
            .iter()
            .filter(|c| {
                triangulate(c, pose)
                    .map(|tr| tr.depth1 > T::zero() && tr.depth2 > T::zero())
                    .unwrap_or(false)
            })
            .count();
        if count > 0 && best.is_none_or(|(_, b)| count > b) {
            best = Some((idx, count));
        }
    }
    best.map(|(idx, _)| candidates[idx])
        .ok_or(TwoViewError::NoPositiveDepth)
}

/// Angle (radians) of the rotation `R_estᵀ · R_gt`.
pub fn rotation_error<T: Scalar>(r_est: &Matrix3<T>, r_gt: &Matrix3<T>) -> T {
    let d = r_est.transpose() * r_gt;
    let half = T::lit(0.5);
    let cos = (d.trace() - T::one()) * half;
    let sin = Vector3::new(
        d[(2, 1)] - d[(1, 2)],
        d[(0, 2)] - d[(2, 0)],
        d[(1, 0)] - d[(0, 1)],
    )
    .norm()
        * half;
    sin.atan2(cos)
}

/// Sign-free angle (radians) between two translation directions.
pub fn translation_error<T: Scalar>(
    t_est: &Vector3<T>,
    t_gt: &Vector3<T>,
) -> Result<T, TwoViewError> {
    let ne = t_est.norm();
    let ng = t_gt.norm();
    if ne == T::zero() || ng == T::zero() {
        return Err(TwoViewError::ZeroTranslation);
    }
    let a = t_est / ne;
    let b = t_gt / ng;
    Ok(a.cross(&b).norm().atan2(a.dot(&b).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_rotation, GeneralSceneConfig, Motion};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corr(x1: f64, y1: f64, x2: f64, y2: f64) -> Correspondence<f64> {
        Correspondence::from_coords(x1, y1, x2, y2)
    }

    fn sideways_pose() -> RelativePose<f64> {
        let r =
            Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, 1.0, -0.1)), 0.08);
        RelativePose::new(*r.matrix(), Vector3::new(0.9, 0.1, 0.2))
    }

    #[test]
    fn lift_values() {
        let p = NormalizedPoint::new(0.4, 0.3);
        assert_eq!(lift(&p, 0.0), Vector3::new(0.4, 0.3, 1.0));
        assert_abs_diff_eq!(
            lift(&p, -0.5),
            Vector3::new(0.4, 0.3, 0.875),
            epsilon = 1e-15
        );
        assert_eq!(
            lift(&NormalizedPoint::origin(), -0.7),
            Vector3::new(0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn residuals_vanish_on_noise_free_scenes() {
        for (seed, lambda) in [(1u64, -0.35), (2, 0.0), (3, -0.8)] {
            let cfg = GeneralSceneConfig {
                lambda,
                motion: Motion::Sideways,
                ..GeneralSceneConfig::default()
            };
            let scene = cfg.generate(60, seed).unwrap();
            let e = EssentialMatrix::from_pose(&scene.pose);
            for c in &scene.correspondences {
                assert!(algebraic_residual(c, &e, lambda).abs() < 1e-10);
                assert!(sampson_residual(c, &e, lambda) < 1e-10);
            }
        }
    }

    #[test]
    fn zero_matrix_gives_zero_residual() {
        let e = EssentialMatrix(Matrix3::zeros());
        let c = corr(0.3, -0.2, 0.1, 0.5);
        assert_eq!(algebraic_residual(&c, &e, -0.4), 0.0);
        assert_eq!(sampson_residual(&c, &e, -0.4), 0.0);
    }

    #[test]
    fn sampson_is_zero_iff_algebraic_is_zero() {
        let e = EssentialMatrix::from_pose(&sideways_pose());
        let c = corr(0.3, -0.2, 0.1, 0.5);
        let a = algebraic_residual(&c, &e, -0.4);
        let s = sampson_residual(&c, &e, -0.4);
        assert!(a != 0.0 && s > 0.0);
    }

    #[test]
    fn sampson_matches_first_order_distance() {
        // Perturb a perfect correspondence by a small offset along the residual
        // gradient; the Sampson distance should recover the offset length.
        let cfg = GeneralSceneConfig {
            lambda: -0.4,
            ..GeneralSceneConfig::default()
        };
        let scene = cfg.generate(5, 9).unwrap();
        let e = EssentialMatrix::from_pose(&scene.pose);
        let c = scene.correspondences[0];
        let h = 1e-7;
        let f = |c: &Correspondence<f64>| algebraic_residual(c, &e, -0.4);
        let base = f(&c);
        let mut g = [0.0; 4];
        for (k, gk) in g.iter_mut().enumerate() {
            let mut cc = c;
            match k {
                0 => cc.p1.x += h,
                1 => cc.p1.y += h,
                2 => cc.p2.x += h,
                _ => cc.p2.y += h,
            }
            *gk = (f(&cc) - base) / h;
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let step = 1e-5;
        let mut moved = c;
        moved.p1.x += step * g[0] / gn;
        moved.p1.y += step * g[1] / gn;
        moved.p2.x += step * g[2] / gn;
        moved.p2.y += step * g[3] / gn;
        assert!((sampson_residual(&moved, &e, -0.4) - step).abs() < 1e-8);
    }

    #[test]
    fn projection_sets_unit_singular_values() {
        let m = Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 0.1));
        let e = project_to_essential(&m).unwrap();
        let s = e.0.singular_values();
        let mut s: Vec<f64> = s.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_fixes_valid_essential_matrices() {
        let e = EssentialMatrix::from_pose(&RelativePose::new(
            sideways_pose().rotation,
            sideways_pose().translation.normalize(),
        ));
        let p = project_to_essential(&e.0).unwrap();
        assert!((p.0 - e.0).norm() < 1e-12 || (p.0 + e.0).norm() < 1e-12);
    }

    #[test]
    fn projection_rejects_zero() {
        assert_eq!(
            project_to_essential(&Matrix3::<f64>::zeros()),
            Err(TwoViewError::ZeroMatrix)
        );
    }

    #[test]
    fn projection_is_frobenius_closest() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let e = project_to_essential(&m).unwrap();
            let best = (m - e.0).norm();
            // Exhaustive check against random valid essential matrices and against
            // small left/right rotations of the projection itself.
            for _ in 0..2000 {
                let r = random_rotation(&mut rng, std::f64::consts::PI);
                let t = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
                let cand = EssentialMatrix::from_pose(&RelativePose::new(r, t));
                assert!((m - cand.0).norm() >= best - 1e-12);
                let a = random_rotation(&mut rng, 0.05);
                let b = random_rotation(&mut rng, 0.05);
                assert!((m - a * e.0 * b).norm() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn forward_motion_decomposition() {
        let e = EssentialMatrix::from_pose(&RelativePose::forward());
        let cands = decompose(&e).unwrap();
        let has = |sign: f64| {
            cands.iter().any(|c| {
                rotation_error(&c.rotation, &Matrix3::identity()) < 1e-12
                    && (c.translation - Vector3::z() * sign).norm() < 1e-12
            })
        };
        assert!(has(1.0) && has(-1.0));
    }

    #[test]
    fn decomposition_contains_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let r = random_rotation(&mut rng, 0.5);
            let t = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let pose = RelativePose::new(r, t);
            let e = project_to_essential(&EssentialMatrix::from_pose(&pose).0).unwrap();
            let cands = decompose(&e).unwrap();
            assert!(cands.iter().any(|c| {
                rotation_error(&c.rotation, &r) < 1e-6
                    && (c.translation - t.normalize()).norm() < 1e-6
            }));
            for c in &cands {
                assert!(c.is_rotation_valid(1e-9));
            }
        }
    }

    #[test]
    fn decompose_rejects_rank_one() {
        let m = Vector3::new(1.0, 2.0, 3.0) * Vector3::new(0.5, -1.0, 0.2).transpose();
        assert_eq!(
            decompose(&EssentialMatrix(m)),
            Err(TwoViewError::DegenerateE)
        );
    }

    #[test]
    fn cheirality_selects_ground_truth() {
        for lambda in [0.0, -0.45] {
            let cfg = GeneralSceneConfig {
                lambda,
                ..GeneralSceneConfig::default()
            };
            let scene = cfg.generate(20, 33).unwrap();
            let e = project_to_essential(&EssentialMatrix::from_pose(&scene.pose).0).unwrap();
            let cands = decompose(&e).unwrap();
            let chosen = select_by_cheirality(&cands, &scene.correspondences, lambda).unwrap();
            assert!(rotation_error(&chosen.rotation, &scene.pose.rotation) < 1e-9);
            assert!((chosen.translation - scene.pose.translation.normalize()).norm() < 1e-9);
            // single correspondence: truth still among the maximizers
            let one = select_by_cheirality(&cands, &scene.correspondences[..1], lambda).unwrap();
            let c0 = scene.correspondences[0];
            let m = DistortionModel::division(lambda);
            let u = Correspondence::new(m.undistort(&c0.p1).unwrap(), m.undistort(&c0.p2).unwrap());
            let tr = triangulate(&u, &one).unwrap();
            assert!(tr.depth1 > 0.0 && tr.depth2 > 0.0);
        }
    }

    #[test]
    fn cheirality_tie_breaks_to_first_index() {
        // Both poses place the point (0, 0, 5) in front of both cameras.
        let a = RelativePose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        let b = RelativePose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.01));
        let c = corr(0.0, 0.0, -0.2, 0.0);
        assert_eq!(select_by_cheirality(&[a, b], &[c], 0.0).unwrap(), a);
        assert_eq!(select_by_cheirality(&[b, a], &[c], 0.0).unwrap(), b);
    }

    #[test]
    fn cheirality_reports_no_positive_depth() {
        // Diverging rays only meet behind the cameras.
        let pose = RelativePose::new(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
        let c = corr(-0.5, 0.0, 0.5, 0.0);
        let tr = triangulate(&c, &pose).unwrap();
        assert!(tr.depth1 < 0.0 || tr.depth2 < 0.0);
        assert_eq!(
            select_by_cheirality(&[pose], &[c], 0.0),
            Err(TwoViewError::NoPositiveDepth)
        );
        assert_eq!(
            select_by_cheirality::<f64>(&[pose], &[], 0.0),
            Err(TwoViewError::NoCorrespondences)
        );
    }

    #[test]
    fn triangulate_forward_motion_depth() {
        let s1 = NormalizedPoint::new(0.12, -0.07);
        let s2 = s1.scale(10.0 / 9.0);
        let tr = triangulate(&Correspondence::new(s1, s2), &RelativePose::forward()).unwrap();
        assert_abs_diff_eq!(tr.depth1, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(tr.depth2, 9.0, epsilon = 1e-9);
    }

    #[test]
    fn triangulate_on_axis_forward_is_parallel() {
        let o = NormalizedPoint::<f64>::origin();
        assert_eq!(
            triangulate(&Correspondence::new(o, o), &RelativePose::forward()),
            Err(TwoViewError::ParallelRays)
        );
    }

    #[test]
    fn triangulate_sideways_scene_exactly() {
        let cfg = GeneralSceneConfig {
            lambda: 0.0,
            motion: Motion::Sideways,
            ..GeneralSceneConfig::default()
        };
        let scene = cfg.generate(40, 8).unwrap();
        for (c, x) in scene.correspondences.iter().zip(&scene.points) {
            let tr = triangulate(c, &scene.pose).unwrap();
            assert!((tr.point - x).norm() < 1e-9 * x.norm());
            assert_abs_diff_eq!(tr.depth1, x.z, epsilon = 1e-9 * x.z);
            assert_abs_diff_eq!(tr.depth2, scene.pose.to_camera2(x).z, epsilon = 1e-9 * x.z);
        }
    }

    #[test]
    fn pose_errors() {
        let r =
            *Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8)), 0.7)
                .matrix();
        assert_abs_diff_eq!(rotation_error(&r, &r), 0.0, epsilon = 1e-12);
        let delta =
            *Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(-1.0, 0.2, 0.4)), 0.1)
                .matrix();
        assert_abs_diff_eq!(rotation_error(&(r * delta), &r), 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rotation_error(&r, &(r * delta)),
            rotation_error(&(r * delta), &r),
            epsilon = 1e-12
        );
        let t = Vector3::new(0.3, -0.1, 0.9);
        assert_abs_diff_eq!(translation_error(&(-t), &t).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            translation_error::<f64>(&Vector3::x(), &Vector3::y()).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
        assert_eq!(
            translation_error(&Vector3::zeros(), &t),
            Err(TwoViewError::ZeroTranslation)
        );
    }

    #[test]
    fn single_precision_geometry() {
        let pose = RelativePose::<f32>::forward();
        let e = EssentialMatrix::from_pose(&pose);
        let c = Correspondence::from_coords(0.2f32, 0.1, 0.25, 0.125);
        assert!(algebraic_residual(&c, &e, -0.3).abs() < 1e-6);
        assert_eq!(decompose(&e).unwrap().len(), 4);
    }
}

//! Nine-point minimal solver for an essential matrix and a shared division-model λ.
//!
//! Each lifted epipolar constraint `lift(p1, λ)ᵀ · E · lift(p2, λ) = 0` is quadratic in
//! λ and linear in `e = vec(E)` (row-major). Stacking nine of them gives the quadratic
//! eigenvalue problem
//!
//! ```text
//! (A + λ·B + λ²·C) · e = 0
//! ```
//!
//! which is solved by shift-and-invert linearization: with `λ = σ + 1/μ` for a shift σ
//! where `Q(σ) = A + σB + σ²C` is well conditioned, the problem becomes an ordinary
//! 18×18 eigenproblem in μ. No coefficient matrix is ever inverted directly, so
//! singular `A` (the pinhole case `λ = 0`) and singular `C` (always rank ≤ 1) are both
//! handled. Every real eigenvalue inside the requested range is polished by a few
//! Newton steps on the smallest singular value, its null vector is reshaped into a
//! 3×3 matrix and projected onto the essential manifold.

use nalgebra::{Matrix3, SMatrix, SVector, Schur, SVD};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::twoview::{algebraic_residual, project_to_essential, Correspondence, EssentialMatrix};

pub type Mat9<T> = SMatrix<T, 9, 9>;
type Mat18<T> = SMatrix<T, 18, 18>;
type Vec9<T> = SVector<T, 9>;

/// Number of correspondences consumed by the minimal solver.
pub const SAMPLE_SIZE: usize = 9;

/// Realness tolerance: `|Im λ| / max(1, |Re λ|)` must stay below this.
pub const REALNESS_TOLERANCE: f64 = 1e-6;

/// Slack allowed when testing λ against the requested range; accepted values are
/// clamped back into the range.
pub const RANGE_SLACK: f64 = 1e-9;

const NEWTON_POLISH_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("the minimal solver needs exactly {SAMPLE_SIZE} correspondences, got {0}")]
    WrongSampleSize(usize),
    #[error("correspondences {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("non-finite correspondence at index {0}")]
    NonFinite(usize),
    #[error("eigen decomposition failed")]
    EigenFailure,
    #[error("no real distortion parameter inside the requested range")]
    NoCandidate,
    #[error("invalid λ range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },
}

/// Coefficients of `(A + λB + λ²C)·vec(E) = 0`, one row per correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct Qep<T: Scalar> {
    pub a: Mat9<T>,
    pub b: Mat9<T>,
    pub c: Mat9<T>,
}

impl<T: Scalar> Qep<T> {
    /// `Q(λ) = A + λB + λ²C`.
    pub fn eval(&self, lambda: T) -> Mat9<T> {
        self.a + self.b * lambda + self.c * (lambda * lambda)
    }

    /// `dQ/dλ = B + 2λC`.
    pub fn derivative(&self, lambda: T) -> Mat9<T> {
        self.b + self.c * (T::lit(2.0) * lambda)
    }

    /// Multiplies every constraint row by `s`.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    /// Scales each constraint row (across A, B and C jointly) to unit Euclidean norm.
    /// Rows that are identically zero are left untouched.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..9 {
            let n2 = self.a.row(i).norm_squared()
                + self.b.row(i).norm_squared()
                + self.c.row(i).norm_squared();
            if n2 > T::zero() {
                let inv = T::one() / n2.sqrt();
                out.a.row_mut(i).scale_mut(inv);
                out.b.row_mut(i).scale_mut(inv);
                out.c.row_mut(i).scale_mut(inv);
            }
        }
        out
    }
}

/// A solver hypothesis: projected essential matrix, λ, and the largest absolute
/// algebraic residual over the nine input correspondences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverCandidate<T: Scalar> {
    pub e: EssentialMatrix<T>,
    pub lambda: T,
    pub residual: T,
    /// Distance of the unprojected null vector from the essential manifold,
    /// `((σ₁ − σ₂) + σ₃) / σ₁`. Real eigenpairs of the lifted system need not be
    /// essential; those with a large defect carry a large residual after projection.
    pub essential_defect: T,
}

fn essential_defect<T: Scalar>(m: &Matrix3<T>) -> T {
    let mut s: Vec<T> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if s[0] > T::zero() {
        (s[0] - s[1] + s[2]) / s[0]
    } else {
        T::one()
    }
}

fn check_sample<T: Scalar>(corrs: &[Correspondence<T>]) -> Result<(), SolverError> {
    if corrs.len() != SAMPLE_SIZE {
        return Err(SolverError::WrongSampleSize(corrs.len()));
    }
    for (i, c) in corrs.iter().enumerate() {
        if !c.is_finite() {
            return Err(SolverError::NonFinite(i));
        }
    }
    for i in 0..corrs.len() {
        for j in (i + 1)..corrs.len() {
            if corrs[i] == corrs[j] {
                return Err(SolverError::DuplicatePoints(i, j));
            }
        }
    }
    Ok(())
}

/// Expands the nine lifted constraints in powers of λ.
///
/// Writing `l = [x, y, 1 + λr²]`, the product `l1_j · l2_k` contributes
/// `x1_j·x2_k` to A for `j, k < 2`, `x1_j` and `x1_j·r2²` to A and B for `k = 2`,
/// `x2_k` and `r1²·x2_k` for `j = 2`, and `1`, `r1² + r2²`, `r1²·r2²` to A, B, C at
/// `j = k = 2`.
pub fn build_qep<T: Scalar>(corrs: &[Correspondence<T>]) -> Result<Qep<T>, SolverError> {
    check_sample(corrs)?;
    let mut a = Mat9::zeros();
    let mut b = Mat9::zeros();
    let mut c = Mat9::zeros();
    for (i, corr) in corrs.iter().enumerate() {
        let (x1, y1) = (corr.p1.x, corr.p1.y);
        let (x2, y2) = (corr.p2.x, corr.p2.y);
        let r1 = corr.p1.radius_squared();
        let r2 = corr.p2.radius_squared();
        let u = [x1, y1];
        let v = [x2, y2];
        for j in 0..2 {
            for k in 0..2 {
                a[(i, 3 * j + k)] = u[j] * v[k];
            }
            a[(i, 3 * j + 2)] = u[j];
            b[(i, 3 * j + 2)] = u[j] * r2;
        }
        for k in 0..2 {
            a[(i, 6 + k)] = v[k];
            b[(i, 6 + k)] = r1 * v[k];
        }
        a[(i, 8)] = T::one();
        b[(i, 8)] = r1 + r2;
        c[(i, 8)] = r1 * r2;
    }
    Ok(Qep { a, b, c })
}

/// All `(E, λ)` hypotheses with real λ inside `lambda_range`, sorted by ascending
/// residual and then ascending |λ|.
pub fn solve<T: Scalar>(
    corrs: &[Correspondence<T>],
    lambda_range: (T, T),
) -> Result<Vec<SolverCandidate<T>>, SolverError> {
    let qep = build_qep(corrs)?;
    solve_qep(&qep, corrs, lambda_range)
}

/// Solves an already assembled problem; `corrs` are only used to score candidates.
pub fn solve_qep<T: Scalar>(
    qep: &Qep<T>,
    corrs: &[Correspondence<T>],
    lambda_range: (T, T),
) -> Result<Vec<SolverCandidate<T>>, SolverError> {
    let (lo, hi) = lambda_range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SolverError::InvalidRange {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    let qep = qep.row_normalized();
    let hypotheses: Vec<(T, Vec9<T>)> = match spectrum(&qep, lambda_range)? {
        Spectrum::Regular(lambdas) => lambdas.into_iter().map(|l| polish(&qep, l)).collect(),
        // Every λ in the range is equally consistent; report an even sampling of it.
        Spectrum::Singular => {
            let n = if lo == hi { 1 } else { SINGULAR_PENCIL_SAMPLES };
            (0..n)
                .map(|i| {
                    let t = if n == 1 {
                        T::zero()
                    } else {
                        T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap()
                    };
                    let lambda = lo + (hi - lo) * t;
                    (lambda, smallest_singular_triplet(&qep.eval(lambda)).2)
                })
                .collect()
        }
    };

    let mut out: Vec<SolverCandidate<T>> = Vec::with_capacity(hypotheses.len());
    for (lambda, null) in hypotheses {
        let lambda = clamp(lambda, lo, hi);
        let m = Matrix3::from_row_slice(null.as_slice());
        let Ok(e) = project_to_essential(&m) else {
            continue;
        };
        let residual = corrs
            .iter()
            .map(|c| algebraic_residual(c, &e, lambda).abs())
            .fold(T::zero(), |acc, r| if r > acc { r } else { acc });
        out.push(SolverCandidate {
            e,
            lambda,
            residual,
            essential_defect: essential_defect(&m),
        });
    }
    if out.is_empty() {
        return Err(SolverError::NoCandidate);
    }
    out.sort_by(|p, q| {
        p.residual
            .partial_cmp(&q.residual)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                p.lambda
                    .abs()
                    .partial_cmp(&q.lambda.abs())
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    Ok(out)
}

fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

fn inverse_condition<T: Scalar>(m: &Mat9<T>) -> T {
    let s = m.singular_values();
    let max = s.max();
    if max > T::zero() {
        s.min() / max
    } else {
        T::zero()
    }
}

/// Shifts tried in order; expressed relative to the range so that λ inside the range
/// maps to moderate |μ|.
fn candidate_shifts<T: Scalar>(lo: T, hi: T) -> [T; 4] {
    let width = hi - lo;
    let pad = width * T::lit(0.6) + T::lit(0.1);
    [
        hi + pad,
        lo - pad,
        hi + pad * T::lit(2.3),
        lo - pad * T::lit(1.7),
    ]
}

/// Below this inverse condition number at every trial shift, `Q(λ)` is treated as
/// singular for all λ (a singular pencil, e.g. exact forward motion).
pub const SINGULAR_PENCIL_RCOND: f64 = 1e-10;

/// Number of evenly spaced λ reported when the pencil is singular.
pub const SINGULAR_PENCIL_SAMPLES: usize = 5;

enum Spectrum<T> {
    /// Real eigenvalues inside the range.
    Regular(Vec<T>),
    /// `Q(λ)` has a null vector for every λ, so λ is not determined by the data.
    Singular,
}

fn spectrum<T: Scalar>(qep: &Qep<T>, range: (T, T)) -> Result<Spectrum<T>, SolverError> {
    let (sigma, rc, q_sigma) = pick_shift(qep, range);
    if rc < T::lit(SINGULAR_PENCIL_RCOND) {
        return Ok(Spectrum::Singular);
    }
    shifted_real_eigenvalues(qep, sigma, &q_sigma, range).map(Spectrum::Regular)
}

/// True when the nine constraints admit a common solution for every λ.
pub fn is_singular_pencil<T: Scalar>(corrs: &[Correspondence<T>]) -> Result<bool, SolverError> {
    let qep = build_qep(corrs)?.row_normalized();
    let (_, rc, _) = pick_shift(&qep, (T::lit(-1.0), T::zero()));
    Ok(rc < T::lit(SINGULAR_PENCIL_RCOND))
}

fn pick_shift<T: Scalar>(qep: &Qep<T>, (lo, hi): (T, T)) -> (T, T, Mat9<T>) {
    let mut best: Option<(T, T, Mat9<T>)> = None;
    for sigma in candidate_shifts(lo, hi) {
        let q = qep.eval(sigma);
        let rc = inverse_condition(&q);
        if best.as_ref().is_none_or(|(_, brc, _)| rc > *brc) {
            best = Some((sigma, rc, q));
        }
        if rc > T::lit(1e-8) {
            break;
        }
    }
    best.expect("at least one shift")
}

fn shifted_real_eigenvalues<T: Scalar>(
    qep: &Qep<T>,
    sigma: T,
    q_sigma: &Mat9<T>,
    (lo, hi): (T, T),
) -> Result<Vec<T>, SolverError> {
    let lu = q_sigma.lu();
    // Q(σ + ν) = Q(σ) + ν·B' + ν²·C  with  B' = B + 2σC;  μ = 1/ν.
    let b_shift = qep.derivative(sigma);
    let (Some(inv_b), Some(inv_c)) = (lu.solve(&b_shift), lu.solve(&qep.c)) else {
        return Err(SolverError::EigenFailure);
    };
    let mut m = Mat18::<T>::zeros();
    for i in 0..9 {
        m[(i, 9 + i)] = T::one();
    }
    m.view_mut((9, 0), (9, 9)).copy_from(&(-inv_c));
    m.view_mut((9, 9), (9, 9)).copy_from(&(-inv_b));
    if !m.iter().all(|v| v.is_finite()) {
        return Err(SolverError::EigenFailure);
    }
    let schur = Schur::try_new(m, T::eps(), 10_000).ok_or(SolverError::EigenFailure)?;
    let eigenvalues = schur.complex_eigenvalues();

    let mu_floor = T::lit(1e-10);
    let tol = T::lit(REALNESS_TOLERANCE);
    let slack = T::lit(RANGE_SLACK);
    let mut out = Vec::new();
    for mu in eigenvalues.iter() {
        let n2 = mu.re * mu.re + mu.im * mu.im;
        if n2.sqrt() < mu_floor {
            continue; // λ at infinity
        }
        let re = sigma + mu.re / n2;
        let im = -mu.im / n2;
        let scale = if re.abs() > T::one() {
            re.abs()
        } else {
            T::one()
        };
        if im.abs() / scale >= tol {
            continue;
        }
        if re >= lo - slack && re <= hi + slack {
            out.push(re);
        }
    }
    Ok(out)
}

fn smallest_singular_triplet<T: Scalar>(m: &Mat9<T>) -> (T, Vec9<T>, Vec9<T>) {
    let svd = SVD::new(*m, true, true);
    let s = svd.singular_values;
    let idx = s.imin();
    let u = svd.u.expect("requested U").column(idx).into_owned();
    let v = svd.v_t.expect("requested Vᵀ").row(idx).transpose();
    (s[idx], u, v)
}

// Newton iteration λ ← λ − (uᵀQ(λ)v)/(uᵀQ'(λ)v) using the singular vectors of the
// smallest singular value; a step is kept only if it lowers that singular value.
fn polish<T: Scalar>(qep: &Qep<T>, lambda0: T) -> (T, Vec9<T>) {
    let (mut smin, mut u, mut v) = smallest_singular_triplet(&qep.eval(lambda0));
    let mut lambda = lambda0;
    for _ in 0..NEWTON_POLISH_STEPS {
        let num = u.dot(&(qep.eval(lambda) * v));
        let den = u.dot(&(qep.derivative(lambda) * v));
        if den == T::zero() || !den.is_finite() {
            break;
        }
        let next = lambda - num / den;
        let (s2, u2, v2) = smallest_singular_triplet(&qep.eval(next));
        if !(s2 < smin) {
            break;
        }
        lambda = next;
        smin = s2;
        u = u2;
        v = v2;
    }
    (lambda, v)
}

//! Robust estimation of `(E, λ)` around the nine-point solver.
//!
//! Minimal samples are drawn from a counter-based generator keyed by
//! `(seed, iteration)`, so every iteration can be evaluated independently. Iterations
//! run in fixed-size batches on the rayon pool and are then folded in iteration order,
//! which makes the result identical to a sequential run regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::solver::{self, SolverCandidate, SAMPLE_SIZE};
use crate::twoview::{
    decompose, sampson_residual, select_by_cheirality, Correspondence, EssentialMatrix,
    RelativePose, TwoViewError,
};

const BATCH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RansacError {
    #[error("need at least {SAMPLE_SIZE} correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("no hypothesis reached {SAMPLE_SIZE} inliers")]
    NoModelFound,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("pose recovery failed: {0}")]
    Pose(#[from] TwoViewError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig<T> {
    /// Inlier threshold on the Sampson residual, normalized-plane units.
    pub threshold: T,
    pub confidence: T,
    pub max_iterations: usize,
    /// Hypotheses with λ outside this closed interval are discarded.
    pub lambda_range: (T, T),
    pub seed: u64,
}

impl<T: Scalar> Default for RansacConfig<T> {
    fn default() -> Self {
        Self {
            threshold: T::lit(2e-4),
            confidence: T::lit(0.999),
            max_iterations: 2000,
            lambda_range: (T::lit(-1.0), T::zero()),
            seed: 0,
        }
    }
}

impl<T: Scalar> RansacConfig<T> {
    pub fn validate(&self) -> Result<(), RansacError> {
        if !(self.threshold > T::zero()) {
            return Err(RansacError::InvalidConfig("threshold must be positive"));
        }
        if !(self.confidence > T::zero() && self.confidence < T::one()) {
            return Err(RansacError::InvalidConfig("confidence must lie in (0, 1)"));
        }
        if !(self.lambda_range.0 <= self.lambda_range.1) {
            return Err(RansacError::InvalidConfig("lambda range is empty"));
        }
        if self.max_iterations == 0 {
            return Err(RansacError::InvalidConfig(
                "max_iterations must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult<T: Scalar> {
    pub e: EssentialMatrix<T>,
    pub lambda: T,
    pub pose: RelativePose<T>,
    pub inlier_mask: Vec<bool>,
    pub iterations_run: usize,
    /// Best inlier count after each iteration.
    pub inlier_history: Vec<usize>,
}

impl<T: Scalar> RansacResult<T> {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|m| **m).count()
    }
}

/// Generator for iteration `iteration` of a run seeded with `seed`.
pub fn iteration_rng(seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    rng
}

/// Indices of the minimal sample used at `iteration`.
pub fn sample_indices(n: usize, seed: u64, iteration: u64) -> Vec<usize> {
    let mut rng = iteration_rng(seed, iteration);
    rand::seq::index::sample(&mut rng, n, SAMPLE_SIZE).into_vec()
}

/// `log(1 − confidence) / log(1 − w⁹)`, clamped to `[1, max_iterations]`.
pub fn required_iterations(inlier_ratio: f64, confidence: f64, max_iterations: usize) -> usize {
    let w9 = inlier_ratio.clamp(0.0, 1.0).powi(SAMPLE_SIZE as i32);
    if w9 >= 1.0 {
        return 1;
    }
    if w9 <= 0.0 {
        return max_iterations;
    }
    let n = (1.0 - confidence).ln() / (1.0 - w9).ln();
    if !n.is_finite() {
        return max_iterations;
    }
    (n.ceil().max(1.0) as usize).min(max_iterations)
}

pub fn count_inliers<T: Scalar>(
    corrs: &[Correspondence<T>],
    e: &EssentialMatrix<T>,
    lambda: T,
    threshold: T,
) -> usize {
    corrs
        .iter()
        .filter(|c| sampson_residual(c, e, lambda) < threshold)
        .count()
}

#[derive(Clone, Copy)]
struct Hypothesis<T: Scalar> {
    candidate: SolverCandidate<T>,
    inliers: usize,
}

fn evaluate_iteration<T: Scalar>(
    corrs: &[Correspondence<T>],
    cfg: &RansacConfig<T>,
    iteration: usize,
) -> Option<Hypothesis<T>> {
    let idx = sample_indices(corrs.len(), cfg.seed, iteration as u64);
    let sample: Vec<Correspondence<T>> = idx.iter().map(|&i| corrs[i]).collect();
    let candidates = solver::solve(&sample, cfg.lambda_range).ok()?;
    let mut best: Option<Hypothesis<T>> = None;
    for candidate in candidates {
        let (lo, hi) = cfg.lambda_range;
        if candidate.lambda < lo || candidate.lambda > hi {
            continue;
        }
        let inliers = count_inliers(corrs, &candidate.e, candidate.lambda, cfg.threshold);
        if best.as_ref().is_none_or(|b| inliers > b.inliers) {
            best = Some(Hypothesis { candidate, inliers });
        }
    }
    best
}

/// Runs RANSAC over `corrs`; deterministic for a given configuration.
pub fn estimate<T: Scalar>(
    corrs: &[Correspondence<T>],
    cfg: &RansacConfig<T>,
) -> Result<RansacResult<T>, RansacError> {
    cfg.validate()?;
    let n = corrs.len();
    if n < SAMPLE_SIZE {
        return Err(RansacError::TooFewPoints(n));
    }
    let confidence = cfg.confidence.to_f64_lossy();
    let mut bound = cfg.max_iterations;
    let mut best: Option<Hypothesis<T>> = None;
    let mut history = Vec::new();
    let mut next = 0usize;

    'outer: while next < bound {
        let end = (next + BATCH).min(bound);
        let batch: Vec<Option<Hypothesis<T>>> = (next..end)
            .into_par_iter()
            .map(|it| evaluate_iteration(corrs, cfg, it))
            .collect();
        for (offset, hyp) in batch.into_iter().enumerate() {
            let it = next + offset;
            if let Some(h) = hyp {
                if best.as_ref().is_none_or(|b| h.inliers > b.inliers) {
                    bound = required_iterations(
                        h.inliers as f64 / n as f64,
                        confidence,
                        cfg.max_iterations,
                    );
                    best = Some(h);
                }
            }
            history.push(best.as_ref().map_or(0, |b| b.inliers));
            if it + 1 >= bound {
                break 'outer;
            }
        }
        next = end;
    }

    let best = best.ok_or(RansacError::NoModelFound)?;
    if best.inliers < SAMPLE_SIZE {
        return Err(RansacError::NoModelFound);
    }
    let SolverCandidate { e, lambda, .. } = best.candidate;
    let inlier_mask: Vec<bool> = corrs
        .iter()
        .map(|c| sampson_residual(c, &e, lambda) < cfg.threshold)
        .collect();
    let inliers: Vec<Correspondence<T>> = corrs
        .iter()
        .zip(&inlier_mask)
        .filter(|(_, m)| **m)
        .map(|(c, _)| *c)
        .collect();
    let pose = select_by_cheirality(&decompose(&e)?, &inliers, lambda)?;
    Ok(RansacResult {
        e,
        lambda,
        pose,
        inlier_mask,
        iterations_run: history.len(),
        inlier_history: history,
    })
}

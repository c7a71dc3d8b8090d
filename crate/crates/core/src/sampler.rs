//! Weighted sparse frame sampling.
//!
//! Each segment's frames form a dictionary D (one descriptor per column)
//! whose column sum v acts as the segment's story. Solving
//!
//! ```text
//! α* = argmin ‖v − Dα‖² + λ‖(W g) ⊙ α‖²
//! ```
//!
//! reconstructs the story from few frames: the locality penalty g (distance
//! of each frame to the story) and the per-frame weights w decide which
//! coefficients survive, and λ is tuned until the number of activated
//! coefficients matches the per-segment frame budget.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::features::FeatureMatrix;

/// Initial λ step of the adjustment loop.
pub const LAMBDA_STEP_INIT: f64 = 0.1;
/// The step never shrinks below this; hitting it triggers the fallback.
pub const LAMBDA_STEP_FLOOR: f64 = 1e-12;
/// Probe budget of the adjustment loop.
pub const LAMBDA_ITER_CAP: usize = 10_000;

/// One segment's sampling problem, with the factors that are reused across
/// λ probes precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDictionary {
    d: DMatrix<f64>,
    v: DVector<f64>,
    g: DVector<f64>,
    w: DVector<f64>,
    /// qᵢ² = (wᵢ·gᵢ)², the diagonal of the locality regularizer.
    q2: DVector<f64>,
    dtv: DVector<f64>,
    gram: GramCache,
}

/// λ-independent factor cached at construction.
#[derive(Debug, Clone, PartialEq)]
enum GramCache {
    /// DᵀD, used when n ≤ f.
    Primal(DMatrix<f64>),
    /// D·diag(1/q²)·Dᵀ, used when n > f and every qᵢ is positive; the
    /// λ-probe then solves the f×f system (I + K/λ)y = v and maps back.
    Dual(DMatrix<f64>),
    /// n > f with some qᵢ = 0: no reusable factor; probes fall back to the
    /// dense n×n normal equations.
    Bare,
}

impl SegmentDictionary {
    /// Dictionary whose story vector is the column sum v = Σᵢ dᵢ — the
    /// pipeline construction. Columns are summed left to right so the result
    /// is bit-reproducible.
    pub fn build(features: &FeatureMatrix, weights: &[f64]) -> Result<Self> {
        let f = features.rows();
        let n = features.cols();
        let d = DMatrix::from_iterator(f, n, features.data().iter().map(|x| *x as f64));
        let mut v = DVector::zeros(f);
        for j in 0..n {
            v += d.column(j);
        }
        SegmentDictionary::with_story(d, v, weights)
    }

    /// Dictionary with an explicit story vector, for analysis and tests; the
    /// pipeline itself always uses [`SegmentDictionary::build`], whose story
    /// is the column sum.
    pub fn with_story(d: DMatrix<f64>, v: DVector<f64>, weights: &[f64]) -> Result<Self> {
        let (f, n) = d.shape();
        if n == 0 || f == 0 {
            return Err(CoreError::EmptyInput("empty dictionary".into()));
        }
        if v.len() != f {
            return Err(CoreError::DimensionMismatch(format!(
                "story vector has {} rows, dictionary has {f}",
                v.len()
            )));
        }
        if weights.len() != n {
            return Err(CoreError::DimensionMismatch(format!(
                "{} weights for {n} frames",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CoreError::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if d.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonFinite("dictionary"));
        }

        let w = DVector::from_column_slice(weights);
        let g = DVector::from_fn(n, |i, _| (d.column(i) - &v).norm());
        let q2 = DVector::from_fn(n, |i, _| {
            let q = w[i] * g[i];
            q * q
        });
        let dtv = d.tr_mul(&v);
        let gram = if n <= f {
            GramCache::Primal(d.tr_mul(&d))
        } else if q2.iter().all(|q| *q > 0.0) {
            let mut scaled = d.clone();
            for j in 0..n {
                let mut col = scaled.column_mut(j);
                col /= q2[j];
            }
            GramCache::Dual(&scaled * d.transpose())
        } else {
            GramCache::Bare
        };
        Ok(SegmentDictionary {
            d,
            v,
            g,
            w,
            q2,
            dtv,
            gram,
        })
    }

    /// Frame count n (dictionary columns).
    pub fn len(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.d.ncols() == 0
    }

    /// Feature dimension f.
    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn dictionary(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn story(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn locality(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.w
    }

    /// Relative deviation of the story from the column sum; 0 (to rounding)
    /// on dictionaries made by [`SegmentDictionary::build`].
    pub fn story_deviation(&self) -> f64 {
        let mut sum = DVector::zeros(self.d.nrows());
        for j in 0..self.d.ncols() {
            sum += self.d.column(j);
        }
        (&sum - &self.v).norm() / (1.0 + self.v.norm())
    }

    /// Reconstruction residual ‖v − Dα‖.
    pub fn residual(&self, alpha: &DVector<f64>) -> f64 {
        (&self.v - &self.d * alpha).norm()
    }
}

/// Closed-form solution of the weighted LLC objective at a given λ.
///
/// Solves the regularized normal equations `(DᵀD + λ·diag(q²))α = Dᵀv`
/// through the cached factor — primal for n ≤ f, the f×f dual for n > f.
/// When the system is singular (λ = 0 on a rank-deficient dictionary, or a
/// zero qᵢ aligned with a null direction) the minimum-norm least-squares
/// solution is returned instead.
pub fn solve_weighted_llc(dict: &SegmentDictionary, lambda: f64) -> Result<DVector<f64>> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "lambda {lambda} must be finite and nonnegative"
        )));
    }
    let n = dict.len();
    if dict.dtv.norm() == 0.0 {
        // Dᵀv = 0 makes α = 0 stationary and minimum-norm for every λ.
        return Ok(DVector::zeros(n));
    }
    match &dict.gram {
        GramCache::Primal(dtd) => {
            let mut a = dtd.clone();
            if lambda > 0.0 {
                for i in 0..n {
                    a[(i, i)] += lambda * dict.q2[i];
                }
            }
            Ok(solve_spd_or_pinv(a, &dict.dtv))
        }
        GramCache::Dual(k) if lambda > 0.0 => {
            let f = dict.dim();
            let mut m = k.scale(1.0 / lambda);
            for i in 0..f {
                m[(i, i)] += 1.0;
            }
            let y = solve_spd_or_pinv(m, &dict.v);
            let z = dict.d.tr_mul(&y);
            Ok(DVector::from_fn(n, |i, _| z[i] / (lambda * dict.q2[i])))
        }
        GramCache::Dual(_) | GramCache::Bare if lambda == 0.0 => {
            // Minimum-norm least squares: α = Dᵀ(DDᵀ)⁺v.
            let ddt = &dict.d * dict.d.transpose();
            let y = solve_spd_or_pinv(ddt, &dict.v);
            Ok(dict.d.tr_mul(&y))
        }
        _ => {
            // n > f with some qᵢ = 0 and λ > 0: dense normal equations.
            let mut a = dict.d.tr_mul(&dict.d);
            for i in 0..n {
                a[(i, i)] += lambda * dict.q2[i];
            }
            Ok(solve_spd_or_pinv(a, &dict.dtv))
        }
    }
}

/// Cholesky when the system is positive definite, eigenvalue pseudo-inverse
/// (minimum-norm solution) otherwise.
fn solve_spd_or_pinv(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = a.clone().cholesky() {
        return chol.solve(b);
    }
    let eig = a.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut x = DVector::zeros(b.len());
    if max == 0.0 {
        return x;
    }
    let tol = max * 1e-12;
    for (i, e) in eig.eigenvalues.iter().enumerate() {
        if e.abs() > tol {
            let u = eig.eigenvectors.column(i);
            let coeff = u.dot(b) / e;
            x.axpy(coeff, &u.clone_owned(), 1.0);
        }
    }
    x
}

/// Indices whose coefficient magnitude reaches `tau_rel` of the largest; an
/// all-zero α degenerates to every index.
pub fn activated_frames(alpha: &[f64], tau_rel: f64) -> Vec<usize> {
    let max = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if max == 0.0 {
        return (0..alpha.len()).collect();
    }
    let threshold = tau_rel * max;
    alpha
        .iter()
        .enumerate()
        .filter(|(_, a)| a.abs() >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Activation count at a given λ.
pub fn num_of_frames(dict: &SegmentDictionary, lambda: f64, tau_rel: f64) -> Result<usize> {
    let alpha = solve_weighted_llc(dict, lambda)?;
    Ok(activated_frames(alpha.as_slice(), tau_rel).len())
}

/// Outcome of one segment's sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationResult {
    /// Solved coefficients α*.
    pub alpha: Vec<f64>,
    /// The λ whose activation count was kept.
    pub lambda: f64,
    /// Activated frame indices, ascending, segment-local.
    pub selected: Vec<usize>,
    /// Reconstruction residual ‖v − Dα*‖.
    pub residual: f64,
    /// False when the adjustment loop gave up and kept the closest count.
    pub target_hit: bool,
}

/// Tunes λ until the activation count matches `target`.
///
/// Implements the published adjustment loop: probe λ + step; accept the step
/// while the count stays at or above target, otherwise shrink the step
/// tenfold; stop on an exact hit. Two safeguards bound it: the step never
/// drops below [`LAMBDA_STEP_FLOOR`] and at most [`LAMBDA_ITER_CAP`] probes
/// run. If the loop gives up, the probe whose count was closest to the
/// target wins (ties prefer the smaller count, then the earlier probe); the
/// result's `target_hit` records whether the target was met exactly.
pub fn adjust_lambda(
    dict: &SegmentDictionary,
    target: usize,
    tau_rel: f64,
) -> Result<ActivationResult> {
    adjust_lambda_impl(dict, target, tau_rel, None)
}

/// [`adjust_lambda`] that also records every probed (λ, count) pair, for
/// diagnostics and the sparsity-monotonicity checks.
pub fn adjust_lambda_traced(
    dict: &SegmentDictionary,
    target: usize,
    tau_rel: f64,
    trace: &mut Vec<(f64, usize)>,
) -> Result<ActivationResult> {
    adjust_lambda_impl(dict, target, tau_rel, Some(trace))
}

struct BestProbe {
    distance: usize,
    count: usize,
    lambda: f64,
    alpha: DVector<f64>,
}

fn adjust_lambda_impl(
    dict: &SegmentDictionary,
    target: usize,
    tau_rel: f64,
    mut trace: Option<&mut Vec<(f64, usize)>>,
) -> Result<ActivationResult> {
    let n = dict.len();
    if target < 1 || target > n {
        return Err(CoreError::InvalidArgument(format!(
            "target {target} outside 1..={n}"
        )));
    }
    if !(tau_rel > 0.0 && tau_rel < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "activation threshold {tau_rel} outside (0, 1)"
        )));
    }

    let probe = |lam: f64, trace: &mut Option<&mut Vec<(f64, usize)>>| -> Result<(usize, DVector<f64>)> {
        let alpha = solve_weighted_llc(dict, lam)?;
        let count = activated_frames(alpha.as_slice(), tau_rel).len();
        if let Some(t) = trace {
            t.push((lam, count));
        }
        Ok((count, alpha))
    };
    let finish = |dict: &SegmentDictionary, lambda: f64, alpha: DVector<f64>, selected: Vec<usize>, hit: bool| {
        let residual = dict.residual(&alpha);
        ActivationResult {
            alpha: alpha.as_slice().to_vec(),
            lambda,
            selected,
            residual,
            target_hit: hit,
        }
    };

    // λ = 0 joins the candidate set so the fallback can report full
    // activation when no positive λ reaches the target.
    let (count0, alpha0) = probe(0.0, &mut trace)?;
    let mut best = BestProbe {
        distance: count0.abs_diff(target),
        count: count0,
        lambda: 0.0,
        alpha: alpha0,
    };

    let mut lambda = 0.0f64;
    let mut step = LAMBDA_STEP_INIT;
    let mut iters = 1usize;
    while iters < LAMBDA_ITER_CAP && step >= LAMBDA_STEP_FLOOR {
        let probe_lambda = lambda + step;
        let (count, alpha) = probe(probe_lambda, &mut trace)?;
        iters += 1;

        let distance = count.abs_diff(target);
        let improves =
            distance < best.distance || (distance == best.distance && count < best.count);
        // An exact hit always replaces the incumbent so the early return
        // below reports this probe's λ.
        if improves || count == target {
            best = BestProbe {
                distance,
                count,
                lambda: probe_lambda,
                alpha,
            };
        }

        if count >= target {
            lambda = probe_lambda;
            if count == target {
                let selected = activated_frames(best.alpha.as_slice(), tau_rel);
                return Ok(finish(dict, probe_lambda, best.alpha, selected, true));
            }
        } else {
            step /= 10.0;
        }
    }

    let selected = activated_frames(best.alpha.as_slice(), tau_rel);
    let hit = best.count == target;
    Ok(finish(dict, best.lambda, best.alpha, selected, hit))
}

/// End-to-end sampling of one segment: build the dictionary, tune λ to the
/// frame budget, and return the activation.
pub fn sample_segment(
    features: &FeatureMatrix,
    weights: &[f64],
    target: usize,
    tau_rel: f64,
) -> Result<ActivationResult> {
    let dict = SegmentDictionary::build(features, weights)?;
    adjust_lambda(&dict, target, tau_rel)
}

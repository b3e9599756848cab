//! Entropy functionals on the truncated simplex, the moment-constrained
//! minimum relative entropy problem and partial-sum diagnostics for
//! slowly convergent (or divergent) entropy series.

use crate::numeric::{logsumexp, xlogx, CompensatedSum, ExtReal};
use crate::series::{self, check_simplex, mean_index, CoefficientSeq, SeriesError, SimplexWeights};
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

/// Stop bisection once the tilted mean is this close to the target.
pub const MEAN_TOL: f64 = 1e-10;
/// Stop bisection once the tilt bracket is this narrow (relative to `max(1, |β|)`).
pub const TILT_WIDTH_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("LengthMismatch: weights have {weights} entries, reference has {reference}")]
    LengthMismatch { weights: usize, reference: usize },
    #[error("TargetMeanOutOfRange: target mean {target} not in [0, {n}]")]
    TargetMeanOutOfRange { target: f64, n: usize },
    #[error("rho must lie in (0,1), got {0}")]
    RhoOutOfRange(f64),
    #[error("EmptySchedule")]
    EmptySchedule,
    #[error("schedule must be strictly increasing (position {0})")]
    NonIncreasingSchedule(usize),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `Σ t_n ln t_n` with `0 ln 0 = 0`.
pub fn neg_entropy(t: &SimplexWeights) -> f64 {
    t.weights()
        .iter()
        .map(|&w| xlogx(w))
        .collect::<CompensatedSum>()
        .value()
}

/// `Σ t_n (ln t_n − ref_n)`: relative entropy against `b_n = e^{ref_n}`.
pub fn relative_entropy(
    t: &SimplexWeights,
    ref_log_weights: &CoefficientSeq,
) -> Result<f64, EntropyError> {
    let reference = ref_log_weights.coeffs();
    if reference.len() != t.len() {
        return Err(EntropyError::LengthMismatch {
            weights: t.len(),
            reference: reference.len(),
        });
    }
    Ok(t.weights()
        .iter()
        .zip(reference)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, &r)| xlogx(w) - w * r)
        .collect::<CompensatedSum>()
        .value())
}

/// `g_r(t) = Σ t_n ln t_n − ln ρ · Σ n t_n` on validated weights.
pub fn g_r(t: &SimplexWeights, rho: f64) -> Result<f64, EntropyError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(EntropyError::RhoOutOfRange(rho));
    }
    Ok(neg_entropy(t) - rho.ln() * mean_index(t))
}

/// `g_r` on raw weights: `+inf` for anything outside the simplex.
pub fn g_r_unchecked(weights: &[f64], rho: f64) -> Result<ExtReal, EntropyError> {
    match SimplexWeights::new(weights.to_vec()) {
        Ok(t) => g_r(&t, rho).map(ExtReal::Finite),
        Err(SeriesError::InvalidSimplexPoint(_)) => {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(EntropyError::RhoOutOfRange(rho));
            }
            Ok(ExtReal::PosInf)
        }
        Err(e) => Err(e.into()),
    }
}

/// Minimizer of `Σ t_n ln(t_n / a_n)` under `Σ t = 1`, `Σ n t_n = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedSolution {
    pub weights: SimplexWeights,
    /// Exponential tilt `β` with `t_n ∝ a_n e^{β n}`; `±inf` on the two boundary means.
    pub tilt: ExtReal,
    pub value: f64,
    /// `|Σ n t_n − target|` at the returned weights.
    pub mean_residual: f64,
}

/// Mean index of the tilted family `t_n ∝ e^{a_n + β n}`, `n ≤ N`.
pub fn tilted_mean(a_log: &CoefficientSeq, beta: f64, n: usize) -> Result<f64, EntropyError> {
    Ok(mean_index(&series::gibbs_at_exponent(a_log, beta, n)?))
}

/// Solves the moment-constrained minimum relative entropy problem by
/// bisection on the tilt `β`; the tilted mean is strictly increasing in `β`.
pub fn tilted_min_entropy(
    a_log: &CoefficientSeq,
    target_mean: f64,
    n: usize,
) -> Result<TiltedSolution, EntropyError> {
    if n > a_log.trunc_n() {
        return Err(SeriesError::TruncationMismatch {
            requested: n,
            available: a_log.trunc_n(),
        }
        .into());
    }
    if !(target_mean >= 0.0 && target_mean <= n as f64) {
        return Err(EntropyError::TargetMeanOutOfRange {
            target: target_mean,
            n,
        });
    }
    let a = a_log.coeffs();
    if target_mean == 0.0 {
        return Ok(TiltedSolution {
            weights: SimplexWeights::point_mass(0, n + 1),
            tilt: ExtReal::NegInf,
            value: -a[0],
            mean_residual: 0.0,
        });
    }
    if target_mean == n as f64 {
        return Ok(TiltedSolution {
            weights: SimplexWeights::point_mass(n, n + 1),
            tilt: ExtReal::PosInf,
            value: -a[n],
            mean_residual: 0.0,
        });
    }

    let mean_at = |beta: f64| tilted_mean(a_log, beta, n);
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    for _ in 0..64 {
        if mean_at(lo)? <= target_mean {
            break;
        }
        hi = lo;
        lo *= 2.0;
    }
    for _ in 0..64 {
        if mean_at(hi)? >= target_mean {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }

    let mut beta = 0.5 * (lo + hi);
    for _ in 0..400 {
        beta = 0.5 * (lo + hi);
        let m = mean_at(beta)?;
        if (m - target_mean).abs() <= MEAN_TOL || hi - lo <= TILT_WIDTH_TOL * beta.abs().max(1.0) {
            break;
        }
        if m < target_mean {
            lo = beta;
        } else {
            hi = beta;
        }
    }

    let exps: Vec<f64> = a[..=n]
        .iter()
        .enumerate()
        .map(|(k, ak)| ak + beta * k as f64)
        .collect();
    let lse = logsumexp(&exps);
    let weights = series::gibbs_at_exponent(a_log, beta, n)?;
    // ln(t_n / a_n) = β n − lse, computed in log form
    let value = weights
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(k, w)| w * (beta * k as f64 - lse))
        .collect::<CompensatedSum>()
        .value();
    let mean_residual = (mean_index(&weights) - target_mean).abs();
    Ok(TiltedSolution {
        weights,
        tilt: ExtReal::Finite(beta),
        value,
        mean_residual,
    })
}

/// Partial sums of a series recorded at increasing truncation points.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumTrace {
    checkpoints: Vec<(usize, f64)>,
}

impl PartialSumTrace {
    pub fn new(checkpoints: Vec<(usize, f64)>) -> Result<Self, EntropyError> {
        if checkpoints.is_empty() {
            return Err(EntropyError::EmptySchedule);
        }
        if let Some(i) = checkpoints.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(EntropyError::NonIncreasingSchedule(i + 1));
        }
        Ok(Self { checkpoints })
    }

    pub fn checkpoints(&self) -> &[(usize, f64)] {
        &self.checkpoints
    }

    pub fn last(&self) -> (usize, f64) {
        *self.checkpoints.last().expect("trace is nonempty")
    }

    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.checkpoints
            .iter()
            .find(|(k, _)| *k == n)
            .map(|(_, v)| *v)
    }
}

/// The two entropy series used to probe convergence of `Σ t_n ln t_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesGenerator {
    /// `t_n = 6 / (π n)^2`, `n ≥ 1`: infinite mean, finite entropy.
    InverseSquare,
    /// `t_n = 1 / (n (ln n)^2 a)`, `n ≥ 2`: entropy series diverges to `-inf`.
    InverseNLogSq,
}

/// Terms summed exactly before the integral tail takes over in [`inverse_n_log_sq_normalizer`].
const NORMALIZER_TERMS: usize = 1_000_000;
const CHUNK: usize = 1 << 18;

/// `a = Σ_{n≥2} 1 / (n (ln n)^2)`: compensated partial sum to 10^6 plus the
/// midpoint integral tail `∫_{M+1/2}^∞ dx / (x ln² x) = 1 / ln(M + 1/2)`.
pub fn inverse_n_log_sq_normalizer() -> f64 {
    let mut acc = chunked_sum(2, NORMALIZER_TERMS, |k| {
        let l = (k as f64).ln();
        1.0 / (k as f64 * l * l)
    });
    acc.add(1.0 / (NORMALIZER_TERMS as f64 + 0.5).ln());
    acc.value()
}

impl SeriesGenerator {
    pub fn first_index(self) -> usize {
        match self {
            SeriesGenerator::InverseSquare => 1,
            SeriesGenerator::InverseNLogSq => 2,
        }
    }

    /// A closure evaluating `t_n ln t_n` for `n ≥ first_index`.
    fn term(self) -> Box<dyn Fn(usize) -> f64 + Sync> {
        match self {
            SeriesGenerator::InverseSquare => {
                let scale = 6.0 / (PI * PI);
                let log_scale = scale.ln();
                Box::new(move |k| {
                    let kf = k as f64;
                    let t = scale / (kf * kf);
                    t * (log_scale - 2.0 * kf.ln())
                })
            }
            SeriesGenerator::InverseNLogSq => {
                let a = inverse_n_log_sq_normalizer();
                let log_a = a.ln();
                Box::new(move |k| {
                    let kf = k as f64;
                    let l = kf.ln();
                    let t = 1.0 / (kf * l * l * a);
                    t * (-l - 2.0 * l.ln() - log_a)
                })
            }
        }
    }
}

/// Compensated sum of `term(k)` for `k` in `from..=to`, computed in fixed
/// chunks (possibly in parallel) and merged in index order.
fn chunked_sum(from: usize, to: usize, term: impl Fn(usize) -> f64 + Sync) -> CompensatedSum {
    if to < from {
        return CompensatedSum::new();
    }
    let starts: Vec<usize> = (from..=to).step_by(CHUNK).collect();
    let parts: Vec<CompensatedSum> = starts
        .par_iter()
        .map(|&s| (s..=to.min(s + CHUNK - 1)).map(&term).collect())
        .collect();
    let mut acc = CompensatedSum::new();
    for p in &parts {
        acc.merge(p);
    }
    acc
}

/// Partial sums `Σ_{n ≤ N} t_n ln t_n` of the chosen generator at every `N` in
/// `schedule`, summed in ascending `n` with compensation.
pub fn divergence_diagnostic(
    generator: SeriesGenerator,
    schedule: &[usize],
) -> Result<PartialSumTrace, EntropyError> {
    if schedule.is_empty() {
        return Err(EntropyError::EmptySchedule);
    }
    if let Some(i) = schedule.windows(2).position(|w| w[1] <= w[0]) {
        return Err(EntropyError::NonIncreasingSchedule(i + 1));
    }
    let term = generator.term();
    let mut acc = CompensatedSum::new();
    let mut next = generator.first_index();
    let mut checkpoints = Vec::with_capacity(schedule.len());
    for &n in schedule {
        if n >= next {
            acc.merge(&chunked_sum(next, n, &term));
            next = n + 1;
        }
        checkpoints.push((n, acc.value()));
    }
    PartialSumTrace::new(checkpoints)
}

/// Single-threaded reference for [`divergence_diagnostic`].
pub fn divergence_diagnostic_sequential(
    generator: SeriesGenerator,
    schedule: &[usize],
) -> Result<PartialSumTrace, EntropyError> {
    if schedule.is_empty() {
        return Err(EntropyError::EmptySchedule);
    }
    let term = generator.term();
    let mut acc = CompensatedSum::new();
    let mut k = generator.first_index();
    let mut checkpoints = Vec::with_capacity(schedule.len());
    for &n in schedule {
        while k <= n {
            acc.add(term(k));
            k += 1;
        }
        checkpoints.push((n, acc.value()));
    }
    PartialSumTrace::new(checkpoints)
}

/// Partial sums `Σ_{n≤N} t_n ln(t_n / ρ^n)` at each checkpoint: the raw data
/// behind the lower limit in `h_r`. No limit is taken.
pub fn h_r_partial_sums(
    t: &SimplexWeights,
    rho: f64,
    schedule: &[usize],
) -> Result<PartialSumTrace, EntropyError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(EntropyError::RhoOutOfRange(rho));
    }
    if schedule.is_empty() {
        return Err(EntropyError::EmptySchedule);
    }
    let log_rho = rho.ln();
    let w = t.weights();
    let mut acc = CompensatedSum::new();
    let mut k = 0;
    let mut checkpoints = Vec::with_capacity(schedule.len());
    for &n in schedule {
        while k <= n && k < w.len() {
            if w[k] > 0.0 {
                acc.add(xlogx(w[k]) - w[k] * k as f64 * log_rho);
            }
            k += 1;
        }
        checkpoints.push((n, acc.value()));
    }
    PartialSumTrace::new(checkpoints)
}

/// Midpoint excess of the `h_r` partial sums along the segment `[t1, t2]`, one
/// entry per checkpoint: `H_N((t1+t2)/2) − (H_N(t1) + H_N(t2))/2`. Recorded as
/// data only.
pub fn h_r_segment_probe(
    t1: &SimplexWeights,
    t2: &SimplexWeights,
    rho: f64,
    schedule: &[usize],
) -> Result<Vec<(usize, f64)>, EntropyError> {
    let mid = t1.mix(t2, 0.5);
    let a = h_r_partial_sums(t1, rho, schedule)?;
    let b = h_r_partial_sums(t2, rho, schedule)?;
    let m = h_r_partial_sums(&mid, rho, schedule)?;
    Ok(m.checkpoints()
        .iter()
        .zip(a.checkpoints().iter().zip(b.checkpoints()))
        .map(|(&(n, vm), (&(_, va), &(_, vb)))| (n, vm - 0.5 * (va + vb)))
        .collect())
}

/// Upper bound on the Shannon entropy at mean index `μ`, attained by the
/// geometric distribution: `(μ+1) ln(μ+1) − μ ln μ`.
pub fn max_entropy_at_mean(mu: f64) -> f64 {
    xlogx(mu + 1.0) - xlogx(mu)
}

/// Validates raw weights without constructing a [`SimplexWeights`].
pub fn is_simplex_point(weights: &[f64]) -> bool {
    check_simplex(weights).is_ok()
}

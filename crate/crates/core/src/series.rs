//! The analytic series `f_c(r) = Σ e^{c_n} r^n`: its logarithm, the Gibbs
//! weights that attain the log-partition variational principle, and the
//! mean index `Σ n t_n`.
//!
//! Every operation works on an explicit truncation `N`; nothing is added for
//! the tail. [`suggest_truncation`] picks `N` from the geometric tail bound
//! `e^{sup c} ρ^{N+1} / (1 - ρ)` when `ρ < 1`.

use crate::numeric::{logsumexp, xlogx, CompensatedSum};
use thiserror::Error;

/// Tolerance on `Σ t_n = 1` accepted by [`SimplexWeights::new`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("NonPositiveRho: rho must be > 0, got {0}")]
    NonPositiveRho(f64),
    #[error(
        "TruncationMismatch: requested N = {requested} exceeds coefficient truncation {available}"
    )]
    TruncationMismatch { requested: usize, available: usize },
    #[error("coefficient sequence is empty")]
    EmptyCoefficients,
    #[error("coefficient c_{index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("InvalidSimplexPoint: {0}")]
    InvalidSimplexPoint(String),
    #[error("tail bound requires 0 < rho < 1 and eps > 0 (rho = {rho}, eps = {eps})")]
    NoTailBound { rho: f64, eps: f64 },
}

/// Truncated stand-in for a bounded coefficient sequence `c = (c_0, …, c_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeq {
    coeffs: Vec<f64>,
}

impl CoefficientSeq {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, SeriesError> {
        if coeffs.is_empty() {
            return Err(SeriesError::EmptyCoefficients);
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SeriesError::NonFiniteCoefficient { index });
        }
        Ok(Self { coeffs })
    }

    /// `N + 1` zero coefficients, i.e. the plain geometric series.
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "coefficient sequence must be nonempty");
        Self {
            coeffs: vec![0.0; len],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the last stored coefficient.
    pub fn trunc_n(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn sup(&self) -> f64 {
        self.coeffs
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Adds `s` to every coefficient.
    pub fn shifted(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c + s).collect(),
        }
    }

    fn prefix(&self, n: usize) -> Result<&[f64], SeriesError> {
        if n > self.trunc_n() {
            return Err(SeriesError::TruncationMismatch {
                requested: n,
                available: self.trunc_n(),
            });
        }
        Ok(&self.coeffs[..=n])
    }
}

/// A probability vector `(t_0, …, t_N)`. The mean index is automatically
/// finite for a truncated vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    weights: Vec<f64>,
}

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, SeriesError> {
        check_simplex(&weights)?;
        Ok(Self { weights })
    }

    /// Normalizes nonnegative masses with a positive total.
    pub fn from_masses(masses: &[f64]) -> Result<Self, SeriesError> {
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(SeriesError::InvalidSimplexPoint(format!(
                "mass {i} is {}",
                masses[i]
            )));
        }
        let total: f64 = masses.iter().copied().collect::<CompensatedSum>().value();
        if !(total > 0.0) {
            return Err(SeriesError::InvalidSimplexPoint(
                "total mass is zero".into(),
            ));
        }
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    /// The point mass `e_k` on a vector of length `len`.
    pub fn point_mass(k: usize, len: usize) -> Self {
        assert!(k < len);
        let mut weights = vec![0.0; len];
        weights[k] = 1.0;
        Self { weights }
    }

    /// The geometric distribution `(1 - r) r^n`, truncated at `N` and
    /// renormalized over `0..=N`.
    pub fn geometric(r: f64, n: usize) -> Result<Self, SeriesError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(SeriesError::InvalidSimplexPoint(format!(
                "geometric ratio {r} not in (0,1)"
            )));
        }
        let masses: Vec<f64> = (0..=n).map(|k| (1.0 - r) * r.powi(k as i32)).collect();
        Self::from_masses(&masses)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn trunc_n(&self) -> usize {
        self.weights.len() - 1
    }

    /// True for `e_0 = (1, 0, 0, …)`.
    pub fn is_e0(&self) -> bool {
        self.weights[0] == 1.0 && self.weights[1..].iter().all(|&w| w == 0.0)
    }

    /// Convex combination `s·self + (1-s)·other`; the shorter vector is zero-padded.
    pub fn mix(&self, other: &SimplexWeights, s: f64) -> SimplexWeights {
        let len = self.len().max(other.len());
        let at = |w: &[f64], i: usize| w.get(i).copied().unwrap_or(0.0);
        let weights = (0..len)
            .map(|i| s * at(&self.weights, i) + (1.0 - s) * at(&other.weights, i))
            .collect();
        SimplexWeights { weights }
    }
}

/// Validates nonnegativity and unit mass of a raw weight vector.
pub fn check_simplex(weights: &[f64]) -> Result<(), SeriesError> {
    if weights.is_empty() {
        return Err(SeriesError::InvalidSimplexPoint(
            "empty weight vector".into(),
        ));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(SeriesError::InvalidSimplexPoint(format!(
            "weight {i} is {}",
            weights[i]
        )));
    }
    let total = weights.iter().copied().collect::<CompensatedSum>().value();
    if (total - 1.0).abs() > SIMPLEX_SUM_TOL {
        return Err(SeriesError::InvalidSimplexPoint(format!(
            "weights sum to {total}"
        )));
    }
    Ok(())
}

/// `ln Σ_{n≤N} e^{c_n} ρ^n`, exact partial sum in shifted form.
pub fn log_partition(c: &CoefficientSeq, rho: f64, n: usize) -> Result<f64, SeriesError> {
    if !(rho > 0.0) {
        return Err(SeriesError::NonPositiveRho(rho));
    }
    log_partition_at_exponent(c, rho.ln(), n)
}

/// `ln Σ_{n≤N} e^{c_n + n·lam}` for a finite exponent `lam = ln ρ`.
pub fn log_partition_at_exponent(
    c: &CoefficientSeq,
    lam: f64,
    n: usize,
) -> Result<f64, SeriesError> {
    Ok(logsumexp(&exponents(c.prefix(n)?, lam)))
}

/// Gibbs weights `t_n = e^{c_n} ρ^n / Σ_k e^{c_k} ρ^k`, `n ≤ N`.
pub fn gibbs_maximizer(
    c: &CoefficientSeq,
    rho: f64,
    n: usize,
) -> Result<SimplexWeights, SeriesError> {
    if !(rho > 0.0) {
        return Err(SeriesError::NonPositiveRho(rho));
    }
    gibbs_at_exponent(c, rho.ln(), n)
}

/// Gibbs weights `t_n ∝ e^{c_n + n·lam}`.
pub fn gibbs_at_exponent(
    c: &CoefficientSeq,
    lam: f64,
    n: usize,
) -> Result<SimplexWeights, SeriesError> {
    let x = exponents(c.prefix(n)?, lam);
    let lse = logsumexp(&x);
    let raw: Vec<f64> = x.iter().map(|v| (v - lse).exp()).collect();
    // absorb the last rounding so the weights sum to one at machine precision
    let total = raw.iter().copied().collect::<CompensatedSum>().value();
    Ok(SimplexWeights {
        weights: raw.into_iter().map(|w| w / total).collect(),
    })
}

fn exponents(c: &[f64], lam: f64) -> Vec<f64> {
    c.iter()
        .enumerate()
        .map(|(k, ck)| ck + k as f64 * lam)
        .collect()
}

/// `Σ n t_n`.
pub fn mean_index(t: &SimplexWeights) -> f64 {
    t.weights
        .iter()
        .enumerate()
        .map(|(k, w)| k as f64 * w)
        .collect::<CompensatedSum>()
        .value()
}

/// `Σ c_n t_n + ln ρ · Σ n t_n − Σ t_n ln t_n`: the bracket maximized by the
/// Gibbs weights. `t` may be shorter than `c`.
pub fn variational_objective(
    c: &CoefficientSeq,
    log_rho: f64,
    t: &SimplexWeights,
) -> Result<f64, SeriesError> {
    let cs = c.prefix(t.trunc_n())?;
    let mut acc = CompensatedSum::new();
    for (k, (&w, &ck)) in t.weights.iter().zip(cs).enumerate() {
        if w > 0.0 {
            acc.add(ck * w + log_rho * k as f64 * w - xlogx(w));
        }
    }
    Ok(acc.value())
}

/// Smallest `N` with `e^{sup c} ρ^{N+1} / (1 − ρ) ≤ eps`.
pub fn suggest_truncation(c: &CoefficientSeq, rho: f64, eps: f64) -> Result<usize, SeriesError> {
    if !(rho > 0.0 && rho < 1.0 && eps > 0.0) {
        return Err(SeriesError::NoTailBound { rho, eps });
    }
    // ρ^{N+1} ≤ eps (1 − ρ) e^{−sup c}
    let log_target = eps.ln() + (1.0 - rho).ln() - c.sup();
    let k = (log_target / rho.ln()).ceil().max(1.0);
    Ok(k as usize - 1)
}

/// The tail bound `e^{sup c} ρ^{N+1} / (1 − ρ)` on the neglected part of `f_c(ρ)`.
pub fn tail_bound(c: &CoefficientSeq, rho: f64, n: usize) -> Result<f64, SeriesError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SeriesError::NoTailBound { rho, eps: f64::NAN });
    }
    Ok(c.sup().exp() * rho.powi(n as i32 + 1) / (1.0 - rho))
}

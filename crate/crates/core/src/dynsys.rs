//! Finite models of weighted composition operators `(e^φ T_α u)(x) = e^{φ(x)} u(α(x))`.
//!
//! On a finite state set the operator is a nonnegative matrix with exactly one
//! entry per row. Its spectral radius only sees the cycles of `α`, so
//! `λ(φ) = ln r(e^φ T_α)` is the largest cycle average of `φ`.
//!
//! The `L^p` exponent `p` is carried for completeness but does not enter any
//! computation here: the spectral radius of a finite matrix does not depend
//! on the norm.

use crate::fenchel::{Axis, FenchelError};
use crate::numeric::{CompensatedSum, ExtReal};
use crate::series::{CoefficientSeq, SeriesError};
use ndarray::Array2;
use rayon::prelude::*;
use serde_json::Value;
use thiserror::Error;

/// Power-iteration cap before falling back to the Gelfand estimate.
pub const POWER_MAX_ITER: usize = 10_000;
/// Diagonal shift, relative to the largest entry, applied before power iteration.
pub const POWER_SHIFT: f64 = 1e-3;
/// Residual tolerance `‖Bx − μx‖₁ / μ` for declaring power iteration converged.
pub const POWER_RESIDUAL_TOL: f64 = 1e-13;
/// Power iteration is accepted only if it agrees with the Gelfand estimate to this relative tolerance.
pub const CROSS_CHECK_TOL: f64 = 1e-8;
/// Number of squarings in the Gelfand estimate `‖A^{2^k}‖^{1/2^k}`.
pub const GELFAND_DOUBLINGS: usize = 60;
/// Distance to the invariant hull below which a measure counts as invariant.
pub const HULL_TOL: f64 = 1e-8;
/// `λ*` estimates above this fraction of the box radius are declared infinite.
pub const INFINITY_FRACTION: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NonSquare: matrix is {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("NegativeEntry: A[{row}, {col}] = {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("NotBijective: state {image} is the image of more than one state")]
    NotBijective { image: usize },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid weight function: {0}")]
    InvalidWeights(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("RadiusNotSubcritical: spectral radius {0} >= 1")]
    RadiusNotSubcritical(f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Fenchel(#[from] FenchelError),
}

/// States `0..m`, a self-map `α` and an `L^p` exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDynSystem {
    map: Vec<usize>,
    p: f64,
}

impl FiniteDynSystem {
    pub fn new(map: Vec<usize>, p: f64) -> Result<Self, DynError> {
        if map.is_empty() {
            return Err(DynError::InvalidSystem("states must be >= 1".into()));
        }
        let m = map.len();
        if let Some(i) = map.iter().position(|&x| x >= m) {
            return Err(DynError::InvalidSystem(format!(
                "map[{i}] = {} is not a state in 0..{m}",
                map[i]
            )));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(DynError::InvalidSystem(format!(
                "p = {p} must be a finite real >= 1"
            )));
        }
        Ok(Self { map, p })
    }

    pub fn identity(m: usize) -> Self {
        Self::new((0..m).collect(), 2.0).expect("identity is valid")
    }

    /// The cyclic shift `x ↦ x + 1 mod m`.
    pub fn cycle(m: usize) -> Self {
        Self::new((0..m).map(|x| (x + 1) % m).collect(), 2.0).expect("cycle is valid")
    }

    /// Parses `{"states": m, "map": [...], "p": real}`.
    pub fn from_json(text: &str) -> Result<Self, DynError> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| DynError::InvalidSystem(e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self, DynError> {
        let bad = |msg: String| DynError::InvalidSystem(msg);
        let obj = v
            .as_object()
            .ok_or_else(|| bad("expected a JSON object".into()))?;
        let states = obj
            .get("states")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing or non-integer key \"states\"".into()))?
            as usize;
        let map = obj
            .get("map")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing or non-array key \"map\"".into()))?;
        if map.len() != states {
            return Err(bad(format!(
                "map has {} entries but states = {states}",
                map.len()
            )));
        }
        let map = map
            .iter()
            .enumerate()
            .map(|(i, x)| {
                x.as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| bad(format!("map[{i}] = {x} is not a state index")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let p = match obj.get("p") {
            None => 2.0,
            Some(x) => x
                .as_f64()
                .ok_or_else(|| bad(format!("p = {x} is not a number")))?,
        };
        Self::new(map, p)
    }

    pub fn to_value(&self) -> Value {
        serde_json::json!({ "states": self.states(), "map": self.map, "p": self.p })
    }

    pub fn states(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_bijective(&self) -> bool {
        self.first_collision().is_none()
    }

    fn first_collision(&self) -> Option<usize> {
        let mut hit = vec![false; self.states()];
        self.map
            .iter()
            .copied()
            .find(|&y| std::mem::replace(&mut hit[y], true))
    }

    /// Cycles of the functional graph of `α`, each rotated to start at its
    /// smallest state, sorted by that state.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let m = self.states();
        // 0 = unvisited, 1 = on current path, 2 = finished
        let mut state = vec![0u8; m];
        let mut cycles = Vec::new();
        for start in 0..m {
            let mut path = Vec::new();
            let mut x = start;
            while state[x] == 0 {
                state[x] = 1;
                path.push(x);
                x = self.map[x];
            }
            if state[x] == 1 {
                let pos = path.iter().position(|&y| y == x).expect("x is on the path");
                let mut cyc = path[pos..].to_vec();
                let min_pos = cyc
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &y)| y)
                    .map(|(i, _)| i)
                    .unwrap();
                cyc.rotate_left(min_pos);
                cycles.push(cyc);
            }
            for y in path {
                state[y] = 2;
            }
        }
        cycles.sort_by_key(|c| c[0]);
        cycles
    }

    /// Uniform probability measure on each cycle; their convex hull is the
    /// set of invariant probability measures supported on the cyclic part.
    pub fn cycle_measures(&self) -> Vec<FiniteMeasure> {
        self.cycles()
            .into_iter()
            .map(|cyc| {
                let mut mass = vec![0.0; self.states()];
                let w = 1.0 / cyc.len() as f64;
                for x in cyc {
                    mass[x] = w;
                }
                FiniteMeasure { mass }
            })
            .collect()
    }

    /// Sup-norm distance proxy from `nu` to the invariant probability hull:
    /// the largest of `|ν(X) − 1|`, the mass off the cycles and the
    /// deviation of `ν` from its average on each cycle.
    pub fn hull_distance(&self, nu: &FiniteMeasure) -> f64 {
        if nu.mass.len() != self.states() {
            return f64::INFINITY;
        }
        let mut dist = (nu.total() - 1.0).abs();
        let mut on_cycle = vec![false; self.states()];
        for cyc in self.cycles() {
            let avg = cyc.iter().map(|&x| nu.mass[x]).sum::<f64>() / cyc.len() as f64;
            for &x in &cyc {
                on_cycle[x] = true;
                dist = dist.max((nu.mass[x] - avg).abs());
            }
        }
        for (x, &on) in on_cycle.iter().enumerate() {
            if !on {
                dist = dist.max(nu.mass[x].abs());
            }
        }
        dist
    }
}

/// A nonnegative mass vector on the states; not necessarily normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasure {
    mass: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(mass: Vec<f64>) -> Result<Self, DynError> {
        if let Some(i) = mass.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DynError::InvalidMeasure(format!(
                "mass[{i}] = {} must be finite and >= 0",
                mass[i]
            )));
        }
        Ok(Self { mass })
    }

    pub fn zero(m: usize) -> Self {
        Self { mass: vec![0.0; m] }
    }

    pub fn dirac(x: usize, m: usize) -> Self {
        let mut mass = vec![0.0; m];
        mass[x] = 1.0;
        Self { mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass
            .iter()
            .copied()
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn scaled(&self, s: f64) -> FiniteMeasure {
        assert!(s >= 0.0, "measures scale by nonnegative factors");
        Self {
            mass: self.mass.iter().map(|w| w * s).collect(),
        }
    }

    /// `ν / ν(X)`, or `None` for the zero measure.
    pub fn normalized(&self) -> Option<FiniteMeasure> {
        let t = self.total();
        (t > 0.0).then(|| self.scaled(1.0 / t))
    }

    /// `s·self + (1−s)·other`.
    pub fn mix(&self, other: &FiniteMeasure, s: f64) -> FiniteMeasure {
        Self {
            mass: self
                .mass
                .iter()
                .zip(&other.mass)
                .map(|(a, b)| s * a + (1.0 - s) * b)
                .collect(),
        }
    }

    /// `⟨ν, φ⟩ = Σ ν(x) φ(x)`.
    pub fn pair(&self, phi: &WeightFunction) -> f64 {
        self.mass
            .iter()
            .zip(&phi.phi)
            .map(|(w, p)| w * p)
            .collect::<CompensatedSum>()
            .value()
    }
}

/// `φ = ln a` on the states.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    phi: Vec<f64>,
}

impl WeightFunction {
    pub fn new(phi: Vec<f64>) -> Result<Self, DynError> {
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(DynError::InvalidWeights(format!("phi[{i}] is not finite")));
        }
        Ok(Self { phi })
    }

    pub fn constant(c: f64, m: usize) -> Self {
        Self::new(vec![c; m]).expect("finite constant")
    }

    /// Parses `{"phi": [reals]}`.
    pub fn from_json(text: &str) -> Result<Self, DynError> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| DynError::InvalidWeights(e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self, DynError> {
        let arr = v
            .get("phi")
            .and_then(Value::as_array)
            .ok_or_else(|| DynError::InvalidWeights("missing or non-array key \"phi\"".into()))?;
        let phi = arr
            .iter()
            .enumerate()
            .map(|(i, x)| {
                x.as_f64().ok_or_else(|| {
                    DynError::InvalidWeights(format!("phi[{i}] = {x} is not a number"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(phi)
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// `A[x, α(x)] = e^{φ(x)}`, zero elsewhere.
pub fn transfer_matrix(
    sys: &FiniteDynSystem,
    phi: &WeightFunction,
) -> Result<Array2<f64>, DynError> {
    let m = sys.states();
    if phi.len() != m {
        return Err(DynError::DimensionMismatch {
            expected: m,
            got: phi.len(),
        });
    }
    let mut a = Array2::zeros((m, m));
    for (x, &y) in sys.map.iter().enumerate() {
        a[[x, y]] = phi.phi[x].exp();
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    PowerIteration,
    Gelfand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub method: SpectralMethod,
    /// Power-iteration value when it converged.
    pub power: Option<f64>,
    pub power_iterations: usize,
    pub gelfand: f64,
}

fn check_nonnegative_square(a: &Array2<f64>) -> Result<(), DynError> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(DynError::NonSquare { rows, cols });
    }
    for ((row, col), &value) in a.indexed_iter() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(DynError::NegativeEntry { row, col, value });
        }
    }
    Ok(())
}

/// Spectral radius of a nonnegative square matrix.
pub fn spectral_radius(a: &Array2<f64>) -> Result<f64, DynError> {
    Ok(spectral_radius_detailed(a)?.radius)
}

/// Power iteration on `A + εI` (ε = 10⁻³·max entry) cross-checked against the
/// Gelfand estimate; the Gelfand value is used when power iteration does not
/// converge within [`POWER_MAX_ITER`] steps or disagrees.
pub fn spectral_radius_detailed(a: &Array2<f64>) -> Result<SpectralEstimate, DynError> {
    check_nonnegative_square(a)?;
    let gelfand = gelfand_radius(a);
    let (power, power_iterations) = shifted_power_iteration(a);
    let (radius, method) = match power {
        Some(p)
            if (p - gelfand).abs() <= CROSS_CHECK_TOL * gelfand.max(1e-300)
                || (p == 0.0 && gelfand == 0.0) =>
        {
            (p, SpectralMethod::PowerIteration)
        }
        _ => (gelfand, SpectralMethod::Gelfand),
    };
    Ok(SpectralEstimate {
        radius,
        method,
        power,
        power_iterations,
        gelfand,
    })
}

fn shifted_power_iteration(a: &Array2<f64>) -> (Option<f64>, usize) {
    let m = a.nrows();
    let max_entry = a.iter().copied().fold(0.0, f64::max);
    if max_entry == 0.0 {
        return (Some(0.0), 0);
    }
    let eps = POWER_SHIFT * max_entry;
    let mut b = a.clone();
    for i in 0..m {
        b[[i, i]] += eps;
    }
    let mut x = ndarray::Array1::from_elem(m, 1.0 / m as f64);
    for it in 1..=POWER_MAX_ITER {
        let y = b.dot(&x);
        let mu: f64 = y.sum();
        let residual: f64 = y
            .iter()
            .zip(x.iter())
            .map(|(yi, xi)| (yi - mu * xi).abs())
            .sum::<f64>()
            / mu;
        x = y / mu;
        if residual <= POWER_RESIDUAL_TOL {
            // unshifted quotient avoids the cancellation in mu − ε
            let ax = a.dot(&x);
            return (Some(ax.sum() / x.sum()), it);
        }
    }
    (None, POWER_MAX_ITER)
}

fn inf_norm(a: &Array2<f64>) -> f64 {
    a.rows().into_iter().map(|r| r.sum()).fold(0.0, f64::max)
}

/// `‖A^{2^k}‖^{1/2^k}` with the max-row-sum norm, renormalizing after each
/// squaring and accumulating the logarithm.
pub fn gelfand_radius(a: &Array2<f64>) -> f64 {
    let s0 = inf_norm(a);
    if s0 == 0.0 {
        return 0.0;
    }
    let mut b = a / s0;
    let mut log_rho = s0.ln();
    let mut scale = 1.0;
    for _ in 0..GELFAND_DOUBLINGS {
        let sq = b.dot(&b);
        let s = inf_norm(&sq);
        if s == 0.0 {
            return 0.0;
        }
        scale *= 0.5;
        log_rho += scale * s.ln();
        b = sq / s;
    }
    log_rho.exp()
}

/// `λ(φ) = ln r(e^φ T_α)`; `-inf` when the spectral radius vanishes.
pub fn spectral_exponent(sys: &FiniteDynSystem, phi: &WeightFunction) -> Result<ExtReal, DynError> {
    let r = spectral_radius(&transfer_matrix(sys, phi)?)?;
    Ok(if r > 0.0 {
        ExtReal::Finite(r.ln())
    } else {
        ExtReal::NegInf
    })
}

/// Largest cycle average of `φ` and the cycle-uniform measure attaining it.
pub fn max_cycle_average(
    sys: &FiniteDynSystem,
    phi: &WeightFunction,
) -> Result<(f64, FiniteMeasure), DynError> {
    if phi.len() != sys.states() {
        return Err(DynError::DimensionMismatch {
            expected: sys.states(),
            got: phi.len(),
        });
    }
    let measures = sys.cycle_measures();
    let best = measures
        .into_iter()
        .map(|nu| (nu.pair(phi), nu))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("every self-map has a cycle");
    Ok(best)
}

/// Extreme points of the invariant probability measures of a bijection.
pub fn invariant_measure_hull(sys: &FiniteDynSystem) -> Result<Vec<FiniteMeasure>, DynError> {
    if let Some(image) = sys.first_collision() {
        return Err(DynError::NotBijective { image });
    }
    Ok(sys.cycle_measures())
}

/// Grid estimate of `λ*(ν)` together with the box radius that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaStarEstimate {
    pub value: f64,
    pub box_radius: f64,
    /// `value > 0.5 · box_radius`: the supremum grows with the box.
    pub infinite: bool,
}

impl LambdaStarEstimate {
    pub fn as_ext(&self) -> ExtReal {
        if self.infinite {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(self.value)
        }
    }
}

/// `max_φ ⟨ν, φ⟩ − λ(φ)` over the grid `phi_box` (one axis per state).
pub fn lambda_conjugate_numeric(
    sys: &FiniteDynSystem,
    nu: &FiniteMeasure,
    phi_box: &[Axis],
) -> Result<LambdaStarEstimate, DynError> {
    let m = sys.states();
    if nu.mass.len() != m {
        return Err(DynError::DimensionMismatch {
            expected: m,
            got: nu.mass.len(),
        });
    }
    if phi_box.len() != m {
        return Err(DynError::DimensionMismatch {
            expected: m,
            got: phi_box.len(),
        });
    }
    for a in phi_box {
        Axis::new(a.lo, a.hi, a.count)?;
    }
    let total: usize = phi_box.iter().map(|a| a.count).product();
    let value = (0..total)
        .into_par_iter()
        .map(|k| -> Result<f64, DynError> {
            let mut rem = k;
            let mut phi = vec![0.0; m];
            for i in (0..m).rev() {
                phi[i] = phi_box[i].coord(rem % phi_box[i].count);
                rem /= phi_box[i].count;
            }
            let phi = WeightFunction::new(phi)?;
            let lam = spectral_exponent(sys, &phi)?
                .finite()
                .ok_or_else(|| DynError::InvalidSystem("spectral radius vanished".into()))?;
            Ok(nu.pair(&phi) - lam)
        })
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))?;
    let box_radius = phi_box
        .iter()
        .map(|a| a.lo.abs().max(a.hi.abs()))
        .fold(0.0, f64::max);
    Ok(LambdaStarEstimate {
        value,
        box_radius,
        infinite: value > INFINITY_FRACTION * box_radius,
    })
}

/// Exact `λ*` of a finite model: the indicator of the invariant probability hull.
pub fn lambda_star_exact(sys: &FiniteDynSystem, nu: &FiniteMeasure) -> ExtReal {
    if sys.hull_distance(nu) <= HULL_TOL {
        ExtReal::Finite(0.0)
    } else {
        ExtReal::PosInf
    }
}

/// `(r(Σ_{n≤N} e^{c_n} Aⁿ), Σ_{n≤N} e^{c_n} r(A)ⁿ)` for a subcritical transfer matrix.
pub fn operator_series_radius(
    c: &CoefficientSeq,
    sys: &FiniteDynSystem,
    phi: &WeightFunction,
    n: usize,
) -> Result<(f64, f64), DynError> {
    if n > c.trunc_n() {
        return Err(SeriesError::TruncationMismatch {
            requested: n,
            available: c.trunc_n(),
        }
        .into());
    }
    let a = transfer_matrix(sys, phi)?;
    let rho = spectral_radius(&a)?;
    if rho >= 1.0 {
        return Err(DynError::RadiusNotSubcritical(rho));
    }
    let coeffs = &c.coeffs()[..=n];
    let m = sys.states();
    let eye = Array2::<f64>::eye(m);
    // Horner: S = e^{c_N} I; S ← S A + e^{c_k} I
    let mut s = &eye * coeffs[n].exp();
    for ck in coeffs[..n].iter().rev() {
        s = s.dot(&a) + &eye * ck.exp();
    }
    let via_matrix = spectral_radius(&s)?;
    let via_scalar = coeffs
        .iter()
        .enumerate()
        .map(|(k, ck)| ck.exp() * rho.powi(k as i32))
        .collect::<CompensatedSum>()
        .value();
    Ok((via_matrix, via_scalar))
}

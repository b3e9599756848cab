//! The composite functionals `λ̃(c, λ)`, `τ̃(t, a)`, `λ̂(c, φ)`, `τ̂(t, μ̄)` and an
//! end-to-end check that `λ̂` is the convex conjugate of `τ̂` for finite
//! dynamical systems.
//!
//! `τ̂` takes the conjugate `λ*` of the spectral exponent as an injected oracle,
//! so the exact indicator of the invariant hull and grid estimates are
//! interchangeable.

use crate::dynsys::{self, DynError, FiniteDynSystem, FiniteMeasure, WeightFunction};
use crate::entropy::neg_entropy;
use crate::fenchel::Axis;
use crate::numeric::{json_real, logsumexp, CompensatedSum, ExtReal};
use crate::series::{self, mean_index, CoefficientSeq, SeriesError, SimplexWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::fmt::Display;
use thiserror::Error;

/// `|a − Σ n t_n|` and `|μ̄(X) − Σ n t_n|` below this count as equal.
pub const DOMAIN_TOL: f64 = 1e-10;
/// Smallest Fenchel-Young gap accepted by the verification harness.
pub const FENCHEL_YOUNG_TOL: f64 = 1e-8;
/// Largest attainment residual accepted at the analytic maximizer.
pub const ATTAINMENT_TOL: f64 = 1e-8;
/// Largest brute-force conjugate discrepancy accepted on the joint grid.
pub const BRUTE_FORCE_TOL: f64 = 5e-2;
pub const FENCHEL_YOUNG_PROBES: usize = 100;
pub const BRUTE_FORCE_PROBES: usize = 20;
/// Joint `(c, φ)` grids are only brute-forced up to this total dimension.
pub const MAX_JOINT_DIM: usize = 4;
pub const MAX_JOINT_NODES: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoremError {
    #[error("DomainViolation: spectral exponent {0} is not negative")]
    DomainViolation(String),
    #[error("OracleFailure: {0}")]
    OracleFailure(String),
    #[error("need at least two coefficients to sample points away from e_0")]
    TruncationTooShort,
    #[error("joint grid has {nodes} nodes, limit is {limit}")]
    GridTooLarge { nodes: usize, limit: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Dyn(#[from] DynError),
}

/// A pair `(t, a)`; it lies in the domain of `τ̃` iff `a = Σ n t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TildePoint {
    pub t: SimplexWeights,
    pub a: f64,
}

impl TildePoint {
    pub fn in_domain(&self) -> bool {
        self.a >= 0.0 && (self.a - mean_index(&self.t)).abs() <= DOMAIN_TOL
    }

    pub fn mix(&self, other: &TildePoint, s: f64) -> TildePoint {
        TildePoint {
            t: self.t.mix(&other.t, s),
            a: s * self.a + (1.0 - s) * other.a,
        }
    }
}

/// A dual point `(t, μ̄)` of `λ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct HatDualPoint {
    pub t: SimplexWeights,
    pub mu_bar: FiniteMeasure,
}

impl HatDualPoint {
    pub fn mean(&self) -> f64 {
        mean_index(&self.t)
    }

    /// `t ≠ e_0`, `μ̄(X) = Σ n t_n` and `μ̄ / μ̄(X)` in the invariant hull.
    pub fn in_domain(&self, sys: &FiniteDynSystem) -> bool {
        let a = self.mean();
        !self.t.is_e0()
            && (self.mu_bar.total() - a).abs() <= DOMAIN_TOL
            && self
                .mu_bar
                .normalized()
                .is_some_and(|nu| sys.hull_distance(&nu) <= dynsys::HULL_TOL)
    }

    pub fn mix(&self, other: &HatDualPoint, s: f64) -> HatDualPoint {
        HatDualPoint {
            t: self.t.mix(&other.t, s),
            mu_bar: self.mu_bar.mix(&other.mu_bar, s),
        }
    }

    /// `Σ c_n t_n + ⟨μ̄, φ⟩`.
    pub fn pair(&self, c: &CoefficientSeq, phi: &WeightFunction) -> Result<f64, TheoremError> {
        let cs = c.coeffs();
        if cs.len() < self.t.len() {
            return Err(SeriesError::TruncationMismatch {
                requested: self.t.trunc_n(),
                available: c.trunc_n(),
            }
            .into());
        }
        let linear: CompensatedSum = self
            .t
            .weights()
            .iter()
            .zip(cs)
            .map(|(w, c)| w * c)
            .collect();
        Ok(linear.value() + self.mu_bar.pair(phi))
    }
}

/// Weights `(w₁, w₂)` with `(sμ̄₁ + (1−s)μ̄₂) / (sa₁ + (1−s)a₂) = w₁ μ̄₁/a₁ + w₂ μ̄₂/a₂`.
pub fn mixing_weights(a1: f64, a2: f64, s: f64) -> (f64, f64) {
    let total = s * a1 + (1.0 - s) * a2;
    (s * a1 / total, (1.0 - s) * a2 / total)
}

/// `ln Σ_{n≤N} e^{c_n + n·lam}` for `lam < 0`, `+inf` otherwise.
pub fn tilde_lambda(c: &CoefficientSeq, lam: f64, n: usize) -> Result<ExtReal, TheoremError> {
    if lam >= 0.0 {
        return Ok(ExtReal::PosInf);
    }
    Ok(ExtReal::Finite(series::log_partition_at_exponent(
        c, lam, n,
    )?))
}

/// `Σ t_n ln t_n` when `a = Σ n t_n`, `+inf` otherwise.
pub fn f_t_value(t: &SimplexWeights, a: f64) -> ExtReal {
    if (a - mean_index(t)).abs() <= DOMAIN_TOL {
        ExtReal::Finite(neg_entropy(t))
    } else {
        ExtReal::PosInf
    }
}

/// `Σ t_n ln t_n` on the domain of `τ̃`, `+inf` off it.
pub fn tilde_tau(pt: &TildePoint) -> ExtReal {
    if pt.in_domain() {
        ExtReal::Finite(neg_entropy(&pt.t))
    } else {
        ExtReal::PosInf
    }
}

/// `λ̂(c, φ) = λ̃(c, λ(φ))`.
pub fn hat_lambda(
    c: &CoefficientSeq,
    sys: &FiniteDynSystem,
    phi: &WeightFunction,
    n: usize,
) -> Result<ExtReal, TheoremError> {
    hat_lambda_at(c, dynsys::spectral_exponent(sys, phi)?, n)
}

fn hat_lambda_at(c: &CoefficientSeq, lam: ExtReal, n: usize) -> Result<ExtReal, TheoremError> {
    match lam {
        // only the n = 0 term survives
        ExtReal::NegInf => {
            series::log_partition_at_exponent(c, 0.0, n)?;
            Ok(ExtReal::Finite(c.coeffs()[0]))
        }
        ExtReal::Finite(l) => tilde_lambda(c, l, n),
        ExtReal::PosInf => Ok(ExtReal::PosInf),
    }
}

/// `τ̂(t, μ̄) = a·λ*(μ̄/a) + Σ t_n ln t_n` with `a = Σ n t_n` on the domain,
/// `0` at `(e_0, 0)` and `+inf` elsewhere.
pub fn hat_tau<E: Display>(
    pt: &HatDualPoint,
    sys: &FiniteDynSystem,
    lambda_star: impl Fn(&FiniteMeasure) -> Result<ExtReal, E>,
) -> Result<ExtReal, TheoremError> {
    let a = pt.mean();
    let mass = pt.mu_bar.total();
    if pt.t.is_e0() {
        return Ok(if mass == 0.0 {
            ExtReal::Finite(0.0)
        } else {
            ExtReal::PosInf
        });
    }
    if (mass - a).abs() > DOMAIN_TOL {
        return Ok(ExtReal::PosInf);
    }
    let Some(nu) = pt.mu_bar.normalized() else {
        return Ok(ExtReal::PosInf);
    };
    if sys.hull_distance(&nu) > dynsys::HULL_TOL {
        return Ok(ExtReal::PosInf);
    }
    let ls = lambda_star(&nu).map_err(|e| TheoremError::OracleFailure(e.to_string()))?;
    Ok(ls.scale_nonneg(a) + ExtReal::Finite(neg_entropy(&pt.t)))
}

/// The exact `λ*` of a finite model (indicator of the invariant hull), in oracle form.
pub fn exact_oracle(
    sys: &FiniteDynSystem,
) -> impl Fn(&FiniteMeasure) -> Result<ExtReal, DynError> + '_ {
    move |nu| Ok(dynsys::lambda_star_exact(sys, nu))
}

/// The grid estimate of `λ*` in oracle form.
pub fn numeric_oracle<'a>(
    sys: &'a FiniteDynSystem,
    phi_box: &'a [Axis],
) -> impl Fn(&FiniteMeasure) -> Result<ExtReal, DynError> + 'a {
    move |nu| Ok(dynsys::lambda_conjugate_numeric(sys, nu, phi_box)?.as_ext())
}

/// Random point of the domain of `τ̂`: `t` Dirichlet(1,…,1) on a random
/// support `{0..k}` with `k ≥ 1`, `μ̄ = (Σ n t_n)·ν` for a random convex
/// combination `ν` of the hull vertices.
pub fn sample_admissible_dual<R: Rng>(
    rng: &mut R,
    len: usize,
    hull: &[FiniteMeasure],
) -> Result<HatDualPoint, TheoremError> {
    if len < 2 {
        return Err(TheoremError::TruncationTooShort);
    }
    assert!(!hull.is_empty(), "hull has at least one vertex");
    let support = rng.gen_range(2..=len);
    let mut masses = vec![0.0; len];
    for m in masses.iter_mut().take(support) {
        *m = -(1.0 - rng.gen::<f64>()).ln();
    }
    if masses[1..].iter().all(|&m| m == 0.0) {
        masses[1] = 1.0;
    }
    let t = SimplexWeights::from_masses(&masses)?;
    let mix: Vec<f64> = hull
        .iter()
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = mix.iter().sum();
    let m = hull[0].mass().len();
    let mut nu = vec![0.0; m];
    for (w, v) in mix.iter().zip(hull) {
        for (acc, x) in nu.iter_mut().zip(v.mass()) {
            *acc += w / total * x;
        }
    }
    let mu_bar = FiniteMeasure::new(nu)?.scaled(mean_index(&t));
    Ok(HatDualPoint { t, mu_bar })
}

/// Grids for the brute-force joint conjugate: one axis per coefficient, one per state.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyGrids {
    pub c_axes: Vec<Axis>,
    pub phi_axes: Vec<Axis>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    FenchelYoung,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub kind: ProbeKind,
    pub mean: f64,
    pub t_head: Vec<f64>,
    pub hat_tau: f64,
    /// Fenchel-Young gap, or brute-force conjugate minus `τ̂`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub hat_lambda: f64,
    pub spectral_exponent: f64,
    pub fenchel_young_min_gap: f64,
    pub attainment_residual: f64,
    /// `λ̂ − c_0`: the bracket at `(e_0, 0)` falls short of `λ̂` by this much.
    pub e0_gap: f64,
    pub bruteforce_max_discrepancy: Option<f64>,
    pub bruteforce_nodes: usize,
    pub probes: Vec<Probe>,
}

impl VerificationReport {
    pub fn passes(&self) -> bool {
        self.fenchel_young_min_gap >= -FENCHEL_YOUNG_TOL
            && self.attainment_residual <= ATTAINMENT_TOL
            && self.e0_gap > 0.0
            && self
                .bruteforce_max_discrepancy
                .is_none_or(|d| d <= BRUTE_FORCE_TOL)
    }

    /// Report as JSON with sorted keys and reals at 17 significant digits.
    pub fn to_json(&self) -> Value {
        let probes: Vec<Value> = self
            .probes
            .iter()
            .map(|p| {
                json!({
                    "kind": match p.kind { ProbeKind::FenchelYoung => "fenchel_young", ProbeKind::BruteForce => "bruteforce" },
                    "mean_index": json_real(p.mean),
                    "t_head": p.t_head.iter().map(|&w| json_real(w)).collect::<Vec<_>>(),
                    "hat_tau": json_real(p.hat_tau),
                    "value": json_real(p.value),
                })
            })
            .collect();
        json!({
            "hat_lambda": json_real(self.hat_lambda),
            "spectral_exponent": json_real(self.spectral_exponent),
            "fenchel_young_min_gap": json_real(self.fenchel_young_min_gap),
            "attainment_residual": json_real(self.attainment_residual),
            "e0_gap": json_real(self.e0_gap),
            "bruteforce_max_discrepancy": self.bruteforce_max_discrepancy.map_or(Value::Null, json_real),
            "bruteforce_nodes": self.bruteforce_nodes,
            "probes": probes,
            "passed": self.passes(),
            "tolerances": {
                "domain": json_real(DOMAIN_TOL),
                "fenchel_young_min_gap": json_real(-FENCHEL_YOUNG_TOL),
                "attainment_residual": json_real(ATTAINMENT_TOL),
                "bruteforce_max_discrepancy": json_real(BRUTE_FORCE_TOL),
                "hull": json_real(dynsys::HULL_TOL),
            },
        })
    }
}

/// Checks `λ̂ = τ̂*` for one instance: Fenchel-Young gaps at random admissible
/// dual points, equality at the analytic maximizer, and (when the joint
/// `(c, φ)` grid has total dimension ≤ 4) a brute-force conjugate of `λ̂`
/// compared against `τ̂`. `τ̂` uses the exact `λ*` of the finite model.
pub fn verify_hat_conjugacy(
    c: &CoefficientSeq,
    sys: &FiniteDynSystem,
    phi: &WeightFunction,
    n: usize,
    grids: Option<&VerifyGrids>,
    seed: u64,
) -> Result<VerificationReport, TheoremError> {
    if n > c.trunc_n() {
        return Err(SeriesError::TruncationMismatch {
            requested: n,
            available: c.trunc_n(),
        }
        .into());
    }
    if n == 0 {
        return Err(TheoremError::TruncationTooShort);
    }
    let lam = match dynsys::spectral_exponent(sys, phi)? {
        ExtReal::Finite(l) if l < 0.0 => l,
        other => return Err(TheoremError::DomainViolation(other.to_text())),
    };
    let c_n = CoefficientSeq::new(c.coeffs()[..=n].to_vec())?;
    let hat = series::log_partition_at_exponent(&c_n, lam, n)?;
    let hull = sys.cycle_measures();
    let oracle = exact_oracle(sys);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head = |t: &SimplexWeights| t.weights().iter().take(4).copied().collect::<Vec<_>>();

    let mut probes = Vec::new();
    let mut min_gap = f64::INFINITY;
    for _ in 0..FENCHEL_YOUNG_PROBES {
        let pt = sample_admissible_dual(&mut rng, n + 1, &hull)?;
        let tau = hat_tau(&pt, sys, &oracle)?.finite().ok_or_else(|| {
            TheoremError::OracleFailure(
                "sampled dual point fell outside the domain of tau-hat".into(),
            )
        })?;
        let gap = hat + tau - pt.pair(&c_n, phi)?;
        min_gap = min_gap.min(gap);
        probes.push(Probe {
            kind: ProbeKind::FenchelYoung,
            mean: pt.mean(),
            t_head: head(&pt.t),
            hat_tau: tau,
            value: gap,
        });
    }

    // analytic maximizer: Gibbs weights at ρ = e^λ, μ̄ = mean · (cycle measure attaining λ)
    let t_star = series::gibbs_at_exponent(&c_n, lam, n)?;
    let (_, nu_max) = dynsys::max_cycle_average(sys, phi)?;
    let star = HatDualPoint {
        mu_bar: nu_max.scaled(mean_index(&t_star)),
        t: t_star,
    };
    let tau_star = hat_tau(&star, sys, &oracle)?.finite().ok_or_else(|| {
        TheoremError::OracleFailure("maximizer fell outside the domain of tau-hat".into())
    })?;
    let attainment_residual = (star.pair(&c_n, phi)? - tau_star - hat).abs();

    let e0_gap = hat - c_n.coeffs()[0];

    let mut bruteforce_max_discrepancy = None;
    let mut bruteforce_nodes = 0;
    if let Some(g) = grids {
        if g.c_axes.len() + g.phi_axes.len() <= MAX_JOINT_DIM {
            if g.c_axes.len() != n + 1 || g.phi_axes.len() != sys.states() {
                return Err(TheoremError::GridMismatch(format!(
                    "expected {} coefficient axes and {} state axes",
                    n + 1,
                    sys.states()
                )));
            }
            let joint = JointGrid::build(sys, g)?;
            bruteforce_nodes = joint.nodes();
            let mut worst: f64 = 0.0;
            for _ in 0..BRUTE_FORCE_PROBES {
                let pt = sample_admissible_dual(&mut rng, n + 1, &hull)?;
                let tau = hat_tau(&pt, sys, &oracle)?.finite().ok_or_else(|| {
                    TheoremError::OracleFailure("brute-force probe outside the domain".into())
                })?;
                let conj = joint.conjugate_at(&pt);
                let diff = conj - tau;
                worst = worst.max(diff.abs());
                probes.push(Probe {
                    kind: ProbeKind::BruteForce,
                    mean: pt.mean(),
                    t_head: head(&pt.t),
                    hat_tau: tau,
                    value: diff,
                });
            }
            bruteforce_max_discrepancy = Some(worst);
        }
    }

    Ok(VerificationReport {
        hat_lambda: hat,
        spectral_exponent: lam,
        fenchel_young_min_gap: min_gap,
        attainment_residual,
        e0_gap,
        bruteforce_max_discrepancy,
        bruteforce_nodes,
        probes,
    })
}

/// `λ̂` sampled on a product grid over `(c, φ)`; nodes with `λ(φ) ≥ 0` are
/// outside the effective domain and skipped.
struct JointGrid {
    c_nodes: Vec<Vec<f64>>,
    /// `(φ, λ(φ))` for the φ-nodes inside the effective domain.
    phi_nodes: Vec<(WeightFunction, f64)>,
    total: usize,
}

fn product_nodes(axes: &[Axis]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(|a| a.count).product();
    (0..total)
        .map(|mut k| {
            let mut x = vec![0.0; axes.len()];
            for i in (0..axes.len()).rev() {
                x[i] = axes[i].coord(k % axes[i].count);
                k /= axes[i].count;
            }
            x
        })
        .collect()
}

impl JointGrid {
    fn build(sys: &FiniteDynSystem, g: &VerifyGrids) -> Result<Self, TheoremError> {
        for a in g.c_axes.iter().chain(&g.phi_axes) {
            Axis::new(a.lo, a.hi, a.count)
                .map_err(|e| TheoremError::GridMismatch(e.to_string()))?;
        }
        let total: usize = g
            .c_axes
            .iter()
            .chain(&g.phi_axes)
            .map(|a| a.count)
            .product();
        if total > MAX_JOINT_NODES {
            return Err(TheoremError::GridTooLarge {
                nodes: total,
                limit: MAX_JOINT_NODES,
            });
        }
        let phi_nodes = product_nodes(&g.phi_axes)
            .into_par_iter()
            .map(|p| -> Result<Option<(WeightFunction, f64)>, TheoremError> {
                let phi = WeightFunction::new(p)?;
                Ok(match dynsys::spectral_exponent(sys, &phi)? {
                    ExtReal::Finite(l) if l < 0.0 => Some((phi, l)),
                    _ => None,
                })
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(Self {
            c_nodes: product_nodes(&g.c_axes),
            phi_nodes,
            total,
        })
    }

    fn nodes(&self) -> usize {
        self.total
    }

    /// `max over nodes of Σ c_n t_n + ⟨μ̄, φ⟩ − λ̂(c, φ)`.
    fn conjugate_at(&self, pt: &HatDualPoint) -> f64 {
        let t = pt.t.weights();
        self.phi_nodes
            .par_iter()
            .map(|(phi, lam)| {
                let linear_phi = pt.mu_bar.pair(phi);
                let mut exps = vec![0.0; t.len()];
                let mut best = f64::NEG_INFINITY;
                for c in &self.c_nodes {
                    let mut lin = linear_phi;
                    for (k, ((e, ck), tk)) in exps.iter_mut().zip(c).zip(t).enumerate() {
                        *e = ck + k as f64 * lam;
                        lin += ck * tk;
                    }
                    best = best.max(lin - logsumexp(&exps));
                }
                best
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn tilde_lambda_examples() {
        let v = tilde_lambda(&CoefficientSeq::zeros(61), 0.5f64.ln(), 60).unwrap();
        assert!((v.expect_finite("λ̃") - LN2).abs() < 1e-12);
        assert_eq!(
            tilde_lambda(&CoefficientSeq::zeros(3), 0.0, 2).unwrap(),
            ExtReal::PosInf
        );
        let v = tilde_lambda(&CoefficientSeq::zeros(2), -1.0, 1).unwrap();
        assert!((v.expect_finite("λ̃") - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
        assert!((v.expect_finite("λ̃") - 0.313_261_7).abs() < 1e-7);
    }

    #[test]
    fn f_t_and_tilde_tau_examples() {
        let g = SimplexWeights::geometric(0.5, 60).unwrap();
        assert!((f_t_value(&g, 1.0).expect_finite("f_t") + 1.386_294_4).abs() < 1e-7);
        let e0 = SimplexWeights::point_mass(0, 3);
        assert_eq!(f_t_value(&e0, 0.0), ExtReal::Finite(0.0));
        assert_eq!(f_t_value(&e0, 1.0), ExtReal::PosInf);

        assert!(
            (tilde_tau(&TildePoint { t: g, a: 1.0 }).expect_finite("τ̃") + 1.386_294_4).abs() < 1e-7
        );
        assert_eq!(
            tilde_tau(&TildePoint { t: e0, a: 0.0 }),
            ExtReal::Finite(0.0)
        );
        let u = SimplexWeights::new(vec![1.0 / 3.0; 3]).unwrap();
        assert_eq!(tilde_tau(&TildePoint { t: u, a: 0.5 }), ExtReal::PosInf);
    }

    #[test]
    fn hat_lambda_examples() {
        let swap = FiniteDynSystem::cycle(2);
        let v = hat_lambda(
            &CoefficientSeq::zeros(61),
            &swap,
            &WeightFunction::constant(-LN2, 2),
            60,
        )
        .unwrap();
        assert!((v.expect_finite("λ̂") - LN2).abs() < 1e-9);
        let v = hat_lambda(
            &CoefficientSeq::new(vec![0.2, 1.0]).unwrap(),
            &swap,
            &WeightFunction::constant(0.0, 2),
            1,
        )
        .unwrap();
        assert_eq!(v, ExtReal::PosInf);
        let one = FiniteDynSystem::identity(1);
        let v = hat_lambda(
            &CoefficientSeq::zeros(61),
            &one,
            &WeightFunction::new(vec![-1.0]).unwrap(),
            60,
        )
        .unwrap();
        assert!((v.expect_finite("λ̂") - 0.458_675_1).abs() < 1e-7);
    }

    #[test]
    fn hat_tau_examples() {
        let swap = FiniteDynSystem::cycle(2);
        let g = SimplexWeights::geometric(0.5, 60).unwrap();
        let a = mean_index(&g);
        let pt = HatDualPoint {
            t: g,
            mu_bar: FiniteMeasure::new(vec![0.5, 0.5]).unwrap().scaled(a),
        };
        let v = hat_tau(&pt, &swap, exact_oracle(&swap)).unwrap();
        assert!((v.expect_finite("τ̂") + 1.386_294_4).abs() < 1e-7);

        let origin = HatDualPoint {
            t: SimplexWeights::point_mass(0, 4),
            mu_bar: FiniteMeasure::zero(2),
        };
        assert_eq!(
            hat_tau(&origin, &swap, exact_oracle(&swap)).unwrap(),
            ExtReal::Finite(0.0)
        );

        let t = SimplexWeights::new(vec![0.0, 1.0]).unwrap();
        let heavy = HatDualPoint {
            t,
            mu_bar: FiniteMeasure::new(vec![1.0, 1.0]).unwrap(),
        };
        assert_eq!(
            hat_tau(&heavy, &swap, exact_oracle(&swap)).unwrap(),
            ExtReal::PosInf
        );
    }

    #[test]
    fn hat_tau_reports_oracle_failure() {
        let swap = FiniteDynSystem::cycle(2);
        let t = SimplexWeights::new(vec![0.0, 1.0]).unwrap();
        let pt = HatDualPoint {
            t,
            mu_bar: FiniteMeasure::new(vec![0.5, 0.5]).unwrap(),
        };
        let failing = |_: &FiniteMeasure| -> Result<ExtReal, String> { Err("no estimate".into()) };
        assert!(matches!(
            hat_tau(&pt, &swap, failing),
            Err(TheoremError::OracleFailure(_))
        ));
    }

    #[test]
    fn mixing_decomposition() {
        let (w1, w2) = mixing_weights(2.0, 0.5, 0.3);
        assert!((w1 + w2 - 1.0).abs() < 1e-15);
        assert!((w1 - 0.6 / 0.95).abs() < 1e-15);
    }

    #[test]
    fn sampler_produces_admissible_points() {
        let sys = FiniteDynSystem::new(vec![1, 0, 2, 4, 3], 2.0).unwrap();
        let hull = sys.cycle_measures();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pt = sample_admissible_dual(&mut rng, 6, &hull).unwrap();
            assert!(pt.in_domain(&sys));
        }
        assert_eq!(
            sample_admissible_dual(&mut rng, 1, &hull),
            Err(TheoremError::TruncationTooShort)
        );
    }

    #[test]
    fn verify_two_cycle_preset() {
        let swap = FiniteDynSystem::cycle(2);
        let report = verify_hat_conjugacy(
            &CoefficientSeq::zeros(61),
            &swap,
            &WeightFunction::constant(-LN2, 2),
            60,
            None,
            11,
        )
        .unwrap();
        assert!(report.fenchel_young_min_gap >= -1e-8);
        assert!(
            report.attainment_residual <= 1e-9,
            "{}",
            report.attainment_residual
        );
        assert!((report.hat_lambda - LN2).abs() < 1e-9);
        assert!((report.e0_gap - LN2).abs() < 1e-9);
        assert!(report.bruteforce_max_discrepancy.is_none());
        assert!(report.passes());
    }

    #[test]
    fn verify_rejects_supercritical_weights() {
        let swap = FiniteDynSystem::cycle(2);
        let err = verify_hat_conjugacy(
            &CoefficientSeq::zeros(3),
            &swap,
            &WeightFunction::constant(0.1, 2),
            2,
            None,
            0,
        );
        assert!(matches!(err, Err(TheoremError::DomainViolation(_))));
    }

    #[test]
    fn report_json_is_deterministic() {
        let swap = FiniteDynSystem::cycle(2);
        let phi = WeightFunction::new(vec![-0.4, -0.9]).unwrap();
        let a = verify_hat_conjugacy(&CoefficientSeq::zeros(8), &swap, &phi, 7, None, 5).unwrap();
        let b = verify_hat_conjugacy(&CoefficientSeq::zeros(8), &swap, &phi, 7, None, 5).unwrap();
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
        let text = a.to_json().to_string();
        assert!(
            text.find("\"attainment_residual\"").unwrap()
                < text.find("\"bruteforce_max_discrepancy\"").unwrap()
        );
    }
}

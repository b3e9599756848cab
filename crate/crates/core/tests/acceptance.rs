//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use conjlab::cli;
use conjlab::dynsys::{self, FiniteDynSystem, FiniteMeasure, WeightFunction};
use conjlab::entropy::{self, SeriesGenerator};
use conjlab::fenchel::{self, Axis, GriddedFunction};
use conjlab::numeric::logsumexp;
use conjlab::series::{self, CoefficientSeq, SimplexWeights};
use conjlab::theorem::{self, HatDualPoint, TildePoint};
use conjlab::ExtReal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn truncation_for(r: f64) -> usize {
    series::suggest_truncation(&CoefficientSeq::zeros(1), r, 1e-12).unwrap()
}

fn geometric_identity() -> Outcome {
    let mut worst_lp: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for r in [0.1, 0.5, 0.9] {
        let n = truncation_for(r);
        let c = CoefficientSeq::zeros(n + 1);
        let lp = series::log_partition(&c, r, n).unwrap();
        worst_lp = worst_lp.max((lp + (1.0 - r).ln()).abs());
        let t = series::gibbs_maximizer(&c, r, n).unwrap();
        for (k, w) in t.weights().iter().enumerate() {
            worst_t = worst_t.max((w - (1.0 - r) * r.powi(k as i32)).abs());
        }
    }
    check(
        worst_lp <= 1e-9 && worst_t <= 1e-12,
        format!("log-partition err {worst_lp:.2e}, maximizer err {worst_t:.2e}"),
    )
}

fn minimum_relative_entropy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for r in [0.1, 0.5, 0.9] {
        let n = truncation_for(r);
        let reference = CoefficientSeq::new((0..=n).map(|k| k as f64 * r.ln()).collect()).unwrap();
        let g = SimplexWeights::geometric(r, n).unwrap();
        let v = entropy::relative_entropy(&g, &reference).unwrap();
        worst = worst.max((v - (1.0 - r).ln()).abs());
        for _ in 0..1000 {
            let t = SimplexWeights::new(common::dirichlet(&mut rng, n + 1)).unwrap();
            min_margin = min_margin.min(entropy::relative_entropy(&t, &reference).unwrap() - v);
        }
    }
    check(
        worst <= 1e-9 && min_margin >= 0.0,
        format!("identity err {worst:.2e}, min margin over random points {min_margin:.3e}"),
    )
}

/// `Σ_{n≥1} ln n / n²`: direct sum to 10^7 plus `∫_M^∞ ln x / x² dx = (ln M + 1) / M`.
fn log_over_square_sum() -> f64 {
    let m = 10_000_000usize;
    let mut acc = conjlab::numeric::CompensatedSum::new();
    for k in (2..=m).rev() {
        let x = k as f64;
        acc.add(x.ln() / (x * x));
    }
    let mf = m as f64;
    acc.add((mf.ln() + 1.0) / mf - 0.5 * mf.ln() / (mf * mf));
    acc.value()
}

fn example_inverse_square() -> Outcome {
    let schedule = [10, 100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000];
    let trace = entropy::divergence_diagnostic(SeriesGenerator::InverseSquare, &schedule).unwrap();
    let last = trace.last().1;
    let pi2 = std::f64::consts::PI.powi(2);
    let limit = (6.0 / pi2).ln() - 12.0 / pi2 * log_over_square_sum();
    let ok = (last + 1.6376).abs() <= 2e-3 && (last - limit).abs() <= 2e-3;
    check(
        ok,
        format!("partial sum at 1e7 = {last:.7}, oracle limit = {limit:.7}"),
    )
}

fn example_divergence() -> Outcome {
    let trace =
        entropy::divergence_diagnostic(SeriesGenerator::InverseNLogSq, &[10_000, 10_000_000])
            .unwrap();
    let drop = trace.value_at(10_000_000).unwrap() - trace.value_at(10_000).unwrap();
    let mut a = 0.0;
    for k in 2..=1_000_000usize {
        let l = (k as f64).ln();
        a += 1.0 / (k as f64 * l * l);
    }
    a += 1.0 / (1_000_000.5f64).ln();
    let bound = ((1e7f64).ln().ln() - (1e4f64).ln().ln()) / a;
    check(
        drop < -0.2 && drop <= -bound,
        format!(
            "value(1e7) - value(1e4) = {drop:.5}, -(1/a) dlnln N = {:.5} (a = {a:.5})",
            -bound
        ),
    )
}

fn variational_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_eq: f64 = 0.0;
    let mut worst_dom = f64::NEG_INFINITY;
    for _ in 0..50 {
        let n = rng.gen_range(0..=80);
        let c = CoefficientSeq::new((0..=n).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let rho = rng.gen_range(0.05..0.95);
        let lp = series::log_partition(&c, rho, n).unwrap();
        let t = series::gibbs_maximizer(&c, rho, n).unwrap();
        worst_eq =
            worst_eq.max((series::variational_objective(&c, rho.ln(), &t).unwrap() - lp).abs());
        for _ in 0..100 {
            let support = rng.gen_range(1..=n + 1);
            let mut w = common::dirichlet(&mut rng, support);
            w.resize(n + 1, 0.0);
            let r = SimplexWeights::new(w).unwrap();
            worst_dom =
                worst_dom.max(series::variational_objective(&c, rho.ln(), &r).unwrap() - lp);
        }
    }
    check(
        worst_eq <= 1e-10 && worst_dom <= 0.0,
        format!("equality err {worst_eq:.2e}, max(objective - value) {worst_dom:.3e}"),
    )
}

fn mean_entropy_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..200 {
        let len = rng.gen_range(1..=60);
        let t = if i % 4 == 0 {
            SimplexWeights::geometric(rng.gen_range(0.01..0.99), len - 1 + 200).unwrap()
        } else {
            let mut w = common::dirichlet(&mut rng, len);
            for x in w.iter_mut() {
                if rng.gen_bool(0.3) {
                    *x = 0.0;
                }
            }
            if w.iter().all(|&x| x == 0.0) {
                w[0] = 1.0;
            }
            SimplexWeights::from_masses(&w).unwrap()
        };
        let mu = series::mean_index(&t);
        worst = worst.max(-entropy::neg_entropy(&t) - entropy::max_entropy_at_mean(mu));
    }
    check(worst <= 1e-9, format!("max(H(t) - bound) {worst:.3e}"))
}

fn log_exponential_remark() -> Outcome {
    let axes = vec![Axis::new(-4.0, 4.0, 161).unwrap(); 2];
    let f = GriddedFunction::from_fn(axes, |c| ExtReal::Finite(logsumexp(c))).unwrap();
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 0.75] {
        let v = fenchel::conjugate_at(&f, &[t, 1.0 - t]).unwrap();
        worst = worst.max((v - (t * t.ln() + (1.0 - t) * (1.0 - t).ln())).abs());
    }
    // off the simplex the grid conjugate grows with the box: at c = (4, 4) it is 0.2·4 − ln 2
    let off = fenchel::conjugate_at(&f, &[0.5, 0.7]).unwrap();
    let growth = 0.8 - std::f64::consts::LN_2;
    check(
        worst <= 2e-2 && off >= growth - 1e-12,
        format!("max err {worst:.3e}, conjugate at (0.5, 0.7) = {off:.4} >= {growth:.4}"),
    )
}

fn feasible_value(a: &[f64], t: &[f64]) -> Option<f64> {
    if t.iter().any(|&x| x < 0.0) {
        return None;
    }
    Some(
        t.iter()
            .zip(a)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, ak)| w * (w.ln() - ak))
            .sum(),
    )
}

/// Completes the free coordinates `t_2..t_N` with `t_0, t_1` from the two constraints.
fn complete(free: &[f64], target: f64) -> Vec<f64> {
    let tail_mass: f64 = free.iter().sum();
    let tail_mean: f64 = free
        .iter()
        .enumerate()
        .map(|(i, w)| (i + 2) as f64 * w)
        .sum();
    let t1 = target - tail_mean;
    let t0 = 1.0 - t1 - tail_mass;
    let mut t = vec![t0, t1];
    t.extend_from_slice(free);
    t
}

/// Brute force over the constraint set: free coordinates on a 10⁻³ grid,
/// then repeated local zoom around the best node.
fn brute_force_constrained(a: &[f64], target: f64) -> f64 {
    let n = a.len() - 1;
    let free = n.saturating_sub(1);
    let eval = |x: &[f64]| feasible_value(a, &complete(x, target)).unwrap_or(f64::INFINITY);
    let h = 1e-3;
    let steps = 1000usize;
    let mut best = (f64::INFINITY, vec![0.0; free]);
    let mut x = vec![0.0; free];
    let total = (steps + 1).pow(free as u32);
    for k in 0..total {
        let mut r = k;
        for xi in x.iter_mut() {
            *xi = (r % (steps + 1)) as f64 * h;
            r /= steps + 1;
        }
        let v = eval(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
    }
    let mut step = h;
    for _ in 0..12 {
        step *= 0.2;
        let mut improved = true;
        while improved {
            improved = false;
            let center = best.1.clone();
            let span = 10i32;
            let count = (2 * span + 1).pow(free as u32);
            for k in 0..count {
                let mut r = k;
                let mut y = center.clone();
                for yi in y.iter_mut() {
                    *yi += ((r % (2 * span + 1)) - span) as f64 * step;
                    r /= 2 * span + 1;
                }
                let v = eval(&y);
                if v < best.0 {
                    best = (v, y);
                    improved = true;
                }
            }
        }
    }
    best.0
}

fn tilted_vs_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_lower = f64::NEG_INFINITY;
    for i in 0..20 {
        let n = 1 + i % 3;
        let a: Vec<f64> = (0..=n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let target = rng.gen_range(0.05..0.95) * n as f64;
        let sol = entropy::tilted_min_entropy(&CoefficientSeq::new(a.clone()).unwrap(), target, n)
            .unwrap();
        let bf = if n == 1 {
            feasible_value(&a, &[1.0 - target, target]).unwrap()
        } else {
            brute_force_constrained(&a, target)
        };
        worst_upper = worst_upper.max(sol.value - bf);
        worst_lower = worst_lower.max(bf - sol.value);
    }
    check(
        worst_upper <= 1e-3 && worst_lower <= 1e-6,
        format!("max(tilted - bf) {worst_upper:.3e}, max(bf - tilted) {worst_lower:.3e}"),
    )
}

fn spectral_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=8);
        let map = common::random_permutation(&mut rng, m);
        let phi: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let sys = FiniteDynSystem::new(map.clone(), 2.0).unwrap();
        let lam = dynsys::spectral_exponent(&sys, &WeightFunction::new(phi.clone()).unwrap())
            .unwrap()
            .expect_finite("λ");
        worst = worst.max((lam - common::max_cycle_mean(&map, &phi)).abs());
    }
    let mut worst_series: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.gen_range(1..=6);
        let map = common::random_permutation(&mut rng, m);
        let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let shift = common::max_cycle_mean(&map, &raw) + rng.gen_range(0.1..2.0);
        let phi = WeightFunction::new(raw.iter().map(|x| x - shift).collect()).unwrap();
        let n = rng.gen_range(0..=60);
        let c = CoefficientSeq::new((0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let sys = FiniteDynSystem::new(map, 2.0).unwrap();
        let (a, b) = dynsys::operator_series_radius(&c, &sys, &phi, n).unwrap();
        worst_series = worst_series.max((a - b).abs());
    }
    check(
        worst <= 1e-9 && worst_series <= 1e-8,
        format!("cycle oracle err {worst:.2e}, series radius err {worst_series:.2e}"),
    )
}

fn variational_principle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid = vec![Axis::new(-2.0, 2.0, 41).unwrap(); 2];
    let mut worst: f64 = 0.0;
    for sys in [FiniteDynSystem::identity(2), FiniteDynSystem::cycle(2)] {
        let hull = dynsys::invariant_measure_hull(&sys).unwrap();
        let stars: Vec<f64> = hull
            .iter()
            .map(|nu| {
                dynsys::lambda_conjugate_numeric(&sys, nu, &grid)
                    .unwrap()
                    .value
            })
            .collect();
        for _ in 0..50 {
            let phi = WeightFunction::new(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                .unwrap();
            let lam = dynsys::spectral_exponent(&sys, &phi)
                .unwrap()
                .expect_finite("λ");
            let recovered = hull
                .iter()
                .zip(&stars)
                .map(|(nu, s)| nu.pair(&phi) - s)
                .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((lam - recovered).abs());
        }
    }
    check(worst <= 5e-2, format!("max |λ - recovered| {worst:.3e}"))
}

fn theorem_end_to_end() -> Outcome {
    let (c, sys, phi, n, grids) = cli::verify_preset("theorem-2cycle").unwrap();
    let main = theorem::verify_hat_conjugacy(&c, &sys, &phi, n, grids.as_ref(), 11)
        .map_err(|e| e.to_string())?;
    let (c, sys, phi, n, grids) = cli::verify_preset("theorem-lowdim").unwrap();
    let low = theorem::verify_hat_conjugacy(&c, &sys, &phi, n, grids.as_ref(), 11)
        .map_err(|e| e.to_string())?;
    let fy_probes = main
        .probes
        .iter()
        .filter(|p| p.kind == theorem::ProbeKind::FenchelYoung)
        .count();
    let bf = low.bruteforce_max_discrepancy.unwrap_or(f64::INFINITY);
    let ok = fy_probes == 100
        && main.fenchel_young_min_gap >= -1e-8
        && main.attainment_residual <= 1e-8
        && (main.hat_lambda - std::f64::consts::LN_2).abs() <= 1e-9
        && bf <= 5e-2;
    check(
        ok,
        format!(
            "FY min gap {:.3e} over {fy_probes} probes, attainment {:.2e}, low-dim brute force {bf:.3e} on {} nodes",
            main.fenchel_young_min_gap, main.attainment_residual, low.bruteforce_nodes
        ),
    )
}

/// A strictly convex stand-in for `λ*` so the perspective term of `τ̂` is not identically zero.
fn curved_oracle(nu: &FiniteMeasure) -> Result<ExtReal, String> {
    Ok(ExtReal::Finite(
        nu.mass()
            .iter()
            .map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 } + x * x)
            .sum(),
    ))
}

fn convexity_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_tilde = f64::NEG_INFINITY;
    for _ in 0..200 {
        let len = rng.gen_range(2..=40);
        let p = SimplexWeights::new(common::dirichlet(&mut rng, len)).unwrap();
        let q = SimplexWeights::new(common::dirichlet(&mut rng, len)).unwrap();
        let p = TildePoint {
            a: series::mean_index(&p),
            t: p,
        };
        let q = TildePoint {
            a: series::mean_index(&q),
            t: q,
        };
        let mid = p.mix(&q, 0.5);
        if !mid.in_domain() {
            return Err("midpoint of two admissible tilde points left the domain".into());
        }
        let f = |x: &TildePoint| theorem::tilde_tau(x).expect_finite("τ̃");
        worst_tilde = worst_tilde.max(f(&mid) - 0.5 * (f(&p) + f(&q)));
    }

    let mut worst_hat = f64::NEG_INFINITY;
    let mut worst_mixing: f64 = 0.0;
    for i in 0..200 {
        let m = rng.gen_range(1..=6);
        let sys = FiniteDynSystem::new(common::random_permutation(&mut rng, m), 2.0).unwrap();
        let hull = dynsys::invariant_measure_hull(&sys).unwrap();
        let len = rng.gen_range(2..=30);
        let p = theorem::sample_admissible_dual(&mut rng, len, &hull).unwrap();
        let q = theorem::sample_admissible_dual(&mut rng, len, &hull).unwrap();
        let mid: HatDualPoint = p.mix(&q, 0.5);
        if !mid.in_domain(&sys) {
            return Err("midpoint of two admissible dual points left the domain".into());
        }
        // μ̄/a at the midpoint is the (w₁, w₂) mixture of the endpoint measures
        let (a1, a2) = (p.mean(), q.mean());
        let (w1, w2) = theorem::mixing_weights(a1, a2, 0.5);
        let nu_mid = mid.mu_bar.normalized().unwrap();
        for ((x, u), v) in nu_mid
            .mass()
            .iter()
            .zip(p.mu_bar.mass())
            .zip(q.mu_bar.mass())
        {
            worst_mixing = worst_mixing.max((x - (w1 * u / a1 + w2 * v / a2)).abs());
        }
        let tau = |x: &HatDualPoint| -> f64 {
            if i % 2 == 0 {
                theorem::hat_tau(x, &sys, theorem::exact_oracle(&sys))
                    .unwrap()
                    .expect_finite("τ̂")
            } else {
                theorem::hat_tau(x, &sys, curved_oracle)
                    .unwrap()
                    .expect_finite("τ̂")
            }
        };
        worst_hat = worst_hat.max(tau(&mid) - 0.5 * (tau(&p) + tau(&q)));
    }
    check(
        worst_tilde <= 1e-9 && worst_hat <= 1e-9 && worst_mixing <= 1e-12,
        format!("tilde excess {worst_tilde:.3e}, hat excess {worst_hat:.3e}, mixing identity err {worst_mixing:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("geometric identity", 1, geometric_identity),
        ("minimum relative entropy", 5, minimum_relative_entropy),
        ("inverse-square entropy sum", 30, example_inverse_square),
        ("n log^2 n divergence", 60, example_divergence),
        ("log-series variational identity", 10, variational_identity),
        ("mean-entropy bound", 10, mean_entropy_bound),
        ("log-exponential conjugate", 10, log_exponential_remark),
        ("tilted solver vs brute force", 60, tilted_vs_brute_force),
        ("spectral exponent oracle", 30, spectral_oracle),
        ("variational principle", 60, variational_principle),
        ("hat conjugacy end to end", 300, theorem_end_to_end),
        ("convexity suites", 30, convexity_suites),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (tag, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "{tag} {:>2} {name}: {detail} [{:.2} s]",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Independent oracles and samplers shared by the integration tests.
//! Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::Rng;

/// `ρ f'(ρ) / f(ρ)` for `f(ρ) = Σ_{n≤N} e^{c_n} ρ^n`, summed term by term
/// after factoring out the largest term.
pub fn mean_via_derivative(c: &[f64], rho: f64) -> f64 {
    let logs: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(n, cn)| cn + n as f64 * rho.ln())
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut f, mut df) = (0.0, 0.0);
    for (n, l) in logs.iter().enumerate() {
        let w = (l - m).exp();
        f += w;
        df += n as f64 * w;
    }
    df / f
}

/// Direct `ln Σ e^{c_n} ρ^n` without shifting; only for moderate inputs.
pub fn naive_log_partition(c: &[f64], rho: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(n, cn)| cn.exp() * rho.powi(n as i32))
        .sum::<f64>()
        .ln()
}

pub fn entropy_sum(t: &[f64]) -> f64 {
    t.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum()
}

/// Uniform point on the simplex of dimension `len − 1`.
pub fn dirichlet<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Cycles of a self-map found by walking from every state and keeping the
/// states that come back to themselves.
pub fn cycles_of(map: &[usize]) -> Vec<Vec<usize>> {
    let m = map.len();
    let mut on_cycle = vec![false; m];
    for x in 0..m {
        let mut y = x;
        for _ in 0..m {
            y = map[y];
        }
        // after m steps y is on a cycle
        on_cycle[y] = true;
    }
    let mut seen = vec![false; m];
    let mut out = Vec::new();
    for x in 0..m {
        if on_cycle[x] && !seen[x] {
            let mut cyc = vec![x];
            seen[x] = true;
            let mut y = map[x];
            while y != x {
                seen[y] = true;
                cyc.push(y);
                y = map[y];
            }
            out.push(cyc);
        }
    }
    out
}

/// `max over cycles of the average of φ on the cycle`.
pub fn max_cycle_mean(map: &[usize], phi: &[f64]) -> f64 {
    cycles_of(map)
        .iter()
        .map(|c| c.iter().map(|&x| phi[x]).sum::<f64>() / c.len() as f64)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fisher-Yates permutation of `0..m`.
pub fn random_permutation<R: Rng>(rng: &mut R, m: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let j = rng.gen_range(0..=i);
        p.swap(i, j);
    }
    p
}

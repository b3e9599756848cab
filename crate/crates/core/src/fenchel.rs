//! Legendre-Fenchel transforms of functions sampled on rectangular grids.
//!
//! The reference transform is the brute-force maximum
//! `f*(s) = max_x ⟨s, x⟩ − f(x)` over all grid nodes with a finite value.
//! In one dimension [`conjugate_1d_fast`] computes the same maxima in linear
//! time by walking the lower convex hull of the samples.
//!
//! Grid values are [`ExtReal`]: `+inf` marks nodes outside the effective
//! domain and is skipped rather than fed into arithmetic.

use crate::numeric::{fmt17, ExtReal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported grid dimension.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FenchelError {
    #[error("EmptyEffectiveDomain: no finite grid value")]
    EmptyEffectiveDomain,
    #[error("invalid axis {index}: {reason}")]
    InvalidAxis { index: usize, reason: String },
    #[error("grid dimension {0} not in 1..={MAX_DIM}")]
    BadDimension(usize),
    #[error("expected {expected} grid values, got {got}")]
    ValueCountMismatch { expected: usize, got: usize },
    #[error("value at node {0} is -inf or NaN")]
    BadValue(usize),
    #[error("OutOfBox: coordinate {coord} outside axis {axis} range [{lo}, {hi}]")]
    OutOfBox {
        axis: usize,
        coord: f64,
        lo: f64,
        hi: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error("header: {0}")]
    Header(String),
}

/// Uniform grid `lo, lo + h, …, hi` with `count ≥ 2` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self, FenchelError> {
        let axis = Axis { lo, hi, count };
        axis.validate(0)?;
        Ok(axis)
    }

    fn validate(&self, index: usize) -> Result<(), FenchelError> {
        let bad = |reason: &str| {
            Err(FenchelError::InvalidAxis {
                index,
                reason: reason.into(),
            })
        };
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return bad("bounds must be finite");
        }
        if !(self.lo < self.hi) {
            return bad("lo must be < hi");
        }
        if self.count < 2 {
            return bad("count must be >= 2");
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }
}

/// An extended-real function sampled on a product of uniform axes.
/// Nodes are stored row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFunction {
    axes: Vec<Axis>,
    values: Vec<ExtReal>,
}

impl GriddedFunction {
    pub fn new(axes: Vec<Axis>, values: Vec<ExtReal>) -> Result<Self, FenchelError> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(FenchelError::BadDimension(axes.len()));
        }
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        let expected: usize = axes.iter().map(|a| a.count).product();
        if values.len() != expected {
            return Err(FenchelError::ValueCountMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values
            .iter()
            .position(|v| v.is_neg_inf() || v.finite().is_some_and(f64::is_nan))
        {
            return Err(FenchelError::BadValue(i));
        }
        if !values.iter().any(|v| v.is_finite()) {
            return Err(FenchelError::EmptyEffectiveDomain);
        }
        Ok(Self { axes, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(axes: Vec<Axis>, f: impl Fn(&[f64]) -> ExtReal) -> Result<Self, FenchelError> {
        let total: usize = axes.iter().map(|a| a.count).product();
        let mut x = vec![0.0; axes.len()];
        let values = (0..total)
            .map(|k| {
                node_coords(&axes, k, &mut x);
                f(&x)
            })
            .collect();
        Self::new(axes, values)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[ExtReal] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, k: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        node_coords(&self.axes, k, &mut x);
        x
    }

    /// Finite nodes as a flat coordinate array plus their values.
    fn finite_nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut coords = Vec::new();
        let mut vals = Vec::new();
        let mut x = vec![0.0; d];
        for (k, v) in self.values.iter().enumerate() {
            if let ExtReal::Finite(v) = v {
                node_coords(&self.axes, k, &mut x);
                coords.extend_from_slice(&x);
                vals.push(*v);
            }
        }
        (coords, vals)
    }

    /// Multilinear interpolation. Any `+inf` corner with positive weight
    /// makes the result `+inf`.
    pub fn evaluate(&self, x: &[f64]) -> Result<ExtReal, FenchelError> {
        let d = self.dim();
        if x.len() != d {
            return Err(FenchelError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for (i, (a, &xi)) in self.axes.iter().zip(x).enumerate() {
            let slack = 1e-12 * (a.hi - a.lo);
            if !(xi >= a.lo - slack && xi <= a.hi + slack) {
                return Err(FenchelError::OutOfBox {
                    axis: i,
                    coord: xi,
                    lo: a.lo,
                    hi: a.hi,
                });
            }
            let u = ((xi - a.lo) / a.step()).clamp(0.0, (a.count - 1) as f64);
            let b = (u.floor() as usize).min(a.count - 2);
            base[i] = b;
            frac[i] = u - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut k = 0;
            for i in 0..d {
                let up = (corner >> i) & 1 == 1;
                w *= if up { frac[i] } else { 1.0 - frac[i] };
                k = k * self.axes[i].count + base[i] + usize::from(up);
            }
            if w == 0.0 {
                continue;
            }
            match self.values[k] {
                ExtReal::Finite(v) => acc += w * v,
                _ => return Ok(ExtReal::PosInf),
            }
        }
        Ok(ExtReal::Finite(acc))
    }

    /// CSV with header `x0,…,x{d-1},value`, one row per node, reals at 17
    /// significant digits and `+inf` for the sentinel.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        w.write_record(&header).expect("in-memory write");
        for (k, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.node(k).into_iter().map(fmt17).collect();
            row.push(v.to_text());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Inverse of [`to_csv`](Self::to_csv); axes are recovered from the
    /// distinct coordinates in each column.
    pub fn from_csv(text: &str) -> Result<Self, FenchelError> {
        let rows = read_rows(text)?;
        let d = rows
            .first()
            .map(|r| r.0.len())
            .ok_or_else(|| FenchelError::Csv("no rows".into()))?;
        let mut axes = Vec::with_capacity(d);
        for i in 0..d {
            let mut col: Vec<f64> = rows.iter().map(|r| r.0[i]).collect();
            col.sort_by(f64::total_cmp);
            col.dedup_by(|a, b| a.to_bits() == b.to_bits());
            axes.push(Axis {
                lo: col[0],
                hi: col[col.len() - 1],
                count: col.len(),
            });
        }
        Self::from_rows(axes, rows)
    }

    pub fn header(&self) -> GridHeader {
        let mut columns: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        columns.push("value".into());
        GridHeader {
            dim: self.dim(),
            axes: self.axes.clone(),
            rows: self.len(),
            columns,
        }
    }

    /// JSON header plus CSV payload.
    pub fn to_header_and_csv(&self) -> (String, String) {
        let header = serde_json::to_string_pretty(&self.header()).expect("header serializes");
        (header, self.to_csv())
    }

    pub fn from_header_and_csv(header: &str, csv_text: &str) -> Result<Self, FenchelError> {
        let header: GridHeader =
            serde_json::from_str(header).map_err(|e| FenchelError::Header(e.to_string()))?;
        if header.axes.len() != header.dim {
            return Err(FenchelError::Header(format!(
                "dim {} but {} axes",
                header.dim,
                header.axes.len()
            )));
        }
        let rows = read_rows(csv_text)?;
        if rows.len() != header.rows {
            return Err(FenchelError::Header(format!(
                "header lists {} rows, payload has {}",
                header.rows,
                rows.len()
            )));
        }
        Self::from_rows(header.axes, rows)
    }

    fn from_rows(axes: Vec<Axis>, rows: Vec<(Vec<f64>, ExtReal)>) -> Result<Self, FenchelError> {
        for (i, a) in axes.iter().enumerate() {
            a.validate(i)?;
        }
        let expected: usize = axes.iter().map(|a| a.count).product();
        if rows.len() != expected {
            return Err(FenchelError::ValueCountMismatch {
                expected,
                got: rows.len(),
            });
        }
        let mut x = vec![0.0; axes.len()];
        for (k, (coords, _)) in rows.iter().enumerate() {
            node_coords(&axes, k, &mut x);
            if coords.len() != x.len()
                || coords
                    .iter()
                    .zip(&x)
                    .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                return Err(FenchelError::Csv(format!(
                    "row {k}: coordinates do not match the grid"
                )));
            }
        }
        Self::new(axes, rows.into_iter().map(|r| r.1).collect())
    }
}

/// Metadata accompanying a CSV payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dim: usize,
    pub axes: Vec<Axis>,
    pub rows: usize,
    pub columns: Vec<String>,
}

fn read_rows(text: &str) -> Result<Vec<(Vec<f64>, ExtReal)>, FenchelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FenchelError::Csv(e.to_string()))?;
        if record.len() < 2 {
            return Err(FenchelError::Csv(format!("row {k}: too few columns")));
        }
        let n = record.len() - 1;
        let coords = record
            .iter()
            .take(n)
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FenchelError::Csv(format!("row {k}: {e}")))?;
        let value = ExtReal::parse(&record[n])
            .ok_or_else(|| FenchelError::Csv(format!("row {k}: bad value {:?}", &record[n])))?;
        rows.push((coords, value));
    }
    Ok(rows)
}

fn node_coords(axes: &[Axis], mut k: usize, out: &mut [f64]) {
    for i in (0..axes.len()).rev() {
        let c = axes[i].count;
        out[i] = axes[i].coord(k % c);
        k /= c;
    }
}

/// Brute-force conjugate at a single dual point.
pub fn conjugate_at(f: &GriddedFunction, s: &[f64]) -> Result<f64, FenchelError> {
    if s.len() != f.dim() {
        return Err(FenchelError::DimensionMismatch {
            expected: f.dim(),
            got: s.len(),
        });
    }
    let (coords, vals) = f.finite_nodes();
    if vals.is_empty() {
        return Err(FenchelError::EmptyEffectiveDomain);
    }
    Ok(max_affine(&coords, &vals, s))
}

fn max_affine(coords: &[f64], vals: &[f64], s: &[f64]) -> f64 {
    let d = s.len();
    let mut best = f64::NEG_INFINITY;
    for (x, v) in coords.chunks_exact(d).zip(vals) {
        let mut inner = 0.0;
        for (si, xi) in s.iter().zip(x) {
            inner += si * xi;
        }
        let cand = inner - v;
        if cand > best {
            best = cand;
        }
    }
    best
}

/// `f*(s) = max_x ⟨s, x⟩ − f(x)` at every node of `dual_axes` (brute force,
/// parallel over dual nodes).
pub fn conjugate_grid(
    f: &GriddedFunction,
    dual_axes: &[Axis],
) -> Result<GriddedFunction, FenchelError> {
    if dual_axes.len() != f.dim() {
        return Err(FenchelError::DimensionMismatch {
            expected: f.dim(),
            got: dual_axes.len(),
        });
    }
    for (i, a) in dual_axes.iter().enumerate() {
        a.validate(i)?;
    }
    let (coords, vals) = f.finite_nodes();
    if vals.is_empty() {
        return Err(FenchelError::EmptyEffectiveDomain);
    }
    let d = f.dim();
    let total: usize = dual_axes.iter().map(|a| a.count).product();
    let values: Vec<ExtReal> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |s, k| {
                node_coords(dual_axes, k, s);
                ExtReal::Finite(max_affine(&coords, &vals, s))
            },
        )
        .collect();
    GriddedFunction::new(dual_axes.to_vec(), values)
}

/// One-dimensional conjugate through the lower convex hull of the finite
/// samples; linear in the number of primal plus dual nodes.
pub fn conjugate_1d_fast(
    f: &GriddedFunction,
    dual_axis: &Axis,
) -> Result<GriddedFunction, FenchelError> {
    if f.dim() != 1 {
        return Err(FenchelError::DimensionMismatch {
            expected: 1,
            got: f.dim(),
        });
    }
    dual_axis.validate(0)?;
    let (xs, ys) = f.finite_nodes();
    if ys.is_empty() {
        return Err(FenchelError::EmptyEffectiveDomain);
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(&ys) {
        while hull.len() >= 2 {
            let (x0, y0) = hull[hull.len() - 2];
            let (x1, y1) = hull[hull.len() - 1];
            if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    let mut j = 0;
    let values = dual_axis
        .coords()
        .into_iter()
        .map(|s| {
            while j + 1 < hull.len()
                && s * hull[j + 1].0 - hull[j + 1].1 >= s * hull[j].0 - hull[j].1
            {
                j += 1;
            }
            ExtReal::Finite(s * hull[j].0 - hull[j].1)
        })
        .collect();
    GriddedFunction::new(vec![*dual_axis], values)
}

/// `(f*)*` sampled on `primal_axes`.
pub fn biconjugate_grid(
    f: &GriddedFunction,
    dual_axes: &[Axis],
    primal_axes: &[Axis],
) -> Result<GriddedFunction, FenchelError> {
    conjugate_grid(&conjugate_grid(f, dual_axes)?, primal_axes)
}

/// `f(x) + f*(s) − ⟨s, x⟩`, both functions interpolated multilinearly.
pub fn fenchel_young_gap(
    f: &GriddedFunction,
    fstar: &GriddedFunction,
    x: &[f64],
    s: &[f64],
) -> Result<ExtReal, FenchelError> {
    let fx = f.evaluate(x)?;
    let fs = fstar.evaluate(s)?;
    let inner: f64 = s.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(fx + fs + ExtReal::Finite(-inner))
}

/// Largest midpoint excess `f((a+b)/2) − (f(a) + f(b))/2` over random grid
/// segments whose endpoints and midpoint are finite nodes. Midpoints are
/// exact nodes, so no interpolation enters. Returns `-inf` when no
/// admissible segment was found.
pub fn convexity_probe(f: &GriddedFunction, trials: usize, seed: u64) -> ExtReal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = f.dim();
    let mut best = ExtReal::NegInf;
    let mut found = 0;
    let mut a = vec![0usize; d];
    let mut b = vec![0usize; d];
    let flat = |idx: &[usize]| {
        idx.iter()
            .zip(&f.axes)
            .fold(0, |k, (i, ax)| k * ax.count + i)
    };
    for _ in 0..trials.saturating_mul(50) {
        if found >= trials {
            break;
        }
        for i in 0..d {
            let c = f.axes[i].count;
            a[i] = rng.gen_range(0..c);
            b[i] = rng.gen_range(0..c);
            if (a[i] + b[i]) % 2 == 1 {
                b[i] = if b[i] + 1 < c { b[i] + 1 } else { b[i] - 1 };
            }
        }
        let mid: Vec<usize> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2).collect();
        let (fa, fb, fm) = (f.values[flat(&a)], f.values[flat(&b)], f.values[flat(&mid)]);
        if let (ExtReal::Finite(fa), ExtReal::Finite(fb), ExtReal::Finite(fm)) = (fa, fb, fm) {
            found += 1;
            let excess = ExtReal::Finite(fm - 0.5 * (fa + fb));
            if excess > best {
                best = excess;
            }
        }
    }
    best
}

/// Per-axis `(min, max)` forward-difference slopes between adjacent finite
/// nodes. The conjugate's effective domain is (the closure of) this range,
/// so a dual box should cover it.
pub fn estimate_slope_range(f: &GriddedFunction) -> Vec<(f64, f64)> {
    let d = f.dim();
    let strides: Vec<usize> = (0..d)
        .map(|i| f.axes[i + 1..].iter().map(|a| a.count).product())
        .collect();
    let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for k in 0..f.len() {
        for i in 0..d {
            let idx = (k / strides[i]) % f.axes[i].count;
            if idx + 1 < f.axes[i].count {
                if let (ExtReal::Finite(v0), ExtReal::Finite(v1)) =
                    (f.values[k], f.values[k + strides[i]])
                {
                    let slope = (v1 - v0) / f.axes[i].step();
                    out[i].0 = out[i].0.min(slope);
                    out[i].1 = out[i].1.max(slope);
                }
            }
        }
    }
    out.into_iter()
        .map(|(lo, hi)| if lo <= hi { (lo, hi) } else { (0.0, 0.0) })
        .collect()
}

/// Dual axes covering the estimated slope range (widened by `margin` on
/// each side) with `count` nodes per axis.
pub fn suggest_dual_axes(
    f: &GriddedFunction,
    count: usize,
    margin: f64,
) -> Result<Vec<Axis>, FenchelError> {
    estimate_slope_range(f)
        .into_iter()
        .map(|(lo, hi)| {
            let pad = margin.max(1e-9);
            Axis::new(lo - pad, hi + pad, count)
        })
        .collect()
}

//! Shared numeric primitives: extended reals, stable log-sum-exp,
//! the `x ln x` convention and compensated summation.

use std::cmp::Ordering;
use std::fmt;

/// A real number extended with the two infinities.
///
/// Infinite values are explicit variants and never enter floating-point
/// arithmetic; callers branch on them instead of propagating `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_pos_inf(self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    /// Unwraps a finite value, panicking with `what` otherwise. Test helper.
    #[track_caller]
    pub fn expect_finite(self, what: &str) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            other => panic!("{what}: expected a finite value, got {other}"),
        }
    }

    /// Total order used for max-reductions; `Finite(NaN)` is never constructed.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    /// Multiplication by a nonnegative scalar with `0 * inf = 0`.
    pub fn scale_nonneg(self, s: f64) -> ExtReal {
        debug_assert!(s >= 0.0);
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(s * v),
            _ if s == 0.0 => ExtReal::Finite(0.0),
            inf => inf,
        }
    }

    /// Text form used in CSV and JSON outputs.
    pub fn to_text(self) -> String {
        match self {
            ExtReal::NegInf => "-inf".to_string(),
            ExtReal::PosInf => "+inf".to_string(),
            ExtReal::Finite(v) => fmt17(v),
        }
    }

    pub fn parse(text: &str) -> Option<ExtReal> {
        match text.trim() {
            "+inf" | "inf" => Some(ExtReal::PosInf),
            "-inf" => Some(ExtReal::NegInf),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ExtReal::Finite),
        }
    }
}

/// `+inf + -inf` is resolved to `+inf`: infeasibility dominates.
impl std::ops::Add for ExtReal {
    type Output = ExtReal;

    fn add(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::PosInf, _) | (_, ExtReal::PosInf) => ExtReal::PosInf,
            (ExtReal::NegInf, _) | (_, ExtReal::NegInf) => ExtReal::NegInf,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
        }
    }
}

impl From<f64> for ExtReal {
    /// Maps IEEE infinities onto the sentinels. NaN is rejected by debug assertion.
    fn from(v: f64) -> Self {
        debug_assert!(!v.is_nan());
        if v == f64::INFINITY {
            ExtReal::PosInf
        } else if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Formats `x` with 17 significant digits, enough for a bit-exact round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number carrying `x` at 17 significant digits; the infinities become
/// the strings `"+inf"` / `"-inf"`.
pub fn json_real(x: f64) -> serde_json::Value {
    json_ext(ExtReal::from(x))
}

pub fn json_ext(x: ExtReal) -> serde_json::Value {
    match x {
        ExtReal::Finite(v) => {
            serde_json::from_str(&fmt17(v)).expect("formatted float is valid JSON")
        }
        other => serde_json::Value::String(other.to_text()),
    }
}

/// `x ln x` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `ln Σ exp(v_i)` in max-shifted form. Returns `-inf` (as `f64`) for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = CompensatedSum::new();
    for &v in values {
        acc.add((v - max).exp());
    }
    max + acc.value().ln()
}

/// Neumaier's variant of Kahan summation. Partial sums can be merged, so
/// a long series may be summed in independent chunks.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another partial sum into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

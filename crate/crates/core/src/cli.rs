//! Batch front end: scenario configs in, JSON or CSV reports out.
//!
//! A config is a JSON object
//! `{"command": ..., "params": {...}, "output_path": ..., "format": "json"|"csv", "seed": k}`
//! where every key except `params` is optional. Exit status is 0 on success,
//! 1 for config errors and 2 for domain errors.

use crate::dynsys::{self, FiniteDynSystem, FiniteMeasure, WeightFunction};
use crate::entropy::{self, SeriesGenerator};
use crate::fenchel::{self, Axis, GriddedFunction};
use crate::numeric::{json_ext, json_real, logsumexp, ExtReal};
use crate::series::{self, CoefficientSeq, SimplexWeights};
use crate::theorem::{self, VerifyGrids};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Tail bound targeted when `N` is not given.
pub const DEFAULT_TAIL_EPS: f64 = 1e-12;
/// Entries of the maximizer echoed in series reports.
pub const HEAD_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Series,
    Entropy,
    Conjugate,
    Dynsys,
    Verify,
}

impl Command {
    pub fn parse(text: &str) -> Option<Command> {
        Some(match text {
            "series" => Command::Series,
            "entropy" => Command::Entropy,
            "conjugate" => Command::Conjugate,
            "dynsys" => Command::Dynsys,
            "verify" => Command::Verify,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Series => "series",
            Command::Entropy => "entropy",
            Command::Conjugate => "conjugate",
            Command::Dynsys => "dynsys",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn parse(text: &str) -> Option<Format> {
        match text {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("ConfigInvalid: {key}: {reason}")]
    ConfigInvalid { key: String, reason: String },
    #[error("{0}")]
    Domain(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn status(&self) -> i32 {
        match self {
            CliError::ConfigInvalid { .. } | CliError::Io { .. } => 1,
            CliError::Domain(_) => 2,
        }
    }

    fn config(key: &str, reason: impl Into<String>) -> Self {
        CliError::ConfigInvalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    fn domain(e: impl std::fmt::Display) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub command: Command,
    pub params: Map<String, Value>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Parses a config document. `command` comes from the command line when
    /// given and must then agree with the document's own `command` key.
    pub fn from_json(text: &str, command: Option<Command>) -> Result<Self, CliError> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::config("<config>", e.to_string()))?;
        let Value::Object(obj) = doc else {
            return Err(CliError::config("<config>", "expected a JSON object"));
        };
        for key in obj.keys() {
            if !matches!(
                key.as_str(),
                "command" | "params" | "output_path" | "format" | "seed"
            ) {
                return Err(CliError::config(key, "unknown key"));
            }
        }
        let in_doc = match obj.get("command") {
            None => None,
            Some(Value::String(s)) => Some(
                Command::parse(s)
                    .ok_or_else(|| CliError::config("command", format!("unknown command {s:?}")))?,
            ),
            Some(_) => return Err(CliError::config("command", "expected a string")),
        };
        let command = match (command, in_doc) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::config(
                    "command",
                    format!("config says {}, command line says {}", b.name(), a.name()),
                ))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(CliError::config("command", "missing")),
        };
        let params = match obj.get("params") {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(CliError::config("params", "expected an object")),
        };
        let output_path = match obj.get("output_path") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(CliError::config("output_path", "expected a string")),
        };
        let format = match obj.get("format") {
            None => Format::Json,
            Some(Value::String(s)) => Format::parse(s)
                .ok_or_else(|| CliError::config("format", "expected json or csv"))?,
            Some(_) => return Err(CliError::config("format", "expected a string")),
        };
        let seed = match obj.get("seed") {
            None => 0,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| CliError::config("seed", "expected a nonnegative integer"))?,
        };
        Ok(ScenarioConfig {
            command,
            params,
            output_path,
            format,
            seed,
        })
    }
}

/// Outcome of [`execute`]: the rendered report and every file written.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitReport {
    pub status: i32,
    pub written: Vec<PathBuf>,
    pub tolerances: Value,
    pub output: String,
}

impl ExitReport {
    pub fn summary(&self) -> Value {
        json!({
            "status": self.status,
            "written": self.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "tolerances": self.tolerances,
        })
    }
}

/// A command result: the JSON document and the CSV table for the same data.
struct Outcome {
    json: Value,
    csv: String,
}

/// Runs a validated config and writes its report to `output_path` (stdout when absent).
pub fn execute(config: &ScenarioConfig) -> Result<ExitReport, CliError> {
    let outcome = run(config)?;
    let tolerances = outcome
        .json
        .get("tolerances")
        .cloned()
        .unwrap_or(Value::Null);
    let output = match config.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&outcome.json).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => outcome.csv,
    };
    let mut written = Vec::new();
    if let Some(path) = &config.output_path {
        write_file(path, &output)?;
        written.push(path.clone());
    }
    Ok(ExitReport {
        status: 0,
        written,
        tolerances,
        output,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    let p = Params(&config.params);
    let mut out = match config.command {
        Command::Series => run_series(&p)?,
        Command::Entropy => run_entropy(&p)?,
        Command::Conjugate => run_conjugate(&p)?,
        Command::Dynsys => run_dynsys(&p)?,
        Command::Verify => run_verify(&p, config.seed)?,
    };
    if let Value::Object(m) = &mut out.json {
        m.insert(
            "command".into(),
            Value::String(config.command.name().into()),
        );
    }
    Ok(out)
}

/// Typed access to `params`; errors name the offending key.
struct Params<'a>(&'a Map<String, Value>);

impl Params<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key).filter(|v| !v.is_null())
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::config(&pkey(key), "expected a finite number"))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.as_u64()
                    .map(|n| n as usize)
                    .ok_or_else(|| CliError::config(&pkey(key), "expected a nonnegative integer"))
            })
            .transpose()
    }

    fn str(&self, key: &str) -> Result<Option<&str>, CliError> {
        self.get(key)
            .map(|v| {
                v.as_str()
                    .ok_or_else(|| CliError::config(&pkey(key), "expected a string"))
            })
            .transpose()
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key).map(|v| f64_list(v, &pkey(key))).transpose()
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::config(&pkey(key), "missing"))
    }

    fn preset(&self) -> Result<Option<&str>, CliError> {
        self.str("preset")
    }

    /// `c` as the string `"zeros"` or a list of reals; zeros of length `len` when absent.
    fn coeffs(&self, len: usize) -> Result<CoefficientSeq, CliError> {
        match self.get("c") {
            None => Ok(CoefficientSeq::zeros(len)),
            Some(Value::String(s)) if s == "zeros" => Ok(CoefficientSeq::zeros(len)),
            Some(v) => {
                let xs = f64_list(v, "params.c")?;
                if xs.len() < len {
                    return Err(CliError::config(
                        "params.c",
                        format!("has {} entries, need {len}", xs.len()),
                    ));
                }
                CoefficientSeq::new(xs).map_err(|e| CliError::config("params.c", e.to_string()))
            }
        }
    }

    fn axes(&self, key: &str) -> Result<Option<Vec<Axis>>, CliError> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        let name = pkey(key);
        let list = v
            .as_array()
            .ok_or_else(|| CliError::config(&name, "expected a list of axes"))?;
        list.iter()
            .enumerate()
            .map(|(i, a)| axis(a, &format!("{name}[{i}]")))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn system(&self) -> Result<FiniteDynSystem, CliError> {
        let v = self.require("system", self.get("system"))?;
        FiniteDynSystem::from_value(v).map_err(|e| CliError::config("params.system", e.to_string()))
    }

    fn phi(&self) -> Result<WeightFunction, CliError> {
        let v = self.require("phi", self.get("phi"))?;
        let wrapped;
        let v = if v.is_array() {
            wrapped = json!({ "phi": v });
            &wrapped
        } else {
            v
        };
        WeightFunction::from_value(v).map_err(|e| CliError::config("params.phi", e.to_string()))
    }
}

fn pkey(key: &str) -> String {
    format!("params.{key}")
}

fn f64_list(v: &Value, name: &str) -> Result<Vec<f64>, CliError> {
    let list = v
        .as_array()
        .ok_or_else(|| CliError::config(name, "expected a list of numbers"))?;
    list.iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                CliError::config(&format!("{name}[{i}]"), "expected a finite number")
            })
        })
        .collect()
}

fn axis(v: &Value, name: &str) -> Result<Axis, CliError> {
    let get = |k: &str| {
        v.get(k)
            .ok_or_else(|| CliError::config(&format!("{name}.{k}"), "missing"))
    };
    let lo = get("lo")?
        .as_f64()
        .ok_or_else(|| CliError::config(&format!("{name}.lo"), "expected a number"))?;
    let hi = get("hi")?
        .as_f64()
        .ok_or_else(|| CliError::config(&format!("{name}.hi"), "expected a number"))?;
    let count = get("count")?
        .as_u64()
        .ok_or_else(|| CliError::config(&format!("{name}.count"), "expected an integer"))?
        as usize;
    Axis::new(lo, hi, count).map_err(|e| CliError::config(name, e.to_string()))
}

fn unknown_preset(name: &str) -> CliError {
    CliError::config("params.preset", format!("unknown preset {name:?}"))
}

fn csv_row(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

fn text(x: f64) -> String {
    ExtReal::from(x).to_text()
}

// ---------------------------------------------------------------- series

fn run_series(p: &Params) -> Result<Outcome, CliError> {
    match p.preset()? {
        Some("geom") => return series_geom_preset(),
        Some(other) => return Err(unknown_preset(other)),
        None => {}
    }
    let rho = p.require("rho", p.f64("rho")?)?;
    if !(rho > 0.0) {
        return Err(CliError::config(
            "params.rho",
            format!("NonPositiveRho: rho = {rho} must be positive"),
        ));
    }
    let n = match p.usize("N")? {
        Some(n) => n,
        None => {
            let probe = p.coeffs(1)?;
            series::suggest_truncation(&probe, rho, DEFAULT_TAIL_EPS)
                .map_err(|_| CliError::config("params.N", "required when rho >= 1"))?
        }
    };
    let c = p.coeffs(n + 1)?;
    let log_partition = series::log_partition(&c, rho, n).map_err(CliError::domain)?;
    let t = series::gibbs_maximizer(&c, rho, n).map_err(CliError::domain)?;
    let tail = if rho < 1.0 {
        Some(series::tail_bound(&c, rho, n).map_err(CliError::domain)?)
    } else {
        None
    };

    let json = json!({
        "N": n,
        "rho": json_real(rho),
        "log_partition": json_real(log_partition),
        "maximizer_head": t.weights().iter().take(HEAD_LEN).map(|&w| json_real(w)).collect::<Vec<_>>(),
        "mean_index": json_real(series::mean_index(&t)),
        "neg_entropy": json_real(entropy::neg_entropy(&t)),
        "tolerances": {
            "simplex_sum": json_real(series::SIMPLEX_SUM_TOL),
            "tail_bound": tail.map_or(Value::String("none".into()), json_real),
        },
    });
    let mut csv = csv_row(&["n".into(), "c_n".into(), "t_n".into()]);
    for (k, (&w, &ck)) in t.weights().iter().zip(c.coeffs()).enumerate() {
        csv.push_str(&csv_row(&[k.to_string(), text(ck), text(w)]));
    }
    Ok(Outcome { json, csv })
}

fn series_geom_preset() -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let mut csv = csv_row(&[
        "r".into(),
        "N".into(),
        "log_partition".into(),
        "closed_form".into(),
        "tail_bound".into(),
    ]);
    for r in [0.1, 0.5, 0.9] {
        let probe = CoefficientSeq::zeros(1);
        let n =
            series::suggest_truncation(&probe, r, DEFAULT_TAIL_EPS).map_err(CliError::domain)?;
        let c = CoefficientSeq::zeros(n + 1);
        let lp = series::log_partition(&c, r, n).map_err(CliError::domain)?;
        let tail = series::tail_bound(&c, r, n).map_err(CliError::domain)?;
        let closed = -(1.0 - r).ln();
        rows.push(json!({
            "r": json_real(r),
            "N": n,
            "log_partition": json_real(lp),
            "closed_form": json_real(closed),
            "tail_bound": json_real(tail),
        }));
        csv.push_str(&csv_row(&[
            text(r),
            n.to_string(),
            text(lp),
            text(closed),
            text(tail),
        ]));
    }
    let json = json!({
        "preset": "geom",
        "rows": rows,
        "tolerances": { "tail_bound_target": json_real(DEFAULT_TAIL_EPS) },
    });
    Ok(Outcome { json, csv })
}

// ---------------------------------------------------------------- entropy

const EXAMPLE_SCHEDULE: [usize; 7] = [10, 100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000];

fn run_entropy(p: &Params) -> Result<Outcome, CliError> {
    match p.preset()? {
        Some("example-2-2") => {
            return divergence_outcome(SeriesGenerator::InverseSquare, &EXAMPLE_SCHEDULE)
        }
        Some("przyk") => {
            return divergence_outcome(SeriesGenerator::InverseNLogSq, &EXAMPLE_SCHEDULE[3..])
        }
        Some(other) => return Err(unknown_preset(other)),
        None => {}
    }
    if let Some(name) = p.str("generator")? {
        let generator = match name {
            "inverse_square" => SeriesGenerator::InverseSquare,
            "inverse_n_log_sq" => SeriesGenerator::InverseNLogSq,
            _ => {
                return Err(CliError::config(
                    "params.generator",
                    "expected inverse_square or inverse_n_log_sq",
                ))
            }
        };
        let schedule: Vec<usize> = match p.get("schedule") {
            None => EXAMPLE_SCHEDULE.to_vec(),
            Some(v) => v
                .as_array()
                .and_then(|a| {
                    a.iter()
                        .map(|x| x.as_u64().map(|n| n as usize))
                        .collect::<Option<Vec<_>>>()
                })
                .ok_or_else(|| {
                    CliError::config("params.schedule", "expected a list of nonnegative integers")
                })?,
        };
        if schedule.is_empty() {
            return Err(CliError::config("params.schedule", "EmptySchedule"));
        }
        if let Some(i) = schedule.windows(2).position(|w| w[1] <= w[0]) {
            return Err(CliError::config(
                &format!("params.schedule[{}]", i + 1),
                "NonIncreasingSchedule",
            ));
        }
        return divergence_outcome(generator, &schedule);
    }
    if p.get("target_mean").is_some() {
        return tilted_outcome(p);
    }
    if let Some(t) = p.f64_list("t")? {
        return simplex_outcome(p, t);
    }
    Err(CliError::config(
        "params",
        "expected one of preset, generator, target_mean or t",
    ))
}

fn divergence_outcome(generator: SeriesGenerator, schedule: &[usize]) -> Result<Outcome, CliError> {
    let trace = entropy::divergence_diagnostic(generator, schedule).map_err(CliError::domain)?;
    let name = match generator {
        SeriesGenerator::InverseSquare => "inverse_square",
        SeriesGenerator::InverseNLogSq => "inverse_n_log_sq",
    };
    let mut csv = csv_row(&["N".into(), "partial_sum".into()]);
    let checkpoints: Vec<Value> = trace
        .checkpoints()
        .iter()
        .map(|&(n, v)| {
            csv.push_str(&csv_row(&[n.to_string(), text(v)]));
            json!({ "N": n, "value": json_real(v) })
        })
        .collect();
    let mut tolerances = Map::new();
    tolerances.insert(
        "summation".into(),
        Value::String("compensated, ascending n".into()),
    );
    if generator == SeriesGenerator::InverseNLogSq {
        tolerances.insert(
            "normalizer".into(),
            json_real(entropy::inverse_n_log_sq_normalizer()),
        );
    }
    let json = json!({
        "generator": name,
        "checkpoints": checkpoints,
        "tolerances": tolerances,
    });
    Ok(Outcome { json, csv })
}

fn tilted_outcome(p: &Params) -> Result<Outcome, CliError> {
    let target = p.require("target_mean", p.f64("target_mean")?)?;
    let n = p.require("N", p.usize("N")?)?;
    let a_log = match p.get("a_log") {
        None => CoefficientSeq::zeros(n + 1),
        Some(Value::String(s)) if s == "zeros" => CoefficientSeq::zeros(n + 1),
        Some(v) => CoefficientSeq::new(f64_list(v, "params.a_log")?)
            .map_err(|e| CliError::config("params.a_log", e.to_string()))?,
    };
    let sol = entropy::tilted_min_entropy(&a_log, target, n).map_err(CliError::domain)?;
    let json = json!({
        "N": n,
        "target_mean": json_real(target),
        "weights": sol.weights.weights().iter().map(|&w| json_real(w)).collect::<Vec<_>>(),
        "tilt": json_ext(sol.tilt),
        "value": json_real(sol.value),
        "mean_residual": json_real(sol.mean_residual),
        "tolerances": {
            "mean": json_real(entropy::MEAN_TOL),
            "tilt_width": json_real(entropy::TILT_WIDTH_TOL),
        },
    });
    let mut csv = csv_row(&["n".into(), "t_n".into()]);
    for (k, &w) in sol.weights.weights().iter().enumerate() {
        csv.push_str(&csv_row(&[k.to_string(), text(w)]));
    }
    Ok(Outcome { json, csv })
}

fn simplex_outcome(p: &Params, t: Vec<f64>) -> Result<Outcome, CliError> {
    let t = SimplexWeights::new(t).map_err(|e| CliError::config("params.t", e.to_string()))?;
    let neg = entropy::neg_entropy(&t);
    let mean = series::mean_index(&t);
    let mut json = json!({
        "neg_entropy": json_real(neg),
        "mean_index": json_real(mean),
        "max_entropy_at_mean": json_real(entropy::max_entropy_at_mean(mean)),
        "tolerances": { "simplex_sum": json_real(series::SIMPLEX_SUM_TOL) },
    });
    let mut csv = csv_row(&["quantity".into(), "value".into()]);
    csv.push_str(&csv_row(&["neg_entropy".into(), text(neg)]));
    csv.push_str(&csv_row(&["mean_index".into(), text(mean)]));
    if let Some(rho) = p.f64("rho")? {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(CliError::config(
                "params.rho",
                "RhoOutOfRange: expected 0 < rho < 1",
            ));
        }
        let g = entropy::g_r(&t, rho).map_err(CliError::domain)?;
        json["g_r"] = json_real(g);
        csv.push_str(&csv_row(&["g_r".into(), text(g)]));
    }
    Ok(Outcome { json, csv })
}

// ---------------------------------------------------------------- conjugate

fn run_conjugate(p: &Params) -> Result<Outcome, CliError> {
    let (f, dual_axes, eval_points) = match p.preset()? {
        Some("logexp-remark") => {
            let axes = vec![Axis::new(-4.0, 4.0, 161).expect("valid axis"); 2];
            let f = GriddedFunction::from_fn(axes, |c| ExtReal::Finite(logsumexp(c)))
                .map_err(CliError::domain)?;
            let dual = vec![Axis::new(0.0, 1.0, 5).expect("valid axis"); 2];
            let points = [0.25, 0.5, 0.75]
                .iter()
                .map(|&t| vec![t, 1.0 - t])
                .collect::<Vec<_>>();
            (f, dual, points)
        }
        Some(other) => return Err(unknown_preset(other)),
        None => {
            let f = if let Some(path) = p.str("input")? {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::config("params.input", format!("cannot read {path}: {e}"))
                })?;
                GriddedFunction::from_csv(&text)
                    .map_err(|e| CliError::config("params.input", e.to_string()))?
            } else {
                let name = p.require("function", p.str("function")?)?;
                let axes = p.require("axes", p.axes("axes")?)?;
                let g: fn(&[f64]) -> ExtReal = match name {
                    "logsumexp" => |x| ExtReal::Finite(logsumexp(x)),
                    "half_square" => {
                        |x| ExtReal::Finite(0.5 * x.iter().map(|v| v * v).sum::<f64>())
                    }
                    "abs" => |x| ExtReal::Finite(x.iter().map(|v| v.abs()).sum()),
                    _ => {
                        return Err(CliError::config(
                            "params.function",
                            "expected logsumexp, half_square or abs",
                        ))
                    }
                };
                GriddedFunction::from_fn(axes, g)
                    .map_err(|e| CliError::config("params.axes", e.to_string()))?
            };
            let dual = match p.axes("dual_axes")? {
                Some(d) => d,
                None => fenchel::suggest_dual_axes(&f, 41, 0.0).map_err(CliError::domain)?,
            };
            let points = match p.get("eval") {
                None => Vec::new(),
                Some(v) => {
                    let list = v.as_array().ok_or_else(|| {
                        CliError::config("params.eval", "expected a list of points")
                    })?;
                    list.iter()
                        .enumerate()
                        .map(|(i, x)| f64_list(x, &format!("params.eval[{i}]")))
                        .collect::<Result<_, _>>()?
                }
            };
            (f, dual, points)
        }
    };
    if dual_axes.len() != f.dim() {
        return Err(CliError::config(
            "params.dual_axes",
            format!("expected {} axes", f.dim()),
        ));
    }
    let g = fenchel::conjugate_grid(&f, &dual_axes).map_err(CliError::domain)?;
    let evals: Vec<Value> = eval_points
        .iter()
        .map(|s| {
            let v = fenchel::conjugate_at(&f, s).map_err(CliError::domain)?;
            Ok(json!({ "point": s.iter().map(|&x| json_real(x)).collect::<Vec<_>>(), "conjugate": json_real(v) }))
        })
        .collect::<Result<_, CliError>>()?;
    let resolution: Vec<Value> = f.axes().iter().map(|a| json_real(a.step())).collect();
    let json = json!({
        "grid": serde_json::to_value(g.header()).expect("header serializes"),
        "evaluations": evals,
        "convexity_violation": json_ext(fenchel::convexity_probe(&g, 200, 0)),
        "tolerances": {
            "primal_step": resolution,
            "dual_step": dual_axes.iter().map(|a| json_real(a.step())).collect::<Vec<_>>(),
        },
    });
    Ok(Outcome {
        json,
        csv: g.to_csv(),
    })
}

// ---------------------------------------------------------------- dynsys

fn run_dynsys(p: &Params) -> Result<Outcome, CliError> {
    if let Some(other) = p.preset()? {
        return Err(unknown_preset(other));
    }
    let sys = p.system()?;
    let phi = p.phi()?;
    if phi.len() != sys.states() {
        return Err(CliError::config(
            "params.phi",
            format!("expected {} entries, got {}", sys.states(), phi.len()),
        ));
    }
    let a = dynsys::transfer_matrix(&sys, &phi).map_err(CliError::domain)?;
    let est = dynsys::spectral_radius_detailed(&a).map_err(CliError::domain)?;
    let lam = dynsys::spectral_exponent(&sys, &phi).map_err(CliError::domain)?;
    let (avg, nu_max) = dynsys::max_cycle_average(&sys, &phi).map_err(CliError::domain)?;

    let mut json = json!({
        "states": sys.states(),
        "spectral_radius": json_real(est.radius),
        "spectral_method": match est.method { dynsys::SpectralMethod::PowerIteration => "power_iteration", dynsys::SpectralMethod::Gelfand => "gelfand" },
        "gelfand_radius": json_real(est.gelfand),
        "spectral_exponent": json_ext(lam),
        "max_cycle_average": json_real(avg),
        "maximizing_measure": nu_max.mass().iter().map(|&x| json_real(x)).collect::<Vec<_>>(),
        "cycles": sys.cycles(),
        "tolerances": {
            "power_residual": json_real(dynsys::POWER_RESIDUAL_TOL),
            "cross_check": json_real(dynsys::CROSS_CHECK_TOL),
            "hull": json_real(dynsys::HULL_TOL),
        },
    });

    if let Some(nu) = p.f64_list("nu")? {
        let nu =
            FiniteMeasure::new(nu).map_err(|e| CliError::config("params.nu", e.to_string()))?;
        let radius = p.f64("box_radius")?.unwrap_or(2.0);
        let count = p.usize("box_count")?.unwrap_or(41);
        let axis = Axis::new(-radius, radius, count)
            .map_err(|e| CliError::config("params.box_radius", e.to_string()))?;
        let est = dynsys::lambda_conjugate_numeric(&sys, &nu, &vec![axis; sys.states()])
            .map_err(CliError::domain)?;
        json["lambda_star"] = json!({
            "value": json_real(est.value),
            "box_radius": json_real(est.box_radius),
            "infinite": est.infinite,
            "exact": json_ext(dynsys::lambda_star_exact(&sys, &nu)),
        });
        json["tolerances"]["box_step"] = json_real(axis.step());
    }
    if let Some(n) = p.usize("N")? {
        let c = p.coeffs(n + 1)?;
        let (via_matrix, via_scalar) =
            dynsys::operator_series_radius(&c, &sys, &phi, n).map_err(CliError::domain)?;
        json["operator_series"] = json!({ "N": n, "via_matrix": json_real(via_matrix), "via_scalar": json_real(via_scalar) });
    }

    let mut csv = csv_row(&[
        "cycle".into(),
        "length".into(),
        "states".into(),
        "average".into(),
    ]);
    for (i, cyc) in sys.cycles().iter().enumerate() {
        let mean = cyc.iter().map(|&x| phi.values()[x]).sum::<f64>() / cyc.len() as f64;
        let states = cyc
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        csv.push_str(&csv_row(&[
            i.to_string(),
            cyc.len().to_string(),
            states,
            text(mean),
        ]));
    }
    Ok(Outcome { json, csv })
}

// ---------------------------------------------------------------- verify

/// `(c, system, φ, N, grids)` of a verification scenario.
type VerifyInput = (
    CoefficientSeq,
    FiniteDynSystem,
    WeightFunction,
    usize,
    Option<VerifyGrids>,
);

/// Named verification scenarios.
pub fn verify_preset(name: &str) -> Option<VerifyInput> {
    match name {
        "theorem-2cycle" => Some((
            CoefficientSeq::zeros(61),
            FiniteDynSystem::cycle(2),
            WeightFunction::constant(-std::f64::consts::LN_2, 2),
            60,
            None,
        )),
        "theorem-lowdim" => {
            let c_axis = Axis::new(-4.0, 4.0, 161).expect("valid axis");
            // λ = 0 is outside the domain; the last node is skipped by the sweep
            let phi_axis = Axis::new(-3.0, 0.0, 61).expect("valid axis");
            Some((
                CoefficientSeq::zeros(2),
                FiniteDynSystem::identity(1),
                WeightFunction::new(vec![-1.0]).expect("finite"),
                1,
                Some(VerifyGrids {
                    c_axes: vec![c_axis; 2],
                    phi_axes: vec![phi_axis],
                }),
            ))
        }
        _ => None,
    }
}

fn run_verify(p: &Params, seed: u64) -> Result<Outcome, CliError> {
    let (c, sys, phi, n, grids) = match p.preset()? {
        Some(name) => verify_preset(name).ok_or_else(|| unknown_preset(name))?,
        None => {
            let sys = p.system()?;
            let phi = p.phi()?;
            let n = p.require("N", p.usize("N")?)?;
            let c = p.coeffs(n + 1)?;
            let grids = match (p.axes("c_axes")?, p.axes("phi_axes")?) {
                (Some(c_axes), Some(phi_axes)) => Some(VerifyGrids { c_axes, phi_axes }),
                (None, None) => None,
                (None, Some(_)) => return Err(CliError::config("params.c_axes", "missing")),
                (Some(_), None) => return Err(CliError::config("params.phi_axes", "missing")),
            };
            (c, sys, phi, n, grids)
        }
    };
    let report = theorem::verify_hat_conjugacy(&c, &sys, &phi, n, grids.as_ref(), seed)
        .map_err(CliError::domain)?;
    let mut json = report.to_json();
    if let Some(g) = &grids {
        json["tolerances"]["c_step"] =
            Value::Array(g.c_axes.iter().map(|a| json_real(a.step())).collect());
        json["tolerances"]["phi_step"] =
            Value::Array(g.phi_axes.iter().map(|a| json_real(a.step())).collect());
    }
    json["seed"] = json!(seed);
    let mut csv = csv_row(&[
        "kind".into(),
        "mean_index".into(),
        "hat_tau".into(),
        "value".into(),
    ]);
    for probe in &report.probes {
        let kind = match probe.kind {
            theorem::ProbeKind::FenchelYoung => "fenchel_young",
            theorem::ProbeKind::BruteForce => "bruteforce",
        };
        csv.push_str(&csv_row(&[
            kind.into(),
            text(probe.mean),
            text(probe.hat_tau),
            text(probe.value),
        ]));
    }
    Ok(Outcome { json, csv })
}

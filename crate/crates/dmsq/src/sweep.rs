//! Grid sweeps over configuration parameters, threshold search and export.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use dmsq_core::analysis::{evaluate, ModeSqueezing};
use dmsq_core::model::validate_config;
use dmsq_core::{Mode, Quadrature, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::params::{ParamError, ParamPath};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep needs at least one axis")]
    EmptyAxes,
    #[error("sweeps support one or two axes, got {0}")]
    TooManyAxes(usize),
    #[error("axis `{0}` has an empty grid")]
    EmptyGrid(String),
    #[error("axis `{0}` contains a non-finite value")]
    NonFiniteGrid(String),
    #[error("{0}")]
    BadGrid(String),
    #[error("unknown output `{0}` (expected a mode label such as b1 or a)")]
    UnknownOutput(String),
    #[error("output mode `{0}` does not exist in a {1}-mode system")]
    OutputOutOfRange(Mode, usize),
    #[error("unknown report field `{0}` (expected S_X_<mode>, S_Y_<mode>, var_X_<mode>, var_Y_<mode> or margin)")]
    UnknownField(String),
    #[error("threshold search needs a single-axis sweep, got {0} axes")]
    NotSingleAxis(usize),
    #[error("`{field}` does not cross {target} on the grid span")]
    NoSignChange { field: String, target: f64 },
    #[error("`{field}` is undefined at {path}={value} (unstable point) during bisection")]
    UndefinedDuringBisection {
        field: String,
        path: String,
        value: f64,
    },
    #[error("stability does not change along the grid span")]
    NoStabilityChange,
    #[error("at grid point {point}: {source}")]
    Point {
        point: String,
        source: dmsq_core::Error,
    },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// A swept parameter and its grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub path: ParamPath,
    pub values: Vec<f64>,
    /// Bisection between grid points is geometric for log axes.
    pub scale: Scale,
}

impl Axis {
    pub fn grid(
        path: ParamPath,
        start: f64,
        stop: f64,
        count: usize,
        scale: Scale,
    ) -> Result<Self, SweepError> {
        if count == 0 {
            return Err(SweepError::EmptyGrid(path.to_string()));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(SweepError::NonFiniteGrid(path.to_string()));
        }
        if scale == Scale::Log && (start <= 0.0 || stop <= 0.0) {
            return Err(SweepError::BadGrid(format!(
                "log axis `{path}` needs positive bounds, got [{start}, {stop}]"
            )));
        }
        let (a, b) = match scale {
            Scale::Linear => (start, stop),
            Scale::Log => (start.log10(), stop.log10()),
        };
        let values = (0..count)
            .map(|i| {
                let t = if count == 1 {
                    a
                } else if i == count - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (count - 1) as f64
                };
                match scale {
                    Scale::Linear => t,
                    Scale::Log => 10f64.powf(t),
                }
            })
            .collect::<Vec<_>>();
        let mut axis = Axis {
            path,
            values,
            scale,
        };
        if scale == Scale::Log {
            // pin the endpoints exactly
            axis.values[0] = start;
            axis.values[count - 1] = stop;
        }
        Ok(axis)
    }

    pub fn values(path: ParamPath, values: Vec<f64>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::EmptyGrid(path.to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SweepError::NonFiniteGrid(path.to_string()));
        }
        Ok(Axis {
            path,
            values,
            scale: Scale::Linear,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub axes: Vec<Axis>,
    pub outputs: Vec<Mode>,
    pub preset: Option<String>,
}

impl SweepSpec {
    pub fn new(base: SystemConfig, axes: Vec<Axis>, outputs: Vec<Mode>) -> Self {
        SweepSpec {
            base,
            axes,
            outputs,
            preset: None,
        }
    }

    pub fn check(&self) -> Result<(), SweepError> {
        match self.axes.len() {
            0 => return Err(SweepError::EmptyAxes),
            1 | 2 => {}
            n => return Err(SweepError::TooManyAxes(n)),
        }
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(SweepError::EmptyGrid(axis.path.to_string()));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(SweepError::NonFiniteGrid(axis.path.to_string()));
            }
            // resolve the path against the base config once
            axis.path.apply(&mut self.base.clone(), axis.values[0])?;
        }
        for m in &self.outputs {
            if let Mode::Mechanical(i) = m {
                if *i >= self.base.n_mech {
                    return Err(SweepError::OutputOutOfRange(*m, self.base.n_mech));
                }
            }
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Swept values of grid point `k` in row-major order (first axis slowest).
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[i] = axis.values[k % n];
            k /= n;
        }
        out
    }

    pub fn axis_names(&self) -> Vec<String> {
        self.axes.iter().map(|a| a.path.to_string()).collect()
    }

    fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "base": self.base,
            "axes": self.axes.iter().map(|a| serde_json::json!({
                "path": a.path.to_string(),
                "values": a.values,
            })).collect::<Vec<_>>(),
            "outputs": self.outputs.iter().map(|m| m.label()).collect::<Vec<_>>(),
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub stable: bool,
    /// Largest real part of the drift eigenvalues.
    pub margin: f64,
    /// One entry per requested output; empty for unstable points.
    pub modes: Vec<ModeSqueezing>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub config_hash: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub preset: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis_names: Vec<String>,
    pub outputs: Vec<Mode>,
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

fn describe_point(spec: &SweepSpec, params: &[f64]) -> String {
    spec.axes
        .iter()
        .zip(params)
        .map(|(a, v)| format!("{}={v}", a.path))
        .collect::<Vec<_>>()
        .join(", ")
}

fn evaluate_point(spec: &SweepSpec, params: &[f64]) -> Result<SweepRow, SweepError> {
    let mut cfg = spec.base.clone();
    for (axis, v) in spec.axes.iter().zip(params) {
        axis.path.apply(&mut cfg, *v)?;
    }
    let wrap = |source| SweepError::Point {
        point: describe_point(spec, params),
        source,
    };
    let cfg = validate_config(cfg).map_err(wrap)?;
    let state = evaluate(&cfg).map_err(wrap)?;
    let modes = match &state.squeezing {
        Some(report) => spec
            .outputs
            .iter()
            .map(|m| {
                report
                    .mode(*m)
                    .cloned()
                    .expect("output checked against n_mech")
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(SweepRow {
        params: params.to_vec(),
        stable: state.stability.stable,
        margin: state.stability.margin,
        modes,
    })
}

/// Worker count from `DMSQ_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("DMSQ_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    run_sweep_with_threads(spec, threads_from_env())
}

/// Runs every grid point, in parallel when more than one worker is allowed.
/// Rows come back in row-major grid order whatever the worker count.
pub fn run_sweep_with_threads(
    spec: &SweepSpec,
    threads: Option<usize>,
) -> Result<SweepResult, SweepError> {
    spec.check()?;
    let points: Vec<Vec<f64>> = (0..spec.n_points()).map(|k| spec.point(k)).collect();
    let compute = || -> Result<Vec<SweepRow>, SweepError> {
        points.par_iter().map(|p| evaluate_point(spec, p)).collect()
    };
    let rows = match threads {
        Some(1) => points
            .iter()
            .map(|p| evaluate_point(spec, p))
            .collect::<Result<_, _>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SweepError::BadGrid(format!("cannot start worker pool: {e}")))?
            .install(compute)?,
        None => compute()?,
    };
    Ok(SweepResult {
        axis_names: spec.axis_names(),
        outputs: spec.outputs.clone(),
        rows,
        metadata: SweepMetadata {
            config_hash: spec.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            preset: spec.preset.clone(),
        },
    })
}

/// A scalar read off one sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportField {
    Squeezing(Mode, Quadrature),
    Variance(Mode, Quadrature),
    /// Largest real part of the drift eigenvalues; defined at unstable points too.
    Margin,
}

impl FromStr for ReportField {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, SweepError> {
        if s == "margin" {
            return Ok(ReportField::Margin);
        }
        let unknown = || SweepError::UnknownField(s.to_string());
        let (kind, rest) = s.split_once('_').ok_or_else(unknown)?;
        let (quad, mode) = rest.split_once('_').ok_or_else(unknown)?;
        let quad = match quad {
            "X" => Quadrature::X,
            "Y" => Quadrature::Y,
            _ => return Err(unknown()),
        };
        let mode = Mode::from_label(mode).ok_or_else(unknown)?;
        match kind {
            "S" => Ok(ReportField::Squeezing(mode, quad)),
            "var" => Ok(ReportField::Variance(mode, quad)),
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for ReportField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportField::Squeezing(m, q) => write!(f, "S_{}_{}", q.label(), m.label()),
            ReportField::Variance(m, q) => write!(f, "var_{}_{}", q.label(), m.label()),
            ReportField::Margin => f.write_str("margin"),
        }
    }
}

impl ReportField {
    fn mode(&self) -> Option<Mode> {
        match self {
            ReportField::Squeezing(m, _) | ReportField::Variance(m, _) => Some(*m),
            ReportField::Margin => None,
        }
    }

    /// Value on a row of a sweep whose outputs are `outputs`; `None` when the
    /// point is unstable or the mode was not requested.
    pub fn read(&self, outputs: &[Mode], row: &SweepRow) -> Option<f64> {
        match self {
            ReportField::Margin => Some(row.margin),
            ReportField::Squeezing(m, q) | ReportField::Variance(m, q) => {
                let i = outputs.iter().position(|o| o == m)?;
                let ms = row.modes.get(i)?;
                Some(match self {
                    ReportField::Squeezing(..) => ms.squeezing_db(*q),
                    _ => ms.variance(*q),
                })
            }
        }
    }
}

fn midpoint(scale: Scale, lo: f64, hi: f64) -> f64 {
    match scale {
        Scale::Log if lo > 0.0 && hi > 0.0 => (lo * hi).sqrt(),
        _ => 0.5 * (lo + hi),
    }
}

fn converged(lo: f64, hi: f64, rel_tol: f64) -> bool {
    (hi - lo).abs() <= rel_tol * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE)
}

fn single_axis(spec: &SweepSpec) -> Result<&Axis, SweepError> {
    spec.check()?;
    match spec.axes.as_slice() {
        [axis] => Ok(axis),
        axes => Err(SweepError::NotSingleAxis(axes.len())),
    }
}

/// Parameter value where `field` crosses `target`, bracketed by the first
/// sign change on the grid and refined by bisection to `rel_tol`.
pub fn find_threshold(
    spec: &SweepSpec,
    field: ReportField,
    target: f64,
    rel_tol: f64,
) -> Result<f64, SweepError> {
    let axis = single_axis(spec)?;
    let mut spec = spec.clone();
    if let Some(m) = field.mode() {
        if !spec.outputs.contains(&m) {
            spec.outputs.push(m);
        }
        spec.check()?;
    }
    let result = run_sweep(&spec)?;
    let g: Vec<Option<f64>> = result
        .rows
        .iter()
        .map(|r| field.read(&spec.outputs, r).map(|v| v - target))
        .collect();
    let no_change = || SweepError::NoSignChange {
        field: field.to_string(),
        target,
    };
    let k = (0..g.len().saturating_sub(1))
        .find(|&k| match (g[k], g[k + 1]) {
            (Some(a), Some(b)) => a == 0.0 || (a < 0.0) != (b < 0.0),
            _ => false,
        })
        .ok_or_else(no_change)?;
    if g[k] == Some(0.0) {
        return Ok(axis.values[k]);
    }
    refine_crossing(
        &spec,
        field,
        target,
        axis.values[k],
        axis.values[k + 1],
        rel_tol,
    )
}

/// Bisects `[lo, hi]` (grid values of the single axis of `spec`, with
/// `field - target` of opposite signs at the ends) down to `rel_tol`.
pub fn refine_crossing(
    spec: &SweepSpec,
    field: ReportField,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Result<f64, SweepError> {
    let axis = single_axis(spec)?;
    let mut spec = spec.clone();
    if let Some(m) = field.mode() {
        if !spec.outputs.contains(&m) {
            spec.outputs.push(m);
        }
    }
    let eval = |x: f64| -> Result<f64, SweepError> {
        let row = evaluate_point(&spec, &[x])?;
        Ok(field
            .read(&spec.outputs, &row)
            .ok_or_else(|| SweepError::UndefinedDuringBisection {
                field: field.to_string(),
                path: axis.path.to_string(),
                value: x,
            })?
            - target)
    };
    let mut g_lo = eval(lo)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    while !converged(lo, hi, rel_tol) {
        let mid = midpoint(axis.scale, lo, hi);
        if mid == lo || mid == hi {
            break;
        }
        let g_mid = eval(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if (g_mid < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(midpoint(axis.scale, lo, hi))
}

/// Parameter value where the stability verdict flips, bracketed by the first
/// flip on the grid and refined by bisection to `rel_tol`.
pub fn find_stability_boundary(spec: &SweepSpec, rel_tol: f64) -> Result<f64, SweepError> {
    let axis = single_axis(spec)?;
    let mut spec = spec.clone();
    spec.outputs.clear();
    let result = run_sweep(&spec)?;
    let k = result
        .rows
        .windows(2)
        .position(|w| w[0].stable != w[1].stable)
        .ok_or(SweepError::NoStabilityChange)?;
    let stable_lo = result.rows[k].stable;
    let (mut lo, mut hi) = (axis.values[k], axis.values[k + 1]);
    while !converged(lo, hi, rel_tol) {
        let mid = midpoint(axis.scale, lo, hi);
        if mid == lo || mid == hi {
            break;
        }
        if evaluate_point(&spec, &[mid])?.stable == stable_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(midpoint(axis.scale, lo, hi))
}

/// `%.{sig}g` formatting, independent of locale.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mant, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const CSV_SIGNIFICANT_DIGITS: usize = 12;

/// Column names: swept paths, `stable`, then four columns per output mode.
pub fn csv_header(axis_names: &[String], outputs: &[Mode]) -> Vec<String> {
    let mut header: Vec<String> = axis_names.to_vec();
    header.push("stable".into());
    for m in outputs {
        let l = m.label();
        header.extend([
            format!("S_X_{l}"),
            format!("S_Y_{l}"),
            format!("var_X_{l}"),
            format!("var_Y_{l}"),
        ]);
    }
    header
}

fn row_cells(outputs: &[Mode], row: &SweepRow) -> Vec<Option<f64>> {
    let mut cells: Vec<Option<f64>> = row.params.iter().map(|v| Some(*v)).collect();
    for i in 0..outputs.len() {
        match row.modes.get(i) {
            Some(m) => cells.extend([Some(m.s_x_db), Some(m.s_y_db), Some(m.var_x), Some(m.var_y)]),
            None => cells.extend([None; 4]),
        }
    }
    cells
}

pub fn export_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(&result.axis_names, &result.outputs))?;
    let n_params = result.axis_names.len();
    for row in &result.rows {
        let cells = row_cells(&result.outputs, row);
        let mut record: Vec<String> = Vec::with_capacity(cells.len() + 1);
        for (i, c) in cells.iter().enumerate() {
            if i == n_params {
                record.push(row.stable.to_string());
            }
            record.push(
                c.map(|v| format_sig(v, CSV_SIGNIFICANT_DIGITS))
                    .unwrap_or_default(),
            );
        }
        if cells.len() == n_params {
            record.push(row.stable.to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per grid point with the CSV column names as keys, plus a
/// `metadata` object.
pub fn export_json<W: Write>(result: &SweepResult, out: W) -> Result<(), SweepError> {
    let header = csv_header(&result.axis_names, &result.outputs);
    let n_params = result.axis_names.len();
    let rows: Vec<serde_json::Value> = result
        .rows
        .iter()
        .map(|row| {
            let mut obj = serde_json::Map::new();
            let cells = row_cells(&result.outputs, row);
            let mut names = header.iter();
            for (i, c) in cells.iter().enumerate() {
                if i == n_params {
                    obj.insert(names.next().unwrap().clone(), row.stable.into());
                }
                obj.insert(names.next().unwrap().clone(), (*c).into());
            }
            if cells.len() == n_params {
                obj.insert(names.next().unwrap().clone(), row.stable.into());
            }
            serde_json::Value::Object(obj)
        })
        .collect();
    let doc = serde_json::json!({
        "metadata": result.metadata,
        "rows": rows,
    });
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

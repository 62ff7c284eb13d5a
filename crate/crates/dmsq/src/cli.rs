//! The `dmsq` command-line front end.
//!
//! Exit codes: 0 on success, 2 when the configuration is valid but its
//! steady state is unstable, 1 for any input or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmsq_core::analysis::{
    dark_mode_census, evaluate, mechanical_normal_modes, physicality_check,
    NormalModeDecomposition, SteadyState, DARK_MODE_TOL,
};
use dmsq_core::model::{build_drift_matrix, validate_config};
use dmsq_core::steady_state::{is_stable, routh_hurwitz_check, MAX_ROUTH_HURWITZ_DIM};
use dmsq_core::{Mode, ValidatedConfig};
use serde_json::json;

use crate::config::{self, ConfigError, LoadedConfig};
use crate::params::Override;
use crate::presets::{figure_preset, Panel};
use crate::sweep::{
    export_csv, export_json, format_sig, refine_crossing, run_sweep, ReportField, SweepError,
    SweepMetadata, SweepResult, SweepRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;

/// Relative tolerance for refining zero crossings in figure summaries.
const CROSSING_REL_TOL: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "dmsq",
    version,
    about = "Steady-state squeezing in multimode optomechanics"
)]
pub struct Cli {
    /// Print only the requested data (no notes, advisories or summaries).
    #[arg(long, global = true)]
    pub quiet: bool,
    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML or JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a parameter after parsing, e.g. `--set hopping[0].phase=pi/2`.
    #[arg(long = "set", value_name = "PATH=VALUE", value_parser = parse_override)]
    pub overrides: Vec<Override>,
}

fn parse_override(s: &str) -> Result<Override, String> {
    s.parse()
        .map_err(|e: crate::params::ParamError| e.to_string())
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state of one configuration: stability, variances, squeezing, dark modes.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the [sweep] section of a configuration.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a figure preset (fig2 .. fig6, or a single panel such as fig5a-dmb).
    Figure {
        name: String,
        /// Output file for a single panel, or directory for a figure group.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Drift-matrix eigenvalues, stability margin and verdict.
    Stability {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Mechanical normal modes, effective couplings and dark modes.
    NormalModes {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration: {0}")]
    Invalid(#[from] dmsq_core::Error),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Preset(#[from] crate::presets::UnknownPreset),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("format `{0}` is not supported here")]
    Format(&'static str),
}

struct Ctx {
    quiet: bool,
    verbose: u8,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn debug(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 && !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Ctx {
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    match run(&ctx, cli.command) {
        Ok(code) => code,
        // Downstream reader closed early (`| head`).
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn run(ctx: &Ctx, command: Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate { config, output } => simulate(ctx, &config, &output),
        Command::Sweep { config, output } => sweep(ctx, &config, &output),
        Command::Figure { name, out, format } => figure(ctx, &name, out.as_deref(), format),
        Command::Stability { config, output } => stability(ctx, &config, &output),
        Command::NormalModes { config, output } => normal_modes(ctx, &config, &output),
    }
}

fn load(ctx: &Ctx, args: &ConfigArgs) -> Result<(LoadedConfig, ValidatedConfig), CliError> {
    let loaded = config::load(&args.config, &args.overrides)?;
    let validated = validate_config(loaded.system.clone())?;
    for a in validated.advisories() {
        ctx.note(format!("advisory: {a}"));
    }
    Ok((loaded, validated))
}

/// Writes to `--out` when given, standard output otherwise.
fn emit(
    out: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|source| CliError::Write {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            let file = fs::File::create(path).map_err(|source| CliError::Write {
                path: path.to_path_buf(),
                source,
            })?;
            let mut w = io::BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn format_or_default(output: &OutputArgs, default: OutputFormat) -> OutputFormat {
    output.format.unwrap_or_else(|| {
        match output
            .out
            .as_deref()
            .and_then(|p| p.extension())
            .and_then(|e| e.to_str())
        {
            Some("json") => OutputFormat::Json,
            Some("csv") => OutputFormat::Csv,
            _ => default,
        }
    })
}

fn g(x: f64) -> String {
    format_sig(x, 6)
}

fn single_point_result(cfg: &ValidatedConfig, state: &SteadyState) -> SweepResult {
    let outputs = Mode::all(cfg.n_mech);
    SweepResult {
        axis_names: Vec::new(),
        outputs: outputs.clone(),
        rows: vec![SweepRow {
            params: Vec::new(),
            stable: state.stability.stable,
            margin: state.stability.margin,
            modes: state
                .squeezing
                .as_ref()
                .map(|s| s.modes.clone())
                .unwrap_or_default(),
        }],
        metadata: SweepMetadata {
            config_hash: String::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: 0,
            preset: None,
        },
    }
}

fn census_json(d: &NormalModeDecomposition) -> serde_json::Value {
    match dark_mode_census(d, DARK_MODE_TOL) {
        Ok(list) => json!(list
            .iter()
            .map(|j| format!("B{}", j + 1))
            .collect::<Vec<_>>()),
        Err(_) => serde_json::Value::Null,
    }
}

fn census_text(d: &NormalModeDecomposition) -> String {
    match dark_mode_census(d, DARK_MODE_TOL) {
        Ok(list) if list.is_empty() => "none".into(),
        Ok(list) => list
            .iter()
            .map(|&j| format!("B{} (eps = {})", j + 1, g(d.frequencies[j])))
            .collect::<Vec<_>>()
            .join(", "),
        Err(_) => "undefined (every optomechanical coupling is zero)".into(),
    }
}

fn simulate(ctx: &Ctx, args: &ConfigArgs, output: &OutputArgs) -> Result<i32, CliError> {
    let (loaded, cfg) = load(ctx, args)?;
    let state = evaluate(&cfg)?;
    let modes = mechanical_normal_modes(&cfg);
    let physicality = state.covariance.as_ref().map(physicality_check);
    let code = if state.stability.stable {
        EXIT_OK
    } else {
        EXIT_UNSTABLE
    };
    match format_or_default(output, OutputFormat::Text) {
        OutputFormat::Csv => emit(output.out.as_deref(), |w| {
            Ok(export_csv(&single_point_result(&cfg, &state), w)?)
        })?,
        OutputFormat::Json => {
            let report = json!({
                "stable": state.stability.stable,
                "margin": state.stability.margin,
                "unit": loaded.unit_label(),
                "advisories": cfg.advisories().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "modes": state.squeezing.as_ref().map(|s| s.modes.iter().map(|m| json!({
                    "mode": m.mode.label(),
                    "var_X": m.var_x,
                    "var_Y": m.var_y,
                    "S_X": m.s_x_db,
                    "S_Y": m.s_y_db,
                    "cooperativity": m.cooperativity,
                })).collect::<Vec<_>>()),
                "dark_modes": census_json(&modes),
                "physicality": physicality,
            });
            emit(output.out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &report).map_err(SweepError::from)?;
                writeln!(w)?;
                Ok(())
            })?;
        }
        OutputFormat::Text => emit(output.out.as_deref(), |w| {
            writeln!(w, "stable: {}", state.stability.stable)?;
            writeln!(
                w,
                "margin: {} {}",
                g(state.stability.margin),
                loaded.unit_label()
            )?;
            match &state.squeezing {
                None => writeln!(w, "squeezing: not computed (unstable steady state)")?,
                Some(report) => {
                    writeln!(
                        w,
                        "{:<5} {:>14} {:>14} {:>12} {:>12} {:>12}",
                        "mode", "var_X", "var_Y", "S_X [dB]", "S_Y [dB]", "C"
                    )?;
                    for m in &report.modes {
                        writeln!(
                            w,
                            "{:<5} {:>14} {:>14} {:>12} {:>12} {:>12}",
                            m.mode.label(),
                            g(m.var_x),
                            g(m.var_y),
                            g(m.s_x_db),
                            g(m.s_y_db),
                            m.cooperativity.map(g).unwrap_or_else(|| "-".into()),
                        )?;
                    }
                }
            }
            writeln!(w, "dark modes: {}", census_text(&modes))?;
            if let Some(p) = &physicality {
                writeln!(
                    w,
                    "physicality: {} (min symplectic eigenvalue {}, worst product margin {}, worst Robertson-Schrodinger margin {})",
                    if p.passed { "passed" } else { "FAILED" },
                    g(p.min_symplectic_eigenvalue),
                    g(p.worst_product_margin),
                    g(p.worst_robertson_schrodinger_margin),
                )?;
            }
            Ok(())
        })?,
    }
    if code == EXIT_UNSTABLE {
        ctx.note("note: steady state is unstable");
    }
    Ok(code)
}

fn write_result(
    result: &SweepResult,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), CliError> {
    match format {
        OutputFormat::Csv => emit(out, |w| Ok(export_csv(result, w)?)),
        OutputFormat::Json => emit(out, |w| Ok(export_json(result, w)?)),
        OutputFormat::Text => Err(CliError::Format("text")),
    }
}

fn sweep(ctx: &Ctx, args: &ConfigArgs, output: &OutputArgs) -> Result<i32, CliError> {
    let loaded = config::load(&args.config, &args.overrides)?;
    // validate the base point up front so field errors name the config
    validate_config(loaded.system.clone())?;
    let spec = loaded.sweep_spec()?;
    let result = run_sweep(&spec)?;
    ctx.debug(format!(
        "config hash {} | version {} | {} points",
        result.metadata.config_hash,
        result.metadata.version,
        result.rows.len()
    ));
    let unstable = result.rows.iter().filter(|r| !r.stable).count();
    if unstable > 0 {
        ctx.note(format!(
            "note: {unstable} of {} grid points are unstable",
            result.rows.len()
        ));
    }
    write_result(
        &result,
        format_or_default(output, OutputFormat::Csv),
        output.out.as_deref(),
    )?;
    Ok(EXIT_OK)
}

/// Zero crossing of one curve, refined by bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub at: f64,
    pub rising: bool,
}

/// Largest value of `field` on the grid with its grid point, and the refined
/// Largest value on a curve and the grid point where it occurs.
pub type CurveMax = Option<(f64, Vec<f64>)>;

/// 0 dB crossings along a single-axis panel.
pub fn curve_summary(
    panel: &Panel,
    result: &SweepResult,
    field: ReportField,
) -> Result<(CurveMax, Vec<Crossing>), SweepError> {
    let spec = &panel.spec;
    let values: Vec<Option<f64>> = result
        .rows
        .iter()
        .map(|r| field.read(&result.outputs, r))
        .collect();
    let max = values
        .iter()
        .zip(&result.rows)
        .filter_map(|(v, r)| v.map(|v| (v, r.params.clone())))
        .fold(None, |best: CurveMax, (v, p)| match best {
            Some((b, _)) if b >= v => best,
            _ => Some((v, p)),
        });
    let mut crossings = Vec::new();
    if spec.axes.len() == 1 {
        let xs = &spec.axes[0].values;
        for k in 0..values.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (values[k], values[k + 1]) {
                if a != 0.0 && (a < 0.0) != (b < 0.0) {
                    let at = refine_crossing(spec, field, 0.0, xs[k], xs[k + 1], CROSSING_REL_TOL)?;
                    crossings.push(Crossing { at, rising: b > a });
                }
            }
        }
    }
    Ok((max, crossings))
}

fn figure(
    ctx: &Ctx,
    name: &str,
    out: Option<&Path>,
    format: Option<OutputFormat>,
) -> Result<i32, CliError> {
    let panels = figure_preset(name)?;
    let format = format.unwrap_or(
        match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => OutputFormat::Json,
            _ => OutputFormat::Csv,
        },
    );
    let ext = match format {
        OutputFormat::Json => "json",
        OutputFormat::Csv => "csv",
        OutputFormat::Text => return Err(CliError::Format("text")),
    };
    let grouped = panels.len() > 1 || out.is_some_and(|p| p.is_dir());
    let mut dmu_dmb: Vec<(String, f64)> = Vec::new();
    for panel in &panels {
        let result = run_sweep(&panel.spec)?;
        match (out, grouped) {
            (Some(dir), true) => {
                let path = dir.join(format!("{}.{ext}", panel.name));
                write_result(&result, format, Some(&path))?;
                ctx.note(format!("wrote {}", path.display()));
            }
            (Some(file), false) => write_result(&result, format, Some(file))?,
            (None, false) => write_result(&result, format, None)?,
            (None, true) => {}
        }
        if ctx.quiet {
            continue;
        }
        let axes = panel.spec.axis_names().join(", ");
        let unstable = result.rows.iter().filter(|r| !r.stable).count();
        eprintln!(
            "[{}] {} ({} points over {axes}{})",
            panel.name,
            panel.title,
            result.rows.len(),
            if unstable > 0 {
                format!(", {unstable} unstable")
            } else {
                String::new()
            }
        );
        for mode in &panel.spec.outputs {
            let field = ReportField::Squeezing(*mode, panel.quadrature);
            let (max, crossings) = curve_summary(panel, &result, field)?;
            let max = match max {
                Some((v, at)) => format!(
                    "max {} dB at {}",
                    g(v),
                    at.iter().map(|x| g(*x)).collect::<Vec<_>>().join(", ")
                ),
                None => "no stable points".into(),
            };
            let cross = if panel.spec.axes.len() != 1 {
                String::new()
            } else if crossings.is_empty() {
                "; no 0 dB crossing".into()
            } else {
                format!(
                    "; 0 dB crossings at {}",
                    crossings
                        .iter()
                        .map(|c| format!(
                            "{} ({})",
                            g(c.at),
                            if c.rising { "rising" } else { "falling" }
                        ))
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            };
            eprintln!("  {field}: {max}{cross}");
            if panel.name.starts_with("fig5a") && *mode == Mode::Mechanical(0) {
                if let Some(c) = crossings.first() {
                    dmu_dmb.push((panel.name.clone(), c.at));
                }
            }
        }
    }
    if out.is_none() && panels.len() > 1 {
        ctx.note("note: pass --out <dir> to write one file per panel");
    }
    let lookup = |suffix: &str| {
        dmu_dmb
            .iter()
            .find(|(n, _)| n.ends_with(suffix))
            .map(|(_, v)| *v)
    };
    if let (Some(u), Some(b)) = (lookup("-dmu"), lookup("-dmb")) {
        ctx.note(format!(
            "thermal threshold for S_Y_b1 = 0 dB: nbar* = {} (dark mode unbroken), {} (broken), ratio {}",
            g(u),
            g(b),
            g(b / u)
        ));
    }
    Ok(EXIT_OK)
}

fn stability(ctx: &Ctx, args: &ConfigArgs, output: &OutputArgs) -> Result<i32, CliError> {
    let (loaded, cfg) = load(ctx, args)?;
    let a = build_drift_matrix(&cfg);
    let report = is_stable(&a)?;
    let rh = if a.dim() <= MAX_ROUTH_HURWITZ_DIM {
        Some(routh_hurwitz_check(&a)?)
    } else {
        None
    };
    match format_or_default(output, OutputFormat::Text) {
        OutputFormat::Json => {
            let doc = json!({
                "stable": report.stable,
                "margin": report.margin,
                "eigenvalues": report.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "routh_hurwitz": rh,
            });
            emit(output.out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &doc).map_err(SweepError::from)?;
                writeln!(w)?;
                Ok(())
            })?;
        }
        OutputFormat::Csv => return Err(CliError::Format("csv")),
        OutputFormat::Text => emit(output.out.as_deref(), |w| {
            writeln!(
                w,
                "verdict: {}",
                if report.stable { "stable" } else { "unstable" }
            )?;
            writeln!(w, "margin: {} {}", g(report.margin), loaded.unit_label())?;
            match rh {
                Some(v) => writeln!(
                    w,
                    "routh-hurwitz: {} ({})",
                    if v { "stable" } else { "unstable" },
                    if v == report.stable {
                        "agrees"
                    } else {
                        "DISAGREES"
                    }
                )?,
                None => writeln!(
                    w,
                    "routh-hurwitz: skipped (dimension {} > {MAX_ROUTH_HURWITZ_DIM})",
                    a.dim()
                )?,
            }
            writeln!(w, "eigenvalues:")?;
            for z in &report.eigenvalues {
                writeln!(w, "  {:>14} {:>+14}i", g(z.re), g(z.im))?;
            }
            Ok(())
        })?,
    }
    Ok(if report.stable {
        EXIT_OK
    } else {
        EXIT_UNSTABLE
    })
}

fn normal_modes(ctx: &Ctx, args: &ConfigArgs, output: &OutputArgs) -> Result<i32, CliError> {
    let (_, cfg) = load(ctx, args)?;
    let d = mechanical_normal_modes(&cfg);
    let census: Option<Vec<usize>> = dark_mode_census(&d, DARK_MODE_TOL).ok();
    match format_or_default(output, OutputFormat::Text) {
        OutputFormat::Json => {
            let doc = json!({
                "modes": (0..d.n_modes()).map(|j| json!({
                    "mode": format!("B{}", j + 1),
                    "frequency": d.frequencies[j],
                    "coupling": [d.couplings[j].re, d.couplings[j].im],
                    "coupling_abs": d.couplings[j].norm(),
                    "dark": census.as_ref().map(|c| c.contains(&j)),
                })).collect::<Vec<_>>(),
                "dark_modes": census_json(&d),
                "two_mode": d.two_mode.map(|t| json!({
                    "f": t.f, "h": t.h, "omega_f": t.omega_f,
                    "g_plus_abs": t.g_plus.norm(), "g_minus_abs": t.g_minus.norm(),
                })),
            });
            emit(output.out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &doc).map_err(SweepError::from)?;
                writeln!(w)?;
                Ok(())
            })?;
        }
        OutputFormat::Csv => return Err(CliError::Format("csv")),
        OutputFormat::Text => emit(output.out.as_deref(), |w| {
            writeln!(
                w,
                "{:<5} {:>14} {:>14} {:>6}",
                "mode", "eps", "|G~|", "dark"
            )?;
            for j in 0..d.n_modes() {
                let dark = match &census {
                    Some(c) if c.contains(&j) => "yes",
                    Some(_) => "no",
                    None => "-",
                };
                writeln!(
                    w,
                    "{:<5} {:>14} {:>14} {:>6}",
                    format!("B{}", j + 1),
                    g(d.frequencies[j]),
                    g(d.couplings[j].norm()),
                    dark
                )?;
            }
            if let Some(t) = &d.two_mode {
                writeln!(
                    w,
                    "two-mode closed form: f = {}, h = {}, omega_f = {}, |G+| = {}, |G-| = {}",
                    g(t.f),
                    g(t.h),
                    g(t.omega_f),
                    g(t.g_plus.norm()),
                    g(t.g_minus.norm())
                )?;
            }
            writeln!(w, "dark modes: {}", census_text(&d))?;
            Ok(())
        })?,
    }
    Ok(EXIT_OK)
}

//! TOML / JSON configuration files.
//!
//! ```toml
//! unit = "kappa"
//!
//! [cavity]
//! kappa = 1.0
//! opa_gain = 0.45
//! opa_phase = "pi"
//!
//! [[mechanical]]
//! omega = 10.0
//! gamma = 1e-5
//! coupling = 0.1
//! nbar = 10.0
//!
//! [[mechanical]]
//! omega = 10.0
//! gamma = 1e-5
//! coupling = 0.1
//! nbar = 10.0
//!
//! [[hopping]]
//! strength = 0.1
//! phase = "pi/2"
//!
//! [sweep]
//! outputs = ["b1", "b2"]
//! axes = [{ path = "hopping[0].phase", grid = { start = 0, stop = "2pi", count = 101 } }]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use dmsq_core::{Mode, SystemConfig};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

use crate::params::{apply_overrides, parse_value, Override, ParamError, ParamPath};
use crate::sweep::{Axis, Scale, SweepError, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("configuration has no [sweep] section")]
    NoSweep,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

/// A real number written either as a plain number or as a `pi` expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Real(pub f64);

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RealVisitor;

        impl Visitor<'_> for RealVisitor {
            type Value = Real;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or an expression such as \"pi/2\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                parse_value(v).map(Real).map_err(E::custom)
            }
        }

        d.deserialize_any(RealVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    #[serde(default = "one")]
    pub kappa: Real,
    #[serde(default = "zero")]
    pub opa_gain: Real,
    #[serde(default = "zero")]
    pub opa_phase: Real,
}

fn one() -> Real {
    Real(1.0)
}

fn zero() -> Real {
    Real(0.0)
}

impl Default for CavitySection {
    fn default() -> Self {
        CavitySection {
            kappa: one(),
            opa_gain: zero(),
            opa_phase: zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicalSection {
    pub omega: Real,
    pub gamma: Real,
    pub coupling: Real,
    #[serde(default = "zero")]
    pub nbar: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingSection {
    pub strength: Real,
    #[serde(default = "zero")]
    pub phase: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub start: Real,
    pub stop: Real,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Real>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<AxisSection>,
    /// Mode labels; omitted means every mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

/// On-disk layout of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Frequency unit used in labels only; every number is already in it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default)]
    pub cavity: CavitySection,
    pub mechanical: Vec<MechanicalSection>,
    #[serde(default)]
    pub hopping: Vec<HoppingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ConfigFile {
    pub fn system(&self) -> SystemConfig {
        let mech = &self.mechanical;
        SystemConfig {
            n_mech: mech.len(),
            kappa: self.cavity.kappa.0,
            omega: mech.iter().map(|m| m.omega.0).collect(),
            gamma: mech.iter().map(|m| m.gamma.0).collect(),
            coupling: mech.iter().map(|m| m.coupling.0).collect(),
            nbar: mech.iter().map(|m| m.nbar.0).collect(),
            hop_strength: self.hopping.iter().map(|h| h.strength.0).collect(),
            hop_phase: self.hopping.iter().map(|h| h.phase.0).collect(),
            opa_gain: self.cavity.opa_gain.0,
            opa_phase: self.cavity.opa_phase.0,
        }
    }

    pub fn from_system(cfg: &SystemConfig) -> Self {
        ConfigFile {
            unit: None,
            cavity: CavitySection {
                kappa: Real(cfg.kappa),
                opa_gain: Real(cfg.opa_gain),
                opa_phase: Real(cfg.opa_phase),
            },
            mechanical: (0..cfg.omega.len())
                .map(|l| MechanicalSection {
                    omega: Real(cfg.omega[l]),
                    gamma: Real(cfg.gamma.get(l).copied().unwrap_or(f64::NAN)),
                    coupling: Real(cfg.coupling.get(l).copied().unwrap_or(f64::NAN)),
                    nbar: Real(cfg.nbar.get(l).copied().unwrap_or(f64::NAN)),
                })
                .collect(),
            hopping: cfg
                .hop_strength
                .iter()
                .zip(&cfg.hop_phase)
                .map(|(s, p)| HoppingSection {
                    strength: Real(*s),
                    phase: Real(*p),
                })
                .collect(),
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// `.json` files are JSON, anything else is TOML.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

/// A parsed configuration with overrides applied, not yet validated.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub system: SystemConfig,
    pub unit: Option<String>,
    pub sweep: Option<SweepSection>,
}

impl LoadedConfig {
    pub fn unit_label(&self) -> &str {
        self.unit.as_deref().unwrap_or("kappa")
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let section = self.sweep.as_ref().ok_or(ConfigError::NoSweep)?;
        let mut axes = Vec::with_capacity(section.axes.len());
        for a in &section.axes {
            let path: ParamPath = a.path.parse()?;
            let axis = match (&a.grid, &a.values) {
                (Some(g), None) => Axis::grid(path, g.start.0, g.stop.0, g.count, g.scale)?,
                (None, Some(v)) => Axis::values(path, v.iter().map(|r| r.0).collect())?,
                _ => {
                    return Err(SweepError::BadGrid(format!(
                        "axis `{}` needs exactly one of `grid` or `values`",
                        a.path
                    ))
                    .into())
                }
            };
            axes.push(axis);
        }
        let outputs = match &section.outputs {
            None => Mode::all(self.system.n_mech),
            Some(labels) => labels
                .iter()
                .map(|l| Mode::from_label(l).ok_or_else(|| SweepError::UnknownOutput(l.clone())))
                .collect::<Result<_, _>>()?,
        };
        let spec = SweepSpec {
            base: self.system.clone(),
            axes,
            outputs,
            preset: section.preset.clone(),
        };
        spec.check()?;
        Ok(spec)
    }
}

pub fn parse_str(
    text: &str,
    format: Format,
    origin: &Path,
    overrides: &[Override],
) -> Result<LoadedConfig, ConfigError> {
    let file: ConfigFile = match format {
        Format::Toml => toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?,
        Format::Json => serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?,
    };
    let mut system = file.system();
    apply_overrides(&mut system, overrides)?;
    Ok(LoadedConfig {
        system,
        unit: file.unit,
        sweep: file.sweep,
    })
}

pub fn load(path: &Path, overrides: &[Override]) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text, Format::from_path(path), path, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FIG4: &str = r#"
[cavity]
opa_gain = 0.45
opa_phase = "pi"

[[mechanical]]
omega = 10
gamma = 1e-5
coupling = 0.1
nbar = 10

[[mechanical]]
omega = 10
gamma = 1e-5
coupling = 0.1
nbar = 10

[[hopping]]
strength = 0.1
phase = "pi/2"
"#;

    #[test]
    fn toml_round_trip() {
        let c = parse_str(FIG4, Format::Toml, Path::new("x.toml"), &[]).unwrap();
        assert_eq!(c.system.n_mech, 2);
        assert_eq!(c.system.kappa, 1.0);
        assert_eq!(c.system.opa_phase, PI);
        assert_eq!(c.system.hop_phase, vec![PI / 2.0]);
        let json = serde_json::to_string(&ConfigFile::from_system(&c.system)).unwrap();
        let back = parse_str(&json, Format::Json, Path::new("x.json"), &[]).unwrap();
        assert_eq!(back.system, c.system);
    }

    #[test]
    fn overrides_before_validation() {
        let o: Override = "hopping[0].phase=0".parse().unwrap();
        let c = parse_str(FIG4, Format::Toml, Path::new("x.toml"), &[o]).unwrap();
        assert_eq!(c.system.hop_phase, vec![0.0]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let bad = FIG4.replace("coupling = 0.1\nnbar", "coupling = \nnbar");
        let err = parse_str(&bad, Format::Toml, Path::new("x.toml"), &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
        let err = parse_str(
            "{\"mechanical\": [}",
            Format::Json,
            Path::new("x.json"),
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 1 column"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = FIG4.replace("nbar = 10\n", "nbar = 10\nmass = 1\n");
        assert!(parse_str(&bad, Format::Toml, Path::new("x.toml"), &[]).is_err());
    }

    #[test]
    fn sweep_section() {
        let text = format!(
            "{FIG4}\n[sweep]\noutputs = [\"b1\"]\naxes = [{{ path = \"hopping[0].phase\", grid = {{ start = 0, stop = \"2pi\", count = 5 }} }}]\n"
        );
        let c = parse_str(&text, Format::Toml, Path::new("x.toml"), &[]).unwrap();
        let spec = c.sweep_spec().unwrap();
        assert_eq!(spec.axes.len(), 1);
        assert_eq!(spec.axes[0].values.len(), 5);
        assert_eq!(spec.axes[0].values[4], 2.0 * PI);
        assert_eq!(spec.outputs, vec![Mode::Mechanical(0)]);
    }
}

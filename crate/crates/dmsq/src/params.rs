//! Parameter paths such as `opa_gain`, `hopping[0].phase` or `nbar`, used by
//! `--set` overrides and sweep axes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use dmsq_core::SystemConfig;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("unknown parameter path `{0}`")]
    UnknownPath(String),
    #[error("`{path}`: index {index} out of range ({len} entries)")]
    IndexOutOfRange {
        path: String,
        index: usize,
        len: usize,
    },
    #[error("cannot parse `{0}` as a number (accepted: 0.45, 1e-3, pi, pi/2, 3pi/2, 0.5*pi)")]
    BadValue(String),
    #[error("override `{0}` must have the form path=value")]
    BadOverride(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanicalField {
    Omega,
    Gamma,
    Coupling,
    Nbar,
    /// Sets `G_l = sqrt(C kappa gamma_l)`.
    Cooperativity,
}

impl MechanicalField {
    fn name(self) -> &'static str {
        match self {
            MechanicalField::Omega => "omega",
            MechanicalField::Gamma => "gamma",
            MechanicalField::Coupling => "coupling",
            MechanicalField::Nbar => "nbar",
            MechanicalField::Cooperativity => "cooperativity",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "omega" => MechanicalField::Omega,
            "gamma" => MechanicalField::Gamma,
            "coupling" => MechanicalField::Coupling,
            "nbar" => MechanicalField::Nbar,
            "cooperativity" => MechanicalField::Cooperativity,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HoppingField {
    Strength,
    Phase,
}

/// A settable field of [`SystemConfig`]. `index: None` addresses every mode
/// or link at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamPath {
    Kappa,
    OpaGain,
    OpaPhase,
    Mechanical {
        index: Option<usize>,
        field: MechanicalField,
    },
    Hopping {
        index: Option<usize>,
        field: HoppingField,
    },
}

fn split_index(s: &str) -> Option<(&str, usize)> {
    let open = s.find('[')?;
    let inner = s[open + 1..].strip_suffix(']')?;
    Some((&s[..open], inner.parse().ok()?))
}

impl FromStr for ParamPath {
    type Err = ParamError;

    fn from_str(raw: &str) -> Result<Self, ParamError> {
        let s = raw.trim();
        let unknown = || ParamError::UnknownPath(raw.to_string());
        let s = s.strip_prefix("cavity.").unwrap_or(s);
        Ok(match s {
            "kappa" => ParamPath::Kappa,
            "opa_gain" => ParamPath::OpaGain,
            "opa_phase" => ParamPath::OpaPhase,
            "hop_strength" => ParamPath::Hopping {
                index: None,
                field: HoppingField::Strength,
            },
            "hop_phase" => ParamPath::Hopping {
                index: None,
                field: HoppingField::Phase,
            },
            _ => {
                if let Some(field) = MechanicalField::parse(s) {
                    return Ok(ParamPath::Mechanical { index: None, field });
                }
                let (head, field) = s.split_once('.').ok_or_else(unknown)?;
                let (section, index) = match split_index(head) {
                    Some((section, i)) => (section, Some(i)),
                    None => (head, None),
                };
                match section {
                    "mechanical" => ParamPath::Mechanical {
                        index,
                        field: MechanicalField::parse(field).ok_or_else(unknown)?,
                    },
                    "hopping" => ParamPath::Hopping {
                        index,
                        field: match field {
                            "strength" => HoppingField::Strength,
                            "phase" => HoppingField::Phase,
                            _ => return Err(unknown()),
                        },
                    },
                    _ => return Err(unknown()),
                }
            }
        })
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::Kappa => f.write_str("kappa"),
            ParamPath::OpaGain => f.write_str("opa_gain"),
            ParamPath::OpaPhase => f.write_str("opa_phase"),
            ParamPath::Mechanical { index: None, field } => f.write_str(field.name()),
            ParamPath::Mechanical {
                index: Some(i),
                field,
            } => write!(f, "mechanical[{i}].{}", field.name()),
            ParamPath::Hopping { index: None, field } => f.write_str(match field {
                HoppingField::Strength => "hop_strength",
                HoppingField::Phase => "hop_phase",
            }),
            ParamPath::Hopping {
                index: Some(i),
                field,
            } => write!(
                f,
                "hopping[{i}].{}",
                match field {
                    HoppingField::Strength => "strength",
                    HoppingField::Phase => "phase",
                }
            ),
        }
    }
}

fn set_entries(
    path: &ParamPath,
    values: &mut [f64],
    index: Option<usize>,
    value: f64,
) -> Result<(), ParamError> {
    match index {
        None => values.iter_mut().for_each(|v| *v = value),
        Some(i) => {
            let len = values.len();
            *values.get_mut(i).ok_or(ParamError::IndexOutOfRange {
                path: path.to_string(),
                index: i,
                len,
            })? = value;
        }
    }
    Ok(())
}

impl ParamPath {
    pub fn apply(&self, cfg: &mut SystemConfig, value: f64) -> Result<(), ParamError> {
        match *self {
            ParamPath::Kappa => cfg.kappa = value,
            ParamPath::OpaGain => cfg.opa_gain = value,
            ParamPath::OpaPhase => cfg.opa_phase = value,
            ParamPath::Mechanical { index, field } => {
                let target = match field {
                    MechanicalField::Omega => &mut cfg.omega,
                    MechanicalField::Gamma => &mut cfg.gamma,
                    MechanicalField::Coupling => &mut cfg.coupling,
                    MechanicalField::Nbar => &mut cfg.nbar,
                    MechanicalField::Cooperativity => {
                        let kappa = cfg.kappa;
                        let couplings: Vec<f64> = cfg
                            .gamma
                            .iter()
                            .map(|g| (value * kappa * g).sqrt())
                            .collect();
                        let len = cfg.coupling.len();
                        match index {
                            None => {
                                for (c, g) in cfg.coupling.iter_mut().zip(couplings) {
                                    *c = g;
                                }
                            }
                            Some(i) if i < len && i < couplings.len() => {
                                cfg.coupling[i] = couplings[i]
                            }
                            Some(i) => {
                                return Err(ParamError::IndexOutOfRange {
                                    path: self.to_string(),
                                    index: i,
                                    len,
                                })
                            }
                        }
                        return Ok(());
                    }
                };
                set_entries(self, target, index, value)?;
            }
            ParamPath::Hopping { index, field } => {
                let target = match field {
                    HoppingField::Strength => &mut cfg.hop_strength,
                    HoppingField::Phase => &mut cfg.hop_phase,
                };
                set_entries(self, target, index, value)?;
            }
        }
        Ok(())
    }
}

/// Parses a real number, also accepting multiples and fractions of `pi`
/// (`pi`, `2pi`, `pi/2`, `3*pi/2`, `0.5pi`).
pub fn parse_value(raw: &str) -> Result<f64, ParamError> {
    let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || ParamError::BadValue(raw.to_string());
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (s.as_str(), 1.0),
    };
    let (neg, num) = match num.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, num),
    };
    let coeff = num.strip_suffix("pi").ok_or_else(bad)?;
    let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
    let k = if coeff.is_empty() {
        1.0
    } else {
        coeff.parse::<f64>().map_err(|_| bad())?
    };
    let v = k * PI / den;
    Ok(if neg { -v } else { v })
}

/// A `path=value` override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Override {
    pub path: ParamPath,
    pub value: f64,
}

impl FromStr for Override {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, ParamError> {
        let (p, v) = s
            .split_once('=')
            .ok_or_else(|| ParamError::BadOverride(s.to_string()))?;
        Ok(Override {
            path: p.parse()?,
            value: parse_value(v)?,
        })
    }
}

pub fn apply_overrides(cfg: &mut SystemConfig, overrides: &[Override]) -> Result<(), ParamError> {
    for o in overrides {
        o.path.apply(cfg, o.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_round_trip() {
        for s in [
            "kappa",
            "opa_gain",
            "opa_phase",
            "nbar",
            "cooperativity",
            "hop_phase",
            "mechanical[1].gamma",
            "hopping[0].phase",
            "hopping[2].strength",
        ] {
            let p: ParamPath = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert_eq!(
            "cavity.opa_gain".parse::<ParamPath>(),
            Ok(ParamPath::OpaGain)
        );
        assert!("hopping[x].phase".parse::<ParamPath>().is_err());
        assert!("mechanical[0].mass".parse::<ParamPath>().is_err());
        assert!("foo".parse::<ParamPath>().is_err());
    }

    #[test]
    fn values_with_pi() {
        assert_eq!(parse_value("0.45").unwrap(), 0.45);
        assert_eq!(parse_value("pi").unwrap(), PI);
        assert_eq!(parse_value("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_value("3pi/2").unwrap(), 3.0 * PI / 2.0);
        assert_eq!(parse_value("3*pi/2").unwrap(), 3.0 * PI / 2.0);
        assert_eq!(parse_value("-pi").unwrap(), -PI);
        assert_eq!(parse_value(" 2 pi ").unwrap(), 2.0 * PI);
        assert!(parse_value("twopi").is_err());
        assert!(parse_value("").is_err());
    }

    #[test]
    fn apply_broadcast_and_indexed() {
        let mut cfg = SystemConfig::uniform_chain(3, 10.0, 1e-5, 0.1, 0.0, 0.1, 0.0);
        "nbar"
            .parse::<ParamPath>()
            .unwrap()
            .apply(&mut cfg, 4.0)
            .unwrap();
        assert_eq!(cfg.nbar, vec![4.0; 3]);
        let o: Override = "hopping[1].phase=pi/2".parse().unwrap();
        apply_overrides(&mut cfg, &[o]).unwrap();
        assert_eq!(cfg.hop_phase, vec![0.0, PI / 2.0]);
        let bad: Override = "hopping[2].phase=1".parse().unwrap();
        assert!(matches!(
            apply_overrides(&mut cfg, &[bad]),
            Err(ParamError::IndexOutOfRange { .. })
        ));
        "cooperativity"
            .parse::<ParamPath>()
            .unwrap()
            .apply(&mut cfg, 1000.0)
            .unwrap();
        for g in &cfg.coupling {
            assert!((g - 0.1).abs() < 1e-15);
        }
        assert!("opa_gain".parse::<Override>().is_err());
    }
}

//! Sweep presets reproducing the squeezing figures (fig2 to fig6).
//!
//! Each figure expands to one or more panels. Curve families whose members
//! differ only by a fixed parameter (dark mode unbroken vs broken) become
//! separate panels with `-dmu` / `-dmb` suffixes.

use std::f64::consts::PI;

use dmsq_core::{Mode, Quadrature, SystemConfig};

use crate::params::{HoppingField, MechanicalField, ParamPath};
use crate::sweep::{Axis, Scale, SweepSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown figure preset `{0}` (known: {known})", known = PRESET_NAMES.join(", "))]
pub struct UnknownPreset(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub name: String,
    pub title: &'static str,
    /// Quadrature the figure plots.
    pub quadrature: Quadrature,
    pub spec: SweepSpec,
}

/// Figure groups and individual panels accepted by [`figure_preset`].
pub const PRESET_NAMES: &[&str] = &[
    "fig2",
    "fig2a",
    "fig2b",
    "fig3",
    "fig3ab",
    "fig3c",
    "fig3d",
    "fig4",
    "fig4ab",
    "fig4c",
    "fig4c-dmb",
    "fig4c-dmu",
    "fig4d",
    "fig5",
    "fig5a",
    "fig5a-dmu",
    "fig5a-dmb",
    "fig5b",
    "fig5b-dmu",
    "fig5b-dmb",
    "fig6",
    "fig6a",
    "fig6b",
    "fig6c",
    "fig6c-dmb",
    "fig6c-dmu",
    "fig6d",
    "fig6d-dmb",
    "fig6d-dmu",
];

pub const OMEGA: f64 = 10.0;
pub const GAMMA: f64 = 1e-5;
pub const OPA_GAIN: f64 = 0.45;
pub const OPA_PHASE: f64 = PI;
pub const HOP_STRENGTH: f64 = 0.1;
pub const HOP_PHASE: f64 = PI / 2.0;

/// Gain grid: 50 points on [0, 0.49].
pub const GAIN_GRID: (f64, f64, usize) = (0.0, 0.49, 50);
/// Phase grids: 101 points on [0, 2pi].
pub const PHASE_POINTS: usize = 101;
/// Thermal occupation grid: 71 log-spaced points on [1e-3, 1e4].
pub const NBAR_GRID: (f64, f64, usize) = (1e-3, 1e4, 71);
/// Cooperativity grid: 31 log-spaced points on [10, 1e4].
pub const COOPERATIVITY_GRID: (f64, f64, usize) = (10.0, 1e4, 31);
/// Hopping-strength grid: 51 points on [0, 0.5].
pub const HOP_GRID: (f64, f64, usize) = (0.0, 0.5, 51);

fn chain(n: usize, coupling: f64, nbar: f64, hop_strength: f64, hop_phase: f64) -> SystemConfig {
    SystemConfig::uniform_chain(n, OMEGA, GAMMA, coupling, nbar, hop_strength, hop_phase)
        .with_opa(OPA_GAIN, OPA_PHASE)
}

fn gain_axis() -> Axis {
    let (a, b, n) = GAIN_GRID;
    Axis::grid(ParamPath::OpaGain, a, b, n, Scale::Linear).expect("static grid")
}

fn phase_axis(path: ParamPath) -> Axis {
    Axis::grid(path, 0.0, 2.0 * PI, PHASE_POINTS, Scale::Linear).expect("static grid")
}

fn hop_axis() -> Axis {
    let (a, b, n) = HOP_GRID;
    let path = ParamPath::Hopping {
        index: None,
        field: HoppingField::Strength,
    };
    Axis::grid(path, a, b, n, Scale::Linear).expect("static grid")
}

fn hop_phase(index: Option<usize>) -> ParamPath {
    ParamPath::Hopping {
        index,
        field: HoppingField::Phase,
    }
}

fn mech(field: MechanicalField) -> ParamPath {
    ParamPath::Mechanical { index: None, field }
}

fn log_axis(path: ParamPath, grid: (f64, f64, usize)) -> Axis {
    Axis::grid(path, grid.0, grid.1, grid.2, Scale::Log).expect("static grid")
}

fn mechanical_outputs(n: usize) -> Vec<Mode> {
    (0..n).map(Mode::Mechanical).collect()
}

fn panel(
    name: &str,
    title: &'static str,
    base: SystemConfig,
    axes: Vec<Axis>,
    outputs: Vec<Mode>,
) -> Panel {
    let quadrature = if outputs == [Mode::Optical] {
        Quadrature::X
    } else {
        Quadrature::Y
    };
    Panel {
        name: name.to_string(),
        title,
        quadrature,
        spec: SweepSpec {
            base,
            axes,
            outputs,
            preset: Some(name.to_string()),
        },
    }
}

fn single(name: &str) -> Option<Panel> {
    // fig2: G = 0, nbar = 0, eta = 0, theta = 0
    let fig2 = chain(2, 0.0, 0.0, 0.0, 0.0);
    // fig3: G = 0.1, nbar = 0, eta = 0, theta = 0
    let fig3 = chain(2, 0.1, 0.0, 0.0, 0.0);
    // fig4: G = 0.1, nbar = 10
    let fig4 = chain(2, 0.1, 10.0, HOP_STRENGTH, HOP_PHASE);
    let dmb =
        |coupling: f64, nbar: f64, n: usize| chain(n, coupling, nbar, HOP_STRENGTH, HOP_PHASE);
    let dmu = |coupling: f64, nbar: f64, n: usize| chain(n, coupling, nbar, 0.0, 0.0);
    let two = mechanical_outputs(2);
    let four = mechanical_outputs(4);
    Some(match name {
        "fig2a" => panel(
            name,
            "S_X_a vs opa_gain at opa_phase = pi",
            fig2,
            vec![gain_axis()],
            vec![Mode::Optical],
        ),
        "fig2b" => panel(
            name,
            "S_X_a vs opa_phase at opa_gain = 0.45",
            fig2,
            vec![phase_axis(ParamPath::OpaPhase)],
            vec![Mode::Optical],
        ),
        "fig3ab" => panel(
            name,
            "S_Y_b1, S_Y_b2 over (opa_gain, opa_phase)",
            fig3,
            vec![gain_axis(), phase_axis(ParamPath::OpaPhase)],
            two,
        ),
        "fig3c" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs opa_gain at opa_phase = pi",
            fig3,
            vec![gain_axis()],
            two,
        ),
        "fig3d" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs opa_phase at opa_gain = 0.45",
            fig3,
            vec![phase_axis(ParamPath::OpaPhase)],
            two,
        ),
        "fig4ab" => panel(
            name,
            "S_Y_b1, S_Y_b2 over (hop_strength, hop_phase)",
            fig4,
            vec![hop_axis(), phase_axis(hop_phase(None))],
            two,
        ),
        "fig4c-dmb" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs hop_phase, hop_strength = 0.1",
            fig4,
            vec![phase_axis(hop_phase(None))],
            two,
        ),
        "fig4c-dmu" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs hop_phase, hop_strength = 0",
            dmu(0.1, 10.0, 2),
            vec![phase_axis(hop_phase(None))],
            two,
        ),
        "fig4d" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs hop_strength at hop_phase = pi/2",
            fig4,
            vec![hop_axis()],
            two,
        ),
        "fig5a-dmu" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs nbar, dark mode unbroken",
            dmu(0.1, 10.0, 2),
            vec![log_axis(mech(MechanicalField::Nbar), NBAR_GRID)],
            two,
        ),
        "fig5a-dmb" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs nbar, dark mode broken",
            dmb(0.1, 10.0, 2),
            vec![log_axis(mech(MechanicalField::Nbar), NBAR_GRID)],
            two,
        ),
        "fig5b-dmu" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs cooperativity, dark mode unbroken",
            dmu(0.1, 10.0, 2),
            vec![log_axis(
                mech(MechanicalField::Cooperativity),
                COOPERATIVITY_GRID,
            )],
            two,
        ),
        "fig5b-dmb" => panel(
            name,
            "S_Y_b1, S_Y_b2 vs cooperativity, dark mode broken",
            dmb(0.1, 10.0, 2),
            vec![log_axis(
                mech(MechanicalField::Cooperativity),
                COOPERATIVITY_GRID,
            )],
            two,
        ),
        "fig6a" => panel(
            name,
            "S_Y_b1..b4 vs hop_strength at hop_phase = pi/2",
            dmb(0.1, 10.0, 4),
            vec![hop_axis()],
            four,
        ),
        "fig6b" => panel(
            name,
            "S_Y_b1..b4 vs hopping[0].phase, other phases pi/2",
            dmb(0.1, 10.0, 4),
            vec![phase_axis(hop_phase(Some(0)))],
            four,
        ),
        "fig6c-dmb" => panel(
            name,
            "S_Y_b1..b4 vs opa_gain, dark modes broken",
            dmb(0.1, 10.0, 4),
            vec![gain_axis()],
            four,
        ),
        "fig6c-dmu" => panel(
            name,
            "S_Y_b1..b4 vs opa_gain, dark modes unbroken",
            dmu(0.1, 10.0, 4),
            vec![gain_axis()],
            four,
        ),
        "fig6d-dmb" => panel(
            name,
            "S_Y_b1..b4 vs opa_phase, dark modes broken",
            dmb(0.1, 10.0, 4),
            vec![phase_axis(ParamPath::OpaPhase)],
            four,
        ),
        "fig6d-dmu" => panel(
            name,
            "S_Y_b1..b4 vs opa_phase, dark modes unbroken",
            dmu(0.1, 10.0, 4),
            vec![phase_axis(ParamPath::OpaPhase)],
            four,
        ),
        _ => return None,
    })
}

fn group(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "fig2" => &["fig2a", "fig2b"],
        "fig3" => &["fig3ab", "fig3c", "fig3d"],
        "fig4" => &["fig4ab", "fig4c-dmb", "fig4c-dmu", "fig4d"],
        "fig4c" => &["fig4c-dmb", "fig4c-dmu"],
        "fig5" => &["fig5a-dmu", "fig5a-dmb", "fig5b-dmu", "fig5b-dmb"],
        "fig5a" => &["fig5a-dmu", "fig5a-dmb"],
        "fig5b" => &["fig5b-dmu", "fig5b-dmb"],
        "fig6" => &[
            "fig6a",
            "fig6b",
            "fig6c-dmb",
            "fig6c-dmu",
            "fig6d-dmb",
            "fig6d-dmu",
        ],
        "fig6c" => &["fig6c-dmb", "fig6c-dmu"],
        "fig6d" => &["fig6d-dmb", "fig6d-dmu"],
        _ => return None,
    })
}

/// Panels of a figure group (`fig5`) or a single panel (`fig5a-dmb`).
pub fn figure_preset(name: &str) -> Result<Vec<Panel>, UnknownPreset> {
    if let Some(names) = group(name) {
        return Ok(names
            .iter()
            .map(|n| single(n).expect("group members exist"))
            .collect());
    }
    single(name)
        .map(|p| vec![p])
        .ok_or_else(|| UnknownPreset(name.to_string()))
}

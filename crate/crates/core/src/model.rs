//! System configuration and the linearized drift/noise matrices.
//!
//! All quadrature vectors use the ordering
//! `[X_b1, Y_b1, ..., X_bN, Y_bN, X_a, Y_a]`: mechanical modes first,
//! the cavity last. Use [`quadrature_index`] rather than raw offsets.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Resolved-sideband advisory threshold on `omega_l / kappa`.
pub const SIDEBAND_RATIO_MIN: f64 = 5.0;
/// Weak-coupling advisory threshold on `G_l / omega_l` and `Lambda / omega_l`.
pub const WEAK_COUPLING_RATIO_MAX: f64 = 0.2;

/// One bosonic mode of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    /// Mechanical mode, zero-based.
    Mechanical(usize),
    Optical,
}

impl Mode {
    /// Short label: `b1`, `b2`, ... for mechanical modes, `a` for the cavity.
    pub fn label(&self) -> String {
        match self {
            Mode::Mechanical(l) => format!("b{}", l + 1),
            Mode::Optical => String::from("a"),
        }
    }

    /// Inverse of [`Mode::label`].
    pub fn from_label(s: &str) -> Option<Mode> {
        if s == "a" {
            return Some(Mode::Optical);
        }
        let idx: usize = s.strip_prefix('b')?.parse().ok()?;
        idx.checked_sub(1).map(Mode::Mechanical)
    }

    /// All modes of an `n_mech` system in quadrature order.
    pub fn all(n_mech: usize) -> Vec<Mode> {
        (0..n_mech)
            .map(Mode::Mechanical)
            .chain(core::iter::once(Mode::Optical))
            .collect()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Quadrature {
    X,
    Y,
}

impl Quadrature {
    pub fn label(&self) -> &'static str {
        match self {
            Quadrature::X => "X",
            Quadrature::Y => "Y",
        }
    }
}

/// Position of `(mode, quad)` in the quadrature vector of an `n_mech` system.
pub fn quadrature_index(n_mech: usize, mode: Mode, quad: Quadrature) -> Result<usize> {
    let base = match mode {
        Mode::Mechanical(l) if l < n_mech => 2 * l,
        Mode::Mechanical(l) => return Err(Error::ModeOutOfRange { index: l, n_mech }),
        Mode::Optical => 2 * n_mech,
    };
    Ok(match quad {
        Quadrature::X => base,
        Quadrature::Y => base + 1,
    })
}

/// Full parameter set of the linearized model. Rates share one unit,
/// conventionally the cavity decay rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemConfig {
    pub n_mech: usize,
    pub kappa: f64,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Linearized optomechanical couplings `G_l`.
    pub coupling: Vec<f64>,
    pub nbar: Vec<f64>,
    /// Nearest-neighbour hopping strengths `eta_l` for links `l <-> l+1`.
    pub hop_strength: Vec<f64>,
    /// Hopping phases `theta_l`, radians.
    pub hop_phase: Vec<f64>,
    pub opa_gain: f64,
    pub opa_phase: f64,
}

impl SystemConfig {
    /// Identical mechanical modes on a uniform chain, `kappa = 1`, no OPA.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform_chain(
        n_mech: usize,
        omega: f64,
        gamma: f64,
        coupling: f64,
        nbar: f64,
        hop_strength: f64,
        hop_phase: f64,
    ) -> Self {
        let links = n_mech.saturating_sub(1);
        SystemConfig {
            n_mech,
            kappa: 1.0,
            omega: vec![omega; n_mech],
            gamma: vec![gamma; n_mech],
            coupling: vec![coupling; n_mech],
            nbar: vec![nbar; n_mech],
            hop_strength: vec![hop_strength; links],
            hop_phase: vec![hop_phase; links],
            opa_gain: 0.0,
            opa_phase: 0.0,
        }
    }

    pub fn with_opa(mut self, gain: f64, phase: f64) -> Self {
        self.opa_gain = gain;
        self.opa_phase = phase;
        self
    }

    /// Dimension `2(N+1)` of the quadrature vector.
    pub fn dim(&self) -> usize {
        2 * (self.n_mech + 1)
    }
}

/// Non-fatal notes about the parameter regime in which the linearized,
/// rotating-wave model was derived.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Advisory {
    /// `omega_l / kappa` below [`SIDEBAND_RATIO_MIN`].
    UnresolvedSideband { mode: usize, ratio: f64 },
    /// `G_l / omega_l` at or above [`WEAK_COUPLING_RATIO_MAX`].
    StrongCoupling { mode: usize, ratio: f64 },
    /// `Lambda / omega_l` at or above [`WEAK_COUPLING_RATIO_MAX`].
    StrongParametricGain { mode: usize, ratio: f64 },
    /// Mechanical frequencies differ; the model assumes a single resonant
    /// frequency shared by all mechanical modes and the drive detuning.
    NonDegenerate { spread: f64 },
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Advisory::UnresolvedSideband { mode, ratio } => write!(
                f,
                "b{}: omega/kappa = {ratio} is below {SIDEBAND_RATIO_MIN}; resolved-sideband regime not satisfied",
                mode + 1
            ),
            Advisory::StrongCoupling { mode, ratio } => write!(
                f,
                "b{}: G/omega = {ratio} is not small; rotating-wave approximation is questionable",
                mode + 1
            ),
            Advisory::StrongParametricGain { mode, ratio } => write!(
                f,
                "b{}: Lambda/omega = {ratio} is not small; rotating-wave approximation is questionable",
                mode + 1
            ),
            Advisory::NonDegenerate { spread } => write!(
                f,
                "mechanical frequencies are not degenerate (spread {spread}); the resonant model assumes a common frequency"
            ),
        }
    }
}

/// A [`SystemConfig`] that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: SystemConfig,
    advisories: Vec<Advisory>,
}

impl ValidatedConfig {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn advisories(&self) -> &[Advisory] {
        &self.advisories
    }

    pub fn into_inner(self) -> SystemConfig {
        self.config
    }
}

impl core::ops::Deref for ValidatedConfig {
    type Target = SystemConfig;

    fn deref(&self) -> &SystemConfig {
        &self.config
    }
}

fn check_len(field: &'static str, v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            field,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

fn check_finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: String::from(field),
        })
    }
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive {
            field: String::from(field),
            value: v,
        })
    }
}

fn check_nonnegative(field: &str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Negative {
            field: String::from(field),
            value: v,
        })
    }
}

/// Structural and sign checks, plus regime advisories.
///
/// Only a linear nearest-neighbour chain is representable: exactly
/// `n_mech - 1` hopping links are required.
pub fn validate_config(cfg: SystemConfig) -> Result<ValidatedConfig> {
    let n = cfg.n_mech;
    if n == 0 {
        return Err(Error::NoMechanicalModes);
    }
    check_len("omega", &cfg.omega, n)?;
    check_len("gamma", &cfg.gamma, n)?;
    check_len("coupling", &cfg.coupling, n)?;
    check_len("nbar", &cfg.nbar, n)?;
    check_len("hop_strength", &cfg.hop_strength, n - 1)?;
    check_len("hop_phase", &cfg.hop_phase, n - 1)?;

    check_positive("kappa", cfg.kappa)?;
    for l in 0..n {
        check_positive(&format!("omega[{l}]"), cfg.omega[l])?;
        check_positive(&format!("gamma[{l}]"), cfg.gamma[l])?;
        check_nonnegative(&format!("coupling[{l}]"), cfg.coupling[l])?;
        check_nonnegative(&format!("nbar[{l}]"), cfg.nbar[l])?;
    }
    for l in 0..n - 1 {
        check_nonnegative(&format!("hop_strength[{l}]"), cfg.hop_strength[l])?;
        check_finite(&format!("hop_phase[{l}]"), cfg.hop_phase[l])?;
    }
    check_nonnegative("opa_gain", cfg.opa_gain)?;
    check_finite("opa_phase", cfg.opa_phase)?;

    let mut advisories = Vec::new();
    for l in 0..n {
        let w = cfg.omega[l];
        if w / cfg.kappa < SIDEBAND_RATIO_MIN {
            advisories.push(Advisory::UnresolvedSideband {
                mode: l,
                ratio: w / cfg.kappa,
            });
        }
        if cfg.coupling[l] / w >= WEAK_COUPLING_RATIO_MAX {
            advisories.push(Advisory::StrongCoupling {
                mode: l,
                ratio: cfg.coupling[l] / w,
            });
        }
        if cfg.opa_gain / w >= WEAK_COUPLING_RATIO_MAX {
            advisories.push(Advisory::StrongParametricGain {
                mode: l,
                ratio: cfg.opa_gain / w,
            });
        }
    }
    let (lo, hi) = cfg
        .omega
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
            (lo.min(w), hi.max(w))
        });
    if hi - lo > 1e-12 * hi {
        advisories.push(Advisory::NonDegenerate { spread: hi - lo });
    }

    Ok(ValidatedConfig {
        config: cfg,
        advisories,
    })
}

/// Drift matrix `A` of the linearized quadrature Langevin equation
/// `du/dt = A u + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    n_mech: usize,
    matrix: DMatrix<f64>,
}

impl DriftMatrix {
    /// Wraps an arbitrary square matrix in the `2(N+1)` layout.
    pub fn from_matrix(n_mech: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = 2 * (n_mech + 1);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(dim, matrix.nrows()));
        }
        Ok(DriftMatrix { n_mech, matrix })
    }

    pub fn n_mech(&self) -> usize {
        self.n_mech
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Entry coupling `(row_mode, row_quad)` to `(col_mode, col_quad)`.
    pub fn entry(&self, row: (Mode, Quadrature), col: (Mode, Quadrature)) -> Result<f64> {
        let i = quadrature_index(self.n_mech, row.0, row.1)?;
        let j = quadrature_index(self.n_mech, col.0, col.1)?;
        Ok(self.matrix[(i, j)])
    }

    /// The `2N x 2N` mechanical block.
    pub fn mechanical_block(&self) -> DMatrix<f64> {
        let m = 2 * self.n_mech;
        self.matrix.view((0, 0), (m, m)).into_owned()
    }

    /// The `2 x 2` cavity block.
    pub fn optical_block(&self) -> DMatrix<f64> {
        let o = 2 * self.n_mech;
        self.matrix.view((o, o), (2, 2)).into_owned()
    }
}

/// Diagonal input-noise matrix `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMatrix {
    n_mech: usize,
    diagonal: DVector<f64>,
}

impl NoiseMatrix {
    pub fn from_diagonal(n_mech: usize, diagonal: DVector<f64>) -> Result<Self> {
        let dim = 2 * (n_mech + 1);
        if diagonal.len() != dim {
            return Err(Error::ShapeMismatch(dim, diagonal.len()));
        }
        Ok(NoiseMatrix { n_mech, diagonal })
    }

    pub fn n_mech(&self) -> usize {
        self.n_mech
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diagonal
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diagonal)
    }
}

/// Builds `A = [[E, P], [-P^T, F]]` for the resonant, rotating-wave model.
///
/// Each chain link `l <-> l+1` with hopping `eta e^{i theta}` contributes
/// ```text
/// rows (X,Y)_l,   cols (X,Y)_{l+1}:  [[ eta sin, eta cos], [-eta cos,  eta sin]]
/// rows (X,Y)_{l+1}, cols (X,Y)_l:    [[-eta sin, eta cos], [-eta cos, -eta sin]]
/// ```
/// The coupling block has `P[X_bl, Y_a] = G_l` and `P[Y_bl, X_a] = -G_l`.
/// The commonly quoted `F_21 = -G_1` entry belongs to `P` (`P_21`); the
/// cavity block `F` carries only the parametric terms.
pub fn build_drift_matrix(cfg: &ValidatedConfig) -> DriftMatrix {
    let n = cfg.n_mech;
    let dim = cfg.dim();
    let mut a = DMatrix::<f64>::zeros(dim, dim);

    for l in 0..n {
        a[(2 * l, 2 * l)] = -cfg.gamma[l];
        a[(2 * l + 1, 2 * l + 1)] = -cfg.gamma[l];
    }

    for l in 0..n - 1 {
        let eta = cfg.hop_strength[l];
        let (s, c) = libm::sincos(cfg.hop_phase[l]);
        let (i, j) = (2 * l, 2 * l + 2);
        a[(i, j)] += eta * s;
        a[(i, j + 1)] += eta * c;
        a[(i + 1, j)] += -eta * c;
        a[(i + 1, j + 1)] += eta * s;

        a[(j, i)] += -eta * s;
        a[(j, i + 1)] += eta * c;
        a[(j + 1, i)] += -eta * c;
        a[(j + 1, i + 1)] += -eta * s;
    }

    let o = 2 * n;
    let (s, c) = libm::sincos(cfg.opa_phase);
    let lam = cfg.opa_gain;
    a[(o, o)] = -(cfg.kappa - 2.0 * lam * c);
    a[(o, o + 1)] = 2.0 * lam * s;
    a[(o + 1, o)] = 2.0 * lam * s;
    a[(o + 1, o + 1)] = -(cfg.kappa + 2.0 * lam * c);

    for l in 0..n {
        let g = cfg.coupling[l];
        a[(2 * l, o + 1)] += g;
        a[(2 * l + 1, o)] -= g;
        a[(o, 2 * l + 1)] += g;
        a[(o + 1, 2 * l)] -= g;
    }

    DriftMatrix {
        n_mech: n,
        matrix: a,
    }
}

/// `Q = diag(g1(2n1+1), g1(2n1+1), ..., kappa, kappa)`.
pub fn build_noise_matrix(cfg: &ValidatedConfig) -> NoiseMatrix {
    let n = cfg.n_mech;
    let mut d = DVector::<f64>::zeros(cfg.dim());
    for l in 0..n {
        let q = cfg.gamma[l] * (2.0 * cfg.nbar[l] + 1.0);
        d[2 * l] = q;
        d[2 * l + 1] = q;
    }
    d[2 * n] = cfg.kappa;
    d[2 * n + 1] = cfg.kappa;
    NoiseMatrix {
        n_mech: n,
        diagonal: d,
    }
}

/// Physical drive parameters before linearization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicalDriveConfig {
    pub kappa: f64,
    pub cavity_frequency: f64,
    pub laser_frequency: f64,
    /// Drive magnitude `|Omega|`.
    pub drive_amplitude: f64,
    /// Drive phase `arg Omega`, radians.
    pub drive_phase: f64,
    /// Single-photon couplings `g_l`.
    pub bare_coupling: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub nbar: Vec<f64>,
    pub hop_strength: Vec<f64>,
    pub hop_phase: Vec<f64>,
    pub opa_gain: f64,
    pub opa_phase: f64,
}

impl PhysicalDriveConfig {
    /// Bare detuning `omega_c - omega_L`.
    pub fn detuning(&self) -> f64 {
        self.cavity_frequency - self.laser_frequency
    }

    pub fn n_mech(&self) -> usize {
        self.omega.len()
    }
}

/// Mean-field steady state and the linearized configuration built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedDrive {
    pub config: SystemConfig,
    /// `<a>_ss` in the drive's own phase convention.
    pub cavity_amplitude: Complex<f64>,
    /// `<b_l>_ss`.
    pub mechanical_amplitudes: Vec<Complex<f64>>,
    /// Effective detuning `Delta = Delta_c + 2 sum_l g_l Re <b_l>`.
    pub effective_detuning: f64,
    pub iterations: usize,
}

/// Relaxation factor of the mean-field iteration.
pub const FIXED_POINT_RELAXATION: f64 = 0.5;
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 10_000;

/// Solves the mean-field equations for the intracavity photon number and
/// returns `G_l = g_l |<a>|` (the drive phase is chosen so that `<a>` is real).
///
/// For a fixed photon number `n = |<a>|^2` the mechanical amplitudes solve
/// the linear system `(Gamma + i M) b = -i g n`, with `M` the hopping matrix
/// carrying the frequencies on its diagonal, so `Delta` is affine in `n`.
/// The scalar equation `n = |Omega|^2 / (kappa^2 + Delta(n)^2)` is iterated
/// with relaxation until the update falls below the tolerance.
pub fn linearize_from_drive(cfg: &PhysicalDriveConfig) -> Result<LinearizedDrive> {
    let n = cfg.n_mech();
    if n == 0 {
        return Err(Error::NoMechanicalModes);
    }
    check_len("bare_coupling", &cfg.bare_coupling, n)?;
    check_len("gamma", &cfg.gamma, n)?;
    check_len("nbar", &cfg.nbar, n)?;
    check_len("hop_strength", &cfg.hop_strength, n - 1)?;
    check_len("hop_phase", &cfg.hop_phase, n - 1)?;
    check_positive("kappa", cfg.kappa)?;
    check_finite("detuning", cfg.detuning())?;
    check_nonnegative("drive_amplitude", cfg.drive_amplitude)?;
    check_finite("drive_phase", cfg.drive_phase)?;
    for l in 0..n {
        check_positive(&format!("gamma[{l}]"), cfg.gamma[l])?;
        check_finite(&format!("omega[{l}]"), cfg.omega[l])?;
        check_finite(&format!("bare_coupling[{l}]"), cfg.bare_coupling[l])?;
    }

    // Unit-photon response of the mechanical amplitudes.
    let mut lhs = DMatrix::<Complex<f64>>::zeros(n, n);
    for l in 0..n {
        lhs[(l, l)] = Complex::new(cfg.gamma[l], cfg.omega[l]);
    }
    for l in 0..n - 1 {
        let hop = Complex::from_polar(cfg.hop_strength[l], cfg.hop_phase[l]);
        let i = Complex::new(0.0, 1.0);
        lhs[(l, l + 1)] += i * hop;
        lhs[(l + 1, l)] += i * hop.conj();
    }
    let rhs = DVector::from_iterator(n, cfg.bare_coupling.iter().map(|&g| Complex::new(0.0, -g)));
    let unit_response = lhs.lu().solve(&rhs).ok_or(Error::EigenSolverFailed)?;
    let shift_per_photon: f64 = 2.0
        * cfg
            .bare_coupling
            .iter()
            .zip(unit_response.iter())
            .map(|(g, b)| g * b.re)
            .sum::<f64>();

    let omega_sq = cfg.drive_amplitude * cfg.drive_amplitude;
    let kappa_sq = cfg.kappa * cfg.kappa;
    let target = |photons: f64| {
        let delta = cfg.detuning() + shift_per_photon * photons;
        omega_sq / (kappa_sq + delta * delta)
    };

    let mut photons = target(0.0);
    let mut iterations = 0;
    let mut last_update = f64::INFINITY;
    while iterations < FIXED_POINT_MAX_ITER {
        iterations += 1;
        let next = target(photons);
        let update = next - photons;
        last_update = update.abs();
        if last_update <= FIXED_POINT_TOL * photons.max(f64::MIN_POSITIVE) || last_update == 0.0 {
            photons = next;
            break;
        }
        photons += FIXED_POINT_RELAXATION * update;
    }
    if !(last_update <= FIXED_POINT_TOL * photons.max(f64::MIN_POSITIVE) || last_update == 0.0) {
        return Err(Error::FixedPointDiverged {
            iterations,
            last_update,
        });
    }

    let delta = cfg.detuning() + shift_per_photon * photons;
    let drive = Complex::from_polar(cfg.drive_amplitude, cfg.drive_phase);
    let cavity_amplitude = Complex::new(0.0, -1.0) * drive / Complex::new(cfg.kappa, delta);
    let amp = cavity_amplitude.norm();
    let mechanical_amplitudes = unit_response.iter().map(|b| b * photons).collect();

    let config = SystemConfig {
        n_mech: n,
        kappa: cfg.kappa,
        omega: cfg.omega.clone(),
        gamma: cfg.gamma.clone(),
        coupling: cfg.bare_coupling.iter().map(|g| (g * amp).abs()).collect(),
        nbar: cfg.nbar.clone(),
        hop_strength: cfg.hop_strength.clone(),
        hop_phase: cfg.hop_phase.clone(),
        opa_gain: cfg.opa_gain,
        opa_phase: cfg.opa_phase,
    };

    Ok(LinearizedDrive {
        config,
        cavity_amplitude,
        mechanical_amplitudes,
        effective_detuning: delta,
        iterations,
    })
}

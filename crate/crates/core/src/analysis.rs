//! Squeezing degrees, uncertainty diagnostics and the mechanical
//! normal-mode (bright/dark) decomposition.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{
    build_drift_matrix, build_noise_matrix, quadrature_index, Mode, Quadrature, ValidatedConfig,
};
use crate::steady_state::{is_stable, solve_lyapunov, CovarianceMatrix, StabilityReport};

/// Quadrature variance of the vacuum with `X = (o + o^dag) / sqrt 2`.
pub const ZERO_POINT_VARIANCE: f64 = 0.5;
/// Slack allowed on the uncertainty bounds.
pub const PHYSICALITY_TOL: f64 = 1e-10;
/// Default relative tolerance of [`dark_mode_census`].
pub const DARK_MODE_TOL: f64 = 1e-8;

pub fn quadrature_variance(v: &CovarianceMatrix, mode: Mode, quad: Quadrature) -> Result<f64> {
    v.variance(mode, quad)
}

/// `-10 log10(variance / 1/2)` in dB; positive means squeezed below vacuum.
pub fn squeezing_degree(variance: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    Ok(-10.0 * libm::log10(variance / ZERO_POINT_VARIANCE))
}

/// `G_l^2 / (kappa gamma_l)`.
pub fn cooperativity(cfg: &ValidatedConfig, l: usize) -> Result<f64> {
    if l >= cfg.n_mech {
        return Err(Error::ModeOutOfRange {
            index: l,
            n_mech: cfg.n_mech,
        });
    }
    let g = cfg.coupling[l];
    Ok((g / cfg.kappa) * (g / cfg.gamma[l]))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeUncertainty {
    pub mode: Mode,
    /// `var_x * var_y - 1/4` (product form, no cross term).
    pub product_margin: f64,
    /// `var_x * var_y - cov_xy^2 - 1/4` (Robertson-Schrodinger).
    pub robertson_schrodinger_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhysicalityDiagnostic {
    pub passed: bool,
    /// Smallest eigenvalue of `V + (i/2) J`.
    pub min_symplectic_eigenvalue: f64,
    pub worst_product_margin: f64,
    pub worst_robertson_schrodinger_margin: f64,
    pub modes: Vec<ModeUncertainty>,
}

/// Checks `V + (i/2) J >= 0` (block-diagonal `J = [[0, 1], [-1, 0]]`) and the
/// per-mode uncertainty products, each with slack [`PHYSICALITY_TOL`].
pub fn physicality_check(v: &CovarianceMatrix) -> PhysicalityDiagnostic {
    let d = v.dim();
    let mut h = v.matrix().map(|x| Complex::new(x, 0.0));
    for k in 0..d / 2 {
        h[(2 * k, 2 * k + 1)] += Complex::new(0.0, 0.5);
        h[(2 * k + 1, 2 * k)] -= Complex::new(0.0, 0.5);
    }
    let min_eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000)
        .map(|e| e.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);

    let modes: Vec<ModeUncertainty> = Mode::all(v.n_mech())
        .into_iter()
        .map(|mode| {
            let [[xx, xy], [_, yy]] = v.mode_block(mode).expect("mode within range");
            ModeUncertainty {
                mode,
                product_margin: xx * yy - 0.25,
                robertson_schrodinger_margin: xx * yy - xy * xy - 0.25,
            }
        })
        .collect();
    let worst_product_margin = modes
        .iter()
        .map(|m| m.product_margin)
        .fold(f64::INFINITY, f64::min);
    let worst_rs = modes
        .iter()
        .map(|m| m.robertson_schrodinger_margin)
        .fold(f64::INFINITY, f64::min);

    PhysicalityDiagnostic {
        passed: min_eig >= -PHYSICALITY_TOL
            && worst_product_margin >= -PHYSICALITY_TOL
            && worst_rs >= -PHYSICALITY_TOL,
        min_symplectic_eigenvalue: min_eig,
        worst_product_margin,
        worst_robertson_schrodinger_margin: worst_rs,
        modes,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSqueezing {
    pub mode: Mode,
    pub var_x: f64,
    pub var_y: f64,
    pub s_x_db: f64,
    pub s_y_db: f64,
    /// Mechanical modes only.
    pub cooperativity: Option<f64>,
}

impl ModeSqueezing {
    pub fn variance(&self, quad: Quadrature) -> f64 {
        match quad {
            Quadrature::X => self.var_x,
            Quadrature::Y => self.var_y,
        }
    }

    pub fn squeezing_db(&self, quad: Quadrature) -> f64 {
        match quad {
            Quadrature::X => self.s_x_db,
            Quadrature::Y => self.s_y_db,
        }
    }
}

/// Per-mode variances and squeezing, mechanical modes first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SqueezingReport {
    pub stable: bool,
    pub modes: Vec<ModeSqueezing>,
}

impl SqueezingReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSqueezing> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

pub fn squeezing_report(cfg: &ValidatedConfig, v: &CovarianceMatrix) -> Result<SqueezingReport> {
    let modes = Mode::all(cfg.n_mech)
        .into_iter()
        .map(|mode| {
            let var_x = v.variance(mode, Quadrature::X)?;
            let var_y = v.variance(mode, Quadrature::Y)?;
            Ok(ModeSqueezing {
                mode,
                var_x,
                var_y,
                s_x_db: squeezing_degree(var_x)?,
                s_y_db: squeezing_degree(var_y)?,
                cooperativity: match mode {
                    Mode::Mechanical(l) => Some(cooperativity(cfg, l)?),
                    Mode::Optical => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SqueezingReport {
        stable: true,
        modes,
    })
}

/// Result of running the full linear pipeline on one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub stability: StabilityReport,
    /// `None` when the system is unstable.
    pub covariance: Option<CovarianceMatrix>,
    pub squeezing: Option<SqueezingReport>,
}

/// Drift and noise matrices, stability, Lyapunov solve and squeezing.
pub fn evaluate(cfg: &ValidatedConfig) -> Result<SteadyState> {
    let a = build_drift_matrix(cfg);
    let stability = is_stable(&a)?;
    if !stability.stable {
        return Ok(SteadyState {
            stability,
            covariance: None,
            squeezing: None,
        });
    }
    let v = solve_lyapunov(&a, &build_noise_matrix(cfg))?;
    let squeezing = squeezing_report(cfg, &v)?;
    Ok(SteadyState {
        stability,
        covariance: Some(v),
        squeezing: Some(squeezing),
    })
}

/// Closed-form two-mode normal modes `B_+ = f b1 - e^{i theta} h b2`,
/// `B_- = f b2 + e^{-i theta} h b1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeClosedForm {
    pub f: f64,
    pub h: f64,
    pub omega_f: f64,
    pub g_plus: Complex<f64>,
    pub g_minus: Complex<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeDecomposition {
    /// Eigenfrequencies of the hopping matrix, ascending.
    pub frequencies: Vec<f64>,
    /// Unitary with `b_l = sum_j U_lj B_j`.
    pub transform: DMatrix<Complex<f64>>,
    /// `G~_j = sum_l G_l U_lj`.
    pub couplings: Vec<Complex<f64>>,
    /// Flags from [`dark_mode_census`] at [`DARK_MODE_TOL`]; all false when
    /// every coupling vanishes.
    pub dark: Vec<bool>,
    /// Largest bare coupling `max_l G_l`.
    pub max_coupling: f64,
    /// Present for `N = 2` with `eta > 0`.
    pub two_mode: Option<TwoModeClosedForm>,
}

impl NormalModeDecomposition {
    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }
}

/// Hermitian hopping matrix `M_ll = omega_l`, `M_{l,l+1} = eta_l e^{i theta_l}`.
pub fn hopping_matrix(cfg: &ValidatedConfig) -> DMatrix<Complex<f64>> {
    let n = cfg.n_mech;
    let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
    for l in 0..n {
        m[(l, l)] = Complex::new(cfg.omega[l], 0.0);
    }
    for l in 0..n - 1 {
        let z = Complex::from_polar(cfg.hop_strength[l], cfg.hop_phase[l]);
        m[(l, l + 1)] = z;
        m[(l + 1, l)] = z.conj();
    }
    m
}

/// Orthonormal basis of `C^k` whose first vector is `w` (unit norm).
fn completion_with(w: &DVector<Complex<f64>>) -> DMatrix<Complex<f64>> {
    let k = w.len();
    let mut basis: Vec<DVector<Complex<f64>>> = vec![w.clone()];
    for e in 0..k {
        if basis.len() == k {
            break;
        }
        let mut v = DVector::<Complex<f64>>::zeros(k);
        v[e] = Complex::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / Complex::new(norm, 0.0));
        }
    }
    DMatrix::from_columns(&basis)
}

/// Diagonalizes the hopping matrix and projects the coupling vector onto
/// its eigenmodes.
///
/// Inside a degenerate eigenspace the basis is rotated so that the whole
/// projection of the coupling vector lies on its first vector; the remaining
/// vectors of that eigenspace are then exactly dark. Without this the split
/// of a degenerate space (e.g. `eta = 0`) is arbitrary.
pub fn mechanical_normal_modes(cfg: &ValidatedConfig) -> NormalModeDecomposition {
    let n = cfg.n_mech;
    let m = hopping_matrix(cfg);
    let eig = SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let frequencies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut u = DMatrix::<Complex<f64>>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        u.set_column(col, &eig.eigenvectors.column(i));
    }

    let g = DVector::from_iterator(n, cfg.coupling.iter().map(|&x| Complex::new(x, 0.0)));
    let scale = cfg
        .omega
        .iter()
        .chain(cfg.hop_strength.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let degeneracy_tol = 1e-10 * scale.max(1e-300);

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && frequencies[end] - frequencies[start] <= degeneracy_tol {
            end += 1;
        }
        if end - start > 1 {
            let block = u.columns(start, end - start).into_owned();
            // coupling seen by each basis vector of the block
            let proj = block.transpose() * &g;
            let norm = proj.norm();
            if norm > 0.0 {
                let w = proj.map(|z| z.conj()) / Complex::new(norm, 0.0);
                let rot = completion_with(&w);
                let rotated = block * rot;
                u.columns_mut(start, end - start).copy_from(&rotated);
            }
        }
        start = end;
    }

    let couplings: Vec<Complex<f64>> = (u.transpose() * &g).iter().copied().collect();
    let max_coupling = cfg.coupling.iter().copied().fold(0.0, f64::max);
    let dark = couplings
        .iter()
        .map(|z| max_coupling > 0.0 && z.norm() < DARK_MODE_TOL * max_coupling)
        .collect();

    let two_mode = (n == 2 && cfg.hop_strength[0] > 0.0).then(|| {
        let (w1, w2) = (cfg.omega[0], cfg.omega[1]);
        let eta = cfg.hop_strength[0];
        let theta = cfg.hop_phase[0];
        let omega_f = (w2 - w1 - libm::sqrt((w1 - w2) * (w1 - w2) + 4.0 * eta * eta)) / 2.0;
        let f = omega_f.abs() / libm::sqrt(omega_f * omega_f + eta * eta);
        let h = eta * f / omega_f;
        let (g1, g2) = (cfg.coupling[0], cfg.coupling[1]);
        TwoModeClosedForm {
            f,
            h,
            omega_f,
            g_plus: Complex::new(f * g1, 0.0) - Complex::from_polar(h * g2, -theta),
            g_minus: Complex::new(f * g2, 0.0) + Complex::from_polar(h * g1, theta),
        }
    });

    NormalModeDecomposition {
        frequencies,
        transform: u,
        couplings,
        dark,
        max_coupling,
        two_mode,
    }
}

/// Indices `j` with `|G~_j| < tol * max_l G_l`. Empty means every dark mode is
/// broken.
pub fn dark_mode_census(d: &NormalModeDecomposition, tol: f64) -> Result<Vec<usize>> {
    if d.max_coupling.is_nan() || d.max_coupling <= 0.0 {
        return Err(Error::CensusUndefined);
    }
    Ok(d.couplings
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() < tol * d.max_coupling)
        .map(|(j, _)| j)
        .collect())
}

/// Covariance of the normal-mode quadratures `(X_Bj, Y_Bj)`, `2N x 2N`.
///
/// With `B_j = sum_l c_l b_l`, `c_l = conj(U_lj)`:
/// `X_Bj = sum_l Re(c_l) X_l - Im(c_l) Y_l`, `Y_Bj = sum_l Im(c_l) X_l + Re(c_l) Y_l`.
pub fn normal_mode_covariance(
    d: &NormalModeDecomposition,
    v: &CovarianceMatrix,
) -> Result<DMatrix<f64>> {
    let n = d.n_modes();
    if v.n_mech() != n {
        return Err(Error::ShapeMismatch(n, v.n_mech()));
    }
    let mut s = DMatrix::<f64>::zeros(2 * n, v.dim());
    for j in 0..n {
        for l in 0..n {
            let c = d.transform[(l, j)].conj();
            let xl = quadrature_index(n, Mode::Mechanical(l), Quadrature::X)?;
            s[(2 * j, xl)] = c.re;
            s[(2 * j, xl + 1)] = -c.im;
            s[(2 * j + 1, xl)] = c.im;
            s[(2 * j + 1, xl + 1)] = c.re;
        }
    }
    Ok(&s * v.matrix() * s.transpose())
}

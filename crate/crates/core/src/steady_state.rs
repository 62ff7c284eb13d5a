//! Stability analysis and the steady-state covariance matrix.

use alloc::vec::Vec;

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Dyn, Schur};

use crate::error::{Error, Result};
use crate::model::{quadrature_index, DriftMatrix, Mode, NoiseMatrix, Quadrature, SystemConfig};

mod routh_hurwitz;

pub use routh_hurwitz::{characteristic_polynomial, routh_hurwitz_check, MAX_ROUTH_HURWITZ_DIM};

/// Eigenvalues must satisfy `Re(lambda) < -STABILITY_EPS` (in rate units).
pub const STABILITY_EPS: f64 = 1e-12;
/// Accepted relative Lyapunov residual `|AV + VA^T + Q|_F / |Q|_F`.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;
/// Largest dimension solved through the vectorized (Kronecker) system.
pub const KRONECKER_MAX_DIM: usize = 64;

/// Deflation tolerances tried in turn. nalgebra compares subdiagonal entries
/// with `eps * (|h_ii| + |h_jj|)`, which can stall when repeated eigenvalues
/// have real parts far smaller than the matrix norm (degenerate chains with
/// weak damping).
const SCHUR_TOLERANCES: [f64; 6] = [f64::EPSILON, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10];

fn schur<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Result<Schur<T, Dyn>> {
    let max_iter = 30 * m.nrows().max(1);
    SCHUR_TOLERANCES
        .iter()
        .find_map(|&eps| Schur::try_new(m.clone(), eps, max_iter))
        .ok_or(Error::EigenSolverFailed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest real part among the eigenvalues.
    pub margin: f64,
}

pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let mut ev: Vec<Complex<f64>> = schur(m)?.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Eigenvalue stability test of the drift matrix.
pub fn is_stable(a: &DriftMatrix) -> Result<StabilityReport> {
    let eigenvalues = eigenvalues(a.matrix())?;
    let margin = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !margin.is_finite() {
        return Err(Error::EigenSolverFailed);
    }
    Ok(StabilityReport {
        stable: margin < -STABILITY_EPS,
        eigenvalues,
        margin,
    })
}

/// Symmetric steady-state covariance `V_ij = <u_i u_j + u_j u_i> / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    n_mech: usize,
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn from_matrix(n_mech: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = 2 * (n_mech + 1);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch(dim, matrix.nrows()));
        }
        Ok(CovarianceMatrix { n_mech, matrix })
    }

    /// Thermal state of the uncoupled modes: `n_l + 1/2` on mechanical
    /// quadratures, vacuum `1/2` for the cavity.
    pub fn decoupled(cfg: &SystemConfig) -> Self {
        let mut d = DVector::from_element(cfg.dim(), 0.5);
        for (l, n) in cfg.nbar.iter().enumerate() {
            d[2 * l] = n + 0.5;
            d[2 * l + 1] = n + 0.5;
        }
        CovarianceMatrix {
            n_mech: cfg.n_mech,
            matrix: DMatrix::from_diagonal(&d),
        }
    }

    pub fn vacuum(n_mech: usize) -> Self {
        let dim = 2 * (n_mech + 1);
        CovarianceMatrix {
            n_mech,
            matrix: DMatrix::identity(dim, dim) * 0.5,
        }
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

    pub fn variance(&self, mode: Mode, quad: Quadrature) -> Result<f64> {
        let i = quadrature_index(self.n_mech, mode, quad)?;
        Ok(self.matrix[(i, i)])
    }

    /// The `2 x 2` block `[[var_x, cov_xy], [cov_xy, var_y]]` of one mode.
    pub fn mode_block(&self, mode: Mode) -> Result<[[f64; 2]; 2]> {
        let i = quadrature_index(self.n_mech, mode, Quadrature::X)?;
        let m = &self.matrix;
        Ok([
            [m[(i, i)], m[(i, i + 1)]],
            [m[(i + 1, i)], m[(i + 1, i + 1)]],
        ])
    }
}

/// `|A V + V A^T + Q|_F / |Q|_F`.
pub fn lyapunov_residual(a: &DriftMatrix, q: &NoiseMatrix, v: &CovarianceMatrix) -> f64 {
    let qm = q.to_matrix();
    let r = a.matrix() * v.matrix() + v.matrix() * a.matrix().transpose() + &qm;
    r.norm() / qm.norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovMethod {
    /// Dense LU of `(I (x) A + A (x) I) vec(V) = -vec(Q)`.
    Kronecker,
    /// Complex Schur form followed by triangular back substitution.
    Schur,
}

/// Kronecker-sum operator acting on column-major `vec(V)`: `vec(AV + VA^T)`.
pub(crate) fn lyapunov_operator(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut k = DMatrix::<f64>::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let row = j * d + i;
            for m in 0..d {
                // (A V)_{ij} = sum_m A_im V_mj
                k[(row, j * d + m)] += a[(i, m)];
                // (V A^T)_{ij} = sum_m V_im A_jm
                k[(row, m * d + i)] += a[(j, m)];
            }
        }
    }
    k
}

fn solve_kronecker(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let k = lyapunov_operator(a);
    let rhs = DVector::from_iterator(d * d, q.iter().map(|x| -x));
    let lu = k.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::IllConditioned {
        residual: f64::INFINITY,
    })?;
    // one step of iterative refinement
    let r = &rhs - &k * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(DMatrix::from_column_slice(d, d, x.as_slice()))
}

fn solve_schur(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let ac = a.map(|x| Complex::new(x, 0.0));
    let (u, t) = schur(&ac)?.unpack();
    let qc = q.map(|x| Complex::new(x, 0.0));
    let c = u.adjoint() * qc * &u;
    // T Y + Y T^H = -C with T upper triangular
    let mut y = DMatrix::<Complex<f64>>::zeros(d, d);
    for i in (0..d).rev() {
        for j in (0..d).rev() {
            let mut acc = -c[(i, j)];
            for k in i + 1..d {
                acc -= t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..d {
                acc -= y[(i, k)] * t[(j, k)].conj();
            }
            let denom = t[(i, i)] + t[(j, j)].conj();
            y[(i, j)] = acc / denom;
        }
    }
    let v = &u * y * u.adjoint();
    Ok(v.map(|z| z.re))
}

/// Solves `A V + V A^T = -Q` for a stable drift matrix, using the
/// Kronecker route up to [`KRONECKER_MAX_DIM`] and the Schur route above.
pub fn solve_lyapunov(a: &DriftMatrix, q: &NoiseMatrix) -> Result<CovarianceMatrix> {
    let method = if a.dim() <= KRONECKER_MAX_DIM {
        LyapunovMethod::Kronecker
    } else {
        LyapunovMethod::Schur
    };
    solve_lyapunov_with(a, q, method)
}

pub fn solve_lyapunov_with(
    a: &DriftMatrix,
    q: &NoiseMatrix,
    method: LyapunovMethod,
) -> Result<CovarianceMatrix> {
    if a.dim() != q.dim() {
        return Err(Error::ShapeMismatch(a.dim(), q.dim()));
    }
    let report = is_stable(a)?;
    if !report.stable {
        return Err(Error::Unstable {
            margin: report.margin,
        });
    }
    let qm = q.to_matrix();
    let raw = match method {
        LyapunovMethod::Kronecker => solve_kronecker(a.matrix(), &qm)?,
        LyapunovMethod::Schur => solve_schur(a.matrix(), &qm)?,
    };
    let sym = (&raw + raw.transpose()) * 0.5;
    let v = CovarianceMatrix {
        n_mech: a.n_mech(),
        matrix: sym,
    };
    let residual = lyapunov_residual(a, q, &v);
    if residual.is_nan() || residual >= LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::IllConditioned { residual });
    }
    Ok(v)
}

/// Settings for [`integrate_covariance_ode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Stop once `|dV/dt|_F < tol`.
    pub tol: f64,
    /// Step size as a fraction of `1 / spectral_radius(A)`.
    pub step_fraction: f64,
    /// Maximum number of step doublings; covers `2^max_doublings` steps.
    pub max_doublings: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            tol: 1e-12,
            step_fraction: 0.01,
            max_doublings: 96,
        }
    }
}

/// Integrates `dV/dt = AV + VA^T + Q` from `v0` with the classical
/// fixed-step RK4 scheme until the derivative norm drops below `opts.tol`.
///
/// On this linear, autonomous system one RK4 step of size `h` is the affine
/// map `v -> (I + D) v + c` with `Z = hK`, `R(Z) = I + Z/2 + Z^2/6 + Z^3/24`,
/// `D = Z R(Z)`, `c = h R(Z) q`, where `K` is the Kronecker-sum operator.
/// Composing the map with itself doubles the elapsed time:
/// `D' = 2D + D^2`, `c' = 2c + D c`. Carrying `D` instead of `I + D` keeps
/// the slow mechanical decay (`hK` of order 1e-7) representable. The
/// trajectory is sampled at `t = 2^k h`; no linear system is solved.
pub fn integrate_covariance_ode(
    a: &DriftMatrix,
    q: &NoiseMatrix,
    v0: &CovarianceMatrix,
    opts: OdeOptions,
) -> Result<CovarianceMatrix> {
    let d = a.dim();
    if q.dim() != d || v0.dim() != d {
        return Err(Error::ShapeMismatch(d, q.dim().min(v0.dim())));
    }
    let qm = q.to_matrix();
    let derivative =
        |v: &DMatrix<f64>| -> f64 { (a.matrix() * v + v * a.matrix().transpose() + &qm).norm() };

    let d0 = derivative(v0.matrix());
    if d0 < opts.tol {
        return Ok(v0.clone());
    }

    let report = is_stable(a)?;
    if !report.stable {
        return Err(Error::Unstable {
            margin: report.margin,
        });
    }
    let radius = report
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let h = opts.step_fraction / radius;

    let n = d * d;
    let z = lyapunov_operator(a.matrix()) * h;
    let z2 = &z * &z;
    let z3 = &z2 * &z;
    let r = DMatrix::<f64>::identity(n, n) + &z * 0.5 + &z2 * (1.0 / 6.0) + &z3 * (1.0 / 24.0);
    let qv = DVector::from_column_slice(qm.as_slice());
    let mut step_d = &z * &r;
    let mut step_c = (&r * qv) * h;
    let x0 = DVector::from_column_slice(v0.matrix().as_slice());

    let mut last = d0;
    for _ in 0..opts.max_doublings {
        let next_c = &step_c * 2.0 + &step_d * &step_c;
        let next_d = &step_d * 2.0 + &step_d * &step_d;
        step_c = next_c;
        step_d = next_d;

        let x = &x0 + &step_d * &x0 + &step_c;
        let vm = DMatrix::from_column_slice(d, d, x.as_slice());
        let vm = (&vm + vm.transpose()) * 0.5;
        last = derivative(&vm);
        if last < opts.tol {
            return Ok(CovarianceMatrix {
                n_mech: a.n_mech(),
                matrix: vm,
            });
        }
    }
    Err(Error::OdeBudgetExceeded {
        doublings: opts.max_doublings,
        derivative_norm: last,
        tol: opts.tol,
    })
}

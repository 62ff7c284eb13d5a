//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use dmsq::params::ParamPath;
use dmsq::presets::figure_preset;
use dmsq::sweep::{
    find_stability_boundary, find_threshold, run_sweep, Axis, ReportField, Scale, SweepResult,
    SweepSpec,
};
use dmsq_core::analysis::{
    cooperativity, dark_mode_census, evaluate, mechanical_normal_modes, normal_mode_covariance,
    physicality_check, DARK_MODE_TOL,
};
use dmsq_core::model::{build_drift_matrix, build_noise_matrix, validate_config};
use dmsq_core::steady_state::{
    integrate_covariance_ode, is_stable, lyapunov_residual, routh_hurwitz_check, solve_lyapunov,
    CovarianceMatrix, OdeOptions,
};
use dmsq_core::{Mode, Quadrature, SystemConfig, ValidatedConfig};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn s_y(m: usize) -> ReportField {
    ReportField::Squeezing(Mode::Mechanical(m), Quadrature::Y)
}

fn column(result: &SweepResult, field: ReportField) -> Vec<Option<f64>> {
    result
        .rows
        .iter()
        .map(|r| field.read(&result.outputs, r))
        .collect()
}

fn all_stable(result: &SweepResult, name: &str) -> Result<(), String> {
    let unstable = result.rows.iter().filter(|r| !r.stable).count();
    ensure!(unstable == 0, "{name}: {unstable} unstable grid points");
    Ok(())
}

fn panel(name: &str) -> SweepSpec {
    figure_preset(name).expect("known preset").remove(0).spec
}

fn chain(
    n: usize,
    coupling: f64,
    nbar: f64,
    eta: f64,
    theta: f64,
    gain: f64,
    phase: f64,
) -> ValidatedConfig {
    validate_config(
        SystemConfig::uniform_chain(n, 10.0, 1e-5, coupling, nbar, eta, theta)
            .with_opa(gain, phase),
    )
    .expect("valid config")
}

fn squeezing(cfg: &ValidatedConfig, mode: Mode, quad: Quadrature) -> Result<f64, String> {
    let state = evaluate(cfg).map_err(|e| e.to_string())?;
    let report = state.squeezing.ok_or("unexpectedly unstable")?;
    Ok(report.mode(mode).ok_or("missing mode")?.squeezing_db(quad))
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for gain in [0.1, 0.2, 0.3, 0.4, 0.45] {
        let cfg = chain(2, 0.0, 0.0, 0.0, 0.0, gain, PI);
        let s = squeezing(&cfg, Mode::Optical, Quadrature::X)?;
        let want = 10.0 * (1.0 + 2.0 * gain).log10();
        worst = worst.max((s - want).abs());
        ensure!(
            (s - want).abs() < 1e-9,
            "gain {gain}: S_X_a = {s}, closed form {want}"
        );
    }
    let spec = panel("fig2a");
    let result = run_sweep(&spec).map_err(|e| e.to_string())?;
    all_stable(&result, "fig2a")?;
    let col = column(
        &result,
        ReportField::Squeezing(Mode::Optical, Quadrature::X),
    );
    for w in col.windows(2) {
        ensure!(
            w[1].unwrap() > w[0].unwrap(),
            "fig2a S_X_a not strictly increasing"
        );
    }
    let k = spec.axes[0]
        .values
        .iter()
        .position(|&x| (x - 0.45).abs() < 1e-12)
        .ok_or("no 0.45 row")?;
    let at = col[k].unwrap();
    ensure!(
        (at - 2.7875360095282896).abs() < 1e-9,
        "fig2a at 0.45: {at}"
    );
    Ok(format!(
        "max |S - 10 log10(1 + 2 gain)| = {worst:.1e} dB; fig2a monotone, {at:.4} dB at gain 0.45"
    ))
}

fn argmax(values: &[f64], range: std::ops::RangeInclusive<usize>) -> usize {
    range
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty range")
}

fn criterion_2() -> Outcome {
    let spec = panel("fig4c-dmb");
    let base = &spec.base;
    ensure!(
        base.nbar == vec![10.0; 2]
            && base.coupling == vec![0.1; 2]
            && base.hop_strength == vec![0.1]
            && (base.opa_gain, base.opa_phase) == (0.45, PI),
        "fig4c preset does not carry the reference parameters"
    );
    let result = run_sweep(&spec).map_err(|e| e.to_string())?;
    all_stable(&result, "fig4c-dmb")?;
    let theta = &spec.axes[0].values;
    let step = theta[1] - theta[0];
    let near = |t: f64| {
        theta
            .iter()
            .position(|&x| (x - t).abs() < 1e-9)
            .expect("grid point")
    };
    let (i0, i_half, i_pi, i_2pi) = (near(0.0), near(PI / 2.0), near(PI), near(TAU));
    let mut peaks = Vec::new();
    for m in 0..2 {
        let col: Vec<f64> = column(&result, s_y(m))
            .into_iter()
            .map(Option::unwrap)
            .collect();
        for i in [i0, i_pi, i_2pi] {
            ensure!(
                col[i] <= 0.0,
                "S_Y_b{} = {} > 0 at theta = {}",
                m + 1,
                col[i],
                theta[i]
            );
        }
        ensure!(
            col[i_half] > 0.0,
            "S_Y_b{} = {} <= 0 at theta = pi/2",
            m + 1,
            col[i_half]
        );
        let first = argmax(&col, i0..=i_pi);
        let second = argmax(&col, i_pi..=i_2pi);
        ensure!(
            (theta[first] - PI / 2.0).abs() <= step + 1e-12,
            "S_Y_b{} peak on [0, pi] at {} not within a step of pi/2",
            m + 1,
            theta[first]
        );
        ensure!(
            (theta[second] - 1.5 * PI).abs() <= step + 1e-12,
            "S_Y_b{} peak on [pi, 2pi] at {} not within a step of 3pi/2",
            m + 1,
            theta[second]
        );
        peaks.push(col[i_half]);
    }
    Ok(format!(
        "S_Y <= 0 at 0, pi, 2pi; S_Y(pi/2) = {:.4} / {:.4} dB; peaks within one step of pi/2 and 3pi/2",
        peaks[0], peaks[1]
    ))
}

/// Crossing values frozen from this implementation (six significant digits).
const NBAR_STAR_DMU: f64 = 0.236385;
const NBAR_STAR_DMB: f64 = 130.824;

fn criterion_3() -> Outcome {
    let u = find_threshold(&panel("fig5a-dmu"), s_y(0), 0.0, 1e-4).map_err(|e| e.to_string())?;
    let b = find_threshold(&panel("fig5a-dmb"), s_y(0), 0.0, 1e-4).map_err(|e| e.to_string())?;
    let ratio = b / u;
    ensure!(
        (0.03..=0.3).contains(&u),
        "nbar*_DMU = {u} outside [0.03, 0.3]"
    );
    ensure!(
        (30.0..=300.0).contains(&b),
        "nbar*_DMB = {b} outside [30, 300]"
    );
    ensure!(
        (300.0..=3000.0).contains(&ratio),
        "ratio {ratio} outside [300, 3000]"
    );
    ensure!(
        ((u - NBAR_STAR_DMU) / NBAR_STAR_DMU).abs() < 1e-4,
        "nbar*_DMU = {u} drifted from {NBAR_STAR_DMU}"
    );
    ensure!(
        ((b - NBAR_STAR_DMB) / NBAR_STAR_DMB).abs() < 1e-4,
        "nbar*_DMB = {b} drifted from {NBAR_STAR_DMB}"
    );
    Ok(format!(
        "nbar*_DMU = {u:.6}, nbar*_DMB = {b:.3}, ratio = {ratio:.1}"
    ))
}

fn criterion_4() -> Outcome {
    let cfg = chain(2, 0.1, 10.0, 0.1, PI / 2.0, 0.45, PI);
    let c = cooperativity(&cfg, 0).map_err(|e| e.to_string())?;
    ensure!(
        c == 1000.0,
        "C(G = 0.1, gamma = 1e-5) = {c:?}, expected exactly 1000"
    );
    let dmu = run_sweep(&panel("fig5b-dmu")).map_err(|e| e.to_string())?;
    let dmb = run_sweep(&panel("fig5b-dmb")).map_err(|e| e.to_string())?;
    all_stable(&dmu, "fig5b-dmu")?;
    all_stable(&dmb, "fig5b-dmb")?;
    let mut dmu_max = f64::NEG_INFINITY;
    for m in 0..2 {
        for v in column(&dmu, s_y(m)) {
            let v = v.unwrap();
            dmu_max = dmu_max.max(v);
            ensure!(v <= 0.0, "DMU S_Y_b{} = {v} > 0", m + 1);
        }
        let col = column(&dmb, s_y(m));
        for w in col.windows(2) {
            ensure!(
                w[1].unwrap() > w[0].unwrap(),
                "DMB S_Y_b{} not increasing in C",
                m + 1
            );
        }
    }
    let c_axis = &dmb.rows;
    Ok(format!(
        "C = 1000 exactly; over C in [{}, {}]: DMU max S_Y = {dmu_max:.3} dB, DMB increasing to {:.3} dB",
        c_axis[0].params[0],
        c_axis[c_axis.len() - 1].params[0],
        column(&dmb, s_y(0)).last().unwrap().unwrap()
    ))
}

fn criterion_5() -> Outcome {
    let dmb = chain(4, 0.1, 10.0, 0.1, PI / 2.0, 0.45, PI);
    let no_opa = chain(4, 0.1, 10.0, 0.1, PI / 2.0, 0.0, PI);
    let dmu = chain(4, 0.1, 10.0, 0.0, 0.0, 0.45, PI);
    let mut s = Vec::new();
    for l in 0..4 {
        let v = squeezing(&dmb, Mode::Mechanical(l), Quadrature::Y)?;
        ensure!(v > 0.0, "DMB S_Y_b{} = {v} <= 0", l + 1);
        s.push(v);
        let v0 = squeezing(&no_opa, Mode::Mechanical(l), Quadrature::Y)?;
        ensure!(v0 <= 0.0, "opa_gain = 0: S_Y_b{} = {v0} > 0", l + 1);
        let vu = squeezing(&dmu, Mode::Mechanical(l), Quadrature::Y)?;
        ensure!(vu <= 0.0, "DMU: S_Y_b{} = {vu} > 0", l + 1);
    }
    let dark_dmu = dark_mode_census(&mechanical_normal_modes(&dmu), DARK_MODE_TOL)
        .map_err(|e| e.to_string())?;
    ensure!(
        dark_dmu.len() == 3,
        "eta = 0: {} dark modes, expected 3",
        dark_dmu.len()
    );
    let dark_dmb = dark_mode_census(&mechanical_normal_modes(&dmb), DARK_MODE_TOL)
        .map_err(|e| e.to_string())?;
    ensure!(
        dark_dmb.is_empty(),
        "theta_1 = pi/2: {} dark modes, expected 0",
        dark_dmb.len()
    );
    Ok(format!(
        "S_Y = [{:.3}, {:.3}, {:.3}, {:.3}] dB; <= 0 at gain 0 and eta 0; dark modes 3 / 0",
        s[0], s[1], s[2], s[3]
    ))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_config(rng: &mut ChaCha8Rng, n: usize) -> SystemConfig {
    let mut cfg = SystemConfig::uniform_chain(n, 10.0, 1e-5, 0.0, 0.0, 0.0, 0.0);
    for l in 0..n {
        cfg.gamma[l] = rng.random_range((1e-5f64).ln()..(1e-1f64).ln()).exp();
        cfg.coupling[l] = rng.random_range(0.0..0.3);
        cfg.nbar[l] = rng.random_range(0.0..20.0);
    }
    for l in 0..n - 1 {
        cfg.hop_strength[l] = rng.random_range(0.0..0.5);
        cfg.hop_phase[l] = rng.random_range(0.0..TAU);
    }
    cfg.opa_gain = rng.random_range(0.0..0.6);
    cfg.opa_phase = rng.random_range(0.0..TAU);
    cfg
}

fn criterion_6(stats: &mut Option<Vec<CovarianceMatrix>>) -> Outcome {
    let start = Instant::now();
    let mut rng = rng(2024);
    let mut worst_diff: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut covs = Vec::new();
    let mut per_n = [0usize; 4];
    while covs.len() < 100 {
        let n = 1 + covs.len() % 4;
        let cfg = validate_config(random_config(&mut rng, n)).map_err(|e| e.to_string())?;
        let a = build_drift_matrix(&cfg);
        if is_stable(&a).map_err(|e| e.to_string())?.margin >= -1e-9 {
            continue;
        }
        let q = build_noise_matrix(&cfg);
        let v = solve_lyapunov(&a, &q).map_err(|e| e.to_string())?;
        let res = lyapunov_residual(&a, &q, &v);
        let ode = integrate_covariance_ode(
            &a,
            &q,
            &CovarianceMatrix::decoupled(&cfg),
            OdeOptions::default(),
        )
        .map_err(|e| format!("config {}: {e}", covs.len()))?;
        let diff = (v.matrix() - ode.matrix()).norm();
        ensure!(
            diff < 1e-8,
            "config {}: |V_lyap - V_ode|_F = {diff:e}",
            covs.len()
        );
        ensure!(res < 1e-10, "config {}: residual {res:e} |Q|_F", covs.len());
        worst_diff = worst_diff.max(diff);
        worst_res = worst_res.max(res);
        per_n[n - 1] += 1;
        covs.push(v);
    }
    *stats = Some(covs);
    Ok(format!(
        "100 configs (N = 1..4: {per_n:?}): max |V_lyap - V_ode|_F = {worst_diff:.1e}, max residual = {worst_res:.1e} |Q|_F ({:.1} s)",
        start.elapsed().as_secs_f64()
    ))
}

/// Smallest eigenvalue of the Hermitian matrix `V + (i/2) J`, via its real
/// symmetric embedding `[[V, -J/2], [J/2, V]]`.
fn min_eig_v_plus_ij(v: &DMatrix<f64>) -> f64 {
    let n = v.nrows();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in (0..n).step_by(2) {
        j[(k, k + 1)] = 1.0;
        j[(k + 1, k)] = -1.0;
    }
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(v);
    m.view_mut((n, n), (n, n)).copy_from(v);
    m.view_mut((0, n), (n, n)).copy_from(&(-0.5 * &j));
    m.view_mut((n, 0), (n, n)).copy_from(&(0.5 * &j));
    SymmetricEigen::new(m).eigenvalues.min()
}

fn criterion_7(covs: &Option<Vec<CovarianceMatrix>>) -> Outcome {
    let covs = covs
        .as_ref()
        .ok_or("criterion 6 did not produce covariances")?;
    let mut worst_eig = f64::INFINITY;
    let mut worst_rs = f64::INFINITY;
    for (k, v) in covs.iter().enumerate() {
        let diag = physicality_check(v);
        ensure!(
            diag.passed,
            "config {k}: physicality check failed: {diag:?}"
        );
        let e = min_eig_v_plus_ij(v.matrix());
        ensure!(e >= -1e-10, "config {k}: min eig(V + iJ/2) = {e:e}");
        worst_eig = worst_eig.min(e);
        for mode in Mode::all(v.n_mech()) {
            let b = v.mode_block(mode).map_err(|e| e.to_string())?;
            let rs = b[0][0] * b[1][1] - b[0][1] * b[1][0];
            ensure!(rs >= 0.25 - 1e-10, "config {k}, mode {mode}: det = {rs}");
            ensure!(
                b[0][0] * b[1][1] >= 0.25 - 1e-10,
                "config {k}, mode {mode}: product below 1/4"
            );
            worst_rs = worst_rs.min(rs - 0.25);
        }
    }
    Ok(format!(
        "min eig(V + iJ/2) = {worst_eig:.2e}, min (det - 1/4) over modes = {worst_rs:.2e}"
    ))
}

fn criterion_8() -> Outcome {
    let base = SystemConfig::uniform_chain(2, 10.0, 1e-5, 0.0, 0.0, 0.0, 0.0).with_opa(0.0, PI);
    let axis =
        Axis::grid(ParamPath::OpaGain, 0.3, 0.7, 41, Scale::Linear).map_err(|e| e.to_string())?;
    let spec = SweepSpec::new(base, vec![axis], vec![Mode::Optical]);
    let x = find_stability_boundary(&spec, 1e-9).map_err(|e| e.to_string())?;
    ensure!((x - 0.5).abs() < 1e-6, "boundary at {x}");
    let mut rng = rng(99);
    let (mut checked, mut stable, mut skipped) = (0, 0, 0);
    while checked < 200 {
        let n = 1 + checked % 4;
        let cfg = validate_config(random_config(&mut rng, n)).map_err(|e| e.to_string())?;
        let a = build_drift_matrix(&cfg);
        let r = is_stable(&a).map_err(|e| e.to_string())?;
        if r.margin.abs() <= 1e-9 {
            skipped += 1;
            continue;
        }
        let rh = routh_hurwitz_check(&a).map_err(|e| e.to_string())?;
        ensure!(
            rh == r.stable,
            "config {checked}: eigen {} vs Routh-Hurwitz {rh} (margin {:e})",
            r.stable,
            r.margin
        );
        checked += 1;
        stable += usize::from(r.stable);
    }
    ensure!(
        stable > 0 && stable < 200,
        "sample is one-sided ({stable} stable)"
    );
    Ok(format!(
        "boundary at {x:.10} (|err| = {:.1e}); 200 configs agree ({stable} stable, {} unstable, {skipped} near-marginal skipped)",
        (x - 0.5).abs(),
        200 - stable
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let n = 1 + k % 4;
        let mut cfg = random_config(&mut rng, n);
        cfg.coupling.iter_mut().for_each(|g| *g = 0.0);
        cfg.hop_strength.iter_mut().for_each(|e| *e = 0.0);
        cfg.opa_gain = 0.0;
        let want: Vec<f64> = cfg
            .nbar
            .iter()
            .flat_map(|n| [n + 0.5, n + 0.5])
            .chain([0.5, 0.5])
            .collect();
        let cfg = validate_config(cfg).map_err(|e| e.to_string())?;
        let v = evaluate(&cfg)
            .map_err(|e| e.to_string())?
            .covariance
            .ok_or("unstable")?;
        let mut expected = DMatrix::<f64>::zeros(want.len(), want.len());
        for (i, w) in want.iter().enumerate() {
            expected[(i, i)] = *w;
        }
        let err = (v.matrix() - expected).amax();
        worst = worst.max(err);
        ensure!(err < 1e-12, "decoupled config {k}: max deviation {err:e}");
    }
    let nbar = 7.0;
    let mut worst_dark: f64 = 0.0;
    for theta in [0.0, PI, TAU] {
        let cfg = chain(2, 0.1, nbar, 0.1, theta, 0.45, PI);
        let d = mechanical_normal_modes(&cfg);
        let dark = dark_mode_census(&d, DARK_MODE_TOL).map_err(|e| e.to_string())?;
        ensure!(
            dark.len() == 1,
            "theta = {theta}: {} dark modes",
            dark.len()
        );
        let v = evaluate(&cfg)
            .map_err(|e| e.to_string())?
            .covariance
            .ok_or("unstable")?;
        let nm = normal_mode_covariance(&d, &v).map_err(|e| e.to_string())?;
        let j = dark[0];
        let block = nm.view((2 * j, 2 * j), (2, 2)).into_owned();
        let err = (block - DMatrix::<f64>::identity(2, 2) * (nbar + 0.5)).amax();
        worst_dark = worst_dark.max(err);
        ensure!(
            err < 1e-8,
            "theta = {theta}: dark block deviates by {err:e}"
        );
    }
    Ok(format!(
        "decoupled: max deviation {worst:.1e}; dark-mode block = (nbar + 1/2) I to {worst_dark:.1e}"
    ))
}

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..41 {
        let theta = TAU * k as f64 / 40.0;
        let a = chain(2, 0.1, 10.0, 0.1, theta, 0.45, PI);
        let b = chain(2, 0.1, 10.0, 0.1, TAU - theta, 0.45, PI);
        let s1 = squeezing(&a, Mode::Mechanical(0), Quadrature::Y)?;
        let s2 = squeezing(&b, Mode::Mechanical(1), Quadrature::Y)?;
        worst = worst.max((s1 - s2).abs());
        ensure!((s1 - s2).abs() < 1e-10, "theta = {theta}: {s1} vs {s2}");
    }
    Ok(format!(
        "max |S_Y_b1(theta) - S_Y_b2(2pi - theta)| = {worst:.1e} dB over 41 points"
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut covs = None;
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "optical squeezing from the OPA alone", criterion_1()),
        (
            2,
            "dark-mode kill switch in the hopping phase",
            criterion_2(),
        ),
        (3, "fragile-to-robust thermal thresholds", criterion_3()),
        (4, "cooperativity and its sweep", criterion_4()),
        (5, "four-mode chain", criterion_5()),
        (6, "Lyapunov vs covariance ODE", criterion_6(&mut covs)),
        (7, "physicality of steady states", criterion_7(&covs)),
        (8, "stability boundary and Routh-Hurwitz", criterion_8()),
        (9, "analytic fixed points", criterion_9()),
        (10, "mode-exchange symmetry", criterion_10()),
    ];
    let mut failed = 0;
    for (n, title, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {title}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

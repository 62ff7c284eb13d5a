#![allow(dead_code)]

use std::f64::consts::TAU;

use dmsq_core::model::{build_drift_matrix, build_noise_matrix, validate_config};
use dmsq_core::steady_state::is_stable;
use dmsq_core::{SystemConfig, ValidatedConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random configuration in the resolved-sideband regime; may be unstable.
pub fn random_config(rng: &mut ChaCha8Rng, n_mech: usize) -> SystemConfig {
    let mut cfg = SystemConfig::uniform_chain(n_mech, 10.0, 1e-5, 0.0, 0.0, 0.0, 0.0);
    for l in 0..n_mech {
        cfg.omega[l] = 10.0;
        cfg.gamma[l] = log_uniform(rng, 1e-5, 1e-1);
        cfg.coupling[l] = rng.random_range(0.0..0.3);
        cfg.nbar[l] = rng.random_range(0.0..20.0);
    }
    for l in 0..n_mech.saturating_sub(1) {
        cfg.hop_strength[l] = rng.random_range(0.0..0.5);
        cfg.hop_phase[l] = rng.random_range(0.0..TAU);
    }
    cfg.opa_gain = rng.random_range(0.0..0.6);
    cfg.opa_phase = rng.random_range(0.0..TAU);
    cfg
}

/// Draws until a configuration is stable with a clear margin.
pub fn random_stable_config(rng: &mut ChaCha8Rng, n_mech: usize) -> ValidatedConfig {
    loop {
        let v = validate_config(random_config(rng, n_mech)).unwrap();
        let r = is_stable(&build_drift_matrix(&v)).unwrap();
        if r.margin < -1e-9 {
            let _ = build_noise_matrix(&v);
            return v;
        }
    }
}

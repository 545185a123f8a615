//! End-to-end checks of the encoding identities: shift invariance, the
//! closed-form distance, norm constancy and harmonic compatibility.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{verify_periodicity, scorer_output, CompatibilitySystem, TemporalEncoderConfig};
use crate::error::Result;

fn d_samples() -> usize {
    1000
}
fn d_max_index() -> u64 {
    1_000_000
}
fn d_dim() -> usize {
    64
}
fn d_beta() -> f64 {
    10_000.0
}
fn d_horizon() -> usize {
    12
}
fn d_periods() -> Vec<usize> {
    vec![2, 3, 4, 6]
}
fn d_compat_dim() -> usize {
    16
}
fn d_targets() -> usize {
    20
}
fn d_tolerance() -> f64 {
    1e-6
}
fn d_periodicity_horizon() -> usize {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_max_index")]
    pub max_index: u64,
    /// Geometric encoding used for the distance checks.
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "d_beta")]
    pub beta: f64,
    /// Compatibility window `T`; the harmonic period is `lcm(periods)`.
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_periods")]
    pub periods: Vec<usize>,
    #[serde(default = "d_compat_dim")]
    pub compat_dim: usize,
    #[serde(default = "d_targets")]
    pub targets_per_period: usize,
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    #[serde(default = "d_periodicity_horizon")]
    pub periodicity_horizon: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
    pub note: String,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, bound: f64, note: impl Into<String>) -> Self {
        Self {
            name,
            measured,
            bound,
            passed: measured <= bound,
            note: note.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(s, "[{tag}] {:<24} measured {:.3e} bound {:.1e}  {}", c.name, c.measured, c.bound, c.note).unwrap();
        }
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            writeln!(s, "{}.measured={:e}", c.name, c.measured).unwrap();
            writeln!(s, "{}.bound={:e}", c.name, c.bound).unwrap();
            writeln!(s, "{}.passed={}", c.name, c.passed).unwrap();
        }
        writeln!(s, "all_passed={}", self.all_passed()).unwrap();
        s
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Non-constant integer sequence of the given period, tiled over `horizon`.
pub fn random_periodic_target(rng: &mut impl Rng, period: usize, horizon: usize) -> Vec<f64> {
    loop {
        let base: Vec<f64> = (0..period).map(|_| rng.gen_range(-5..=5) as f64).collect();
        if period == 1 || base.iter().any(|&v| v != base[0]) {
            return (0..horizon).map(|t| base[t % period]).collect();
        }
    }
}

/// Run every check. Each check's pass/fail is reported, never raised.
pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let geo = TemporalEncoderConfig::geometric(config.dim, config.beta)?;
    let (mut shift, mut closed) = (0.0f64, 0.0f64);
    for _ in 0..config.samples {
        let i = rng.gen_range(0..=config.max_index);
        let j = rng.gen_range(0..=config.max_index);
        let s = rng.gen_range(0..=config.max_index);
        let base = geo.squared_distance(i, j);
        let moved = geo.squared_distance(i + s, j + s);
        shift = shift.max((moved - base).abs() / base.max(1.0));
        let cf = geo.closed_form_distance(i, j);
        closed = closed.max((base - cf).abs() / cf.abs().max(f64::MIN_POSITIVE));
    }
    let mut norm = 0.0f64;
    for _ in 0..config.samples {
        let i = rng.gen_range(0..=config.max_index);
        let n: f64 = geo.encode(i).iter().map(|x| x * x).sum();
        norm = norm.max((n - config.dim as f64 / 2.0).abs());
    }
    let mut checks = vec![
        Check::at_most("shift_invariance", shift, 1e-9, format!("{} samples, indices <= {}", config.samples, config.max_index)),
        Check::at_most("closed_form_distance", closed, 1e-9, "relative error"),
        Check::at_most("norm_constancy", norm, 1e-12, "| ||TE(i)||^2 - d/2 |"),
    ];

    let period = config.periods.iter().copied().fold(1, lcm);
    let k: Vec<i64> = (0..config.compat_dim as i64 / 2).collect();
    let harmonic = TemporalEncoderConfig::harmonic(period as u64, &k, config.compat_dim)?;
    let (mut b_max, mut residual, mut periodic, mut interp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut infeasible = 0;
    for _ in 0..config.targets_per_period {
        let targets: Vec<Vec<f64>> = config
            .periods
            .iter()
            .map(|&p| random_periodic_target(&mut rng, p, config.horizon))
            .collect();
        let system = CompatibilitySystem::build(&harmonic, config.horizon, &config.periods, &targets)?;
        b_max = b_max.max(system.max_difference_entry());
        let outcome = system.solve(config.tolerance);
        residual = residual.max(outcome.residual());
        match outcome {
            super::CompatibilityOutcome::Feasible { blocks, .. } => {
                for ((w, &p), g) in blocks.iter().zip(&config.periods).zip(&targets) {
                    periodic = periodic.max(verify_periodicity(w, &harmonic, p, config.periodicity_horizon));
                    for (t, &gt) in g.iter().enumerate() {
                        interp = interp.max((scorer_output(w, &harmonic, t as u64) - gt).abs());
                    }
                }
            }
            super::CompatibilityOutcome::Infeasible { .. } => {
                infeasible += 1;
                periodic = f64::INFINITY;
            }
        }
    }
    let setup = format!(
        "T={} P={:?} L={period} d={} k_n=n, {} targets per period",
        config.horizon, config.periods, config.compat_dim, config.targets_per_period
    );
    checks.push(Check::at_most(
        "difference_matrices_zero",
        b_max,
        1e-12,
        format!("{setup}; B_i vanishes only when L | k_n P_i for all n"),
    ));
    checks.push(Check::at_most(
        "compat_residual",
        residual,
        config.tolerance,
        format!("{infeasible} infeasible systems"),
    ));
    checks.push(Check::at_most("compat_periodicity", periodic, 1e-5, format!("horizon {}", config.periodicity_horizon)));
    checks.push(Check::at_most("compat_interpolation", interp, config.tolerance, "max |w.TE(t) - g(t)| on the window"));
    Ok(VerifyReport { checks })
}

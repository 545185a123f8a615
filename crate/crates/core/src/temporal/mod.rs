//! Sinusoidal encodings of snapshot indices.
//!
//! `TE(i)[2n] = sin(w_n i)` and `TE(i)[2n + 1] = cos(w_n i)`. The frequency
//! family is geometric (`w_n = beta^(-2n / d)`), harmonically aligned
//! (`w_n = 2 pi k_n / L`) or given explicitly.

mod compat;
pub mod verify;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compat::{
    min_norm_least_squares, scorer_output, verify_periodicity, CompatibilityOutcome,
    CompatibilitySystem,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrequencyMode {
    Geometric { beta: f64 },
    Harmonic { period: u64, multipliers: Vec<i64> },
    Explicit { omegas: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalEncoderConfig {
    pub dim: usize,
    pub mode: FrequencyMode,
    #[serde(default)]
    pub trainable: bool,
}

fn check_even(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::DimensionMismatch(format!(
            "encoding dimension must be even and positive, got {dim}"
        )));
    }
    Ok(())
}

impl TemporalEncoderConfig {
    pub fn geometric(dim: usize, beta: f64) -> Result<Self> {
        check_even(dim)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(Self {
            dim,
            mode: FrequencyMode::Geometric { beta },
            trainable: false,
        })
    }

    /// Frequencies `2 pi k_n / period`, making the encoding `period`-periodic.
    pub fn harmonic(period: u64, multipliers: &[i64], dim: usize) -> Result<Self> {
        check_even(dim)?;
        if period == 0 {
            return Err(Error::Config("harmonic period must be >= 1".into()));
        }
        if multipliers.len() != dim / 2 {
            return Err(Error::DimensionMismatch(format!(
                "need {} harmonic multipliers, got {}",
                dim / 2,
                multipliers.len()
            )));
        }
        Ok(Self {
            dim,
            mode: FrequencyMode::Harmonic {
                period,
                multipliers: multipliers.to_vec(),
            },
            trainable: false,
        })
    }

    pub fn explicit(omegas: &[f64]) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::DimensionMismatch("no frequencies given".into()));
        }
        Ok(Self {
            dim: 2 * omegas.len(),
            mode: FrequencyMode::Explicit {
                omegas: omegas.to_vec(),
            },
            trainable: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.mode {
            FrequencyMode::Geometric { beta } => Self::geometric(self.dim, *beta).map(|_| ()),
            FrequencyMode::Harmonic {
                period,
                multipliers,
            } => Self::harmonic(*period, multipliers, self.dim).map(|_| ()),
            FrequencyMode::Explicit { omegas } => {
                if omegas.len() * 2 != self.dim {
                    return Err(Error::DimensionMismatch(format!(
                        "{} explicit frequencies for dimension {}",
                        omegas.len(),
                        self.dim
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn frequency_count(&self) -> usize {
        self.dim / 2
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let half = self.dim / 2;
        match &self.mode {
            FrequencyMode::Geometric { beta } => (0..half)
                .map(|n| beta.powf(-2.0 * n as f64 / self.dim as f64))
                .collect(),
            FrequencyMode::Harmonic {
                period,
                multipliers,
            } => multipliers
                .iter()
                .map(|&k| 2.0 * PI * k as f64 / *period as f64)
                .collect(),
            FrequencyMode::Explicit { omegas } => omegas.clone(),
        }
    }

    /// `TE(i)` with interleaved sin/cos layout.
    pub fn encode(&self, i: u64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        self.encode_into(i, &mut out);
        out
    }

    fn encode_into(&self, i: u64, out: &mut Vec<f64>) {
        match &self.mode {
            FrequencyMode::Harmonic {
                period,
                multipliers,
            } => {
                // Reduce k * i modulo L exactly so TE(i + L) == TE(i) bitwise.
                let l = *period as i128;
                for &k in multipliers {
                    let r = (k as i128 * i as i128).rem_euclid(l);
                    let angle = 2.0 * PI * r as f64 / l as f64;
                    let (s, c) = angle.sin_cos();
                    out.push(s);
                    out.push(c);
                }
            }
            _ => {
                let t = i as f64;
                for w in self.frequencies() {
                    // Carry the rounding error of w * t as a first-order correction.
                    let hi = w * t;
                    let lo = w.mul_add(t, -hi);
                    let (s, c) = hi.sin_cos();
                    out.push(s + lo * c);
                    out.push(c - lo * s);
                }
            }
        }
    }

    /// Row-major `count x dim` table of `TE(0) .. TE(count - 1)`.
    pub fn table(&self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count * self.dim);
        for i in 0..count {
            self.encode_into(i as u64, &mut out);
        }
        out
    }

    /// `||TE(i) - TE(j)||^2`, computed from the encoded vectors.
    pub fn squared_distance(&self, i: u64, j: u64) -> f64 {
        self.encode(i)
            .iter()
            .zip(self.encode(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `4 * sum_n sin^2(w_n (i - j) / 2)`.
    pub fn closed_form_distance(&self, i: u64, j: u64) -> f64 {
        let delta = i as f64 - j as f64;
        self.frequencies()
            .iter()
            .map(|w| {
                let s = (w * delta / 2.0).sin();
                4.0 * s * s
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_encoding() {
        let c = TemporalEncoderConfig::geometric(8, 10_000.0).unwrap();
        assert_eq!(c.encode(0), vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(c.encode(1)[0], 1f64.sin());
    }

    #[test]
    fn norm_is_constant() {
        let c = TemporalEncoderConfig::geometric(64, 10_000.0).unwrap();
        for i in [0u64, 1, 17, 365, 4017, 1_000_000] {
            let n: f64 = c.encode(i).iter().map(|x| x * x).sum();
            assert!((n - 32.0).abs() <= 1e-12, "{i}: {n}");
        }
    }

    #[test]
    fn distance_examples() {
        let c = TemporalEncoderConfig::geometric(16, 10_000.0).unwrap();
        assert_eq!(c.squared_distance(42, 42), 0.0);
        let pi = TemporalEncoderConfig::explicit(&[PI]).unwrap();
        assert!((pi.closed_form_distance(1, 0) - 4.0).abs() < 1e-15);
        assert!((pi.squared_distance(1, 0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_is_periodic() {
        let k: Vec<i64> = (0..8).collect();
        let c = TemporalEncoderConfig::harmonic(12, &k, 16).unwrap();
        assert_eq!(c.encode(0), c.encode(12));
        assert_eq!(c.encode(5), c.encode(5 + 12 * 1000));
        // k = 0 column pair: sin 0, cos 1
        for i in 0..30 {
            let e = c.encode(i);
            assert_eq!((e[0], e[1]), (0.0, 1.0));
        }
    }

    #[test]
    fn half_period_needs_even_multipliers() {
        let even: Vec<i64> = (0..8).map(|n| 2 * n).collect();
        let c = TemporalEncoderConfig::harmonic(12, &even, 16).unwrap();
        for t in 0..24 {
            let (a, b) = (c.encode(t), c.encode(t + 6));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let all: Vec<i64> = (0..8).collect();
        let c = TemporalEncoderConfig::harmonic(12, &all, 16).unwrap();
        let gap = c
            .encode(1)
            .iter()
            .zip(c.encode(7))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap > 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(TemporalEncoderConfig::geometric(7, 10.0).is_err());
        assert!(TemporalEncoderConfig::harmonic(12, &[1, 2], 6).is_err());
        assert!(TemporalEncoderConfig::geometric(4, -1.0).is_err());
    }
}

//! Compatibility systems for periodic affine scorers over sinusoidal
//! encodings.
//!
//! For periods `P_i | T` and targets `g_i` on the window `0..T`, a block
//! `w_i` must satisfy `M w_i = g_i` (interpolation) and `B_i w_i = 0`
//! (`P_i`-periodicity), where row `t` of `M` is `TE(t)` and row `t` of `B_i`
//! is `TE(t + P_i) - TE(t)`. Blocks are independent, so the stacked system
//! is solved block by block.

use nalgebra::{DMatrix, DVector};

use super::TemporalEncoderConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CompatibilitySystem {
    pub horizon: usize,
    pub periods: Vec<usize>,
    /// `T x d` interpolation matrix.
    pub encoding: DMatrix<f64>,
    /// One `T x d` periodicity matrix per period.
    pub differences: Vec<DMatrix<f64>>,
    pub targets: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CompatibilityOutcome {
    /// `blocks[i]` is the scorer column for period `i`.
    Feasible { blocks: Vec<Vec<f64>>, residual: f64 },
    Infeasible { residual: f64 },
}

impl CompatibilityOutcome {
    pub fn residual(&self) -> f64 {
        match self {
            Self::Feasible { residual, .. } | Self::Infeasible { residual } => *residual,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }
}

fn encoding_rows(config: &TemporalEncoderConfig, start: usize, count: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(count, config.dim);
    for r in 0..count {
        for (c, v) in config.encode((start + r) as u64).into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

impl CompatibilitySystem {
    /// Validate the inputs and assemble the system.
    pub fn build(
        config: &TemporalEncoderConfig,
        horizon: usize,
        periods: &[usize],
        targets: &[Vec<f64>],
    ) -> Result<Self> {
        for (i, g) in targets.iter().enumerate() {
            if g.iter().all(|&x| x == g[0]) {
                return Err(Error::ConstantTarget(i));
            }
        }
        Self::assemble(config, horizon, periods, targets)
    }

    /// Assemble without the non-constant target requirement.
    pub fn assemble(
        config: &TemporalEncoderConfig,
        horizon: usize,
        periods: &[usize],
        targets: &[Vec<f64>],
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if periods.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} periods but {} targets",
                periods.len(),
                targets.len()
            )));
        }
        for (index, &period) in periods.iter().enumerate() {
            if period == 0 || !horizon.is_multiple_of(period) {
                return Err(Error::PeriodNotDividing {
                    index,
                    period,
                    horizon,
                });
            }
            if targets[index].len() != horizon {
                return Err(Error::DimensionMismatch(format!(
                    "target {index} has length {}, expected {horizon}",
                    targets[index].len()
                )));
            }
        }
        let encoding = encoding_rows(config, 0, horizon);
        let differences = periods
            .iter()
            .map(|&p| encoding_rows(config, p, horizon) - &encoding)
            .collect();
        Ok(Self {
            horizon,
            periods: periods.to_vec(),
            encoding,
            differences,
            targets: targets.to_vec(),
        })
    }

    pub fn block_count(&self) -> usize {
        self.periods.len()
    }

    /// The full `2mT x md` matrix `[I_m (x) M ; diag(B_1 .. B_m)]`.
    pub fn stacked_matrix(&self) -> DMatrix<f64> {
        let (t, d, m) = (self.horizon, self.encoding.ncols(), self.block_count());
        let mut a = DMatrix::zeros(2 * m * t, m * d);
        for i in 0..m {
            a.view_mut((i * t, i * d), (t, d)).copy_from(&self.encoding);
            a.view_mut((m * t + i * t, i * d), (t, d))
                .copy_from(&self.differences[i]);
        }
        a
    }

    /// `[g_1; ..; g_m; 0]`.
    pub fn stacked_rhs(&self) -> DVector<f64> {
        let t = self.horizon;
        let m = self.block_count();
        let mut b = DVector::zeros(2 * m * t);
        for (i, g) in self.targets.iter().enumerate() {
            for (k, v) in g.iter().enumerate() {
                b[i * t + k] = *v;
            }
        }
        b
    }

    /// Largest `|B_i|` entry over all blocks.
    pub fn max_difference_entry(&self) -> f64 {
        self.differences
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Minimum-norm least-squares solve, block by block. Blocks whose
    /// periodicity matrix vanishes reduce to `M w_i = g_i`.
    pub fn solve(&self, tolerance: f64) -> CompatibilityOutcome {
        let mut blocks = Vec::with_capacity(self.block_count());
        let mut sq = 0.0;
        for (b, g) in self.differences.iter().zip(&self.targets) {
            let rhs_g = DVector::from_column_slice(g);
            let (a, rhs) = if b.iter().all(|&v| v == 0.0) {
                (self.encoding.clone(), rhs_g)
            } else {
                let t = self.horizon;
                let mut a = DMatrix::zeros(2 * t, self.encoding.ncols());
                a.view_mut((0, 0), (t, a.ncols())).copy_from(&self.encoding);
                a.view_mut((t, 0), (t, b.ncols())).copy_from(b);
                let mut rhs = DVector::zeros(2 * t);
                rhs.rows_mut(0, t).copy_from(&rhs_g);
                (a, rhs)
            };
            let Some(w) = min_norm_least_squares(&a, &rhs) else {
                return CompatibilityOutcome::Infeasible {
                    residual: f64::INFINITY,
                };
            };
            // Residual of the full block, including rows dropped in the
            // reduced case (they are identically zero there).
            let r_interp = (&self.encoding * &w - DVector::from_column_slice(g)).norm_squared();
            let r_period = (b * &w).norm_squared();
            sq += r_interp + r_period;
            blocks.push(w.iter().copied().collect());
        }
        let residual = sq.sqrt();
        if !residual.is_finite() {
            return CompatibilityOutcome::Infeasible {
                residual: f64::INFINITY,
            };
        }
        if residual <= tolerance {
            CompatibilityOutcome::Feasible { blocks, residual }
        } else {
            CompatibilityOutcome::Infeasible { residual }
        }
    }
}

/// Minimum-norm least-squares solution of `a x = b` via SVD, or `None` on
/// numerical failure.
pub fn min_norm_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().try_svd(true, true, f64::EPSILON, 0)?;
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let cutoff = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let x = svd.solve(b, cutoff).ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `w . TE(tau)`.
pub fn scorer_output(w: &[f64], config: &TemporalEncoderConfig, tau: u64) -> f64 {
    w.iter().zip(config.encode(tau)).map(|(a, b)| a * b).sum()
}

/// `max_{0 <= tau < horizon} |w . TE(tau + P) - w . TE(tau)|`.
pub fn verify_periodicity(
    w: &[f64],
    config: &TemporalEncoderConfig,
    period: usize,
    horizon: usize,
) -> f64 {
    (0..horizon as u64)
        .map(|tau| {
            (scorer_output(w, config, tau + period as u64) - scorer_output(w, config, tau)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn harmonic16() -> TemporalEncoderConfig {
        let k: Vec<i64> = (0..8).collect();
        TemporalEncoderConfig::harmonic(12, &k, 16).unwrap()
    }

    fn periodic_target(rng: &mut ChaCha8Rng, period: usize, horizon: usize) -> Vec<f64> {
        loop {
            let base: Vec<f64> = (0..period).map(|_| rng.gen_range(-5..=5) as f64).collect();
            if base.iter().any(|&v| v != base[0]) {
                return (0..horizon).map(|t| base[t % period]).collect();
            }
        }
    }

    #[test]
    fn shapes_and_errors() {
        let c = harmonic16();
        let s = CompatibilitySystem::build(&c, 2, &[2], &[vec![0.0, 1.0]]).unwrap();
        assert_eq!(s.encoding.nrows(), 2);
        assert_eq!(s.differences[0].nrows(), 2);
        assert!(matches!(
            CompatibilitySystem::build(&c, 4, &[3], &[vec![0.0, 1.0, 2.0, 3.0]]),
            Err(Error::PeriodNotDividing { index: 0, .. })
        ));
        assert!(matches!(
            CompatibilitySystem::build(&c, 4, &[2], &[vec![1.0; 4]]),
            Err(Error::ConstantTarget(0))
        ));
    }

    #[test]
    fn harmonic_periodic_targets_are_solvable() {
        let c = harmonic16();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let periods = [2, 3, 4, 6];
        let targets: Vec<_> = periods.iter().map(|&p| periodic_target(&mut rng, p, 12)).collect();
        let s = CompatibilitySystem::build(&c, 12, &periods, &targets).unwrap();
        let out = s.solve(1e-6);
        let CompatibilityOutcome::Feasible { blocks, residual } = out else {
            panic!("expected feasible, residual {}", out.residual());
        };
        assert!(residual <= 1e-6);
        for (i, w) in blocks.iter().enumerate() {
            assert!(verify_periodicity(w, &c, periods[i], 60) <= 1e-8);
            for tau in 0..12 {
                assert!((scorer_output(w, &c, tau as u64) - targets[i][tau]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn differences_vanish_only_for_full_periods() {
        // An L-periodic encoding is P-periodic only when L divides k_n * P
        // for every n; with k_n = n that means P = L.
        let c = harmonic16();
        let s = CompatibilitySystem::build(&c, 12, &[12], &[(0..12).map(|v| v as f64).collect()])
            .unwrap();
        assert_eq!(s.max_difference_entry(), 0.0);
        let s = CompatibilitySystem::build(&c, 12, &[6], &[(0..12).map(|v| (v % 6) as f64).collect()])
            .unwrap();
        assert!(s.max_difference_entry() > 0.5);
        let even: Vec<i64> = (0..8).map(|n| 2 * n).collect();
        let c2 = TemporalEncoderConfig::harmonic(12, &even, 16).unwrap();
        let s = CompatibilitySystem::build(&c2, 12, &[6], &[(0..12).map(|v| (v % 6) as f64).collect()])
            .unwrap();
        assert_eq!(s.max_difference_entry(), 0.0);
    }

    #[test]
    fn non_periodic_target_is_infeasible() {
        let c = harmonic16();
        let g: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let s = CompatibilitySystem::build(&c, 12, &[3], &[g]).unwrap();
        assert!(!s.solve(1e-6).is_feasible());
    }

    #[test]
    fn constant_target_uses_dc_column() {
        let c = harmonic16();
        let s = CompatibilitySystem::assemble(&c, 12, &[3], &[vec![2.5; 12]]).unwrap();
        let out = s.solve(1e-9);
        assert!(out.is_feasible());
        assert!(out.residual() < 1e-12);
    }

    #[test]
    fn svd_matches_normal_equations_route() {
        // M is 12 x 16 with full row rank, so x = M^T (M M^T)^-1 g is the
        // minimum-norm solution.
        let c = harmonic16();
        let s = CompatibilitySystem::assemble(&c, 12, &[12], &[(0..12).map(|v| v as f64).collect()])
            .unwrap();
        let m = &s.encoding;
        let g = DVector::from_column_slice(&s.targets[0]);
        let gram = m * m.transpose();
        let via_inverse = m.transpose() * gram.try_inverse().unwrap() * &g;
        let via_svd = min_norm_least_squares(m, &g).unwrap();
        assert!((via_inverse - via_svd).amax() < 1e-9);
    }

    #[test]
    fn geometric_frequencies_break_periodic_fit() {
        let c = TemporalEncoderConfig::geometric(16, 10_000.0).unwrap();
        let target: Vec<f64> = (0..12).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = CompatibilitySystem::build(&c, 12, &[2], &[target]).unwrap();
        let out = s.solve(1e-9);
        assert!(!out.is_feasible(), "residual {}", out.residual());
        assert!(out.residual() > 1e-3);
    }

    #[test]
    fn periodicity_trivial_cases() {
        let c = harmonic16();
        assert_eq!(verify_periodicity(&[0.0; 16], &c, 4, 48), 0.0);
        let mut w = vec![0.0; 16];
        w[3] = 1.0; // cos column, k = 1
        assert!(verify_periodicity(&w, &c, 12, 60) < 1e-12);
    }
}

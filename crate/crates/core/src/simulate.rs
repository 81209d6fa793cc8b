//! Exact sampling of `V_t = Σ_{j ≤ ν_t} π_j x_j`.
//!
//! One draw composes: a geometric collision count `ν_t`, a McKean tree from
//! `p_{ν_t}`, i.i.d. uniform angles for its internal nodes, and i.i.d. initial
//! velocities for its leaves. Only the coordinates a draw consumes are
//! generated.
//!
//! Batches are reproducible: draw `i` of a batch with master seed `s` uses
//! its own ChaCha8 stream (key from `s`, stream id `i`), so the output does
//! not depend on how draws are grouped into chunks or on thread count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{coefficients_into, AngleVector};
use crate::error::{Error, Result};
use crate::law::InitialLaw;
use crate::scalar::Real;
use crate::tree::sample_tree;

/// Default leaf cap for one draw.
pub const DEFAULT_NU_CAP: u64 = 10_000_000;

/// Default number of draws per scheduling chunk.
pub const DEFAULT_CHUNK_SIZE: usize = 1024;

/// `ν_t`, the number of leaves of the tree behind one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CollisionCount(u64);

impl CollisionCount {
    pub fn value(self) -> u64 {
        self.0
    }
}

/// `q_t(n) = e^{-t}(1 - e^{-t})^{n-1}`.
pub fn collision_probability(t: f64, n: u64) -> f64 {
    assert!(n >= 1);
    if t == 0.0 {
        return if n == 1 { 1.0 } else { 0.0 };
    }
    (-t + (n - 1) as f64 * (-(-t).exp_m1()).ln()).exp()
}

/// Geometric draw by inversion: `n = 1 + ⌊ln U / ln(1 - e^{-t})⌋`.
/// Saturates at `u64::MAX` for astronomically large `t`.
pub fn sample_nu<R: Rng + ?Sized>(t: f64, rng: &mut R) -> CollisionCount {
    assert!(t >= 0.0, "t must be nonnegative");
    if t == 0.0 {
        return CollisionCount(1);
    }
    // U in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    // ln(1 - e^{-t}) computed without cancellation at both ends of t
    let log_fail = if t > 1.0 {
        (-(-t).exp()).ln_1p()
    } else {
        (-(-t).exp_m1()).ln()
    };
    let extra = (u.ln() / log_fail).floor();
    if !extra.is_finite() || extra >= u64::MAX as f64 {
        return CollisionCount(u64::MAX);
    }
    CollisionCount(1 + extra as u64)
}

/// One exact draw of `V_t`.
pub fn simulate_v<T: Real, R: Rng + ?Sized>(t: f64, law: &InitialLaw, rng: &mut R) -> Result<T> {
    simulate_v_capped(t, law, rng, DEFAULT_NU_CAP)
}

pub fn simulate_v_capped<T: Real, R: Rng + ?Sized>(
    t: f64,
    law: &InitialLaw,
    rng: &mut R,
    cap: u64,
) -> Result<T> {
    let mut scratch = Vec::new();
    draw(t, law, rng, cap, &mut scratch)
}

fn draw<T: Real, R: Rng + ?Sized>(
    t: f64,
    law: &InitialLaw,
    rng: &mut R,
    cap: u64,
    coeffs: &mut Vec<T>,
) -> Result<T> {
    let nu = sample_nu(t, rng).value();
    if nu > cap {
        return Err(Error::CollisionCap { nu, cap, t });
    }
    let n = nu as usize;
    if n == 1 {
        return Ok(T::lit(law.sample(rng)));
    }
    let tree = sample_tree(n, rng);
    let angles = AngleVector::<T>::uniform(n - 1, rng);
    coefficients_into(&tree, angles.as_slice(), coeffs)?;
    Ok(coeffs.iter().map(|&c| c * T::lit(law.sample(rng))).sum())
}

/// One draw of `π°_t = max_j |π_j|` from the `(ν_t, tree, angles)` triple.
pub fn sample_pi_max<R: Rng + ?Sized>(t: f64, rng: &mut R, cap: u64) -> Result<f64> {
    let nu = sample_nu(t, rng).value();
    if nu > cap {
        return Err(Error::CollisionCap { nu, cap, t });
    }
    let n = nu as usize;
    if n == 1 {
        return Ok(1.0);
    }
    let tree = sample_tree(n, rng);
    let angles = AngleVector::<f64>::uniform(n - 1, rng);
    let mut buf = Vec::with_capacity(n);
    coefficients_into(&tree, angles.as_slice(), &mut buf)
}

/// Random stream for draw `index` of a batch seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub t: f64,
    pub size: usize,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub nu_cap: u64,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
}

fn default_cap() -> u64 {
    DEFAULT_NU_CAP
}

fn default_chunk() -> usize {
    DEFAULT_CHUNK_SIZE
}

impl SimulationConfig {
    pub fn new(t: f64, size: usize, seed: u64) -> Self {
        Self {
            t,
            size,
            seed,
            nu_cap: DEFAULT_NU_CAP,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

/// I.i.d. draws of `V_t` plus the metadata that reproduces them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub t: f64,
    pub seed: u64,
    pub law: String,
    pub values: Vec<f64>,
    /// Not part of the reproducible output.
    pub wall_clock_secs: f64,
}

impl SampleBatch {
    pub fn size(&self) -> usize {
        self.values.len()
    }
}

/// Draws `config.size` values of `V_t`, chunked for parallel execution.
pub fn simulate_batch(config: &SimulationConfig, law: &InitialLaw) -> Result<SampleBatch> {
    if config.size == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    if !(config.t >= 0.0 && config.t.is_finite()) {
        return Err(Error::domain(format!(
            "t = {} must be finite and >= 0",
            config.t
        )));
    }
    let started = Instant::now();
    let chunk = config.chunk_size.max(1);
    let n_chunks = config.size.div_ceil(chunk);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(config.size);
            let mut scratch: Vec<f64> = Vec::new();
            (lo..hi)
                .map(|i| {
                    let mut rng = substream(config.seed, i as u64);
                    draw(config.t, law, &mut rng, config.nu_cap, &mut scratch)
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Chunk {
                    chunk: c,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    Ok(SampleBatch {
        t: config.t,
        seed: config.seed,
        law: law.to_string(),
        values: chunks.into_iter().flatten().collect(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Empirical value with its standard error and the exact target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub empirical: f64,
    pub standard_error: f64,
    pub expected: f64,
}

impl Estimate {
    /// Sample mean of `values` with its standard error.
    pub fn from_samples(values: &[f64], expected: f64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            empirical: mean,
            standard_error: (var / n).sqrt(),
            expected,
        }
    }

    pub fn z_score(&self) -> f64 {
        if self.standard_error == 0.0 {
            if self.empirical == self.expected {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.empirical - self.expected) / self.standard_error
        }
    }

    pub fn within(&self, k: f64) -> bool {
        // exact agreement up to rounding covers zero-variance cases
        (self.empirical - self.expected).abs() <= k * self.standard_error + 1e-12
    }
}

/// Mean decay `E V_t = m_1 e^{-t}` and energy conservation `E V_t² = m̄_2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MomentReport {
    Applicable {
        mean: Estimate,
        second_moment: Estimate,
    },
    NotApplicable {
        reason: String,
    },
}

pub fn moment_diagnostics(batch: &SampleBatch, law: &InitialLaw) -> MomentReport {
    let (Some(m1), true) = (law.mean(), law.has_finite_variance()) else {
        return MomentReport::NotApplicable {
            reason: format!("{law} has infinite second moment"),
        };
    };
    let n = batch.values.len() as f64;
    let mean = batch.values.iter().sum::<f64>() / n;
    let var = batch.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let m2 = batch.values.iter().map(|v| v * v).sum::<f64>() / n;
    let var_sq = batch
        .values
        .iter()
        .map(|v| (v * v - m2).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    MomentReport::Applicable {
        mean: Estimate {
            empirical: mean,
            standard_error: (var / n).sqrt(),
            expected: m1 * (-batch.t).exp(),
        },
        second_moment: Estimate {
            empirical: m2,
            standard_error: (var_sq / n).sqrt(),
            expected: law.second_moment(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_at_time_zero_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_nu(0.0, &mut rng).value(), 1);
        }
        assert_eq!(collision_probability(0.0, 1), 1.0);
        assert_eq!(collision_probability(0.0, 3), 0.0);
    }

    #[test]
    fn nu_at_ln2_is_one_half_the_time() {
        assert!((collision_probability(2f64.ln(), 1) - 0.5).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_nu(2f64.ln(), &mut rng).value() == 1)
            .count() as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((ones / n as f64 - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn nu_mean_is_e_to_t() {
        let t = 5.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_nu(t, &mut rng).value() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // geometric variance (1 - p)/p² with p = e^{-t}
        let p = (-t).exp();
        let se = ((1.0 - p) / (p * p) / n as f64).sqrt();
        assert!((mean - t.exp()).abs() < 3.0 * se, "{mean} vs {}", t.exp());
    }

    #[test]
    fn q_t_sums_to_one() {
        for t in [0.1, 1.0, 3.0] {
            let s: f64 = (1..5000).map(|n| collision_probability(t, n)).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn time_zero_is_the_initial_law() {
        let law = InitialLaw::rademacher(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let v: f64 = simulate_v(0.0, &law, &mut rng).unwrap();
            assert!(v == 1.0 || v == -1.0);
        }
    }

    #[test]
    fn cap_is_reported_with_time() {
        let law = InitialLaw::gaussian(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = (0..100)
            .find_map(|_| simulate_v_capped::<f64, _>(6.0, &law, &mut rng, 3).err())
            .expect("cap 3 at t = 6 is hit almost surely");
        match err {
            Error::CollisionCap { cap, t, nu } => {
                assert_eq!(cap, 3);
                assert_eq!(t, 6.0);
                assert!(nu > 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn batch_is_deterministic_and_chunk_invariant() {
        let law = InitialLaw::gaussian(1.0);
        let cfg = SimulationConfig::new(1.0, 10, 42);
        let a = simulate_batch(&cfg, &law).unwrap();
        let b = simulate_batch(&cfg, &law).unwrap();
        assert_eq!(a.values, b.values);

        let mut one = SimulationConfig::new(1.0, 10_000, 9);
        one.chunk_size = 10_000;
        let mut eight = one.clone();
        eight.chunk_size = 10_000 / 8;
        let x = simulate_batch(&one, &law).unwrap();
        let y = simulate_batch(&eight, &law).unwrap();
        assert_eq!(x.values, y.values);
    }

    #[test]
    fn batch_errors_carry_chunk_index() {
        let law = InitialLaw::gaussian(1.0);
        let mut cfg = SimulationConfig::new(8.0, 64, 1);
        cfg.nu_cap = 2;
        cfg.chunk_size = 16;
        match simulate_batch(&cfg, &law) {
            Err(Error::Chunk { source, .. }) => {
                assert!(matches!(*source, Error::CollisionCap { .. }))
            }
            other => panic!("expected chunk error, got {other:?}"),
        }
        assert!(simulate_batch(&SimulationConfig::new(1.0, 0, 1), &law).is_err());
    }

    #[test]
    fn rademacher_mean_vanishes() {
        let law = InitialLaw::rademacher(1.0);
        let batch = simulate_batch(&SimulationConfig::new(4.0, 100_000, 17), &law).unwrap();
        match moment_diagnostics(&batch, &law) {
            MomentReport::Applicable {
                mean,
                second_moment,
            } => {
                assert!(mean.within(3.0), "{mean:?}");
                assert!(second_moment.within(3.0), "{second_moment:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mean_decays_like_exp_minus_t() {
        // two-point law with mean 1: ½δ_0 + ½δ_2
        let law = InitialLaw::two_point(0.0, 2.0, 0.5);
        let batch = simulate_batch(&SimulationConfig::new(2.0, 100_000, 23), &law).unwrap();
        let MomentReport::Applicable {
            mean,
            second_moment,
        } = moment_diagnostics(&batch, &law)
        else {
            panic!()
        };
        assert!((mean.expected - (-2f64).exp()).abs() < 1e-15);
        assert!(mean.within(3.0), "{mean:?}");
        assert!(second_moment.within(3.0), "{second_moment:?}");
    }

    #[test]
    fn infinite_variance_is_not_applicable() {
        let law: InitialLaw = "cauchy:1".parse().unwrap();
        let batch = simulate_batch(&SimulationConfig::new(1.0, 100, 1), &law).unwrap();
        assert!(matches!(
            moment_diagnostics(&batch, &law),
            MomentReport::NotApplicable { .. }
        ));
    }
}

//! Self-contained invariant checks: the energy identity `Σπ_j² = 1`, the
//! conditional and time-averaged depth moments, the tree decomposition of
//! the Wild terms, and the tail bound on `π°`.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{coefficients_into, lemma1_bound, AngleVector};
use crate::error::Result;
use crate::fourier::{c_gamma, wild_terms, CharGrid, C_GAMMA_DEFAULT_RESOLUTION};
use crate::law::InitialLaw;
use crate::simulate::{sample_nu, sample_pi_max, substream, Estimate, DEFAULT_NU_CAP};
use crate::stats::depth_moment_time;
use crate::tree::{
    depth_moment_exact, enumerate_trees, leaf_depths, sample_tree, tree_probability,
};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {:<28} {}", self.name, self.detail)
    }
}

/// Sizes used by [`run_all`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub energy_pairs: usize,
    pub energy_max_leaves: usize,
    pub tree_samples: usize,
    pub time_samples: usize,
    pub lemma_draws: usize,
    pub decomposition_max_n: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            energy_pairs: 10_000,
            energy_max_leaves: 10_000,
            tree_samples: 100_000,
            time_samples: 100_000,
            lemma_draws: 100_000,
            decomposition_max_n: 5,
        }
    }
}

/// `|Σ_j π_j² − 1| < 1e−10` over random trees with up to `max_leaves`
/// leaves (log-uniform leaf counts) and uniform angles.
pub fn energy_identity(seed: u64, pairs: usize, max_leaves: usize) -> Result<CheckResult> {
    let worst = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let n = ((max_leaves as f64).ln() * rng.random::<f64>())
                .exp()
                .round()
                .max(1.0) as usize;
            let tree = sample_tree(n, &mut rng);
            let angles = AngleVector::<f64>::uniform(n - 1, &mut rng);
            let mut buf = Vec::with_capacity(n);
            coefficients_into(&tree, angles.as_slice(), &mut buf)?;
            Ok((buf.iter().map(|p| p * p).sum::<f64>() - 1.0).abs())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CheckResult::new(
        "energy identity",
        worst < 1e-10,
        format!("{pairs} pairs, n <= {max_leaves}: max |sum pi^2 - 1| = {worst:.2e}"),
    ))
}

/// Depth moments given `n` leaves: exact by enumeration for `n ≤ 6`,
/// Monte Carlo within 3 SE on `{3/8, 1/2, 1} × {3, 5, 20}`.
pub fn depth_moment_conditional(seed: u64, samples: usize) -> Result<CheckResult> {
    let xs = [0.375, 0.5, 1.0];
    let mut worst_exact: f64 = 0.0;
    for n in 1..=6 {
        let trees = enumerate_trees(n)?;
        for &x in &xs {
            let avg: f64 = trees
                .iter()
                .map(|t| tree_probability(t).value() * leaf_depths(t).power_sum(x))
                .sum();
            worst_exact = worst_exact.max((avg / depth_moment_exact(x, n) - 1.0).abs());
        }
    }
    let mut failures = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (k, &n) in [3usize, 5, 20].iter().enumerate() {
        let draws: Vec<_> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed ^ (k as u64 + 1), i as u64);
                leaf_depths(&sample_tree(n, &mut rng))
            })
            .collect();
        for &x in &xs {
            let values: Vec<f64> = draws.iter().map(|d| d.power_sum(x)).collect();
            let est = Estimate::from_samples(&values, depth_moment_exact(x, n));
            if est.standard_error > 0.0 {
                worst_z = worst_z.max(est.z_score().abs());
            }
            if !est.within(3.0) {
                failures.push(format!("x={x} n={n}"));
            }
        }
    }
    let passed = worst_exact < 1e-12 && failures.is_empty();
    Ok(CheckResult::new(
        "depth moment | n",
        passed,
        format!(
            "enumeration rel err {worst_exact:.1e}; MC max |z| = {worst_z:.2}{}",
            fail_suffix(&failures)
        ),
    ))
}

/// `E Σ_j x^{δ_j} = e^{−t(1−2x)}` with `ν_t` sampled as well.
pub fn depth_moment_over_time(
    seed: u64,
    samples: usize,
    xs: &[f64],
    ts: &[f64],
) -> Result<CheckResult> {
    let mut failures = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (k, &t) in ts.iter().enumerate() {
        let draws = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed ^ ((k as u64 + 1) << 32), i as u64);
                let nu = sample_nu(t, &mut rng).value();
                if nu > DEFAULT_NU_CAP {
                    return Err(crate::error::Error::CollisionCap {
                        nu,
                        cap: DEFAULT_NU_CAP,
                        t,
                    });
                }
                Ok(leaf_depths(&sample_tree(nu as usize, &mut rng)))
            })
            .collect::<Result<Vec<_>>>()?;
        for &x in xs {
            let values: Vec<f64> = draws.iter().map(|d| d.power_sum(x)).collect();
            let est = Estimate::from_samples(&values, depth_moment_time(x, t));
            if est.standard_error > 0.0 {
                worst_z = worst_z.max(est.z_score().abs());
            }
            if !est.within(3.0) {
                failures.push(format!("x={x:.4} t={t}"));
            }
        }
    }
    Ok(CheckResult::new(
        "depth moment over time",
        failures.is_empty(),
        format!("max |z| = {worst_z:.2}{}", fail_suffix(&failures)),
    ))
}

/// `Σ_γ p_n(γ) c_γ = q̂_n` in sup norm for `2 ≤ n ≤ max_n`, Gaussian and
/// Rademacher data.
pub fn tree_decomposition(max_n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for law in [InitialLaw::gaussian(1.0), InitialLaw::rademacher(1.0)] {
        let phi0 = CharGrid::<f64>::from_law(&law, 10.0, 129)?;
        let state = wild_terms(&phi0, max_n, 256)?;
        for n in 2..=max_n {
            let trees = enumerate_trees(n)?;
            let parts = trees
                .par_iter()
                .map(|t| {
                    Ok((
                        tree_probability(t).value(),
                        c_gamma(t, &phi0, C_GAMMA_DEFAULT_RESOLUTION)?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<(f64, &CharGrid<f64>)> = parts.iter().map(|(w, g)| (*w, g)).collect();
            let mix = CharGrid::combine(&refs)?;
            worst = worst.max(mix.sup_distance(state.term(n))?);
        }
    }
    Ok(CheckResult::new(
        "tree decomposition",
        worst < 1e-6,
        format!("n <= {max_n}, gaussian + rademacher: sup diff = {worst:.2e}"),
    ))
}

/// `P{π°_t > x} ≤ x^{−p} e^{−t(1−2α_p)}` plus 3 binomial SE, `p = 3`.
pub fn pi_max_tail(seed: u64, draws: usize, xs: &[f64], ts: &[f64]) -> Result<CheckResult> {
    let p = 3.0;
    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (k, &t) in ts.iter().enumerate() {
        let maxima = (0..draws)
            .into_par_iter()
            .map(|i| {
                sample_pi_max(
                    t,
                    &mut substream(seed ^ ((k as u64 + 7) << 40), i as u64),
                    DEFAULT_NU_CAP,
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        for &x in xs {
            let hits = maxima.iter().filter(|&&m| m > x).count() as f64;
            let frac = hits / draws as f64;
            let se = (frac * (1.0 - frac) / draws as f64).sqrt();
            let bound = lemma1_bound(x, p, t)?;
            let slack = bound + 3.0 * se - frac;
            min_slack = min_slack.min(slack);
            if slack < 0.0 {
                failures.push(format!("x={x} t={t}"));
            }
        }
    }
    Ok(CheckResult::new(
        "pi max tail bound",
        failures.is_empty(),
        format!(
            "p = 3, min slack = {min_slack:.3e}{}",
            fail_suffix(&failures)
        ),
    ))
}

fn fail_suffix(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failed at {}", failures.join(", "))
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    Ok(vec![
        energy_identity(opts.seed, opts.energy_pairs, opts.energy_max_leaves)?,
        depth_moment_conditional(opts.seed.wrapping_add(1), opts.tree_samples)?,
        depth_moment_over_time(
            opts.seed.wrapping_add(2),
            opts.time_samples,
            &[0.375, 0.5, 2.0 / std::f64::consts::PI],
            &[1.0, 3.0],
        )?,
        tree_decomposition(opts.decomposition_max_n)?,
        pi_max_tail(
            opts.seed.wrapping_add(3),
            opts.lemma_draws,
            &[0.3, 0.5, 0.9],
            &[2.0, 5.0],
        )?,
    ])
}

/// Plain-text pass/fail table.
pub fn table(results: &[CheckResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    let passed = results.iter().filter(|r| r.passed).count();
    out.push_str(&format!("{passed}/{} checks passed\n", results.len()));
    out
}

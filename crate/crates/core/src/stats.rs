//! Empirical distribution functions, Kolmogorov distances to the
//! Maxwellian, and the rate bounds for `sup_x |F(x,t) − G_σ(x)|`.
//!
//! # The constant `A` of the general bound
//!
//! Write `M = M(t)`, `E(r) = ∫_{|u|>r} u² μ_0(du)` and `T = M^{−1/5}`. The
//! characteristic-function estimate for `V_t/σ` is
//!
//! ```text
//! |E e^{iξV_t/σ} − e^{−ξ²/2}| ≤ (ξ/σ)² E(σ x_t^{a−1}) + (ξ² + 2|ξ|³ + 2ξ⁴) e^{−Bt},
//! B = min(B₁, B₂),
//! ```
//!
//! and Esseen's smoothing inequality turns it into
//!
//! ```text
//! sup|F − G_σ| ≤ (2/π) ∫_0^T ξ⁻¹ {…} dξ + 24/(√(2π³) T)
//!             = (2/π) [ E T²/(2σ²) + (T²/2 + 2T³/3 + T⁴/2) e^{−Bt} ] + 24/(√(2π³) T).
//! ```
//!
//! Using `E, e^{−Bt} ≤ M ≤ 1` and `M T^k = M^{1−k/5} ≤ M^{1/5}` for `k ≤ 4`,
//! every term is at most its coefficient times `M^{1/5}`, hence
//!
//! ```text
//! A(σ) = (2/π) (1/(2σ²) + 5/3) + 24/√(2π³).
//! ```
//!
//! [`esseen_chain`] evaluates the middle line by quadrature so the closed
//! form can be checked against the unsimplified chain.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::coefficients::alpha_p;
use crate::error::{Error, Result};
use crate::law::InitialLaw;
use crate::quadrature::CompositeGauss;
use crate::scalar::Real;
use crate::simulate::{collision_probability, simulate_batch, SimulationConfig};
use crate::tree::depth_moment_exact;

/// Berry–Esseen constant used when none is supplied (δ = 1).
pub const DEFAULT_BERRY_ESSEEN_C1: f64 = 0.56;

/// Sorted sample with a right-continuous step distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf<T> {
    sorted: Vec<T>,
}

impl<T: Real> EmpiricalCdf<T> {
    pub fn new(mut values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("empirical CDF needs at least one value"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::arg("empirical CDF values must not be NaN"));
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        Ok(Self { sorted: values })
    }

    pub fn size(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_values(&self) -> &[T] {
        &self.sorted
    }

    /// `#{x_i ≤ x} / N`.
    pub fn eval(&self, x: T) -> T {
        let count = self.sorted.partition_point(|&v| v <= x);
        T::from_usize_lossy(count) / T::from_usize_lossy(self.sorted.len())
    }

    /// `sup_x |F_N(x) − cdf(x)|` for a continuous `cdf`, exact over jumps.
    pub fn distance_to<F: Fn(T) -> T>(&self, cdf: F) -> T {
        let n = T::from_usize_lossy(self.sorted.len());
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let g = cdf(x);
                let above = T::from_usize_lossy(i + 1) / n - g;
                let below = g - T::from_usize_lossy(i) / n;
                above.abs().max(below.abs())
            })
            .fold(T::zero(), T::max)
    }
}

/// `sup_v |F_N(v) − G_σ(v)|`.
pub fn kolmogorov_distance<T: Real>(ecdf: &EmpiricalCdf<T>, sigma: T) -> T {
    assert!(sigma > T::zero(), "sigma must be positive");
    ecdf.distance_to(|x| (x / sigma).std_normal_cdf())
}

/// `min_σ sup_v |F_N(v) − G_σ(v)|` with the minimising `σ`.
///
/// A log-spaced scan over `σ` brackets the minimum, then golden-section
/// search refines it. The objective is piecewise smooth, so the result is a
/// local refinement of the best scanned value.
pub fn min_distance_over_sigma<T: Real>(ecdf: &EmpiricalCdf<T>) -> (T, T) {
    let v = ecdf.sorted_values();
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize].as_f64();
    let iqr = (q(0.75) - q(0.25)).abs();
    let scale = if iqr > 0.0 {
        iqr / 1.349
    } else {
        q(1.0).abs().max(q(0.0).abs()).max(1.0)
    };
    let objective = |log_s: f64| kolmogorov_distance(ecdf, T::lit(log_s.exp())).as_f64();
    let lo = (scale * 1e-2).ln();
    let hi = (scale * 1e2).ln();
    let steps = 240;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .collect();
    let values: Vec<f64> = grid.par_iter().map(|&g| objective(g)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    let (arg, val) = [(grid[best], values[best]), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("nonempty");
    (T::lit(val), T::lit(arg.exp()))
}

/// DKW half-width `√(ln(2/β) / 2N)`: with probability at least `1 − β` the
/// empirical CDF of `N` draws lies within it of the true CDF.
pub fn dkw_half_width(size: usize, beta: f64) -> f64 {
    ((2.0 / beta).ln() / (2.0 * size as f64)).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_two_sample<T: Real>(a: &EmpiricalCdf<T>, b: &EmpiricalCdf<T>) -> T {
    let (x, y) = (a.sorted_values(), b.sorted_values());
    let (n, m) = (T::from_usize_lossy(x.len()), T::from_usize_lossy(y.len()));
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = T::zero();
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        let diff = (T::from_usize_lossy(i) / n - T::from_usize_lossy(j) / m).abs();
        d = d.max(diff);
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Pearson chi-square goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

pub fn chi_square_test(observed: &[u64], probabilities: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != probabilities.len() || observed.len() < 2 {
        return Err(Error::arg(
            "chi-square needs matching category lists of length >= 2",
        ));
    }
    let total: u64 = observed.iter().sum();
    let statistic = observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum::<f64>();
    let df = observed.len() - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::arg(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: df,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// `(a, p, c)` of the general bound, with optional `δ` for the moment form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Theorem2ParamsRaw")]
pub struct Theorem2Params {
    a: f64,
    p: f64,
    c: f64,
    delta: Option<f64>,
}

#[derive(Deserialize)]
struct Theorem2ParamsRaw {
    a: f64,
    p: f64,
    c: f64,
    #[serde(default)]
    delta: Option<f64>,
}

impl TryFrom<Theorem2ParamsRaw> for Theorem2Params {
    type Error = Error;

    fn try_from(r: Theorem2ParamsRaw) -> Result<Self> {
        let mut params = Theorem2Params::new(r.a, r.p, r.c)?;
        if let Some(d) = r.delta {
            params = params.with_delta(d)?;
        }
        Ok(params)
    }
}

impl Theorem2Params {
    pub fn new(a: f64, p: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::domain(format!("a = {a} must lie in (0, 1)")));
        }
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::domain(format!("p = {p} must exceed 2")));
        }
        let c_max = (1.0 - 2.0 * alpha_p(p)) / p;
        if !(c > 0.0 && c < c_max) {
            return Err(Error::domain(format!("c = {c} must lie in (0, {c_max})")));
        }
        Ok(Self {
            a,
            p,
            c,
            delta: None,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::domain(format!("delta = {delta} must lie in (0, 1]")));
        }
        self.delta = Some(delta);
        Ok(self)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    /// `B₁ = acp`.
    pub fn b1(&self) -> f64 {
        self.a * self.c * self.p
    }

    /// `B₂ = 1 − 2α_p − cp`.
    pub fn b2(&self) -> f64 {
        1.0 - 2.0 * alpha_p(self.p) - self.c * self.p
    }

    /// `x_t = e^{−tcp}`.
    pub fn x_t(&self, t: f64) -> f64 {
        (-t * self.c * self.p).exp()
    }

    /// Tail-energy radius `σ x_t^{a−1}`.
    pub fn radius(&self, t: f64, sigma: f64) -> f64 {
        sigma * self.x_t(t).powf(self.a - 1.0)
    }
}

impl Default for Theorem2Params {
    /// `p = 3`, `a = 1/2`, `c = 0.9 (1 − 2α_3)/3`.
    fn default() -> Self {
        let p = 3.0;
        let c = 0.9 * (1.0 - 2.0 * alpha_p(p)) / p;
        Self::new(0.5, p, c).expect("defaults are valid")
    }
}

fn require_sigma(law: &InitialLaw) -> Result<f64> {
    law.sigma()
        .ok_or_else(|| Error::domain(format!("{law} has infinite second moment")))
}

/// `t₀ = inf{t ≥ 0 : E(σ x_t^{a−1}) ≤ 1}`.
pub fn t0(law: &InitialLaw, params: &Theorem2Params) -> Result<f64> {
    let sigma = require_sigma(law)?;
    let ok = |t: f64| law.tail_energy(params.radius(t, sigma)) <= 1.0;
    if ok(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::domain(format!(
                "tail energy of {law} never drops below 1"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(hi)
}

/// `M(t) = E(σ x_t^{a−1}) ∨ e^{−B₁t} ∨ e^{−B₂t}` for `t ≥ t₀`.
pub fn m_of_t(t: f64, law: &InitialLaw, params: &Theorem2Params) -> Result<f64> {
    let sigma = require_sigma(law)?;
    let start = t0(law, params)?;
    if t < start {
        return Err(Error::domain(format!("t = {t} is below t0 = {start}")));
    }
    let tail = law.tail_energy(params.radius(t, sigma));
    Ok(tail
        .max((-params.b1() * t).exp())
        .max((-params.b2() * t).exp()))
}

/// `A(σ)` from the Esseen chain; see the module documentation.
pub fn theorem2_constant_a(sigma: f64) -> f64 {
    (2.0 / PI) * (1.0 / (2.0 * sigma * sigma) + 5.0 / 3.0) + 24.0 / (2.0 * PI.powi(3)).sqrt()
}

/// `A M(t)^{1/5} + ½ sup|F_0 − F_{0,d}| e^{−t}`.
pub fn theorem2_bound_general(t: f64, law: &InitialLaw, params: &Theorem2Params) -> Result<f64> {
    let m = m_of_t(t, law, params)?;
    if m > 1.0 {
        return Err(Error::domain(format!("M({t}) = {m} exceeds 1")));
    }
    let sigma = require_sigma(law)?;
    Ok(theorem2_constant_a(sigma) * m.powf(0.2) + 0.5 * law.asymmetry() * (-t).exp())
}

/// `C_δ (m̄_{2+δ}/σ^{2+δ}) e^{−t(1−2α_{2+δ})} + ½ sup|F_0 − F_{0,d}| e^{−t}`.
pub fn theorem2_bound_berry_esseen(
    t: f64,
    law: &InitialLaw,
    delta: f64,
    c_delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!("delta = {delta} must lie in (0, 1]")));
    }
    if !(c_delta > 0.0) {
        return Err(Error::domain(format!(
            "C_delta = {c_delta} must be positive"
        )));
    }
    let sigma = require_sigma(law)?;
    let moment = law.abs_moment(2.0 + delta).ok_or_else(|| {
        Error::domain(format!(
            "{law} has infinite moment of order {}",
            2.0 + delta
        ))
    })?;
    let rate = 1.0 - 2.0 * alpha_p(2.0 + delta);
    Ok(
        c_delta * moment / sigma.powf(2.0 + delta) * (-t * rate).exp()
            + 0.5 * law.asymmetry() * (-t).exp(),
    )
}

/// The unsimplified Esseen chain at one `t`, next to its closed-form bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsseenCheck {
    pub m: f64,
    pub horizon: f64,
    /// `(2/π) ∫_0^T ξ⁻¹ {…} dξ` by quadrature.
    pub integral: f64,
    /// `24/(√(2π³) T)`.
    pub smoothing: f64,
    /// `A(σ) M^{1/5}`.
    pub closed_form: f64,
}

impl EsseenCheck {
    pub fn chain(&self) -> f64 {
        self.integral + self.smoothing
    }
}

pub fn esseen_chain(t: f64, law: &InitialLaw, params: &Theorem2Params) -> Result<EsseenCheck> {
    let sigma = require_sigma(law)?;
    let m = m_of_t(t, law, params)?;
    let horizon = m.powf(-0.2);
    let tail = law.tail_energy(params.radius(t, sigma));
    let decay = (-params.b1().min(params.b2()) * t).exp();
    let rule = CompositeGauss::new(0.0, horizon, 32, 8);
    let integrand =
        |xi: f64| (xi / (sigma * sigma)) * tail + (xi + 2.0 * xi * xi + 2.0 * xi * xi * xi) * decay;
    let integral = 2.0 / PI * rule.integrate(integrand);
    Ok(EsseenCheck {
        m,
        horizon,
        integral,
        smoothing: 24.0 / (2.0 * PI.powi(3)).sqrt() / horizon,
        closed_form: theorem2_constant_a(sigma) * m.powf(0.2),
    })
}

/// `E Σ_j x^{δ_j} = e^{−t(1−2x)}`.
pub fn depth_moment_time<T: Real>(x: T, t: T) -> T {
    (-t * (T::one() - x - x)).exp()
}

/// The same quantity as the `ν_t`-average `Σ_n q_t(n) Γ(2x+n−1)/(Γ(2x)Γ(n))`,
/// summed until the remaining terms are negligible.
pub fn depth_moment_time_series(x: f64, t: f64) -> f64 {
    let mut total = 0.0;
    let mut n: u64 = 1;
    loop {
        let term = collision_probability(t, n) * depth_moment_exact(x, n as usize);
        total += term;
        let past_mode = n as f64 > 4.0 * t.exp() * (1.0 + 2.0 * x);
        if (past_mode && term < 1e-17 * total) || n > 50_000_000 {
            return total;
        }
        n += 1;
    }
}

/// Kolmogorov distances along a time grid with the matching bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub law: String,
    pub size: usize,
    pub seed: u64,
    pub sigma: Option<f64>,
    pub t_grid: Vec<f64>,
    /// Distance to `G_σ` at the law's own `σ` (or the supplied one).
    pub distances: Vec<f64>,
    /// `min_σ̂` distance and its minimiser, for the necessity probe.
    pub min_sigma_distances: Vec<f64>,
    pub fitted_sigmas: Vec<f64>,
    pub dkw_beta: f64,
    pub dkw_half_width: f64,
    /// Slope of `ln d` against `t` over points above `2 × dkw_half_width`.
    pub fitted_log_slope: Option<f64>,
    /// `−(1 − 2α_3)` when the third absolute moment is finite.
    pub theoretical_exponent: Option<f64>,
    pub bound_general: Vec<Option<f64>>,
    pub bound_berry_esseen: Vec<Option<f64>>,
    pub converged_below_resolution: bool,
}

impl RateReport {
    /// `t,distance,min_sigma_distance,dkw,bound_general,bound_be`; missing
    /// values are left empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        let mut out = format!(
            "# kac-rate v1 law={} size={} seed={} dkw_beta={}\nt,distance,min_sigma_distance,dkw,bound_general,bound_be\n",
            self.law, self.size, self.seed, self.dkw_beta
        );
        for i in 0..self.t_grid.len() {
            let d = Some(self.distances[i]).filter(|d| d.is_finite());
            out.push_str(&format!(
                "{},{},{:.10e},{:.10e},{},{}\n",
                self.t_grid[i],
                opt(d),
                self.min_sigma_distances[i],
                self.dkw_half_width,
                opt(self.bound_general[i]),
                opt(self.bound_berry_esseen[i])
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateStudyOptions {
    /// `σ` for the distance; defaults to the law's.
    pub sigma: Option<f64>,
    pub dkw_beta: f64,
    pub params: Option<Theorem2Params>,
    pub berry_esseen_c1: f64,
    pub nu_cap: u64,
}

impl Default for RateStudyOptions {
    fn default() -> Self {
        Self {
            sigma: None,
            dkw_beta: 0.01,
            params: None,
            berry_esseen_c1: DEFAULT_BERRY_ESSEEN_C1,
            nu_cap: crate::simulate::DEFAULT_NU_CAP,
        }
    }
}

/// Seed for grid point `index`, decorrelated from the master seed by a
/// splitmix64 round.
pub fn grid_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rate_study(
    law: &InitialLaw,
    t_grid: &[f64],
    size: usize,
    seed: u64,
    options: &RateStudyOptions,
) -> Result<RateReport> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg(
            "t grid must be nonempty and strictly increasing",
        ));
    }
    let sigma = options.sigma.or_else(|| law.sigma());
    let params = options.params.unwrap_or_default();
    let half_width = dkw_half_width(size, options.dkw_beta);
    let mut report = RateReport {
        law: law.to_string(),
        size,
        seed,
        sigma,
        t_grid: t_grid.to_vec(),
        distances: Vec::new(),
        min_sigma_distances: Vec::new(),
        fitted_sigmas: Vec::new(),
        dkw_beta: options.dkw_beta,
        dkw_half_width: half_width,
        fitted_log_slope: None,
        theoretical_exponent: law
            .abs_moment(3.0)
            .filter(|_| law.has_finite_variance())
            .map(|_| -(1.0 - 2.0 * alpha_p(3.0))),
        bound_general: Vec::new(),
        bound_berry_esseen: Vec::new(),
        converged_below_resolution: false,
    };
    for (i, &t) in t_grid.iter().enumerate() {
        let mut cfg = SimulationConfig::new(t, size, grid_seed(seed, i));
        cfg.nu_cap = options.nu_cap;
        let batch = simulate_batch(&cfg, law)?;
        let ecdf = EmpiricalCdf::new(batch.values)?;
        let (min_d, fitted) = min_distance_over_sigma(&ecdf);
        report.min_sigma_distances.push(min_d);
        report.fitted_sigmas.push(fitted);
        report.distances.push(
            sigma
                .map(|s| kolmogorov_distance(&ecdf, s))
                .unwrap_or(f64::NAN),
        );
        report
            .bound_general
            .push(theorem2_bound_general(t, law, &params).ok());
        report
            .bound_berry_esseen
            .push(theorem2_bound_berry_esseen(t, law, 1.0, options.berry_esseen_c1).ok());
    }
    let usable: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&report.distances)
        .filter(|(_, &d)| d.is_finite() && d > 2.0 * half_width)
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if usable.len() >= 2 {
        report.fitted_log_slope = Some(least_squares_slope(&usable));
    } else if sigma.is_some() {
        report.converged_below_resolution = true;
    }
    Ok(report)
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

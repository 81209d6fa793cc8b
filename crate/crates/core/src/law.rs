//! Initial velocity distributions `μ_0`.
//!
//! Every law knows how to sample itself and exposes the functionals the
//! bounds need: moments, the tail energy `r ↦ ∫_{|u|>r} u² μ_0(du)`, the
//! distribution function `F_0` and its reflection `F_{0,d}(x) = μ_0([-x, ∞))`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use libm::lgamma as ln_gamma;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::quadrature::integrate_to_infinity;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialLaw {
    /// `N(0, σ²)`.
    Gaussian { sigma: f64 },
    /// `±v` with probability 1/2 each.
    Rademacher { v: f64 },
    /// Uniform on `(-a, a)`.
    Uniform { a: f64 },
    /// `x1` with probability `p`, `x2` otherwise.
    TwoPoint { x1: f64, x2: f64, p: f64 },
    /// Density `e^{-|x|/b} / 2b`.
    Laplace { b: f64 },
    /// Standard Student t with `nu` degrees of freedom.
    StudentT { nu: f64 },
    /// Density `s / (π (s² + x²))`.
    Cauchy { scale: f64 },
    /// Uniform over a list of values.
    Empirical { source: String, values: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Parse(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl InitialLaw {
    pub fn gaussian(sigma: f64) -> Self {
        InitialLaw::Gaussian { sigma }
    }

    pub fn rademacher(v: f64) -> Self {
        InitialLaw::Rademacher { v }
    }

    pub fn two_point(x1: f64, x2: f64, p: f64) -> Self {
        InitialLaw::TwoPoint { x1, x2, p }
    }

    pub fn empirical(source: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(
                "empirical law needs at least one finite value".into(),
            ));
        }
        if values.iter().all(|&v| v == values[0]) {
            return Err(Error::Parse("empirical law is degenerate".into()));
        }
        Ok(InitialLaw::Empirical {
            source: source.into(),
            values,
        })
    }

    /// Reads whitespace/comma/newline separated numbers; `#` starts a comment.
    pub fn empirical_from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line.split(|c: char| c == ',' || c.is_whitespace()) {
                if tok.is_empty() {
                    continue;
                }
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("{}: bad number {tok:?}", path.display())))?;
                values.push(v);
            }
        }
        Self::empirical(path.display().to_string(), values)
    }

    fn validate(self) -> Result<Self> {
        match &self {
            InitialLaw::Gaussian { sigma } => {
                positive("sigma", *sigma)?;
            }
            InitialLaw::Rademacher { v } => {
                positive("v", *v)?;
            }
            InitialLaw::Uniform { a } => {
                positive("a", *a)?;
            }
            InitialLaw::TwoPoint { x1, x2, p } => {
                if !(x1.is_finite() && x2.is_finite()) || x1 == x2 {
                    return Err(Error::Parse(
                        "two-point atoms must be finite and distinct".into(),
                    ));
                }
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::Parse(format!(
                        "two-point weight must be in (0,1), got {p}"
                    )));
                }
            }
            InitialLaw::Laplace { b } => {
                positive("b", *b)?;
            }
            InitialLaw::StudentT { nu } => {
                positive("nu", *nu)?;
            }
            InitialLaw::Cauchy { scale } => {
                positive("scale", *scale)?;
            }
            InitialLaw::Empirical { .. } => {}
        }
        Ok(self)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InitialLaw::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            InitialLaw::Rademacher { v } => {
                if rng.random::<bool>() {
                    *v
                } else {
                    -v
                }
            }
            InitialLaw::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
            InitialLaw::TwoPoint { x1, x2, p } => {
                if rng.random::<f64>() < *p {
                    *x1
                } else {
                    *x2
                }
            }
            InitialLaw::Laplace { b } => {
                // 1 - U lies in (0, 1]
                let e = -(1.0 - rng.random::<f64>()).ln();
                if rng.random::<bool>() {
                    b * e
                } else {
                    -b * e
                }
            }
            InitialLaw::StudentT { nu } => StudentT::new(*nu).expect("validated nu").sample(rng),
            InitialLaw::Cauchy { scale } => {
                Cauchy::new(0.0, *scale).expect("validated").sample(rng)
            }
            InitialLaw::Empirical { values, .. } => values[rng.random_range(0..values.len())],
        }
    }

    /// `E X`, or `None` when the first moment does not exist.
    pub fn mean(&self) -> Option<f64> {
        match self {
            InitialLaw::TwoPoint { x1, x2, p } => Some(p * x1 + (1.0 - p) * x2),
            InitialLaw::Empirical { values, .. } => {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
            InitialLaw::StudentT { nu } if *nu <= 1.0 => None,
            InitialLaw::Cauchy { .. } => None,
            _ => Some(0.0),
        }
    }

    /// `E X²`; `f64::INFINITY` when infinite.
    pub fn second_moment(&self) -> f64 {
        self.abs_moment(2.0).unwrap_or(f64::INFINITY)
    }

    pub fn has_finite_variance(&self) -> bool {
        self.second_moment().is_finite()
    }

    /// `σ = √(E X²)` when finite.
    pub fn sigma(&self) -> Option<f64> {
        let m2 = self.second_moment();
        m2.is_finite().then(|| m2.sqrt())
    }

    /// `E|X|^p`, or `None` when infinite.
    pub fn abs_moment(&self, p: f64) -> Option<f64> {
        assert!(p > 0.0);
        match self {
            InitialLaw::Gaussian { sigma } => Some(
                sigma.powf(p) * 2f64.powf(p / 2.0) * (ln_gamma((p + 1.0) / 2.0)).exp() / PI.sqrt(),
            ),
            InitialLaw::Rademacher { v } => Some(v.powf(p)),
            InitialLaw::Uniform { a } => Some(a.powf(p) / (p + 1.0)),
            InitialLaw::TwoPoint { x1, x2, p: w } => {
                Some(w * x1.abs().powf(p) + (1.0 - w) * x2.abs().powf(p))
            }
            InitialLaw::Laplace { b } => Some(b.powf(p) * ln_gamma(p + 1.0).exp()),
            InitialLaw::StudentT { nu } => (p < *nu).then(|| {
                (p / 2.0 * nu.ln() + ln_gamma((p + 1.0) / 2.0) + ln_gamma((nu - p) / 2.0)
                    - 0.5 * PI.ln()
                    - ln_gamma(nu / 2.0))
                .exp()
            }),
            // E|C|^p = s^p / cos(πp/2) for p < 1
            InitialLaw::Cauchy { scale } => (p < 1.0).then(|| scale.powf(p) / (PI * p / 2.0).cos()),
            InitialLaw::Empirical { values, .. } => {
                Some(values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64)
            }
        }
    }

    /// `∫_{|u|>r} u² μ_0(du)` for `r ≥ 0`.
    pub fn tail_energy(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self {
            InitialLaw::Gaussian { sigma } => {
                let z = r / sigma;
                let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                sigma * sigma * (2.0 * (-z).std_normal_cdf() + 2.0 * z * density)
            }
            InitialLaw::Rademacher { v } => {
                if *v > r {
                    v * v
                } else {
                    0.0
                }
            }
            InitialLaw::Uniform { a } => {
                if r < *a {
                    (a * a * a - r * r * r) / (3.0 * a)
                } else {
                    0.0
                }
            }
            InitialLaw::TwoPoint { x1, x2, p } => {
                let part = |x: f64, w: f64| if x.abs() > r { w * x * x } else { 0.0 };
                part(*x1, *p) + part(*x2, 1.0 - p)
            }
            InitialLaw::Laplace { b } => (-r / b).exp() * (r * r + 2.0 * b * r + 2.0 * b * b),
            InitialLaw::StudentT { nu } => {
                if *nu <= 2.0 {
                    return f64::INFINITY;
                }
                let nu = *nu;
                let norm =
                    (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp() / (nu * PI).sqrt();
                let f = |u: f64| u * u * norm * (1.0 + u * u / nu).powf(-(nu + 1.0) / 2.0);
                2.0 * integrate_to_infinity(&f, r, 1e-13)
            }
            InitialLaw::Cauchy { .. } => f64::INFINITY,
            InitialLaw::Empirical { values, .. } => {
                values
                    .iter()
                    .filter(|v| v.abs() > r)
                    .map(|v| v * v)
                    .sum::<f64>()
                    / values.len() as f64
            }
        }
    }

    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            InitialLaw::Rademacher { v } => Some(vec![(-v, 0.5), (*v, 0.5)]),
            InitialLaw::TwoPoint { x1, x2, p } => Some(vec![(*x1, *p), (*x2, 1.0 - p)]),
            InitialLaw::Empirical { values, .. } => {
                let w = 1.0 / values.len() as f64;
                Some(values.iter().map(|&v| (v, w)).collect())
            }
            _ => None,
        }
    }

    /// `F_0(x) = μ_0((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms.iter().filter(|(a, _)| *a <= x).map(|(_, w)| w).sum();
        }
        self.continuous_cdf(x)
    }

    /// `μ_0((-∞, x))`.
    fn cdf_left(&self, x: f64) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms.iter().filter(|(a, _)| *a < x).map(|(_, w)| w).sum();
        }
        self.continuous_cdf(x)
    }

    fn continuous_cdf(&self, x: f64) -> f64 {
        match self {
            InitialLaw::Gaussian { sigma } => (x / sigma).std_normal_cdf(),
            InitialLaw::Uniform { a } => ((x + a) / (2.0 * a)).clamp(0.0, 1.0),
            InitialLaw::Laplace { b } => {
                if x < 0.0 {
                    0.5 * (x / b).exp()
                } else {
                    1.0 - 0.5 * (-x / b).exp()
                }
            }
            InitialLaw::StudentT { nu } => {
                StudentsT::new(0.0, 1.0, *nu).expect("validated nu").cdf(x)
            }
            InitialLaw::Cauchy { scale } => 0.5 + (x / scale).atan() / PI,
            _ => unreachable!("discrete laws handled by atoms"),
        }
    }

    /// `F_{0,d}(x) = μ_0([-x, +∞))`.
    pub fn dual_cdf(&self, x: f64) -> f64 {
        1.0 - self.cdf_left(-x)
    }

    /// `sup_x |F_0(x) - F_{0,d}(x)|`; zero exactly for symmetric laws.
    pub fn asymmetry(&self) -> f64 {
        match self.atoms() {
            None => 0.0,
            Some(atoms) => {
                // both functions are right-continuous steps with jumps at ±atoms
                let mut points: Vec<f64> = atoms.iter().flat_map(|(a, _)| [*a, -*a]).collect();
                points.sort_by(f64::total_cmp);
                points
                    .iter()
                    .map(|&x| (self.cdf(x) - self.dual_cdf(x)).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() == 0.0
    }

    /// `ϕ_0(ξ) = E e^{iξX}` when a closed form is available.
    pub fn char_fn(&self, xi: f64) -> Option<Complex64> {
        let real = |v: f64| Some(Complex64::new(v, 0.0));
        match self {
            InitialLaw::Gaussian { sigma } => real((-0.5 * sigma * sigma * xi * xi).exp()),
            InitialLaw::Rademacher { v } => real((v * xi).cos()),
            InitialLaw::Uniform { a } => {
                let z = a * xi;
                real(if z.abs() < 1e-8 {
                    1.0 - z * z / 6.0
                } else {
                    z.sin() / z
                })
            }
            InitialLaw::Laplace { b } => real(1.0 / (1.0 + b * b * xi * xi)),
            InitialLaw::Cauchy { scale } => real((-scale * xi.abs()).exp()),
            InitialLaw::StudentT { .. } => None,
            InitialLaw::TwoPoint { .. } | InitialLaw::Empirical { .. } => {
                let atoms = self.atoms().expect("discrete");
                Some(
                    atoms
                        .iter()
                        .map(|(a, w)| Complex64::from_polar(*w, a * xi))
                        .sum(),
                )
            }
        }
    }
}

impl fmt::Display for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialLaw::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            InitialLaw::Rademacher { v } => write!(f, "rademacher:{v}"),
            InitialLaw::Uniform { a } => write!(f, "uniform:{a}"),
            InitialLaw::TwoPoint { x1, x2, p } => write!(f, "two-point:{x1},{x2},{p}"),
            InitialLaw::Laplace { b } => write!(f, "laplace:{b}"),
            InitialLaw::StudentT { nu } => write!(f, "student-t:{nu}"),
            InitialLaw::Cauchy { scale } => write!(f, "cauchy:{scale}"),
            InitialLaw::Empirical { source, .. } => write!(f, "empirical:{source}"),
        }
    }
}

impl FromStr for InitialLaw {
    type Err = Error;

    /// `name:params`, e.g. `rademacher:1`, `two-point:0,2,0.5`,
    /// `empirical:data.txt`. Parameters default to the unit law.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), p.trim()),
            None => (s.trim(), ""),
        };
        let nums = || -> Result<Vec<f64>> {
            if params.is_empty() {
                return Ok(Vec::new());
            }
            params
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad law parameter {p:?} in {s:?}")))
                })
                .collect()
        };
        let one = |default: f64| -> Result<f64> {
            let v = nums()?;
            match v.len() {
                0 => Ok(default),
                1 => Ok(v[0]),
                n => Err(Error::Parse(format!("{name} takes one parameter, got {n}"))),
            }
        };
        let law = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => InitialLaw::Gaussian { sigma: one(1.0)? },
            "rademacher" => InitialLaw::Rademacher { v: one(1.0)? },
            "uniform" => InitialLaw::Uniform {
                a: one(3f64.sqrt())?,
            },
            "laplace" => InitialLaw::Laplace {
                b: one(1.0 / SQRT_2)?,
            },
            "student-t" | "t" => InitialLaw::StudentT { nu: one(5.0)? },
            "cauchy" => InitialLaw::Cauchy { scale: one(1.0)? },
            "two-point" => {
                let v = nums()?;
                match v.as_slice() {
                    [x1, x2, p] => InitialLaw::TwoPoint {
                        x1: *x1,
                        x2: *x2,
                        p: *p,
                    },
                    [x1, x2] => InitialLaw::TwoPoint {
                        x1: *x1,
                        x2: *x2,
                        p: 0.5,
                    },
                    _ => return Err(Error::Parse("two-point takes x1,x2[,p]".into())),
                }
            }
            "empirical" => {
                if params.is_empty() {
                    return Err(Error::Parse("empirical needs a file path".into()));
                }
                return Self::empirical_from_file(params);
            }
            other => return Err(Error::Parse(format!("unknown law {other:?}"))),
        };
        law.validate()
    }
}

impl TryFrom<String> for InitialLaw {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<InitialLaw> for String {
    fn from(law: InitialLaw) -> String {
        law.to_string()
    }
}

//! Leaf coefficients `π_j` and the angular moments `α_p` that govern their
//! decay.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::CompositeGauss;
use crate::scalar::Real;
use crate::tree::{McKeanTree, NodeKind};

/// Scattering angles attached to the internal nodes of a tree, in pre-order.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVector<T> {
    angles: Vec<T>,
}

impl<T: Real> AngleVector<T> {
    /// Wraps angles, reducing each into `[0, 2π)`.
    pub fn new(angles: Vec<T>) -> Self {
        let two_pi = T::TAU();
        let angles = angles
            .into_iter()
            .map(|a| {
                let r = a % two_pi;
                if r < T::zero() {
                    r + two_pi
                } else {
                    r
                }
            })
            .collect();
        Self { angles }
    }

    /// `count` i.i.d. angles uniform on `[0, 2π)`.
    pub fn uniform<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Self {
        let two_pi = T::TAU();
        let angles = (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                T::lit(u) * two_pi
            })
            .collect();
        Self { angles }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// `π_1..π_n` for one (tree, angles) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector<T> {
    coefficients: Vec<T>,
    max_abs: T,
}

impl<T: Real> CoefficientVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `π° = max_j |π_j|`.
    pub fn max_abs(&self) -> T {
        self.max_abs
    }

    /// `Σ_j π_j²`, which equals one for every tree.
    pub fn energy(&self) -> T {
        self.coefficients.iter().map(|&c| c * c).sum()
    }

    /// `Σ_j π_j x_j`.
    pub fn dot(&self, x: &[T]) -> T {
        self.coefficients.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("leaf,coefficient\n");
        for (j, c) in self.coefficients.iter().enumerate() {
            out.push_str(&format!("{},{:.17e}\n", j + 1, c.as_f64()));
        }
        out
    }
}

/// Coefficients of every leaf: the product, along the path to the root, of
/// `cos θ_k` where the path leaves node `k` to the left and `sin θ_k` where it
/// leaves to the right.
pub fn coefficients<T: Real>(
    tree: &McKeanTree,
    angles: &AngleVector<T>,
) -> Result<CoefficientVector<T>> {
    let mut out = Vec::with_capacity(tree.n_leaves());
    let max_abs = coefficients_into(tree, angles.as_slice(), &mut out)?;
    Ok(CoefficientVector {
        coefficients: out,
        max_abs,
    })
}

/// Buffer-reusing form of [`coefficients`]; returns `π°`.
pub(crate) fn coefficients_into<T: Real>(
    tree: &McKeanTree,
    angles: &[T],
    out: &mut Vec<T>,
) -> Result<T> {
    if angles.len() != tree.n_internal() {
        return Err(Error::arg(format!(
            "{} angles supplied for a tree with {} internal nodes",
            angles.len(),
            tree.n_internal()
        )));
    }
    out.clear();
    let mut pending: Vec<T> = Vec::new();
    let mut current = T::one();
    let mut next_angle = angles.iter();
    let mut max_abs = T::zero();
    for kind in tree.nodes() {
        match kind {
            NodeKind::Internal => {
                let theta = *next_angle.next().expect("angle count checked");
                let (s, c) = theta.sin_cos();
                pending.push(current * s);
                current *= c;
            }
            NodeKind::Leaf => {
                out.push(current);
                max_abs = max_abs.max(current.abs());
                current = pending.pop().unwrap_or_else(T::zero);
            }
        }
    }
    Ok(max_abs)
}

/// Number of Gauss–Legendre panels and points per panel used by [`alpha_p`];
/// 64 × 8 = 512 nodes.
pub const ALPHA_PANELS: usize = 64;
pub const ALPHA_ORDER: usize = 8;

/// `α_p = (1/2π) ∫_0^{2π} |cos θ|^p dθ`, by composite Gauss–Legendre on the
/// quarter period after substituting `θ = (π/2)(1 − s²)`, which turns the
/// `(π/2 − θ)^p` endpoint behaviour into `s^{2p+1}`.
pub fn alpha_p<T: Real>(p: T) -> T {
    assert!(p > T::zero(), "alpha_p needs p > 0");
    let rule = CompositeGauss::new(0.0, 1.0, ALPHA_PANELS, ALPHA_ORDER);
    let half_pi = T::lit(FRAC_PI_2);
    let quarter = rule.integrate(|s: T| {
        let theta = half_pi * (T::one() - s * s);
        theta.cos().max(T::zero()).powf(p) * T::PI() * s
    });
    quarter * T::lit(4.0 / (2.0 * PI))
}

/// Closed form `Γ((p+1)/2) / (√π Γ(p/2 + 1))`, used to cross-check
/// [`alpha_p`].
pub fn alpha_p_closed_form<T: Real>(p: T) -> T {
    let half = T::lit(0.5);
    let ln = (p * half + half).ln_gamma() - (p * half + T::one()).ln_gamma();
    ln.exp() / T::PI().sqrt()
}

/// Upper bound `x^{-p} exp{-t(1 - 2α_p)}` for `P{π° > x}` at time `t`.
pub fn lemma1_bound<T: Real>(x: T, p: T, t: T) -> Result<T> {
    if !(x > T::zero() && x < T::one()) {
        return Err(Error::domain(format!("x = {x} must lie in (0, 1)")));
    }
    if p <= T::lit(2.0) {
        return Err(Error::domain(format!(
            "p = {p} must exceed 2 (alpha_2 = 1/2 makes the bound constant)"
        )));
    }
    if t < T::zero() {
        return Err(Error::domain(format!("t = {t} must be nonnegative")));
    }
    let rate = T::one() - T::lit(2.0) * alpha_p(p);
    Ok((-t * rate).exp() / x.powf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use crate::tree::{enumerate_trees, sample_tree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_node() {
        let tree: McKeanTree = "ILL".parse().unwrap();
        let theta = 0.7f64;
        let c = coefficients(&tree, &AngleVector::new(vec![theta])).unwrap();
        assert_eq!(c.as_slice(), &[theta.cos(), theta.sin()]);
        assert_eq!(c.max_abs(), theta.cos().abs().max(theta.sin().abs()));
    }

    #[test]
    fn single_leaf_is_one() {
        let c = coefficients::<f64>(&McKeanTree::leaf(), &AngleVector::new(vec![])).unwrap();
        assert_eq!(c.as_slice(), &[1.0]);
        assert_eq!(c.max_abs(), 1.0);
    }

    #[test]
    fn balanced_tree_paths() {
        // an external labelling of the internal nodes vs their pre-order rank
        // label:          1  2  4  6  3  5  7
        // pre-order rank: 0  1  2  3  4  5  6
        let tree: McKeanTree = "IIILLILLIILLILL".parse().unwrap();
        let theta: Vec<f64> = (0..7).map(|k| 0.3 + 0.41 * k as f64).collect();
        let c = coefficients(&tree, &AngleVector::new(theta.clone())).unwrap();
        // θ̃_1 → rank 0, θ̃_2 → 1, θ̃_4 → 2, θ̃_3 → 4, θ̃_5 → 5
        let pi1 = theta[2].cos() * theta[1].cos() * theta[0].cos();
        let pi6 = theta[5].sin() * theta[4].cos() * theta[0].sin();
        assert!((c.as_slice()[0] - pi1).abs() < 1e-15);
        assert!((c.as_slice()[5] - pi6).abs() < 1e-15);
    }

    #[test]
    fn zero_angles_select_leftmost_leaf() {
        for tree in enumerate_trees(5).unwrap() {
            let c = coefficients(&tree, &AngleVector::new(vec![0.0f64; 4])).unwrap();
            assert_eq!(c.as_slice()[0], 1.0);
            assert!(c.as_slice()[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn length_mismatch_is_an_argument_error() {
        let tree: McKeanTree = "IILLL".parse().unwrap();
        let err = coefficients(&tree, &AngleVector::new(vec![0.1f64])).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn angles_are_reduced_into_range() {
        let a = AngleVector::new(vec![-0.5f64, 7.0]);
        assert!((a.as_slice()[0] - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert!((a.as_slice()[1] - (7.0 - 2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn energy_identity_on_sampled_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2usize, 10, 300, 10_000] {
            let tree = sample_tree(n, &mut rng);
            let angles = AngleVector::<f64>::uniform(n - 1, &mut rng);
            let c = coefficients(&tree, &angles).unwrap();
            assert!((c.energy() - 1.0).abs() < 1e-10);
            assert!(c.as_slice().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn energy_identity_in_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tree = sample_tree(200, &mut rng);
        let angles = AngleVector::<f32>::uniform(199, &mut rng);
        let c = coefficients(&tree, &angles).unwrap();
        assert!((c.energy() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn alpha_p_values() {
        assert!((alpha_p(2.0f64) - 0.5).abs() < 1e-14);
        assert!((alpha_p(4.0f64) - 0.375).abs() < 1e-14);
        assert!((alpha_p(3.0f64) - 4.0 / (3.0 * PI)).abs() < 1e-14);
        assert!((alpha_p(1.0f64) - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn alpha_p_quadrature_matches_closed_form_and_adaptive() {
        for p in [0.5f64, 1.0, 2.2, 2.5, 3.0, 3.7, 6.0, 11.3] {
            let q = alpha_p(p);
            let cf = alpha_p_closed_form(p);
            assert!((q - cf).abs() < 1e-10, "p = {p}: {q} vs {cf}");
            let adaptive =
                adaptive_simpson(&|th: f64| th.cos().abs().powf(p), 0.0, 2.0 * PI, 1e-13)
                    / (2.0 * PI);
            assert!((q - adaptive).abs() < 1e-9, "p = {p}: {q} vs {adaptive}");
        }
    }

    #[test]
    fn lemma1_bound_values_and_domain() {
        let near_one = lemma1_bound(1.0f64 - 1e-12, 3.0, 0.0).unwrap();
        assert!((near_one - 1.0).abs() < 1e-10);
        let b = lemma1_bound(0.9f64, 3.0, 10.0).unwrap();
        // 0.9^-3 exp(-10 (1 - 8/(3π)))
        assert!((b - 0.302_505_802_021_513_8).abs() < 1e-12);
        assert!(lemma1_bound(0.5f64, 3.0, 400.0).unwrap() < 1e-20);
        assert!(matches!(
            lemma1_bound(0.5f64, 2.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            lemma1_bound(1.5f64, 3.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lemma1_bound_monotone() {
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let b = lemma1_bound(0.5f64, 3.0, k as f64 * 0.5).unwrap();
            assert!(b < prev);
            prev = b;
        }
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let b = lemma1_bound(k as f64 * 0.1, 3.0, 2.0).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }
}

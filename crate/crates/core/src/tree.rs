//! McKean trees: full binary trees indexing the terms of the Wild sum.
//!
//! A tree is stored as its pre-order sequence of node kinds. Because every
//! internal node has exactly two children, this sequence determines the
//! tree, and the left child of the internal node at position `i` is always
//! at `i + 1`. Internal nodes are numbered in pre-order (`0..n-1`), which is
//! the order in which angles are attached to them; leaves are numbered left
//! to right, which is also their pre-order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest `n` for which [`catalan`] fits in a `u64`.
pub const MAX_CATALAN_N: usize = 37;

/// Default cap for [`enumerate_trees`]; `|G(10)| = 4862`.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum NodeKind {
    Internal,
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Parent link of a node in pre-order position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub parent: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct McKeanTree {
    nodes: Vec<NodeKind>,
}

impl McKeanTree {
    /// The single-leaf tree, the sole element of `G(1)`.
    pub fn leaf() -> Self {
        Self {
            nodes: vec![NodeKind::Leaf],
        }
    }

    /// Joins two trees under a new root.
    pub fn join(left: &Self, right: &Self) -> Self {
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(NodeKind::Internal);
        nodes.extend_from_slice(&left.nodes);
        nodes.extend_from_slice(&right.nodes);
        Self { nodes }
    }

    /// Builds a tree from a pre-order node sequence, checking that it is a
    /// complete full binary tree.
    pub fn from_preorder(nodes: Vec<NodeKind>) -> Result<Self> {
        // open slots: starts with the root slot; internal fills one and opens two
        let mut open: usize = 1;
        for (i, kind) in nodes.iter().enumerate() {
            if open == 0 {
                return Err(Error::arg(format!(
                    "pre-order sequence complete after {i} nodes, {} trailing",
                    nodes.len() - i
                )));
            }
            match kind {
                NodeKind::Internal => open += 1,
                NodeKind::Leaf => open -= 1,
            }
        }
        if open != 0 {
            return Err(Error::arg(format!(
                "pre-order sequence incomplete: {open} open child slots"
            )));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.len().div_ceil(2)
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.len() / 2
    }

    /// Parent index and side for every node, `None` for the root.
    pub fn links(&self) -> Vec<Option<Link>> {
        let mut links = vec![None; self.nodes.len()];
        // stack of internal nodes still waiting for their right child
        let mut pending: Vec<usize> = Vec::new();
        let mut prev: Option<usize> = None;
        for (i, kind) in self.nodes.iter().enumerate() {
            if let Some(p) = prev {
                links[i] = match self.nodes[p] {
                    NodeKind::Internal => Some(Link {
                        parent: p,
                        side: Side::Left,
                    }),
                    NodeKind::Leaf => pending.pop().map(|parent| Link {
                        parent,
                        side: Side::Right,
                    }),
                };
            }
            if *kind == NodeKind::Internal {
                pending.push(i);
            }
            prev = Some(i);
        }
        links
    }

    /// Leaf count `ℓ(v)` below each internal node, indexed by internal
    /// (pre-order) rank.
    pub fn internal_leaf_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_internal()];
        let mut stack: Vec<u32> = Vec::new();
        let mut rank = self.n_internal();
        for kind in self.nodes.iter().rev() {
            match kind {
                NodeKind::Leaf => stack.push(1),
                NodeKind::Internal => {
                    // reversed pre-order: the left subtree count is on top
                    let left = stack.pop().expect("validated tree");
                    let right = stack.pop().expect("validated tree");
                    rank -= 1;
                    counts[rank] = left + right;
                    stack.push(left + right);
                }
            }
        }
        counts
    }

    /// `ln p_n(γ)`: sum over internal nodes of `-ln(ℓ(v) - 1)`.
    pub fn ln_probability(&self) -> f64 {
        self.internal_leaf_counts()
            .iter()
            .map(|&l| -((l - 1) as f64).ln())
            .sum()
    }
}

impl fmt::Display for McKeanTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .nodes
            .iter()
            .map(|k| match k {
                NodeKind::Internal => 'I',
                NodeKind::Leaf => 'L',
            })
            .collect();
        f.write_str(&s)
    }
}

impl FromStr for McKeanTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let nodes = s
            .trim()
            .chars()
            .map(|c| match c {
                'I' => Ok(NodeKind::Internal),
                'L' => Ok(NodeKind::Leaf),
                other => Err(Error::Parse(format!("unexpected tree symbol {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_preorder(nodes)
    }
}

/// `p_n(γ)`, the probability the Wild recursion assigns to a tree.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TreeWeight(f64);

impl TreeWeight {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Leaf depths `δ_1..δ_n` in left-to-right order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthProfile {
    depths: Vec<u32>,
}

impl DepthProfile {
    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    /// `min_j δ_j`, the depth of the tree.
    pub fn tree_depth(&self) -> u32 {
        self.depths.iter().copied().min().unwrap_or(0)
    }

    /// Sorted copy of the depths.
    pub fn multiset(&self) -> Vec<u32> {
        let mut d = self.depths.clone();
        d.sort_unstable();
        d
    }

    /// `Σ_j x^{δ_j}`.
    pub fn power_sum<T: Real>(&self, x: T) -> T {
        self.depths.iter().map(|&d| x.powi(d as i32)).sum()
    }

    /// Kraft equality `Σ 2^{-δ_j} = 1`, checked exactly by carrying pairs of
    /// leaves up one level at a time.
    pub fn kraft_equality(&self) -> bool {
        let mut hist: BTreeMap<u32, u64> = BTreeMap::new();
        for &d in &self.depths {
            *hist.entry(d).or_default() += 1;
        }
        let max = match hist.keys().next_back() {
            Some(&m) => m,
            None => return false,
        };
        let mut carry = 0u64;
        for level in (1..=max).rev() {
            let here = hist.get(&level).copied().unwrap_or(0) + carry;
            if here % 2 != 0 {
                return false;
            }
            carry = here / 2;
        }
        hist.get(&0).copied().unwrap_or(0) + carry == 1
    }
}

/// `|G(n)| = C(2n-2, n-1)/n`, exact.
pub fn catalan(n: usize) -> Result<u64> {
    if n == 0 || n > MAX_CATALAN_N {
        return Err(Error::Range {
            what: "catalan n",
            value: n as u64,
            limit: MAX_CATALAN_N as u64,
        });
    }
    // c_{k+1} = c_k · 2(2k+1)/(k+2), with c_0 = 1 = |G(1)|
    let mut c: u128 = 1;
    for k in 0..(n - 1) as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    Ok(c as u64)
}

/// All trees of `G(n)`, for `n ≤ DEFAULT_ENUMERATION_CAP`.
pub fn enumerate_trees(n: usize) -> Result<Vec<McKeanTree>> {
    enumerate_trees_capped(n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_trees_capped(n: usize, cap: usize) -> Result<Vec<McKeanTree>> {
    if n == 0 || n > cap {
        return Err(Error::Range {
            what: "enumeration n",
            value: n as u64,
            limit: cap as u64,
        });
    }
    let mut by_size: Vec<Vec<McKeanTree>> = vec![Vec::new(), vec![McKeanTree::leaf()]];
    for m in 2..=n {
        let mut trees = Vec::new();
        // right subtree takes j leaves, left takes m - j
        for j in 1..m {
            for left in &by_size[m - j] {
                for right in &by_size[j] {
                    trees.push(McKeanTree::join(left, right));
                }
            }
        }
        by_size.push(trees);
    }
    Ok(by_size.swap_remove(n))
}

/// `p_n(γ) = Π_v 1/(ℓ(v) - 1)` over internal nodes `v`.
pub fn tree_probability(tree: &McKeanTree) -> TreeWeight {
    TreeWeight(tree.ln_probability().exp())
}

/// Draws a tree from `p_n`: split `n` leaves by `j` uniform on `1..n-1`,
/// right subtree gets `j`, left gets `n - j`, recurse.
pub fn sample_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> McKeanTree {
    assert!(n >= 1, "a McKean tree has at least one leaf");
    let mut nodes = Vec::with_capacity(2 * n - 1);
    let mut stack: Vec<usize> = vec![n];
    while let Some(m) = stack.pop() {
        if m == 1 {
            nodes.push(NodeKind::Leaf);
        } else {
            let j = rng.random_range(1..m);
            nodes.push(NodeKind::Internal);
            stack.push(j);
            stack.push(m - j);
        }
    }
    McKeanTree { nodes }
}

/// Number of edges from each leaf to the root.
pub fn leaf_depths(tree: &McKeanTree) -> DepthProfile {
    let mut depths = Vec::with_capacity(tree.n_leaves());
    // depth of the next node to be visited, plus depths of pending right children
    let mut pending: Vec<u32> = Vec::new();
    let mut current = 0u32;
    for kind in tree.nodes() {
        match kind {
            NodeKind::Internal => {
                pending.push(current + 1);
                current += 1;
            }
            NodeKind::Leaf => {
                depths.push(current);
                current = pending.pop().unwrap_or(0);
            }
        }
    }
    DepthProfile { depths }
}

/// `E[Σ_j x^{δ_j} | ν = n] = Γ(2x + n - 1) / (Γ(2x) Γ(n))`, in log space.
pub fn depth_moment_exact<T: Real>(x: T, n: usize) -> T {
    assert!(x > T::zero() && n >= 1);
    let two_x = x + x;
    let nf = T::from_usize_lossy(n);
    (((two_x + nf - T::one()).ln_gamma()) - two_x.ln_gamma() - nf.ln_gamma()).exp()
}

/// Rows `(tree_id, preorder, probability, depth multiset)` for an enumeration.
pub fn enumeration_csv(trees: &[McKeanTree]) -> String {
    let mut out = String::from("tree_id,preorder,probability,depths\n");
    for (id, tree) in trees.iter().enumerate() {
        let depths: Vec<String> = leaf_depths(tree)
            .multiset()
            .iter()
            .map(u32::to_string)
            .collect();
        out.push_str(&format!(
            "{id},{tree},{:.17e},{}\n",
            tree_probability(tree).value(),
            depths.join(";")
        ));
    }
    out
}

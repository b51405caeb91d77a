//! Non-recombining scenario trees.
//!
//! Nodes at each level are stored contiguously and ordered by parent, so the
//! children of a node and the leaves below it form contiguous index ranges.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the probability and martingale-increment checks.
pub const TREE_TOL: f64 = 1e-12;

/// Residual above which the martingale representation is rejected.
pub const REPRESENTATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    /// Branch probability from the parent (1 at the root).
    pub prob: f64,
    /// Brownian increment on the branch into this node (0 at the root).
    pub increment: f64,
    /// Probability of the path from the root to this node.
    pub path_prob: f64,
    /// Cumulative increment along the path, standing in for `B_t`.
    pub position: f64,
    pub children: Range<usize>,
    pub leaves: Range<usize>,
}

/// One branch of the serialized tree format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub parent: usize,
    pub prob: f64,
    pub increment: f64,
}

/// Serialized tree: `levels[k]` lists the nodes of level `k + 1`; the root is
/// implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub horizon: f64,
    pub levels: Vec<Vec<BranchSpec>>,
}

/// Context handed to closures building node-indexed processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCtx {
    pub level: usize,
    pub index: usize,
    pub time: f64,
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    horizon: f64,
    levels: Vec<Vec<Node>>,
}

impl ScenarioTree {
    /// Canonical symmetric binary tree: `p = 1/2`, `ΔB = ±√Δt`.
    pub fn binary(steps: usize, horizon: f64) -> Result<Self> {
        if steps > 24 {
            return Err(Error::InvalidTree(format!(
                "binary tree with {steps} steps has too many nodes"
            )));
        }
        let dt = horizon / steps.max(1) as f64;
        let h = dt.sqrt();
        let levels = (0..steps)
            .map(|k| {
                (0..1usize << k)
                    .flat_map(|parent| {
                        [
                            BranchSpec { parent, prob: 0.5, increment: h },
                            BranchSpec { parent, prob: 0.5, increment: -h },
                        ]
                    })
                    .collect()
            })
            .collect();
        Self::from_spec(&TreeSpec { horizon, levels })
    }

    /// Single-path tree (one child per node, `p = 1`, `ΔB = 0`). Carries
    /// deterministic problems at horizons where a branching tree would not
    /// fit in memory.
    pub fn chain(steps: usize, horizon: f64) -> Result<Self> {
        let levels = (0..steps)
            .map(|_| vec![BranchSpec { parent: 0, prob: 1.0, increment: 0.0 }])
            .collect();
        Self::from_spec(&TreeSpec { horizon, levels })
    }

    /// Random tree with `branching` children per node. Probabilities are
    /// drawn away from zero and increments are centred so the martingale
    /// condition holds exactly up to rounding. With `branching == 2` the
    /// result is representable by a single Brownian increment.
    pub fn random<R: Rng>(
        steps: usize,
        horizon: f64,
        branching: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if branching < 2 {
            return Err(Error::InvalidTree("random trees need branching >= 2".into()));
        }
        let dt = horizon / steps.max(1) as f64;
        let mut levels = Vec::with_capacity(steps);
        let mut width = 1usize;
        for _ in 0..steps {
            let mut level = Vec::with_capacity(width * branching);
            for parent in 0..width {
                let raw: Vec<f64> = (0..branching).map(|_| rng.gen_range(0.2..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
                let incs: Vec<f64> = (0..branching)
                    .map(|_| rng.gen_range(-2.0..2.0) * dt.sqrt())
                    .collect();
                let mean: f64 = probs.iter().zip(&incs).map(|(p, x)| p * x).sum();
                let mut centred: Vec<f64> = incs.iter().map(|x| x - mean).collect();
                // keep branches distinguishable
                if branching == 2 && (centred[0] - centred[1]).abs() < 1e-3 {
                    centred[0] = dt.sqrt() * probs[1];
                    centred[1] = -dt.sqrt() * probs[0];
                }
                for (prob, increment) in probs.into_iter().zip(centred) {
                    level.push(BranchSpec { parent, prob, increment });
                }
            }
            width = level.len();
            levels.push(level);
        }
        Self::from_spec(&TreeSpec { horizon, levels })
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        if !(spec.horizon.is_finite() && spec.horizon > 0.0) {
            return Err(Error::InvalidTree(format!("horizon must be positive, got {}", spec.horizon)));
        }
        if spec.levels.is_empty() {
            return Err(Error::InvalidTree("tree needs at least one step".into()));
        }
        let steps = spec.levels.len();
        let mut levels: Vec<Vec<Node>> = Vec::with_capacity(steps + 1);
        levels.push(vec![Node {
            parent: None,
            prob: 1.0,
            increment: 0.0,
            path_prob: 1.0,
            position: 0.0,
            children: 0..0,
            leaves: 0..0,
        }]);
        for (k, branches) in spec.levels.iter().enumerate() {
            let prev = &mut levels[k];
            let width = prev.len();
            let mut next = Vec::with_capacity(branches.len());
            let mut last_parent = 0usize;
            for (i, b) in branches.iter().enumerate() {
                if b.parent >= width {
                    return Err(Error::InvalidTree(format!(
                        "level {} node {i}: parent {} out of range",
                        k + 1,
                        b.parent
                    )));
                }
                if b.parent < last_parent {
                    return Err(Error::InvalidTree(format!(
                        "level {} nodes must be ordered by parent",
                        k + 1
                    )));
                }
                last_parent = b.parent;
                if !(b.prob > 0.0 && b.prob <= 1.0) || !b.increment.is_finite() {
                    return Err(Error::InvalidTree(format!(
                        "level {} node {i}: invalid probability {} or increment {}",
                        k + 1,
                        b.prob,
                        b.increment
                    )));
                }
                let p = &mut prev[b.parent];
                if p.children.is_empty() {
                    p.children = i..i + 1;
                } else {
                    p.children.end = i + 1;
                }
                next.push(Node {
                    parent: Some(b.parent),
                    prob: b.prob,
                    increment: b.increment,
                    path_prob: p.path_prob * b.prob,
                    position: p.position + b.increment,
                    children: 0..0,
                    leaves: 0..0,
                });
            }
            for (j, node) in prev.iter().enumerate() {
                if node.children.is_empty() {
                    return Err(Error::InvalidTree(format!("level {k} node {j} has no children")));
                }
                let kids = &next[node.children.clone()];
                if kids.len() == 1 && kids[0].prob != 1.0 {
                    return Err(Error::InvalidTree(format!(
                        "level {k} node {j}: single child must carry probability 1"
                    )));
                }
                if kids.len() > 1 && kids.iter().any(|c| c.prob >= 1.0) {
                    return Err(Error::InvalidTree(format!(
                        "level {k} node {j}: branch probabilities must lie in (0,1)"
                    )));
                }
                let total: f64 = kids.iter().map(|c| c.prob).sum();
                if (total - 1.0).abs() > TREE_TOL {
                    return Err(Error::InvalidTree(format!(
                        "level {k} node {j}: probabilities sum to {total}"
                    )));
                }
                let drift: f64 = kids.iter().map(|c| c.prob * c.increment).sum();
                if drift.abs() > TREE_TOL {
                    return Err(Error::InvalidTree(format!(
                        "level {k} node {j}: increments have mean {drift:e}"
                    )));
                }
            }
            levels.push(next);
        }
        // leaf ranges, bottom-up
        let n_leaves = levels[steps].len();
        for (i, leaf) in levels[steps].iter_mut().enumerate() {
            leaf.leaves = i..i + 1;
        }
        for k in (0..steps).rev() {
            let (upper, lower) = levels.split_at_mut(k + 1);
            for node in upper[k].iter_mut() {
                let first = lower[0][node.children.start].leaves.start;
                let last = lower[0][node.children.end - 1].leaves.end;
                node.leaves = first..last;
            }
        }
        debug_assert_eq!(levels[0][0].leaves, 0..n_leaves);
        Ok(Self { horizon: spec.horizon, levels })
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            horizon: self.horizon,
            levels: self.levels[1..]
                .iter()
                .map(|level| {
                    level
                        .iter()
                        .map(|n| BranchSpec {
                            parent: n.parent.unwrap_or(0),
                            prob: n.prob,
                            increment: n.increment,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }

    pub fn level(&self, level: usize) -> &[Node] {
        &self.levels[level]
    }

    pub fn width(&self, level: usize) -> usize {
        self.levels[level].len()
    }

    pub fn num_leaves(&self) -> usize {
        self.levels[self.steps()].len()
    }

    pub fn node(&self, level: usize, index: usize) -> &Node {
        &self.levels[level][index]
    }

    pub fn ctx(&self, level: usize, index: usize) -> NodeCtx {
        NodeCtx {
            level,
            index,
            time: self.time(level),
            position: self.levels[level][index].position,
        }
    }

    pub fn leaf_prob(&self, leaf: usize) -> f64 {
        self.levels[self.steps()][leaf].path_prob
    }

    /// Index of the level-`level` node on the path to `leaf`.
    pub fn ancestor_of_leaf(&self, leaf: usize, level: usize) -> usize {
        let nodes = &self.levels[level];
        nodes.partition_point(|n| n.leaves.end <= leaf)
    }

    /// Whether every internal node has exactly two children.
    pub fn is_binary(&self) -> bool {
        self.levels[..self.steps()]
            .iter()
            .all(|lvl| lvl.iter().all(|n| n.children.len() == 2))
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        if level > self.steps() {
            return Err(Error::LevelOutOfRange { level, steps: self.steps() });
        }
        Ok(())
    }

    /// `E[X | F_k]` for `X` given on the nodes of level `k + 1`.
    pub fn cond_expect(&self, next: &[f64], level: usize) -> Result<Vec<f64>> {
        if level >= self.steps() {
            return Err(Error::LevelOutOfRange { level, steps: self.steps() });
        }
        if next.len() != self.width(level + 1) {
            return Err(Error::Shape(format!(
                "level {} has {} nodes, got {} values",
                level + 1,
                self.width(level + 1),
                next.len()
            )));
        }
        let children = &self.levels[level + 1];
        Ok(self.levels[level]
            .iter()
            .map(|n| n.children.clone().map(|c| children[c].prob * next[c]).sum())
            .collect())
    }

    /// Martingale integrand `Z` at level `k` such that
    /// `X(child) = E[X|F_k] + Z ΔB(child)`.
    ///
    /// Binary nodes use the two-point slope; other nodes use the
    /// probability-weighted regression slope and must reproduce `X` to within
    /// [`REPRESENTATION_TOL`].
    pub fn martingale_coeff(&self, next: &[f64], level: usize) -> Result<Vec<f64>> {
        let mean = self.cond_expect(next, level)?;
        let children = &self.levels[level + 1];
        let mut out = Vec::with_capacity(mean.len());
        for (i, node) in self.levels[level].iter().enumerate() {
            let kids = node.children.clone();
            let z = if kids.len() == 2 {
                let (u, d) = (kids.start, kids.start + 1);
                let spread = children[u].increment - children[d].increment;
                if spread == 0.0 {
                    0.0
                } else {
                    (next[u] - next[d]) / spread
                }
            } else {
                let var: f64 = kids.clone().map(|c| children[c].prob * children[c].increment.powi(2)).sum();
                let cov: f64 = kids
                    .clone()
                    .map(|c| children[c].prob * (next[c] - mean[i]) * children[c].increment)
                    .sum();
                if var > 0.0 {
                    cov / var
                } else {
                    0.0
                }
            };
            let residual = kids
                .map(|c| (next[c] - mean[i] - z * children[c].increment).abs())
                .fold(0.0, f64::max);
            let scale = 1.0 + mean[i].abs();
            if residual > REPRESENTATION_TOL * scale {
                return Err(Error::Representation { level, node: i, residual });
            }
            out.push(z);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_node_average() {
        let tree = ScenarioTree::binary(1, 1.0).unwrap();
        assert_eq!(tree.cond_expect(&[1.0, 3.0], 0).unwrap(), vec![2.0]);
    }

    #[test]
    fn constants_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = ScenarioTree::random(3, 1.0, 3, &mut rng).unwrap();
        let c = vec![4.25; tree.width(3)];
        let e = tree.cond_expect(&c, 2).unwrap();
        assert!(e.iter().all(|v| (v - 4.25).abs() < 1e-14));
    }

    #[test]
    fn nested_expectation_matches_path_measure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tree = ScenarioTree::random(3, 1.0, 3, &mut rng).unwrap();
        let leaves: Vec<f64> = (0..tree.num_leaves()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut vals = leaves.clone();
        for k in (0..3).rev() {
            vals = tree.cond_expect(&vals, k).unwrap();
            for (i, node) in tree.level(k).iter().enumerate() {
                // direct oracle: leaf-weighted average over the subtree
                let direct: f64 = node
                    .leaves
                    .clone()
                    .map(|l| tree.leaf_prob(l) * leaves[l])
                    .sum::<f64>()
                    / node.path_prob;
                assert!((direct - vals[i]).abs() <= 1e-12, "level {k} node {i}");
            }
        }
    }

    #[test]
    fn level_out_of_range() {
        let tree = ScenarioTree::binary(2, 1.0).unwrap();
        assert!(matches!(tree.cond_expect(&[0.0; 4], 2), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn martingale_coeff_cases() {
        let tree = ScenarioTree::binary(1, 0.25).unwrap();
        let h = tree.dt().sqrt();
        assert_eq!(tree.martingale_coeff(&[0.7, 0.7], 0).unwrap(), vec![0.0]);
        let z = tree.martingale_coeff(&[h, -h], 0).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn binary_representation_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = ScenarioTree::random(4, 2.0, 2, &mut rng).unwrap();
        for k in 0..4 {
            let x: Vec<f64> = (0..tree.width(k + 1)).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let m = tree.cond_expect(&x, k).unwrap();
            let z = tree.martingale_coeff(&x, k).unwrap();
            for (i, node) in tree.level(k).iter().enumerate() {
                for c in node.children.clone() {
                    let rebuilt = m[i] + z[i] * tree.node(k + 1, c).increment;
                    assert!((rebuilt - x[c]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn ternary_nonrepresentable_is_rejected() {
        let spec = TreeSpec {
            horizon: 1.0,
            levels: vec![vec![
                BranchSpec { parent: 0, prob: 0.25, increment: 1.0 },
                BranchSpec { parent: 0, prob: 0.5, increment: 0.0 },
                BranchSpec { parent: 0, prob: 0.25, increment: -1.0 },
            ]],
        };
        let tree = ScenarioTree::from_spec(&spec).unwrap();
        // linear in the increment: representable
        assert!(tree.martingale_coeff(&[2.0, 1.0, 0.0], 0).is_ok());
        // convex in the increment: not representable
        assert!(matches!(
            tree.martingale_coeff(&[1.0, 0.0, 1.0], 0),
            Err(Error::Representation { .. })
        ));
    }

    #[test]
    fn rejects_bad_probabilities_and_drift() {
        let bad_sum = TreeSpec {
            horizon: 1.0,
            levels: vec![vec![
                BranchSpec { parent: 0, prob: 0.5, increment: 1.0 },
                BranchSpec { parent: 0, prob: 0.6, increment: -1.0 },
            ]],
        };
        assert!(ScenarioTree::from_spec(&bad_sum).is_err());
        let drift = TreeSpec {
            horizon: 1.0,
            levels: vec![vec![
                BranchSpec { parent: 0, prob: 0.5, increment: 1.0 },
                BranchSpec { parent: 0, prob: 0.5, increment: -0.5 },
            ]],
        };
        assert!(ScenarioTree::from_spec(&drift).is_err());
    }

    #[test]
    fn canonical_binary_quadratic_variation() {
        let tree = ScenarioTree::binary(3, 1.5).unwrap();
        for k in 0..3 {
            for node in tree.level(k) {
                let qv: f64 = node
                    .children
                    .clone()
                    .map(|c| {
                        let ch = tree.node(k + 1, c);
                        ch.prob * ch.increment * ch.increment
                    })
                    .sum();
                assert!((qv - tree.dt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ancestors_and_spec_round_trip() {
        let tree = ScenarioTree::binary(3, 1.0).unwrap();
        assert_eq!(tree.ancestor_of_leaf(5, 1), 1);
        assert_eq!(tree.ancestor_of_leaf(5, 2), 2);
        assert_eq!(tree.ancestor_of_leaf(5, 3), 5);
        let back = ScenarioTree::from_spec(&tree.to_spec()).unwrap();
        assert_eq!(back, tree);
    }
}

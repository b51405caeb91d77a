//! Adapted processes on a scenario tree.
//!
//! An [`FProcess`] carries one value per node (adapted to the full
//! filtration); a [`GProcess`] carries one value per subfiltration atom.

use serde::{Deserialize, Serialize};

use super::filtration::SubFiltration;
use super::tree::{NodeCtx, ScenarioTree};
use crate::error::{Error, Result};

/// Which filtration a process is adapted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adaptedness {
    F,
    G,
}

macro_rules! level_storage {
    ($name:ident) => {
        impl $name {
            pub fn from_levels(levels: Vec<Vec<f64>>) -> Self {
                Self { levels }
            }

            pub fn levels(&self) -> &[Vec<f64>] {
                &self.levels
            }

            pub fn into_levels(self) -> Vec<Vec<f64>> {
                self.levels
            }

            pub fn level(&self, k: usize) -> &[f64] {
                &self.levels[k]
            }

            pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
                &mut self.levels[k]
            }

            pub fn get(&self, k: usize, i: usize) -> f64 {
                self.levels[k][i]
            }

            pub fn set(&mut self, k: usize, i: usize, v: f64) {
                self.levels[k][i] = v;
            }

            pub fn num_levels(&self) -> usize {
                self.levels.len()
            }

            /// Elementwise `self - other`.
            pub fn sub(&self, other: &Self) -> Self {
                self.zip_with(other, |a, b| a - b)
            }

            pub fn add(&self, other: &Self) -> Self {
                self.zip_with(other, |a, b| a + b)
            }

            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                Self {
                    levels: self.levels.iter().map(|l| l.iter().map(|&v| f(v)).collect()).collect(),
                }
            }

            pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                Self {
                    levels: self
                        .levels
                        .iter()
                        .zip(&other.levels)
                        .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                        .collect(),
                }
            }

            /// Largest absolute entry.
            pub fn sup_abs(&self) -> f64 {
                self.levels.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
            }

            /// Largest absolute difference to `other`.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.levels
                    .iter()
                    .flatten()
                    .zip(other.levels.iter().flatten())
                    .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
            }
        }
    };
}

/// Node-indexed process: `levels[k][i]` is the value at node `i` of level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FProcess {
    levels: Vec<Vec<f64>>,
}

level_storage!(FProcess);

impl FProcess {
    pub fn zeros(tree: &ScenarioTree) -> Self {
        Self::constant(tree, 0.0)
    }

    pub fn constant(tree: &ScenarioTree, c: f64) -> Self {
        Self {
            levels: (0..=tree.steps()).map(|k| vec![c; tree.width(k)]).collect(),
        }
    }

    pub fn from_fn(tree: &ScenarioTree, f: impl Fn(NodeCtx) -> f64) -> Self {
        Self {
            levels: (0..=tree.steps())
                .map(|k| (0..tree.width(k)).map(|i| f(tree.ctx(k, i))).collect())
                .collect(),
        }
    }

    pub fn adaptedness(&self) -> Adaptedness {
        Adaptedness::F
    }

    pub fn check_shape(&self, tree: &ScenarioTree, what: &str) -> Result<()> {
        let ok = self.levels.len() == tree.steps() + 1
            && self.levels.iter().enumerate().all(|(k, l)| l.len() == tree.width(k));
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what} does not match the tree layout")))
        }
    }

    /// Value of the process on the path to `leaf` at `level`.
    pub fn along_leaf(&self, tree: &ScenarioTree, leaf: usize, level: usize) -> f64 {
        self.levels[level][tree.ancestor_of_leaf(leaf, level)]
    }
}

/// Atom-indexed process: `levels[k][g]` is the value on atom `g` of `G_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GProcess {
    levels: Vec<Vec<f64>>,
}

level_storage!(GProcess);

impl GProcess {
    pub fn zeros(sub: &SubFiltration) -> Self {
        Self::constant(sub, 0.0)
    }

    pub fn constant(sub: &SubFiltration, c: f64) -> Self {
        Self {
            levels: (0..=sub.tree().steps()).map(|k| vec![c; sub.num_atoms(k)]).collect(),
        }
    }

    pub fn adaptedness(&self) -> Adaptedness {
        Adaptedness::G
    }

    pub fn check_shape(&self, sub: &SubFiltration, what: &str) -> Result<()> {
        let ok = self.levels.len() == sub.tree().steps() + 1
            && self.levels.iter().enumerate().all(|(k, l)| l.len() == sub.num_atoms(k));
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what} does not match the atom layout")))
        }
    }

    /// Value on the atom containing `leaf` at `level`.
    pub fn along_leaf(&self, sub: &SubFiltration, leaf: usize, level: usize) -> f64 {
        let node = sub.tree().ancestor_of_leaf(leaf, level);
        self.levels[level][sub.atom_of(level, node)]
    }
}

//! Stopping times of the subfiltration and their exhaustive enumeration.

use serde::{Deserialize, Serialize};

use super::filtration::SubFiltration;
use super::process::{FProcess, GProcess};
use crate::error::{Error, Result};

/// Default cap on the number of enumerated stopping times.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// A stopping time given by its level on every leaf (path).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StoppingTime(pub Vec<u32>);

impl StoppingTime {
    pub fn constant(sub: &SubFiltration, level: usize) -> Self {
        Self(vec![level as u32; sub.tree().num_leaves()])
    }

    pub fn at(&self, leaf: usize) -> usize {
        self.0[leaf] as usize
    }

    pub fn leaves(&self) -> usize {
        self.0.len()
    }

    /// Pathwise minimum.
    pub fn min(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    pub fn dominates(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// Checks that `{τ <= k}` is a union of `G_k` atoms for every `k`.
    pub fn check_measurable(&self, sub: &SubFiltration) -> Result<()> {
        let tree = sub.tree();
        if self.0.len() != tree.num_leaves() {
            return Err(Error::Shape(format!(
                "stopping time has {} leaves, tree has {}",
                self.0.len(),
                tree.num_leaves()
            )));
        }
        if let Some(&bad) = self.0.iter().find(|&&l| l as usize > tree.steps()) {
            return Err(Error::LevelOutOfRange { level: bad as usize, steps: tree.steps() });
        }
        for k in 0..=tree.steps() {
            for g in 0..sub.num_atoms(k) {
                let mut leaves = sub.atom_leaves(k, g);
                let first = leaves.next().map(|l| self.at(l) <= k);
                if let Some(first) = first {
                    if leaves.any(|l| (self.at(l) <= k) != first) {
                        return Err(Error::NotStoppingTime { level: k, atom: g });
                    }
                }
            }
        }
        Ok(())
    }

    /// `X_τ` on every leaf for a node-indexed process.
    pub fn sample_f(&self, sub: &SubFiltration, x: &FProcess) -> Vec<f64> {
        let tree = sub.tree();
        (0..tree.num_leaves()).map(|l| x.along_leaf(tree, l, self.at(l))).collect()
    }

    /// `X_τ` on every leaf for an atom-indexed process.
    pub fn sample_g(&self, sub: &SubFiltration, x: &GProcess) -> Vec<f64> {
        (0..sub.tree().num_leaves()).map(|l| x.along_leaf(sub, l, self.at(l))).collect()
    }
}

/// Number of stopping times `τ >= floor` restricted to atom `g` of level `k`.
fn count_in_atom(sub: &SubFiltration, floor: &StoppingTime, k: usize, g: usize) -> u128 {
    let may_stop = floor_reached(sub, floor, k, g);
    if k == sub.tree().steps() {
        return 1;
    }
    let deferred = sub
        .child_atoms(k, g)
        .iter()
        .fold(1u128, |acc, &h| acc.saturating_mul(count_in_atom(sub, floor, k + 1, h)));
    deferred.saturating_add(may_stop as u128)
}

fn floor_reached(sub: &SubFiltration, floor: &StoppingTime, k: usize, g: usize) -> bool {
    // `floor` is a stopping time, so `{floor <= k}` is constant on the atom
    sub.atom_leaves(k, g).next().is_some_and(|l| floor.at(l) <= k)
}

/// Stopping-time choices on the leaves of one atom, as `(leaf, level)` lists.
fn enumerate_in_atom(
    sub: &SubFiltration,
    floor: &StoppingTime,
    k: usize,
    g: usize,
) -> Vec<Vec<(usize, u32)>> {
    let stop_here = || sub.atom_leaves(k, g).map(|l| (l, k as u32)).collect::<Vec<_>>();
    if k == sub.tree().steps() {
        return vec![stop_here()];
    }
    let mut out = Vec::new();
    if floor_reached(sub, floor, k, g) {
        out.push(stop_here());
    }
    let mut partial: Vec<Vec<(usize, u32)>> = vec![Vec::new()];
    for &h in sub.child_atoms(k, g) {
        let options = enumerate_in_atom(sub, floor, k + 1, h);
        partial = partial
            .iter()
            .flat_map(|p| {
                options.iter().map(move |o| {
                    let mut v = p.clone();
                    v.extend_from_slice(o);
                    v
                })
            })
            .collect();
    }
    out.extend(partial);
    out
}

/// Number of stopping times `τ >= floor`.
pub fn count_stopping_times_from(sub: &SubFiltration, floor: &StoppingTime) -> u128 {
    count_in_atom(sub, floor, 0, 0)
}

/// All stopping times `τ` with `τ >= floor` pathwise, where `floor` is itself
/// a stopping time. Each atom either stops or defers to its refinement.
pub fn enumerate_stopping_times_from(
    sub: &SubFiltration,
    floor: &StoppingTime,
    cap: usize,
) -> Result<Vec<StoppingTime>> {
    let count = count_stopping_times_from(sub, floor);
    if count > cap as u128 {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let n = sub.tree().num_leaves();
    Ok(enumerate_in_atom(sub, floor, 0, 0)
        .into_iter()
        .map(|assign| {
            let mut levels = vec![0u32; n];
            for (l, k) in assign {
                levels[l] = k;
            }
            StoppingTime(levels)
        })
        .collect())
}

/// All stopping times with values in `from_level..=N`.
pub fn enumerate_stopping_times(
    sub: &SubFiltration,
    from_level: usize,
    cap: usize,
) -> Result<Vec<StoppingTime>> {
    sub.tree().check_level(from_level)?;
    enumerate_stopping_times_from(sub, &StoppingTime::constant(sub, from_level), cap)
}

/// Stopping times from level `k` that may differ only on atom `g`; every
/// leaf outside the atom is set to `N`.
pub fn enumerate_stopping_times_in_atom(
    sub: &SubFiltration,
    k: usize,
    g: usize,
    cap: usize,
) -> Result<Vec<StoppingTime>> {
    let floor = StoppingTime::constant(sub, k);
    let count = count_in_atom(sub, &floor, k, g);
    if count > cap as u128 {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let n = sub.tree().num_leaves();
    let steps = sub.tree().steps() as u32;
    Ok(enumerate_in_atom(sub, &floor, k, g)
        .into_iter()
        .map(|assign| {
            let mut levels = vec![steps; n];
            for (l, lv) in assign {
                levels[l] = lv;
            }
            StoppingTime(levels)
        })
        .collect())
}

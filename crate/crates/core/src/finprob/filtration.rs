//! Subfiltrations as per-level node partitions.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::process::{FProcess, GProcess};
use super::tree::ScenarioTree;
use crate::error::{Error, Result};

/// Per-level map node -> atom id. Atom ids at each level run `0..m` and are
/// numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomMaps(pub Vec<Vec<usize>>);

#[derive(Debug, Clone)]
pub struct SubFiltration {
    tree: Arc<ScenarioTree>,
    atom_of: Vec<Vec<usize>>,
    members: Vec<Vec<Vec<usize>>>,
    prob: Vec<Vec<f64>>,
    /// Atom of `G_{k-1}` containing each atom of `G_k` (empty at level 0).
    parent: Vec<Vec<usize>>,
    /// Atoms of `G_{k+1}` inside each atom of `G_k` (empty at level N).
    children: Vec<Vec<Vec<usize>>>,
}

impl SubFiltration {
    /// `G = F`: one atom per node.
    pub fn full(tree: Arc<ScenarioTree>) -> Self {
        let maps = (0..=tree.steps()).map(|k| (0..tree.width(k)).collect()).collect();
        Self::new(tree, AtomMaps(maps)).expect("full filtration is always valid")
    }

    /// Deterministic scenario: a single atom at every level.
    pub fn trivial(tree: Arc<ScenarioTree>) -> Self {
        let maps = (0..=tree.steps()).map(|k| vec![0; tree.width(k)]).collect();
        Self::new(tree, AtomMaps(maps)).expect("trivial filtration is always valid")
    }

    /// `G_k = F_{max(k-d, 0)}`: information arrives with a delay of `d` steps.
    pub fn delayed(tree: Arc<ScenarioTree>, delay: usize) -> Self {
        let maps = (0..=tree.steps())
            .map(|k| {
                let src = k.saturating_sub(delay);
                tree.level(k)
                    .iter()
                    .map(|node| tree.ancestor_of_leaf(node.leaves.start, src))
                    .collect()
            })
            .collect();
        Self::new(tree, AtomMaps(maps)).expect("delayed filtration is always valid")
    }

    /// Random nondecreasing coarsening: each atom's successor nodes are split
    /// into up to `max_split` groups.
    pub fn random<R: Rng>(tree: Arc<ScenarioTree>, max_split: usize, rng: &mut R) -> Self {
        let mut maps: Vec<Vec<usize>> = vec![vec![0]];
        for k in 1..=tree.steps() {
            let prev = &maps[k - 1];
            let n_prev_atoms = prev.iter().max().map_or(0, |m| m + 1);
            let mut labels = vec![(0usize, 0usize); tree.width(k)];
            let splits: Vec<usize> = (0..n_prev_atoms).map(|_| rng.gen_range(1..=max_split.max(1))).collect();
            for (i, node) in tree.level(k).iter().enumerate() {
                let parent_atom = prev[node.parent.unwrap()];
                labels[i] = (parent_atom, rng.gen_range(0..splits[parent_atom]));
            }
            maps.push(renumber(&labels));
        }
        Self::new(tree, AtomMaps(maps)).expect("random coarsening is nondecreasing by construction")
    }

    pub fn new(tree: Arc<ScenarioTree>, maps: AtomMaps) -> Result<Self> {
        let maps = maps.0;
        let steps = tree.steps();
        if maps.len() != steps + 1 {
            return Err(Error::InvalidFiltration(format!(
                "expected {} levels, got {}",
                steps + 1,
                maps.len()
            )));
        }
        let mut members = Vec::with_capacity(steps + 1);
        let mut prob = Vec::with_capacity(steps + 1);
        for (k, map) in maps.iter().enumerate() {
            if map.len() != tree.width(k) {
                return Err(Error::InvalidFiltration(format!(
                    "level {k}: expected {} nodes, got {}",
                    tree.width(k),
                    map.len()
                )));
            }
            let n_atoms = map.iter().max().map_or(0, |m| m + 1);
            let mut mem = vec![Vec::new(); n_atoms];
            let mut p = vec![0.0; n_atoms];
            for (i, &a) in map.iter().enumerate() {
                mem[a].push(i);
                p[a] += tree.node(k, i).path_prob;
            }
            if let Some(g) = mem.iter().position(|m| m.is_empty()) {
                return Err(Error::InvalidFiltration(format!("level {k}: atom {g} is empty")));
            }
            members.push(mem);
            prob.push(p);
        }
        let mut parent = vec![Vec::new()];
        let mut children = Vec::with_capacity(steps + 1);
        for k in 1..=steps {
            let mut par = vec![usize::MAX; members[k].len()];
            for (h, nodes) in members[k].iter().enumerate() {
                for &n in nodes {
                    let up = maps[k - 1][tree.node(k, n).parent.unwrap()];
                    if par[h] == usize::MAX {
                        par[h] = up;
                    } else if par[h] != up {
                        return Err(Error::InvalidFiltration(format!(
                            "level {k}: atom {h} merges paths from atoms {} and {up} of level {}",
                            par[h],
                            k - 1
                        )));
                    }
                }
            }
            let mut kids = vec![Vec::new(); members[k - 1].len()];
            for (h, &g) in par.iter().enumerate() {
                kids[g].push(h);
            }
            children.push(kids);
            parent.push(par);
        }
        children.push(vec![Vec::new(); members[steps].len()]);
        Ok(Self { tree, atom_of: maps, members, prob, parent, children })
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn tree_arc(&self) -> &Arc<ScenarioTree> {
        &self.tree
    }

    pub fn atom_maps(&self) -> AtomMaps {
        AtomMaps(self.atom_of.clone())
    }

    pub fn num_atoms(&self, level: usize) -> usize {
        self.members[level].len()
    }

    pub fn atom_of(&self, level: usize, node: usize) -> usize {
        self.atom_of[level][node]
    }

    pub fn members(&self, level: usize, atom: usize) -> &[usize] {
        &self.members[level][atom]
    }

    pub fn atom_prob(&self, level: usize, atom: usize) -> f64 {
        self.prob[level][atom]
    }

    pub fn parent_atom(&self, level: usize, atom: usize) -> usize {
        self.parent[level][atom]
    }

    pub fn child_atoms(&self, level: usize, atom: usize) -> &[usize] {
        &self.children[level][atom]
    }

    /// Leaves lying below the atom.
    pub fn atom_leaves(&self, level: usize, atom: usize) -> impl Iterator<Item = usize> + '_ {
        self.members[level][atom]
            .iter()
            .flat_map(move |&n| self.tree.node(level, n).leaves.clone())
    }

    /// Atom of `G_level` containing `leaf`.
    pub fn atom_of_leaf(&self, leaf: usize, level: usize) -> usize {
        self.atom_of[level][self.tree.ancestor_of_leaf(leaf, level)]
    }

    /// `E[X | G_k]` for `X` given on the level-`k` nodes.
    pub fn cond_expect(&self, values: &[f64], level: usize) -> Result<Vec<f64>> {
        self.tree.check_level(level)?;
        if values.len() != self.tree.width(level) {
            return Err(Error::Shape(format!(
                "level {level} has {} nodes, got {} values",
                self.tree.width(level),
                values.len()
            )));
        }
        Ok(self.members[level]
            .iter()
            .zip(&self.prob[level])
            .map(|(nodes, &pg)| {
                nodes.iter().map(|&n| self.tree.node(level, n).path_prob * values[n]).sum::<f64>() / pg
            })
            .collect())
    }

    pub fn cond_expect_process(&self, x: &FProcess) -> GProcess {
        GProcess::from_levels(
            (0..x.num_levels())
                .map(|k| self.cond_expect(x.level(k), k).expect("shape checked by caller"))
                .collect(),
        )
    }

    /// `E[X_{k+1} | G_k]` for an atom-indexed value at level `k + 1`.
    pub fn cond_expect_next(&self, next: &[f64], level: usize) -> Vec<f64> {
        self.children[level]
            .iter()
            .enumerate()
            .map(|(g, kids)| {
                kids.iter().map(|&h| self.prob[level + 1][h] * next[h]).sum::<f64>() / self.prob[level][g]
            })
            .collect()
    }

    /// Broadcast atom values to the nodes of the level.
    pub fn lift(&self, atoms: &[f64], level: usize) -> Vec<f64> {
        self.atom_of[level].iter().map(|&a| atoms[a]).collect()
    }

    pub fn lift_process(&self, g: &GProcess) -> FProcess {
        FProcess::from_levels((0..g.num_levels()).map(|k| self.lift(g.level(k), k)).collect())
    }

    /// Largest spread of node values within one atom at `level`, with the
    /// offending atom.
    pub fn atom_spread(&self, values: &[f64], level: usize) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for (g, nodes) in self.members[level].iter().enumerate() {
            let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &n| {
                (lo.min(values[n]), hi.max(values[n]))
            });
            if hi - lo > worst.0 {
                worst = (hi - lo, g);
            }
        }
        worst
    }
}

fn renumber(labels: &[(usize, usize)]) -> Vec<usize> {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary(n: usize) -> Arc<ScenarioTree> {
        Arc::new(ScenarioTree::binary(n, 1.0).unwrap())
    }

    #[test]
    fn full_is_identity() {
        let sub = SubFiltration::full(binary(2));
        let x = [0.5, -1.0, 2.0, 7.0];
        assert_eq!(sub.cond_expect(&x, 2).unwrap(), x.to_vec());
    }

    #[test]
    fn trivial_is_mean() {
        let sub = SubFiltration::trivial(binary(2));
        let x = [0.5, -1.0, 2.0, 7.0];
        let e = sub.cond_expect(&x, 2).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0] - 2.125).abs() < 1e-15);
    }

    #[test]
    fn two_point_atoms() {
        let tree = binary(2);
        let maps = AtomMaps(vec![vec![0], vec![0, 1], vec![0, 0, 1, 1]]);
        let sub = SubFiltration::new(tree, maps).unwrap();
        assert_eq!(sub.cond_expect(&[0.0, 2.0, 4.0, 8.0], 2).unwrap(), vec![1.0, 6.0]);
    }

    #[test]
    fn rejects_merging_atoms() {
        let tree = binary(2);
        // level 1 splits, level 2 merges a path from each half
        let maps = AtomMaps(vec![vec![0], vec![0, 1], vec![0, 1, 1, 0]]);
        assert!(matches!(SubFiltration::new(tree, maps), Err(Error::InvalidFiltration(_))));
    }

    #[test]
    fn rejects_empty_atom() {
        let maps = AtomMaps(vec![vec![0], vec![0, 2], vec![0, 0, 1, 1]]);
        assert!(SubFiltration::new(binary(2), maps).is_err());
    }

    #[test]
    fn delayed_by_one() {
        let sub = SubFiltration::delayed(binary(3), 1);
        assert_eq!(sub.num_atoms(0), 1);
        assert_eq!(sub.num_atoms(1), 1);
        assert_eq!(sub.num_atoms(2), 2);
        assert_eq!(sub.num_atoms(3), 4);
        assert_eq!(sub.atom_maps().0[3], vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn tower_on_trivial_equals_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tree = Arc::new(ScenarioTree::random(3, 1.0, 3, &mut rng).unwrap());
        let sub = SubFiltration::trivial(tree.clone());
        let x: Vec<f64> = (0..tree.num_leaves()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean: f64 = (0..tree.num_leaves()).map(|l| tree.leaf_prob(l) * x[l]).sum();
        let mut vals = x;
        for k in (1..=3).rev() {
            vals = tree.cond_expect(&vals, k - 1).unwrap();
            let e = sub.cond_expect(&vals, k - 1).unwrap();
            assert!((e[0] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let tree = Arc::new(ScenarioTree::random(3, 1.0, 2, &mut rng).unwrap());
        let sub = SubFiltration::random(tree.clone(), 3, &mut rng);
        for k in 0..=3 {
            let x: Vec<f64> = (0..tree.width(k)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let once = sub.cond_expect(&x, k).unwrap();
            let twice = sub.cond_expect(&sub.lift(&once, k), k).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn random_coarsenings_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let tree = Arc::new(ScenarioTree::random(4, 1.0, 2, &mut rng).unwrap());
            let sub = SubFiltration::random(tree.clone(), 3, &mut rng);
            SubFiltration::new(tree, sub.atom_maps()).unwrap();
        }
    }
}

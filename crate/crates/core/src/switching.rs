//! Two-mode optimal switching (reversible investment) with partial
//! information.
//!
//! The project starts open and earns `ψ₁`; closing costs `D`, reopening costs
//! `a`, and while closed it earns `ψ₂`. Switch times are `G`-stopping times;
//! switches at the terminal level are free.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finprob::{enumerate_stopping_times_from, FProcess, StoppingTime, SubFiltration};
use crate::solver::{solve_constant_driver, Problem, ProcessDriver, SolutionTriple};

/// Conditional slack treated as contact when building the optimal strategy.
pub const SWITCH_SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SwitchingProblem {
    sub: SubFiltration,
    psi1: FProcess,
    psi2: FProcess,
    stop_cost: FProcess,
    start_cost: FProcess,
}

impl SwitchingProblem {
    /// Costs must be strictly positive at every node.
    pub fn new(sub: SubFiltration, psi1: FProcess, psi2: FProcess, stop_cost: FProcess, start_cost: FProcess) -> Result<Self> {
        let tree = sub.tree();
        psi1.check_shape(tree, "psi1")?;
        psi2.check_shape(tree, "psi2")?;
        stop_cost.check_shape(tree, "D")?;
        start_cost.check_shape(tree, "a")?;
        for k in 0..=tree.steps() {
            for i in 0..tree.width(k) {
                let c = stop_cost.get(k, i).min(start_cost.get(k, i));
                if !(c > 0.0) {
                    return Err(Error::Precondition(format!(
                        "switching costs must be positive; min(a, D) = {c} at level {k}, node {i}"
                    )));
                }
            }
        }
        Ok(Self { sub, psi1, psi2, stop_cost, start_cost })
    }

    pub fn sub(&self) -> &SubFiltration {
        &self.sub
    }

    pub fn psi1(&self) -> &FProcess {
        &self.psi1
    }

    pub fn psi2(&self) -> &FProcess {
        &self.psi2
    }

    pub fn stop_cost(&self) -> &FProcess {
        &self.stop_cost
    }

    pub fn start_cost(&self) -> &FProcess {
        &self.start_cost
    }

    /// Reflected problem with `ξ = 0`, driver `ψ₁ - ψ₂` and barriers `[-D, a]`.
    pub fn reflected_problem(&self) -> Result<Problem> {
        let tree = self.sub.tree();
        Problem::new(
            self.sub.clone(),
            vec![0.0; tree.num_leaves()],
            Arc::new(ProcessDriver(self.psi1.sub(&self.psi2))),
            self.stop_cost.map(|d| -d),
            self.start_cost.clone(),
        )
    }
}

/// Nondecreasing switch times `τ₁ <= τ₂ <= ...`; entries equal to `N` mean
/// no further switch on that path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Strategy(pub Vec<StoppingTime>);

impl Strategy {
    pub fn never(sub: &SubFiltration) -> Self {
        Self(vec![StoppingTime::constant(sub, sub.tree().steps())])
    }

    pub fn validate(&self, sub: &SubFiltration) -> Result<()> {
        for (i, t) in self.0.iter().enumerate() {
            t.check_measurable(sub)
                .map_err(|e| Error::InvalidStrategy(format!("switch {}: {e}", i + 1)))?;
        }
        for (i, w) in self.0.windows(2).enumerate() {
            if !w[1].dominates(&w[0]) {
                return Err(Error::InvalidStrategy(format!("switch {} precedes switch {}", i + 2, i + 1)));
            }
        }
        Ok(())
    }

    /// Switch levels on one path, without the trailing `N`s.
    pub fn switches_on(&self, leaf: usize, steps: usize) -> Vec<usize> {
        self.0.iter().map(|t| t.at(leaf)).take_while(|&l| l < steps).collect()
    }

    pub fn switch_count(&self, leaf: usize, steps: usize) -> usize {
        self.switches_on(leaf, steps).len()
    }
}

/// Expected profit of a strategy: running profit by mode minus the costs of
/// switches before `N`.
pub fn profit(sp: &SwitchingProblem, delta: &Strategy) -> Result<f64> {
    delta.validate(&sp.sub)?;
    Ok(profit_unchecked(sp, delta))
}

fn profit_unchecked(sp: &SwitchingProblem, delta: &Strategy) -> f64 {
    let tree = sp.sub.tree();
    let n = tree.steps();
    let dt = tree.dt();
    (0..tree.num_leaves())
        .map(|leaf| {
            let switches = delta.switches_on(leaf, n);
            let mut total = 0.0;
            let mut next = 0;
            for j in 0..n {
                while next < switches.len() && switches[next] <= j {
                    next += 1;
                }
                let open = next % 2 == 0;
                let i = tree.ancestor_of_leaf(leaf, j);
                total += dt * if open { sp.psi1.get(j, i) } else { sp.psi2.get(j, i) };
            }
            for (m, &s) in switches.iter().enumerate() {
                let i = tree.ancestor_of_leaf(leaf, s);
                total -= if m % 2 == 0 { sp.stop_cost.get(s, i) } else { sp.start_cost.get(s, i) };
            }
            tree.leaf_prob(leaf) * total
        })
        .sum()
}

/// Values of the open (`Y¹`) and closed (`Y²`) modes.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub problem: Problem,
    pub solution: SolutionTriple,
    pub y1: FProcess,
    pub y2: FProcess,
}

impl Decomposition {
    /// `sup |Y - (Y¹ - Y²)|`.
    pub fn residual(&self) -> f64 {
        self.solution.y.max_abs_diff(&self.y1.sub(&self.y2))
    }
}

/// `Y¹_k = E[Σ_{j>=k} ψ₁ Δt + K⁺_N - K⁺_k | F_k]`, `Y²` likewise with `ψ₂`
/// and `K⁻`, where `K` reflects `Y = Y¹ - Y²` between `-D` and `a`.
pub fn decompose(sp: &SwitchingProblem) -> Result<Decomposition> {
    let problem = sp.reflected_problem()?;
    let solution = solve_constant_driver(&problem)?;
    let tree = sp.sub.tree();
    let dt = tree.dt();
    let mut y1 = FProcess::zeros(tree);
    let mut y2 = FProcess::zeros(tree);
    for k in (0..tree.steps()).rev() {
        let e1 = tree.cond_expect(y1.level(k + 1), k)?;
        let e2 = tree.cond_expect(y2.level(k + 1), k)?;
        for (i, node) in tree.level(k).iter().enumerate() {
            let c = node.children.start;
            let dkp = solution.k_plus.get(k + 1, c) - solution.k_plus.get(k, i);
            let dkm = solution.k_minus.get(k + 1, c) - solution.k_minus.get(k, i);
            y1.set(k, i, e1[i] + sp.psi1.get(k, i) * dt + dkp);
            y2.set(k, i, e2[i] + sp.psi2.get(k, i) * dt + dkm);
        }
    }
    Ok(Decomposition { problem, solution, y1, y2 })
}

/// Alternating first contacts: close when `E[Y¹|G] = E[Y² - D|G]`, reopen
/// when `E[Y²|G] = E[Y¹ - a|G]`, per atom trajectory.
pub fn optimal_strategy(sp: &SwitchingProblem, dec: &Decomposition) -> Result<Strategy> {
    let sub = &sp.sub;
    let tree = sub.tree();
    let n = tree.steps();
    let yg = dec.solution.y_g(sub);
    let (lo, hi) = (dec.problem.lower_g(), dec.problem.upper_g());
    let mut per_leaf: Vec<Vec<u32>> = Vec::with_capacity(tree.num_leaves());
    for leaf in 0..tree.num_leaves() {
        let mut times = Vec::new();
        let mut open = true;
        for k in 0..n {
            let g = sub.atom_of_leaf(leaf, k);
            let slack = if open { yg.get(k, g) - lo.get(k, g) } else { hi.get(k, g) - yg.get(k, g) };
            if slack <= SWITCH_SLACK_TOL {
                times.push(k as u32);
                open = !open;
            }
        }
        per_leaf.push(times);
    }
    let count = per_leaf.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let strategy = Strategy(
        (0..count)
            .map(|m| StoppingTime(per_leaf.iter().map(|t| t.get(m).copied().unwrap_or(n as u32)).collect()))
            .collect(),
    );
    strategy.validate(sub)?;
    Ok(strategy)
}

/// All strategies with exactly `max_switches` switch times, unused ones set
/// to `N`. With `max_switches = 0` the only strategy never switches.
pub fn enumerate_strategies(sp: &SwitchingProblem, max_switches: usize, cap: usize) -> Result<Vec<Strategy>> {
    let sub = &sp.sub;
    if max_switches == 0 {
        return Ok(vec![Strategy::never(sub)]);
    }
    let mut tuples: Vec<Vec<StoppingTime>> = vec![Vec::new()];
    for _ in 0..max_switches {
        let mut next = Vec::new();
        for t in &tuples {
            let floor = t.last().cloned().unwrap_or_else(|| StoppingTime::constant(sub, 0));
            for s in enumerate_stopping_times_from(sub, &floor, cap)? {
                let mut v = t.clone();
                v.push(s);
                next.push(v);
                if next.len() > cap {
                    return Err(Error::EnumerationTooLarge { count: next.len() as u128, cap });
                }
            }
        }
        tuples = next;
    }
    Ok(tuples.into_iter().map(Strategy).collect())
}

/// Best profit over the given strategies and its index.
pub fn best_strategy(sp: &SwitchingProblem, strategies: &[Strategy]) -> Option<(usize, f64)> {
    strategies
        .par_iter()
        .map(|s| profit_unchecked(sp, s))
        .enumerate()
        .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
}

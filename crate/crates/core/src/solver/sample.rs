//! Random problem instances for tests, benchmarks and the `gen` command.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::problem::{Driver, FnDriver, Problem};
use crate::error::Result;
use crate::finprob::{FProcess, ScenarioTree, SubFiltration};

/// How the subfiltration of a generated instance is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", deny_unknown_fields)]
pub enum SubMode {
    Full,
    Trivial,
    Delayed { delay: usize },
    Random { max_split: usize },
}

impl SubMode {
    pub fn build<R: Rng>(self, tree: Arc<ScenarioTree>, rng: &mut R) -> SubFiltration {
        match self {
            SubMode::Full => SubFiltration::full(tree),
            SubMode::Trivial => SubFiltration::trivial(tree),
            SubMode::Delayed { delay } => SubFiltration::delayed(tree, delay),
            SubMode::Random { max_split } => SubFiltration::random(tree, max_split, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub steps: usize,
    pub horizon: f64,
    pub sub: SubMode,
    /// Lipschitz constant of the generated driver; 0 gives a driver that
    /// ignores `(y, z)`.
    pub lipschitz: f64,
    /// Band width range; narrow bands make the reflection active.
    pub width: (f64, f64),
}

impl InstanceSpec {
    pub fn new(steps: usize, sub: SubMode) -> Self {
        Self { steps, horizon: 1.0, sub, lipschitz: 0.0, width: (0.2, 1.0) }
    }

    pub fn lipschitz(mut self, lambda: f64) -> Self {
        self.lipschitz = lambda;
        self
    }

    pub fn width(mut self, lo: f64, hi: f64) -> Self {
        self.width = (lo, hi);
        self
    }
}

/// A binary-tree problem with random wavy obstacles, a terminal value clipped
/// into the band, and a driver `c + α sin(y) + β z` with `|α|, |β| <= λ`.
pub fn random_problem<R: Rng>(spec: &InstanceSpec, rng: &mut R) -> Result<Problem> {
    let tree = Arc::new(ScenarioTree::binary(spec.steps, spec.horizon)?);
    let sub = spec.sub.build(tree.clone(), rng);
    let n = tree.steps();
    let (phase, freq) = (rng.gen_range(0.0..6.3), rng.gen_range(0.5..3.0));
    let mid = FProcess::from_fn(&tree, |c| 0.3 * (freq * c.position + phase).sin() + 0.2 * (c.time * 4.0).cos());
    let half: Vec<Vec<f64>> =
        (0..=n).map(|k| (0..tree.width(k)).map(|_| 0.5 * rng.gen_range(spec.width.0..spec.width.1)).collect()).collect();
    let half = FProcess::from_levels(half);
    let lower = mid.sub(&half);
    let upper = mid.add(&half);
    let terminal: Vec<f64> = (0..tree.num_leaves())
        .map(|l| rng.gen_range(-1.0..1.0f64).max(lower.get(n, l)).min(upper.get(n, l)))
        .collect();
    let c: Vec<Vec<f64>> = (0..=n).map(|k| (0..tree.width(k)).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let lambda = spec.lipschitz;
    let alpha = lambda * rng.gen_range(-1.0..1.0);
    let beta = lambda * rng.gen_range(-1.0..1.0);
    let driver: Arc<dyn Driver> = Arc::new(FnDriver::new(lambda, move |ctx, y, z| {
        c[ctx.level][ctx.index] + alpha * y.sin() + beta * z
    }));
    Problem::new(sub, terminal, driver, lower, upper)
}

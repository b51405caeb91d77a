//! Problem data: terminal value, driver and obstacles on a filtered tree.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::finprob::{FProcess, GProcess, NodeCtx, ScenarioTree, SubFiltration};

/// Number of random probes used to check a declared Lipschitz constant.
pub const LIPSCHITZ_PROBES: usize = 256;

/// Generator `f(t, ω, y, z)` of the equation.
pub trait Driver: Send + Sync + fmt::Debug {
    fn eval(&self, ctx: NodeCtx, y: f64, z: f64) -> f64;

    /// Declared Lipschitz constant in `(y, z)`; zero means `f` ignores both.
    fn lipschitz(&self) -> f64;
}

/// Driver given by its node values, independent of `(y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessDriver(pub FProcess);

impl Driver for ProcessDriver {
    fn eval(&self, ctx: NodeCtx, _y: f64, _z: f64) -> f64 {
        self.0.get(ctx.level, ctx.index)
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// Driver from a closure with a declared Lipschitz constant.
pub struct FnDriver<F> {
    lambda: f64,
    f: F,
}

impl<F> FnDriver<F>
where
    F: Fn(NodeCtx, f64, f64) -> f64 + Send + Sync,
{
    pub fn new(lambda: f64, f: F) -> Self {
        Self { lambda, f }
    }
}

impl<F> fmt::Debug for FnDriver<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDriver").field("lambda", &self.lambda).finish_non_exhaustive()
    }
}

impl<F> Driver for FnDriver<F>
where
    F: Fn(NodeCtx, f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, ctx: NodeCtx, y: f64, z: f64) -> f64 {
        (self.f)(ctx, y, z)
    }

    fn lipschitz(&self) -> f64 {
        self.lambda
    }
}

/// A doubly conditional reflected BSDE on a finite tree.
#[derive(Debug, Clone)]
pub struct Problem {
    sub: SubFiltration,
    terminal: Vec<f64>,
    driver: Arc<dyn Driver>,
    lower: FProcess,
    upper: FProcess,
    lower_g: GProcess,
    upper_g: GProcess,
}

impl Problem {
    /// Validates strict barrier separation, the terminal sandwich
    /// `E[L_N|G_N] <= E[ξ|G_N] <= E[U_N|G_N]`, and the declared Lipschitz
    /// constant on random probes.
    pub fn new(
        sub: SubFiltration,
        terminal: Vec<f64>,
        driver: Arc<dyn Driver>,
        lower: FProcess,
        upper: FProcess,
    ) -> Result<Self> {
        let tree = sub.tree();
        let n = tree.steps();
        if terminal.len() != tree.num_leaves() {
            return Err(Error::Shape(format!(
                "terminal value has {} entries, tree has {} leaves",
                terminal.len(),
                tree.num_leaves()
            )));
        }
        lower.check_shape(tree, "L")?;
        upper.check_shape(tree, "U")?;
        if terminal.iter().chain(lower.levels().iter().flatten()).chain(upper.levels().iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("terminal value and obstacles must be finite".into()));
        }
        for k in 0..=n {
            for i in 0..tree.width(k) {
                let gap = upper.get(k, i) - lower.get(k, i);
                if !(gap > 0.0) {
                    return Err(Error::SeparationViolated { level: k, node: i, gap });
                }
            }
        }
        let lower_g = sub.cond_expect_process(&lower);
        let upper_g = sub.cond_expect_process(&upper);
        let xi = sub.cond_expect(&terminal, n)?;
        for (g, &x) in xi.iter().enumerate() {
            let (l, u) = (lower_g.get(n, g), upper_g.get(n, g));
            let slack = 1e-12 * (1.0 + x.abs());
            if x < l - slack || x > u + slack {
                return Err(Error::TerminalSandwich { atom: g, lower: l, terminal: x, upper: u });
            }
        }
        let p = Self { sub, terminal, driver, lower, upper, lower_g, upper_g };
        p.probe_lipschitz()?;
        Ok(p)
    }

    fn probe_lipschitz(&self) -> Result<()> {
        let tree = self.tree();
        let lambda = self.driver.lipschitz();
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Precondition(format!("Lipschitz constant must be finite and nonnegative, got {lambda}")));
        }
        let scale = 1.0 + self.terminal.iter().chain(self.lower.levels().iter().flatten()).chain(self.upper.levels().iter().flatten()).fold(0.0f64, |m, v| m.max(v.abs()));
        let zscale = scale / tree.dt().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for probe in 0..LIPSCHITZ_PROBES {
            let k = rng.gen_range(0..tree.steps().max(1));
            let i = rng.gen_range(0..tree.width(k));
            let ctx = tree.ctx(k, i);
            // alternate wide and close pairs
            let spread = if probe % 2 == 0 { 1.0 } else { 1e-3 };
            let (y, z) = (rng.gen_range(-2.0 * scale..2.0 * scale), rng.gen_range(-2.0 * zscale..2.0 * zscale));
            let (dy, dz) = (spread * rng.gen_range(-scale..scale), spread * rng.gen_range(-zscale..zscale));
            let (a, b) = (self.driver.eval(ctx, y, z), self.driver.eval(ctx, y + dy, z + dz));
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::Precondition(format!("driver is not finite at level {k}, node {i}")));
            }
            let dist = dy.abs() + dz.abs();
            if dist > 0.0 {
                let ratio = (a - b).abs() / dist;
                if ratio > lambda * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Lipschitz { declared: lambda, observed: ratio, level: k });
                }
            }
        }
        Ok(())
    }

    pub fn sub(&self) -> &SubFiltration {
        &self.sub
    }

    pub fn tree(&self) -> &ScenarioTree {
        self.sub.tree()
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    pub fn driver(&self) -> &Arc<dyn Driver> {
        &self.driver
    }

    pub fn lipschitz(&self) -> f64 {
        self.driver.lipschitz()
    }

    pub fn lower(&self) -> &FProcess {
        &self.lower
    }

    pub fn upper(&self) -> &FProcess {
        &self.upper
    }

    /// `E[L_k | G_k]`.
    pub fn lower_g(&self) -> &GProcess {
        &self.lower_g
    }

    /// `E[U_k | G_k]`.
    pub fn upper_g(&self) -> &GProcess {
        &self.upper_g
    }

    /// The same problem with a different driver (re-validated).
    pub fn with_driver(&self, driver: Arc<dyn Driver>) -> Result<Self> {
        Self::new(self.sub.clone(), self.terminal.clone(), driver, self.lower.clone(), self.upper.clone())
    }

    pub fn with_terminal(&self, terminal: Vec<f64>) -> Result<Self> {
        Self::new(self.sub.clone(), terminal, self.driver.clone(), self.lower.clone(), self.upper.clone())
    }

    /// `f(k, ·, Y_k, Z_k)` at every node of levels `0..N`; zero at level `N`.
    pub fn driver_values(&self, y: &FProcess, z: &FProcess) -> FProcess {
        let tree = self.tree();
        let n = tree.steps();
        FProcess::from_fn(tree, |ctx| {
            if ctx.level == n {
                0.0
            } else {
                self.driver.eval(ctx, y.get(ctx.level, ctx.index), z.get(ctx.level, ctx.index))
            }
        })
    }

    /// Largest absolute value of the data, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        self.terminal
            .iter()
            .chain(self.lower.levels().iter().flatten())
            .chain(self.upper.levels().iter().flatten())
            .fold(1.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> SubFiltration {
        SubFiltration::full(Arc::new(ScenarioTree::binary(n, 1.0).unwrap()))
    }

    fn zero_driver() -> Arc<dyn Driver> {
        Arc::new(FnDriver::new(0.0, |_, _, _| 0.0))
    }

    #[test]
    fn valid_problem() {
        let sub = setup(3);
        let tree = sub.tree().clone();
        let p = Problem::new(
            sub,
            vec![0.25; 8],
            zero_driver(),
            FProcess::constant(&tree, -1.0),
            FProcess::constant(&tree, 1.0),
        );
        assert!(p.is_ok());
    }

    #[test]
    fn terminal_outside_band() {
        let sub = setup(2);
        let tree = sub.tree().clone();
        let err = Problem::new(sub, vec![2.0; 4], zero_driver(), FProcess::constant(&tree, -1.0), FProcess::constant(&tree, 1.0))
            .unwrap_err();
        assert!(matches!(err, Error::TerminalSandwich { .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn touching_barriers_rejected() {
        let sub = setup(2);
        let tree = sub.tree().clone();
        let mut upper = FProcess::constant(&tree, 1.0);
        upper.set(1, 1, -1.0);
        let err = Problem::new(sub, vec![0.0; 4], zero_driver(), FProcess::constant(&tree, -1.0), upper).unwrap_err();
        assert!(matches!(err, Error::SeparationViolated { level: 1, node: 1, .. }));
    }

    #[test]
    fn understated_lipschitz_constant() {
        let sub = setup(2);
        let tree = sub.tree().clone();
        let driver: Arc<dyn Driver> = Arc::new(FnDriver::new(1.0, |_, y, z| 2.0 * y + z.abs()));
        let err = Problem::new(sub, vec![0.0; 4], driver, FProcess::constant(&tree, -1.0), FProcess::constant(&tree, 1.0))
            .unwrap_err();
        assert!(matches!(err, Error::Lipschitz { declared, .. } if declared == 1.0));
    }

    #[test]
    fn conditional_sandwich_allows_pointwise_excursions() {
        // ξ leaves [L, U] on single leaves but its atom mean stays inside
        let sub = SubFiltration::trivial(Arc::new(ScenarioTree::binary(2, 1.0).unwrap()));
        let tree = sub.tree().clone();
        let p = Problem::new(
            sub,
            vec![1.5, -1.5, 0.5, -0.5],
            zero_driver(),
            FProcess::constant(&tree, -1.0),
            FProcess::constant(&tree, 1.0),
        );
        assert!(p.is_ok());
    }
}

//! Linear drivers: stochastic exponential, stopped values, saddle point of the
//! associated Dynkin game and the comparison of conditional means.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finprob::{enumerate_stopping_times_in_atom, FProcess, GProcess, NodeCtx, ScenarioTree, StoppingTime, SubFiltration};
use crate::solver::{solve_picard_with, Driver, Problem, SolutionTriple};

/// Conditional slack treated as contact with a barrier.
pub const SLACK_TOL: f64 = 1e-9;
/// Atom spread below which `Γ` counts as `G`-adapted.
pub const GAMMA_ADAPTED_TOL: f64 = 1e-12;
/// Picard tolerance used when solving linear problems here.
pub const LINEAR_SOLVE_TOL: f64 = 1e-13;

/// `f(y, z) = a y + b z + c` with node-indexed coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDriver {
    pub a: FProcess,
    pub b: FProcess,
    pub c: FProcess,
}

impl LinearDriver {
    pub fn new(tree: &ScenarioTree, a: FProcess, b: FProcess, c: FProcess) -> Result<Self> {
        a.check_shape(tree, "a")?;
        b.check_shape(tree, "b")?;
        c.check_shape(tree, "c")?;
        Ok(Self { a, b, c })
    }

    /// Deterministic `a_k`, `b ≡ 0`.
    pub fn deterministic(tree: &ScenarioTree, a: impl Fn(f64) -> f64, c: FProcess) -> Result<Self> {
        let a = FProcess::from_fn(tree, |ctx| a(ctx.time));
        Self::new(tree, a, FProcess::zeros(tree), c)
    }

    pub fn with_c(&self, c: FProcess) -> Self {
        Self { a: self.a.clone(), b: self.b.clone(), c }
    }

    pub fn bound_a(&self) -> f64 {
        self.a.sup_abs()
    }

    pub fn bound_b(&self) -> f64 {
        self.b.sup_abs()
    }
}

impl Driver for LinearDriver {
    fn eval(&self, ctx: NodeCtx, y: f64, z: f64) -> f64 {
        let (k, i) = (ctx.level, ctx.index);
        self.a.get(k, i) * y + self.b.get(k, i) * z + self.c.get(k, i)
    }

    fn lipschitz(&self) -> f64 {
        self.bound_a().max(self.bound_b())
    }
}

/// Discretization of `dΓ = aΓ dt + bΓ dB`, `Γ_0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaScheme {
    /// `Γ_{k+1} = Γ_k (1 + a Δt + b ΔB)`.
    Euler,
    /// `Γ_{k+1} = Γ_k (1 + b Δt ΔB / v) / (1 - a Δt)` with `v = E[ΔB²|F_k]`:
    /// the exact adjoint of the implicit-in-`y` step, so that
    /// `Γ_k y_k - E[Γ_{k+1} y_{k+1} | F_k]` only contains the `c` and `K` terms.
    #[default]
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaProcess {
    pub gamma: FProcess,
    pub scheme: GammaScheme,
    /// Largest spread of `Γ_k` inside an atom of `G_k`.
    pub atom_spread: f64,
    pub g_adapted: bool,
}

pub fn gamma_process(ld: &LinearDriver, sub: &SubFiltration, scheme: GammaScheme) -> Result<GammaProcess> {
    let tree = sub.tree();
    let dt = tree.dt();
    let n = tree.steps();
    let mut gamma = FProcess::constant(tree, 1.0);
    for k in 0..n {
        for (i, node) in tree.level(k).iter().enumerate() {
            let (a, b) = (ld.a.get(k, i), ld.b.get(k, i));
            let v: f64 = node.children.clone().map(|c| tree.node(k + 1, c).prob * tree.node(k + 1, c).increment.powi(2)).sum();
            for c in node.children.clone() {
                let db = tree.node(k + 1, c).increment;
                let factor = match scheme {
                    GammaScheme::Euler => 1.0 + a * dt + b * db,
                    GammaScheme::Adjoint => {
                        let lift = if v > 0.0 { 1.0 + b * dt * db / v } else { 1.0 };
                        lift / (1.0 - a * dt)
                    }
                };
                if !(factor > 0.0) || (scheme == GammaScheme::Adjoint && a * dt >= 1.0) {
                    return Err(Error::DegenerateExponential { level: k, node: i, factor });
                }
                gamma.set(k + 1, c, gamma.get(k, i) * factor);
            }
        }
    }
    let atom_spread = (0..=n).map(|k| sub.atom_spread(gamma.level(k), k).0).fold(0.0, f64::max);
    let scale = gamma.sup_abs().max(1.0);
    Ok(GammaProcess { gamma, scheme, atom_spread, g_adapted: atom_spread <= GAMMA_ADAPTED_TOL * scale })
}

/// Solves `p` with the linear driver `ld` to tight tolerance.
pub fn solve_linear(ld: &LinearDriver, p: &Problem) -> Result<(Problem, SolutionTriple)> {
    let q = p.with_driver(Arc::new(ld.clone()))?;
    let s = solve_picard_with(&q, LINEAR_SOLVE_TOL, 400)?;
    Ok((q, s))
}

/// Payoff collected when the game stops on `leaf`:
/// `ξ` if `τ ∧ σ = N`, `L_τ` if `τ < N` and `τ <= σ`, `U_σ` if `σ < τ`.
fn stopped_payoff(p: &Problem, tau: usize, sigma: usize, leaf: usize) -> (usize, f64) {
    let tree = p.tree();
    let n = tree.steps();
    let rho = tau.min(sigma);
    let value = if rho == n {
        p.terminal()[leaf]
    } else if tau <= sigma {
        p.lower().along_leaf(tree, leaf, tau)
    } else {
        p.upper().along_leaf(tree, leaf, sigma)
    };
    (rho, value)
}

/// Linear BSDE stopped at `τ ∧ σ` with the game payoff as terminal value;
/// nodes at or after the stop carry the frozen payoff.
pub fn stopped_value(ld: &LinearDriver, p: &Problem, tau: &StoppingTime, sigma: &StoppingTime) -> Result<FProcess> {
    let tree = p.tree();
    let sub = p.sub();
    let n = tree.steps();
    let dt = tree.dt();
    tau.check_measurable(sub)?;
    sigma.check_measurable(sub)?;
    let mut y = FProcess::zeros(tree);
    for l in 0..tree.num_leaves() {
        y.set(n, l, stopped_payoff(p, tau.at(l), sigma.at(l), l).1);
    }
    for k in (0..n).rev() {
        let next = y.level(k + 1).to_vec();
        let mean = tree.cond_expect(&next, k)?;
        let z = tree.martingale_coeff(&next, k)?;
        for (i, node) in tree.level(k).iter().enumerate() {
            let leaf = node.leaves.start;
            let (rho, payoff) = stopped_payoff(p, tau.at(leaf), sigma.at(leaf), leaf);
            let v = if rho <= k {
                payoff
            } else {
                let a = ld.a.get(k, i);
                (mean[i] + (ld.b.get(k, i) * z[i] + ld.c.get(k, i)) * dt) / (1.0 - a * dt)
            };
            y.set(k, i, v);
        }
    }
    Ok(y)
}

/// First level `>= t` on each path where the conditional slack to the lower
/// (`τ*`) resp. upper (`σ*`) barrier is at most [`SLACK_TOL`], else `N`.
pub fn saddle_point(p: &Problem, s: &SolutionTriple, t: usize) -> Result<(StoppingTime, StoppingTime)> {
    let tree = p.tree();
    let sub = p.sub();
    let n = tree.steps();
    if t > n {
        return Err(Error::LevelOutOfRange { level: t, steps: n });
    }
    let yg = s.y_g(sub);
    let first_hit = |gap: &dyn Fn(usize, usize) -> f64, leaf: usize| {
        (t..=n).find(|&k| gap(k, sub.atom_of_leaf(leaf, k)) <= SLACK_TOL).unwrap_or(n) as u32
    };
    let lower_gap = |k: usize, g: usize| yg.get(k, g) - p.lower_g().get(k, g);
    let upper_gap = |k: usize, g: usize| p.upper_g().get(k, g) - yg.get(k, g);
    let tau = StoppingTime((0..tree.num_leaves()).map(|l| first_hit(&lower_gap, l)).collect());
    let sigma = StoppingTime((0..tree.num_leaves()).map(|l| first_hit(&upper_gap, l)).collect());
    Ok((tau, sigma))
}

/// Worst violations of the saddle inequalities
/// `E[y^{τ∧σ*}|G_t] <= E[Y_t|G_t] <= E[y^{τ*∧σ}|G_t]` over all levels, atoms
/// and stopping times from `t` in the atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleAudit {
    /// `max (E[y^{τ∧σ*}|G_t] - E[Y_t|G_t])`.
    pub lower_excess: f64,
    /// `max (E[Y_t|G_t] - E[y^{τ*∧σ}|G_t])`.
    pub upper_excess: f64,
    /// `max |E[y^{τ*∧σ*}|G_t] - E[Y_t|G_t]|`.
    pub value_gap: f64,
    pub pairs: usize,
}

impl SaddleAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.lower_excess <= tol && self.upper_excess <= tol && self.value_gap <= tol
    }
}

/// Exhaustive saddle audit. Requires `Γ` to be `G`-adapted.
pub fn saddle_audit(ld: &LinearDriver, p: &Problem, s: &SolutionTriple, cap: usize) -> Result<SaddleAudit> {
    let sub = p.sub();
    let tree = p.tree();
    let n = tree.steps();
    let gamma = gamma_process(ld, sub, GammaScheme::Adjoint)?;
    if !gamma.g_adapted {
        return Err(Error::Precondition(format!(
            "saddle point needs a G-adapted exponential (atom spread {:e})",
            gamma.atom_spread
        )));
    }
    let yg = s.y_g(sub);
    let jobs: Vec<(usize, usize)> = (0..=n).flat_map(|t| (0..sub.num_atoms(t)).map(move |g| (t, g))).collect();
    let parts: Vec<SaddleAudit> = jobs
        .par_iter()
        .map(|&(t, g)| {
            let (tau_star, sigma_star) = saddle_point(p, s, t)?;
            let mean = |y: &FProcess| -> f64 {
                sub.members(t, g).iter().map(|&i| tree.node(t, i).path_prob * y.get(t, i)).sum::<f64>() / sub.atom_prob(t, g)
            };
            let target = yg.get(t, g);
            let times = enumerate_stopping_times_in_atom(sub, t, g, cap)?;
            let mut audit = SaddleAudit { lower_excess: f64::NEG_INFINITY, upper_excess: f64::NEG_INFINITY, value_gap: 0.0, pairs: 0 };
            // outside the atom the stopping times are irrelevant; keep them at N
            let restrict = |x: &StoppingTime| {
                let mut r = StoppingTime::constant(sub, n);
                for l in sub.atom_leaves(t, g) {
                    r.0[l] = x.0[l];
                }
                r
            };
            let (ts, ss) = (restrict(&tau_star), restrict(&sigma_star));
            audit.value_gap = (mean(&stopped_value(ld, p, &ts, &ss)?) - target).abs();
            for other in &times {
                audit.lower_excess = audit.lower_excess.max(mean(&stopped_value(ld, p, other, &ss)?) - target);
                audit.upper_excess = audit.upper_excess.max(target - mean(&stopped_value(ld, p, &ts, other)?));
                audit.pairs += 2;
            }
            Ok(audit)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(
        SaddleAudit { lower_excess: f64::NEG_INFINITY, upper_excess: f64::NEG_INFINITY, value_gap: 0.0, pairs: 0 },
        |a, b| SaddleAudit {
            lower_excess: a.lower_excess.max(b.lower_excess),
            upper_excess: a.upper_excess.max(b.upper_excess),
            value_gap: a.value_gap.max(b.value_gap),
            pairs: a.pairs + b.pairs,
        },
    ))
}

/// Result of [`compare`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `min (E[Y¹_k|G_k] - E[Y²_k|G_k])` over levels and atoms.
    pub min_margin: f64,
    /// Where the minimum is attained.
    pub at: (usize, usize),
    /// `min (Y¹ - Y²)` over nodes; may be negative.
    pub pointwise_margin: f64,
    pub y1_g: GProcess,
    pub y2_g: GProcess,
}

/// Conditional ordering violations of the data, as readable strings.
pub fn ordering_violations(p1: &Problem, p2: &Problem, c1: &FProcess, c2: &FProcess) -> Vec<String> {
    let sub = p1.sub();
    let n = p1.tree().steps();
    let mut out = Vec::new();
    let xi1 = sub.cond_expect(p1.terminal(), n).unwrap_or_default();
    let xi2 = sub.cond_expect(p2.terminal(), n).unwrap_or_default();
    for (g, (a, b)) in xi1.iter().zip(&xi2).enumerate() {
        if a < b {
            out.push(format!("E[xi|G] at terminal atom {g}: {a} < {b}"));
        }
    }
    let cg1 = sub.cond_expect_process(c1);
    let cg2 = sub.cond_expect_process(c2);
    for (name, x, y) in [("c", &cg1, &cg2), ("L", p1.lower_g(), p2.lower_g()), ("U", p1.upper_g(), p2.upper_g())] {
        for k in 0..=n {
            // c only enters before the terminal level
            if name == "c" && k == n {
                continue;
            }
            for g in 0..sub.num_atoms(k) {
                if x.get(k, g) < y.get(k, g) {
                    out.push(format!("E[{name}|G] at level {k}, atom {g}: {} < {}", x.get(k, g), y.get(k, g)));
                }
            }
        }
    }
    out
}

/// Compares two problems with linear drivers sharing `a`, `b` and a
/// `G`-adapted exponential, whose data are ordered given `G`.
pub fn compare(p1: &Problem, ld1: &LinearDriver, p2: &Problem, ld2: &LinearDriver) -> Result<ComparisonReport> {
    if ld1.a != ld2.a || ld1.b != ld2.b {
        return Err(Error::Precondition("comparison needs shared a and b".into()));
    }
    if p1.tree() != p2.tree() || p1.sub().atom_maps() != p2.sub().atom_maps() {
        return Err(Error::Shape("problems live on different trees or subfiltrations".into()));
    }
    let gamma = gamma_process(ld1, p1.sub(), GammaScheme::Adjoint)?;
    if !gamma.g_adapted {
        return Err(Error::Precondition(format!(
            "comparison needs a G-adapted exponential (atom spread {:e})",
            gamma.atom_spread
        )));
    }
    let violations = ordering_violations(p1, p2, &ld1.c, &ld2.c);
    if !violations.is_empty() {
        return Err(Error::Precondition(format!("data are not ordered: {}", violations.join("; "))));
    }
    let (_, s1) = solve_linear(ld1, p1)?;
    let (_, s2) = solve_linear(ld2, p2)?;
    let sub = p1.sub();
    let (y1, y2) = (s1.y_g(sub), s2.y_g(sub));
    let mut min_margin = f64::INFINITY;
    let mut at = (0, 0);
    for k in 0..y1.num_levels() {
        for g in 0..y1.level(k).len() {
            let m = y1.get(k, g) - y2.get(k, g);
            if m < min_margin {
                min_margin = m;
                at = (k, g);
            }
        }
    }
    let pointwise_margin =
        s1.y.levels().iter().flatten().zip(s2.y.levels().iter().flatten()).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    Ok(ComparisonReport { min_margin, at, pointwise_margin, y1_g: y1, y2_g: y2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finprob::{enumerate_stopping_times, DEFAULT_ENUMERATION_CAP};
    use crate::solver::{random_problem, InstanceSpec, SubMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tree(n: usize) -> Arc<ScenarioTree> {
        Arc::new(ScenarioTree::binary(n, 1.0).unwrap())
    }

    fn random_c(tree: &ScenarioTree, rng: &mut ChaCha8Rng) -> FProcess {
        let vals: Vec<Vec<f64>> = (0..=tree.steps()).map(|k| (0..tree.width(k)).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        FProcess::from_levels(vals)
    }

    #[test]
    fn exponential_of_zero_is_one() {
        let t = tree(3);
        let ld = LinearDriver::new(&t, FProcess::zeros(&t), FProcess::zeros(&t), FProcess::zeros(&t)).unwrap();
        for scheme in [GammaScheme::Euler, GammaScheme::Adjoint] {
            let g = gamma_process(&ld, &SubFiltration::trivial(t.clone()), scheme).unwrap();
            assert!(g.gamma.levels().iter().flatten().all(|&v| v == 1.0));
            assert!(g.g_adapted);
        }
    }

    #[test]
    fn deterministic_rate() {
        let t = tree(4);
        let r = 0.3;
        let ld = LinearDriver::deterministic(&t, |_| r, FProcess::zeros(&t)).unwrap();
        let sub = SubFiltration::trivial(t.clone());
        let euler = gamma_process(&ld, &sub, GammaScheme::Euler).unwrap();
        let adjoint = gamma_process(&ld, &sub, GammaScheme::Adjoint).unwrap();
        let dt = t.dt();
        for k in 0..=4 {
            for i in 0..t.width(k) {
                assert!((euler.gamma.get(k, i) - (1.0 + r * dt).powi(k as i32)).abs() < 1e-14);
                assert!((adjoint.gamma.get(k, i) - (1.0 - r * dt).powi(-(k as i32))).abs() < 1e-14);
            }
        }
        assert!(euler.g_adapted && adjoint.g_adapted);
    }

    #[test]
    fn volatility_breaks_adaptedness() {
        let t = tree(3);
        let ld = LinearDriver::new(&t, FProcess::zeros(&t), FProcess::constant(&t, 0.5), FProcess::zeros(&t)).unwrap();
        let g = gamma_process(&ld, &SubFiltration::trivial(t.clone()), GammaScheme::Euler).unwrap();
        assert!(!g.g_adapted);
        assert!(gamma_process(&ld, &SubFiltration::full(t), GammaScheme::Euler).unwrap().g_adapted);
    }

    #[test]
    fn degenerate_factor_rejected() {
        let t = tree(2);
        let ld = LinearDriver::new(&t, FProcess::zeros(&t), FProcess::constant(&t, 3.0), FProcess::zeros(&t)).unwrap();
        assert!(matches!(
            gamma_process(&ld, &SubFiltration::full(t), GammaScheme::Euler),
            Err(Error::DegenerateExponential { .. })
        ));
    }

    fn linear_instance(n: usize, mode: SubMode, rng: &mut ChaCha8Rng) -> (LinearDriver, Problem) {
        let base = random_problem(&InstanceSpec::new(n, mode).width(0.05, 0.6), rng).unwrap();
        let t = base.tree();
        let r = rng.gen_range(-0.45..0.45);
        let ld = LinearDriver::deterministic(t, |s| r * (1.0 + s), random_c(t, rng)).unwrap();
        let p = base.with_driver(Arc::new(ld.clone())).unwrap();
        (ld, p)
    }

    /// Without reflection, `Γ_k Y_k + Σ_{j<k} Γ_{j+1} c_j Δt` is an F-martingale.
    #[test]
    fn gamma_martingale_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = tree(5);
        let sub = SubFiltration::full(t.clone());
        let ld = LinearDriver::deterministic(&t, |s| 0.5 - s, random_c(&t, &mut rng)).unwrap();
        let xi: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = Problem::new(sub.clone(), xi, Arc::new(ld.clone()), FProcess::constant(&t, -100.0), FProcess::constant(&t, 100.0)).unwrap();
        let (_, s) = solve_linear(&ld, &p).unwrap();
        let g = gamma_process(&ld, &sub, GammaScheme::Adjoint).unwrap().gamma;
        let mut m = FProcess::zeros(&t);
        let mut acc = FProcess::zeros(&t);
        for k in 0..=5 {
            for i in 0..t.width(k) {
                m.set(k, i, g.get(k, i) * s.y.get(k, i) + acc.get(k, i));
                if k < 5 {
                    for c in t.node(k, i).children.clone() {
                        acc.set(k + 1, c, acc.get(k, i) + g.get(k + 1, c) * ld.c.get(k, i) * t.dt());
                    }
                }
            }
        }
        for k in 0..5 {
            let e = t.cond_expect(m.level(k + 1), k).unwrap();
            for (i, v) in e.iter().enumerate() {
                assert!((v - m.get(k, i)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn stopped_value_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ld, p) = linear_instance(3, SubMode::Trivial, &mut rng);
        let sub = p.sub();
        let never = StoppingTime::constant(sub, 3);
        let unstopped = stopped_value(&ld, &p, &never, &never).unwrap();
        let free = Problem::new(sub.clone(), p.terminal().to_vec(), Arc::new(ld.clone()), FProcess::constant(p.tree(), -1e3), FProcess::constant(p.tree(), 1e3)).unwrap();
        let (_, s) = solve_linear(&ld, &free).unwrap();
        assert!(unstopped.max_abs_diff(&s.y) < 1e-11);
        let now = StoppingTime::constant(sub, 0);
        let y = stopped_value(&ld, &p, &now, &never).unwrap();
        assert_eq!(y.get(0, 0), p.lower().get(0, 0));
        let y = stopped_value(&ld, &p, &never, &now).unwrap();
        assert_eq!(y.get(0, 0), p.upper().get(0, 0));
    }

    /// With `b ≡ 0` and deterministic `a`:
    /// `Γ_0 y_0 = E[Γ_ρ R + Σ_{j<ρ} Γ_{j+1} c_j Δt]` path by path.
    #[test]
    fn stopped_value_matches_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mode in [SubMode::Full, SubMode::Delayed { delay: 1 }] {
            let (ld, p) = linear_instance(3, mode, &mut rng);
            let sub = p.sub();
            let t = p.tree();
            let g = gamma_process(&ld, sub, GammaScheme::Adjoint).unwrap().gamma;
            let times = enumerate_stopping_times(sub, 0, DEFAULT_ENUMERATION_CAP).unwrap();
            for _ in 0..20 {
                let tau = &times[rng.gen_range(0..times.len())];
                let sigma = &times[rng.gen_range(0..times.len())];
                let y = stopped_value(&ld, &p, tau, sigma).unwrap();
                let mut expect = 0.0;
                for leaf in 0..t.num_leaves() {
                    let (rho, pay) = stopped_payoff(&p, tau.at(leaf), sigma.at(leaf), leaf);
                    let mut v = g.along_leaf(t, leaf, rho) * pay;
                    for j in 0..rho {
                        v += g.along_leaf(t, leaf, j + 1) * ld.c.along_leaf(t, leaf, j) * t.dt();
                    }
                    expect += t.leaf_prob(leaf) * v;
                }
                assert!((y.get(0, 0) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saddle_inequalities_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for mode in [SubMode::Full, SubMode::Trivial, SubMode::Delayed { delay: 1 }, SubMode::Random { max_split: 2 }] {
            for n in 1..=3 {
                let (ld, p) = linear_instance(n, mode, &mut rng);
                let (q, s) = solve_linear(&ld, &p).unwrap();
                let audit = saddle_audit(&ld, &q, &s, DEFAULT_ENUMERATION_CAP).unwrap();
                assert!(audit.passes(1e-9), "{audit:?}");
                assert!(audit.pairs > 0);
            }
        }
    }

    #[test]
    fn inactive_barriers_never_stop() {
        let t = tree(3);
        let sub = SubFiltration::delayed(t.clone(), 1);
        let ld = LinearDriver::deterministic(&t, |_| 0.2, FProcess::zeros(&t)).unwrap();
        let p = Problem::new(sub, vec![0.1; 8], Arc::new(ld.clone()), FProcess::constant(&t, -1.0), FProcess::constant(&t, 1.0)).unwrap();
        let (q, s) = solve_linear(&ld, &p).unwrap();
        let (tau, sigma) = saddle_point(&q, &s, 0).unwrap();
        assert_eq!(tau, StoppingTime::constant(q.sub(), 3));
        assert_eq!(sigma, StoppingTime::constant(q.sub(), 3));
    }

    #[test]
    fn upper_contact_at_start() {
        let t = Arc::new(ScenarioTree::binary(10, 1.0).unwrap());
        let ld = LinearDriver::deterministic(&t, |_| 0.0, FProcess::constant(&t, 1.0)).unwrap();
        let p = Problem::new(
            SubFiltration::trivial(t.clone()),
            vec![0.0; t.num_leaves()],
            Arc::new(ld.clone()),
            FProcess::constant(&t, -0.2),
            FProcess::constant(&t, 0.2),
        )
        .unwrap();
        let (q, s) = solve_linear(&ld, &p).unwrap();
        let (tau, sigma) = saddle_point(&q, &s, 0).unwrap();
        assert!(sigma.0.iter().all(|&v| v == 0));
        assert!(tau.0.iter().all(|&v| v == 10));
    }

    fn ordered_pair(rng: &mut ChaCha8Rng, mode: SubMode) -> (Problem, LinearDriver, Problem, LinearDriver) {
        let (ld2, p2) = linear_instance(4, mode, rng);
        let t = p2.tree();
        let bump = |rng: &mut ChaCha8Rng, x: &FProcess| -> FProcess {
            let d: Vec<Vec<f64>> = x.levels().iter().map(|l| l.iter().map(|_| rng.gen_range(0.0..0.3)).collect()).collect();
            x.add(&FProcess::from_levels(d))
        };
        let c1 = bump(rng, &ld2.c);
        let lower = bump(rng, p2.lower());
        // raise U at least as much as L so the band stays open
        let upper = bump(rng, &p2.upper().add(&lower.sub(p2.lower())));
        let xi: Vec<f64> = p2.terminal().iter().map(|x| x + rng.gen_range(0.0..0.3)).collect();
        let ld1 = ld2.with_c(c1);
        let n = t.steps();
        let xi: Vec<f64> = xi.iter().enumerate().map(|(l, x)| x.max(lower.get(n, l)).min(upper.get(n, l))).collect();
        let p1 = Problem::new(p2.sub().clone(), xi, Arc::new(ld1.clone()), lower, upper).unwrap();
        (p1, ld1, p2, ld2)
    }

    #[test]
    fn comparison_on_ordered_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 12 {
            let mode = [SubMode::Full, SubMode::Trivial, SubMode::Delayed { delay: 1 }][checked % 3];
            let (p1, ld1, p2, ld2) = ordered_pair(&mut rng, mode);
            match compare(&p1, &ld1, &p2, &ld2) {
                Ok(r) => {
                    assert!(r.min_margin >= -1e-10, "{}", r.min_margin);
                    checked += 1;
                }
                // clipping the terminal value can undo the ordering
                Err(Error::Precondition(_)) => continue,
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn comparison_of_identical_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (ld, p) = linear_instance(3, SubMode::Delayed { delay: 1 }, &mut rng);
        let r = compare(&p, &ld, &p, &ld).unwrap();
        assert_eq!(r.min_margin, 0.0);
    }

    #[test]
    fn unordered_data_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (p1, ld1, p2, ld2) = ordered_pair(&mut rng, SubMode::Full);
        match compare(&p2, &ld2, &p1, &ld1) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("not ordered")),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Ordering given G does not order the solutions node by node.
    #[test]
    fn pointwise_ordering_can_fail() {
        let t = tree(2);
        let sub = SubFiltration::trivial(t.clone());
        let ld = LinearDriver::deterministic(&t, |_| 0.0, FProcess::zeros(&t)).unwrap();
        let wide = |x: Vec<f64>| Problem::new(sub.clone(), x, Arc::new(ld.clone()), FProcess::constant(&t, -2.0), FProcess::constant(&t, 2.0)).unwrap();
        let p1 = wide(vec![1.0, 1.0, -1.0, -1.0]);
        let p2 = wide(vec![-1.0, -1.0, 1.0, 1.0]);
        let r = compare(&p1, &ld, &p2, &ld).unwrap();
        assert!(r.min_margin >= -1e-10);
        assert!(r.pointwise_margin < -1.0);
    }
}

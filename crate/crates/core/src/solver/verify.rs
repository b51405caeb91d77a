//! Solution audits and the structural identities tied to a solution.

use serde::{Deserialize, Serialize};

use super::problem::Problem;
use super::scheme::SolutionTriple;
use crate::dynkin::{bruteforce_bounds, game_value_with_terminal, Criterion};
use crate::error::{Error, Result};
use crate::finprob::{FProcess, GProcess};
use crate::skorokhod::k_from_solution;

pub const DYNAMICS_TOL: f64 = 1e-9;
pub const CONSTRAINT_TOL: f64 = 1e-10;
pub const FLAT_OFF_TOL: f64 = 1e-10;
/// Spread of `K` increments inside one atom tolerated as rounding.
pub const ADAPTEDNESS_TOL: f64 = 1e-12;

/// Outcome of [`verify_solution`]. Tolerances scale with `max(1, sup|Y|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest residual of the one-step dynamics over all branches.
    pub dynamics_residual: f64,
    /// `sup |Y_N - ξ|`.
    pub terminal_residual: f64,
    /// Nodes whose own step fails on every branch (or leaves off the
    /// terminal value), worst first.
    pub flagged_nodes: Vec<(usize, usize)>,
    /// `min (E[Y - L|G] ∧ E[U - Y|G])` over levels and atoms.
    pub constraint_slack: f64,
    /// Largest `Σ_k E[Y_k - L_k|G_k] ΔK⁺_k` along a path.
    pub flat_off_lower: f64,
    /// Largest `Σ_k E[U_k - Y_k|G_k] ΔK⁻_k` along a path.
    pub flat_off_upper: f64,
    pub k_monotone: bool,
    pub k_starts_at_zero: bool,
    /// Largest spread of `K` increments over the branches of a node or the
    /// nodes of an atom.
    pub adaptedness_spread: f64,
    pub k_g_adapted: bool,
    pub passed: bool,
}

/// Audits dynamics, constraint, flat-off, monotonicity and adaptedness of `K`.
pub fn verify_solution(p: &Problem, s: &SolutionTriple) -> Diagnostics {
    let tree = p.tree();
    let sub = p.sub();
    let n = tree.steps();
    let dt = tree.dt();
    let scale = s.y.sup_abs().max(1.0);
    let k = s.k();

    let mut dynamics: f64 = 0.0;
    let mut flagged: Vec<(f64, usize, usize)> = Vec::new();
    let mut adapt: f64 = 0.0;
    let mut monotone = true;
    let mut dkp_atoms: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut dkm_atoms: Vec<Vec<f64>> = Vec::with_capacity(n);
    for lvl in 0..n {
        let mut first_inc = vec![0.0; tree.width(lvl)];
        let mut dkp = vec![0.0; tree.width(lvl)];
        let mut dkm = vec![0.0; tree.width(lvl)];
        for (i, node) in tree.level(lvl).iter().enumerate() {
            let yk = s.y.get(lvl, i);
            let zk = s.z.get(lvl, i);
            let f = p.driver().eval(tree.ctx(lvl, i), yk, zk);
            let mut least = f64::INFINITY;
            let c0 = node.children.start;
            first_inc[i] = k.get(lvl + 1, c0) - k.get(lvl, i);
            dkp[i] = s.k_plus.get(lvl + 1, c0) - s.k_plus.get(lvl, i);
            dkm[i] = s.k_minus.get(lvl + 1, c0) - s.k_minus.get(lvl, i);
            for c in node.children.clone() {
                let dk = k.get(lvl + 1, c) - k.get(lvl, i);
                let r = (yk - s.y.get(lvl + 1, c) - f * dt + zk * tree.node(lvl + 1, c).increment - dk).abs();
                dynamics = dynamics.max(r);
                least = least.min(r);
                adapt = adapt.max((dk - first_inc[i]).abs());
                let (ip, im) = (
                    s.k_plus.get(lvl + 1, c) - s.k_plus.get(lvl, i),
                    s.k_minus.get(lvl + 1, c) - s.k_minus.get(lvl, i),
                );
                if ip < -1e-14 * scale || im < -1e-14 * scale {
                    monotone = false;
                }
            }
            if least > DYNAMICS_TOL * scale {
                flagged.push((least, lvl, i));
            }
        }
        adapt = adapt.max(sub.atom_spread(&first_inc, lvl).0);
        dkp_atoms.push(dkp);
        dkm_atoms.push(dkm);
    }
    let mut terminal: f64 = 0.0;
    for (l, &x) in p.terminal().iter().enumerate() {
        let r = (s.y.get(n, l) - x).abs();
        terminal = terminal.max(r);
        if r > DYNAMICS_TOL * scale {
            flagged.push((r, n, l));
        }
    }
    flagged.sort_by(|a, b| b.0.total_cmp(&a.0));

    let yg = sub.cond_expect_process(&s.y);
    let (lg, ug) = (p.lower_g(), p.upper_g());
    let mut slack = f64::INFINITY;
    for lvl in 0..=n {
        for g in 0..sub.num_atoms(lvl) {
            slack = slack.min(yg.get(lvl, g) - lg.get(lvl, g)).min(ug.get(lvl, g) - yg.get(lvl, g));
        }
    }
    let (mut fl, mut fu) = (0.0f64, 0.0f64);
    for leaf in 0..tree.num_leaves() {
        let (mut a, mut b) = (0.0, 0.0);
        for lvl in 0..n {
            let i = tree.ancestor_of_leaf(leaf, lvl);
            let g = sub.atom_of(lvl, i);
            a += ((yg.get(lvl, g) - lg.get(lvl, g)) * dkp_atoms[lvl][i]).abs();
            b += ((ug.get(lvl, g) - yg.get(lvl, g)) * dkm_atoms[lvl][i]).abs();
        }
        fl = fl.max(a);
        fu = fu.max(b);
    }
    let starts = s.k_plus.get(0, 0) == 0.0 && s.k_minus.get(0, 0) == 0.0;
    let adapted = adapt <= ADAPTEDNESS_TOL * scale;
    let passed = dynamics <= DYNAMICS_TOL * scale
        && terminal <= DYNAMICS_TOL * scale
        && slack >= -CONSTRAINT_TOL * scale
        && fl <= FLAT_OFF_TOL * scale
        && fu <= FLAT_OFF_TOL * scale
        && monotone
        && starts
        && adapted;
    Diagnostics {
        dynamics_residual: dynamics,
        terminal_residual: terminal,
        flagged_nodes: flagged.into_iter().map(|(_, a, b)| (a, b)).collect(),
        constraint_slack: slack,
        flat_off_lower: fl,
        flat_off_upper: fu,
        k_monotone: monotone,
        k_starts_at_zero: starts,
        adaptedness_spread: adapt,
        k_g_adapted: adapted,
        passed,
    }
}

/// `(lhs, rhs)` of the a priori estimate for two problems sharing obstacles:
/// `lhs = E[sup|ΔY|² + Σ|ΔZ|²Δt + sup|ΔK|²]`,
/// `rhs = E[|Δξ|² + Σ|f¹ - f²|²(Y², Z²)Δt]`.
pub fn stability_estimate(p1: &Problem, p2: &Problem, s1: &SolutionTriple, s2: &SolutionTriple) -> Result<(f64, f64)> {
    if p1.lower() != p2.lower() || p1.upper() != p2.upper() {
        return Err(Error::Precondition("stability estimate needs identical obstacles".into()));
    }
    let tree = p1.tree();
    if tree != p2.tree() || p1.sub().atom_maps() != p2.sub().atom_maps() {
        return Err(Error::Shape("problems live on different trees or subfiltrations".into()));
    }
    let n = tree.steps();
    let dt = tree.dt();
    let (k1, k2) = (s1.k(), s2.k());
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for leaf in 0..tree.num_leaves() {
        let (mut sup_y, mut sup_k, mut int_z, mut int_f) = (0.0f64, 0.0f64, 0.0, 0.0);
        for k in 0..=n {
            let i = tree.ancestor_of_leaf(leaf, k);
            sup_y = sup_y.max((s1.y.get(k, i) - s2.y.get(k, i)).powi(2));
            sup_k = sup_k.max((k1.get(k, i) - k2.get(k, i)).powi(2));
            if k < n {
                int_z += (s1.z.get(k, i) - s2.z.get(k, i)).powi(2) * dt;
                let ctx = tree.ctx(k, i);
                let (y, z) = (s2.y.get(k, i), s2.z.get(k, i));
                int_f += (p1.driver().eval(ctx, y, z) - p2.driver().eval(ctx, y, z)).powi(2) * dt;
            }
        }
        let w = tree.leaf_prob(leaf);
        lhs += w * (sup_y + int_z + sup_k);
        rhs += w * ((p1.terminal()[leaf] - p2.terminal()[leaf]).powi(2) + int_f);
    }
    Ok((lhs, rhs))
}

/// Rewards of the game representing `E[Y|G]`:
/// `L̃_k = E[Σ_{j<k} f_j Δt + L_k 1{k<N} + ξ 1{k=N} | G_k]`, `Ũ` likewise, and
/// the drift correction `A_k = E[Σ_{j<k} f_j Δt | G_k]`.
pub fn transformed_rewards(p: &Problem, fv: &FProcess) -> Result<(GProcess, GProcess, GProcess)> {
    let tree = p.tree();
    let sub = p.sub();
    let n = tree.steps();
    fv.check_shape(tree, "driver values")?;
    let mut acc = FProcess::zeros(tree);
    for k in 0..n {
        for (i, node) in tree.level(k).iter().enumerate() {
            let v = acc.get(k, i) + fv.get(k, i) * tree.dt();
            for c in node.children.clone() {
                acc.set(k + 1, c, v);
            }
        }
    }
    let mut lo = acc.add(p.lower());
    let mut hi = acc.add(p.upper());
    let end: Vec<f64> = acc.level(n).iter().zip(p.terminal()).map(|(a, x)| a + x).collect();
    lo.level_mut(n).copy_from_slice(&end);
    hi.level_mut(n).copy_from_slice(&end);
    Ok((sub.cond_expect_process(&lo), sub.cond_expect_process(&hi), sub.cond_expect_process(&acc)))
}

/// `E[Y_k|G_k]` recomputed as the value of the Dynkin game with rewards
/// `(L̃, Ũ)` minus the drift correction.
pub fn game_representation(p: &Problem, s: &SolutionTriple) -> Result<GProcess> {
    let fv = p.driver_values(&s.y, &s.z);
    let (lo, hi, acc) = transformed_rewards(p, &fv)?;
    let (profile, _) = game_value_with_terminal(p.sub(), &lo, &hi)?;
    Ok(profile.lower.sub(&acc))
}

/// Same identity with the game solved by exhaustive enumeration; returns the
/// lower and upper values minus the drift correction.
pub fn game_representation_bruteforce(p: &Problem, s: &SolutionTriple, cap: usize) -> Result<(GProcess, GProcess)> {
    let fv = p.driver_values(&s.y, &s.z);
    let (lo, hi, acc) = transformed_rewards(p, &fv)?;
    let (a, b) = bruteforce_bounds(p.sub(), &lo, &hi, Criterion::LowerOnTies, cap)?;
    Ok((a.sub(&acc), b.sub(&acc)))
}

/// `K` per atom rebuilt from `(Y, Z)` through the reversed-time Skorokhod map.
pub fn k_representation(p: &Problem, s: &SolutionTriple) -> Result<GProcess> {
    let fv = p.driver_values(&s.y, &s.z);
    let tol = DYNAMICS_TOL * s.y.sup_abs().max(1.0);
    k_from_solution(p.sub(), &s.y, &s.z, &fv, p.terminal(), p.lower(), p.upper(), tol)
}

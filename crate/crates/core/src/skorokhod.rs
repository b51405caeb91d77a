//! Two-sided Skorokhod reflection on time-dependent intervals, on a grid.
//!
//! Given a path `x` and barriers `l < u`, the map returns `y = x + k` with
//! `l <= y <= u` where `k = k⁺ - k⁻` and `k⁺` (resp. `k⁻`) only increases while
//! `y` sits on `l` (resp. `u`). The net term is
//!
//! ```text
//! k_t = -max( (x_0 - u_0)⁺ ∧ min_{r<=t}(x_r - l_r),
//!             max_{s<=t} [ (x_s - u_s) ∧ min_{s<=r<=t}(x_r - l_r) ] )
//! ```
//!
//! [`two_sided_map`] evaluates it with running extrema in O(N);
//! [`two_sided_map_direct`] keeps the O(N²) nested form as a reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finprob::{FProcess, GProcess, SubFiltration};

/// Iteration cap of [`iterative_oracle`].
pub const ORACLE_MAX_SWEEPS: usize = 10_000;

/// Barrier sequences with strictly positive separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierPair {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BarrierPair {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Shape(format!(
                "barriers have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            let gap = u - l;
            if !(gap > 0.0) || !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidBarriers { index: i, gap });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn constant(len: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; len], vec![upper; len])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn min_gap(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).fold(f64::INFINITY, f64::min)
    }
}

/// Output of the reflection. Index 0 carries the initial jump when `x_0`
/// starts outside the band; otherwise `k⁺_0 = k⁻_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectedOutput {
    pub y: Vec<f64>,
    pub k: Vec<f64>,
    pub k_plus: Vec<f64>,
    pub k_minus: Vec<f64>,
}

/// Worst violations of the three output invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionAudit {
    pub decomposition: f64,
    pub constraint: f64,
    pub flat_off_lower: f64,
    pub flat_off_upper: f64,
    pub monotone: bool,
}

impl ReflectionAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.decomposition <= tol
            && self.constraint <= tol
            && self.flat_off_lower <= tol
            && self.flat_off_upper <= tol
            && self.monotone
    }
}

impl ReflectedOutput {
    fn from_net(x: &[f64], k: Vec<f64>) -> Self {
        let y: Vec<f64> = x.iter().zip(&k).map(|(a, b)| a + b).collect();
        let mut k_plus = Vec::with_capacity(k.len());
        let mut k_minus = Vec::with_capacity(k.len());
        let (mut up, mut down, mut prev) = (0.0, 0.0, 0.0);
        for &kt in &k {
            // a rise of k only happens off the lower barrier, a fall off the upper
            let dk = kt - prev;
            if dk > 0.0 {
                up += dk;
            } else {
                down -= dk;
            }
            prev = kt;
            k_plus.push(up);
            k_minus.push(down);
        }
        Self { y, k, k_plus, k_minus }
    }

    pub fn audit(&self, x: &[f64], b: &BarrierPair) -> ReflectionAudit {
        let mut a = ReflectionAudit {
            decomposition: 0.0,
            constraint: 0.0,
            flat_off_lower: 0.0,
            flat_off_upper: 0.0,
            monotone: true,
        };
        let (mut pp, mut pm) = (0.0, 0.0);
        for t in 0..self.y.len() {
            let y = self.y[t];
            a.decomposition = a.decomposition.max((y - x[t] - self.k[t]).abs());
            a.decomposition = a.decomposition.max((self.k[t] - (self.k_plus[t] - self.k_minus[t])).abs());
            a.constraint = a.constraint.max(b.lower[t] - y).max(y - b.upper[t]);
            let (dp, dm) = (self.k_plus[t] - pp, self.k_minus[t] - pm);
            if dp < 0.0 || dm < 0.0 {
                a.monotone = false;
            }
            a.flat_off_lower += ((y - b.lower[t]) * dp).abs();
            a.flat_off_upper += ((b.upper[t] - y) * dm).abs();
            pp = self.k_plus[t];
            pm = self.k_minus[t];
        }
        a
    }
}

fn check_inputs(x: &[f64], b: &BarrierPair) -> Result<()> {
    if x.len() != b.len() {
        return Err(Error::Shape(format!("path has {} points, barriers {}", x.len(), b.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("path contains non-finite values".into()));
    }
    Ok(())
}

/// Streaming evaluation with running extrema:
/// `A_t = min(A_{t-1}, x_t - l_t)` and
/// `B_t = max(min(B_{t-1}, x_t - l_t), x_t - u_t)`.
pub fn two_sided_map(x: &[f64], b: &BarrierPair) -> Result<ReflectedOutput> {
    check_inputs(x, b)?;
    let mut k = Vec::with_capacity(x.len());
    let lead = (x[0] - b.upper[0]).max(0.0);
    let mut run_min = f64::INFINITY;
    let mut upper_term = f64::NEG_INFINITY;
    for t in 0..x.len() {
        let below = x[t] - b.lower[t];
        run_min = run_min.min(below);
        upper_term = upper_term.min(below).max(x[t] - b.upper[t]);
        k.push(-lead.min(run_min).max(upper_term));
    }
    Ok(ReflectedOutput::from_net(x, k))
}

/// Direct O(N²) evaluation of the nested max/min formula.
pub fn two_sided_map_direct(x: &[f64], b: &BarrierPair) -> Result<ReflectedOutput> {
    check_inputs(x, b)?;
    let n = x.len();
    let below: Vec<f64> = (0..n).map(|r| x[r] - b.lower[r]).collect();
    let mut k = Vec::with_capacity(n);
    for t in 0..n {
        let first = (x[0] - b.upper[0]).max(0.0).min(below[..=t].iter().copied().fold(f64::INFINITY, f64::min));
        // sweep s downward so the inner infimum over [s, t] is a running min
        let (mut second, mut inner) = (f64::NEG_INFINITY, f64::INFINITY);
        for s in (0..=t).rev() {
            inner = inner.min(below[s]);
            second = second.max((x[s] - b.upper[s]).min(inner));
        }
        k.push(-first.max(second));
    }
    Ok(ReflectedOutput::from_net(x, k))
}

fn lower_reflect(z: &[f64], lower: &[f64]) -> Vec<f64> {
    let mut push = 0.0f64;
    z.iter()
        .zip(lower)
        .map(|(&v, &l)| {
            push = push.max(l - v);
            v + push
        })
        .collect()
}

fn upper_reflect(z: &[f64], upper: &[f64]) -> Vec<f64> {
    let mut push = 0.0f64;
    z.iter()
        .zip(upper)
        .map(|(&v, &u)| {
            push = push.max(v - u);
            v - push
        })
        .collect()
}

/// Independent oracle: alternate the one-sided lower and upper Skorokhod maps
/// until the path no longer changes.
pub fn iterative_oracle(x: &[f64], b: &BarrierPair) -> Result<ReflectedOutput> {
    check_inputs(x, b)?;
    let mut y = x.to_vec();
    let mut change = f64::INFINITY;
    for _ in 0..ORACLE_MAX_SWEEPS {
        let next = upper_reflect(&lower_reflect(&y, &b.lower), &b.upper);
        change = next.iter().zip(&y).fold(0.0, |m, (a, c)| m.max((a - c).abs()));
        y = next;
        if change < 1e-13 {
            let k = y.iter().zip(x).map(|(a, c)| a - c).collect();
            return Ok(ReflectedOutput::from_net(x, k));
        }
    }
    Err(Error::NonConvergence {
        iterations: ORACLE_MAX_SWEEPS,
        last_change: change,
        context: "alternating one-sided reflections (barrier separation near zero?)".into(),
    })
}

/// `(sup|k¹ - k²|, sup|x¹ - x²| + sup max(|l¹ - l²|, |u¹ - u²|))`.
pub fn stability_gap(x1: &[f64], x2: &[f64], b1: &BarrierPair, b2: &BarrierPair) -> Result<(f64, f64)> {
    let r1 = two_sided_map(x1, b1)?;
    let r2 = two_sided_map(x2, b2)?;
    if x1.len() != x2.len() {
        return Err(Error::Shape("paths differ in length".into()));
    }
    let sup = |a: &[f64], c: &[f64]| a.iter().zip(c).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let lhs = sup(&r1.k, &r2.k);
    let barrier = sup(&b1.lower, &b2.lower).max(sup(&b1.upper, &b2.upper));
    Ok((lhs, sup(x1, x2) + barrier))
}

/// Reflection term recovered from a solved doubly conditional reflected BSDE
/// through the reversed-time Skorokhod formula.
///
/// Inputs are node-indexed: `y` (levels 0..=N), `z` and `f_values` (levels
/// 0..N, the driver evaluated along the solution), obstacles `lower`/`upper`,
/// and `terminal` (the leaf values of ξ). Returns `K_k` per atom of `G_k`.
#[allow(clippy::too_many_arguments)]
pub fn k_from_solution(
    sub: &SubFiltration,
    y: &FProcess,
    z: &FProcess,
    f_values: &FProcess,
    terminal: &[f64],
    lower: &FProcess,
    upper: &FProcess,
    residual_tol: f64,
) -> Result<GProcess> {
    let tree = sub.tree();
    let n = tree.steps();
    let dt = tree.dt();
    for (p, what) in [(y, "Y"), (z, "Z"), (f_values, "f"), (lower, "L"), (upper, "U")] {
        p.check_shape(tree, what)?;
    }
    if terminal.len() != tree.num_leaves() {
        return Err(Error::Shape("terminal value has wrong number of leaves".into()));
    }
    // martingale part of the forward dynamics without K; its residual against
    // Y must be G-adapted and non-anticipating for (Y, Z) to be a solution
    let mut drift_path = FProcess::zeros(tree);
    for k in 0..n {
        for (i, node) in tree.level(k).iter().enumerate() {
            for c in node.children.clone() {
                let inc = f_values.get(k, i) * dt - z.get(k, i) * tree.node(k + 1, c).increment;
                drift_path.set(k + 1, c, drift_path.get(k, i) + inc);
            }
        }
    }
    // dynamics: Y_{k+1}(c) - Y_k + f Δt - Z ΔB(c) = -ΔK_k must not depend on c
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for (i, node) in tree.level(k).iter().enumerate() {
            let incs: Vec<f64> = node
                .children
                .clone()
                .map(|c| {
                    y.get(k + 1, c) - y.get(k, i) + f_values.get(k, i) * dt
                        - z.get(k, i) * tree.node(k + 1, c).increment
                })
                .collect();
            let spread = incs.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
                - incs.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            worst = worst.max(spread);
        }
        let dk: Vec<f64> = (0..tree.width(k))
            .map(|i| {
                let c = tree.node(k, i).children.start;
                -(y.get(k + 1, c) - y.get(k, i) + f_values.get(k, i) * dt
                    - z.get(k, i) * tree.node(k + 1, c).increment)
            })
            .collect();
        worst = worst.max(sub.atom_spread(&dk, k).0);
    }
    if terminal.iter().enumerate().any(|(l, &v)| (y.get(n, l) - v).abs() > residual_tol) {
        return Err(Error::NotASolution { residual: f64::NAN, tolerance: residual_tol });
    }
    if worst > residual_tol {
        return Err(Error::NotASolution { residual: worst, tolerance: residual_tol });
    }

    let x = sub.cond_expect_process(&drift_path);
    let l = sub.cond_expect_process(lower);
    let u = sub.cond_expect_process(upper);
    let a = sub.cond_expect(terminal, n)?;

    let mut out = GProcess::zeros(sub);
    let mut done: Vec<Vec<bool>> = (0..=n).map(|k| vec![false; sub.num_atoms(k)]).collect();
    for leaf in 0..tree.num_leaves() {
        let atoms: Vec<usize> = (0..=n).map(|k| sub.atom_of_leaf(leaf, k)).collect();
        if (0..=n).all(|k| done[k][atoms[k]]) {
            continue;
        }
        let xs: Vec<f64> = (0..=n).map(|k| x.get(k, atoms[k])).collect();
        let ls: Vec<f64> = (0..=n).map(|k| l.get(k, atoms[k])).collect();
        let us: Vec<f64> = (0..=n).map(|k| u.get(k, atoms[k])).collect();
        let base = a[atoms[n]] + xs[n];
        // reversed time: x̃_t = a + x_N - x_{N-t}, barriers reversed likewise
        let rx: Vec<f64> = (0..=n).rev().map(|k| base - xs[k]).collect();
        let rb = BarrierPair::new(ls.iter().rev().copied().collect(), us.iter().rev().copied().collect())?;
        let refl = two_sided_map(&rx, &rb)?;
        // k̃_t = K_N - K_{N-t}, K_0 = 0
        let total = refl.k[n];
        for k in 0..=n {
            if !done[k][atoms[k]] {
                out.set(k, atoms[k], total - refl.k[n - k]);
                done[k][atoms[k]] = true;
            }
        }
    }
    Ok(out)
}

//! Backward schemes: reflected (constant or frozen driver), Picard, penalized.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::Problem;
use super::verify::{verify_solution, Diagnostics};
use crate::error::{Error, Result};
use crate::finprob::{FProcess, GProcess, SubFiltration};

/// Stopping threshold on the weighted norm of successive Picard iterates.
pub const PICARD_TOL: f64 = 1e-10;
pub const PICARD_MAX_ITER: usize = 200;
/// Cap on the per-level fixed-point sweeps of the penalized scheme.
pub const INNER_MAX_ITER: usize = 1000;

/// `(Y, Z, K⁺, K⁻)` with node-indexed storage. `K⁺_k`, `K⁻_k` are stored at
/// the level-`k` nodes; their increments over `[k, k + 1]` are `G_k`-measurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTriple {
    pub y: FProcess,
    pub z: FProcess,
    pub k_plus: FProcess,
    pub k_minus: FProcess,
    /// Weighted norms of successive differences (Picard only).
    pub history: Vec<f64>,
    pub diagnostics: Option<Diagnostics>,
}

impl SolutionTriple {
    /// `K = K⁺ - K⁻` per node.
    pub fn k(&self) -> FProcess {
        self.k_plus.sub(&self.k_minus)
    }

    /// `K` per atom, read off the first member node of every atom.
    pub fn k_g(&self, sub: &SubFiltration) -> GProcess {
        let k = self.k();
        GProcess::from_levels(
            (0..k.num_levels())
                .map(|lvl| (0..sub.num_atoms(lvl)).map(|g| k.get(lvl, sub.members(lvl, g)[0])).collect())
                .collect(),
        )
    }

    /// `E[Y_k | G_k]`.
    pub fn y_g(&self, sub: &SubFiltration) -> GProcess {
        sub.cond_expect_process(&self.y)
    }

    pub fn y0(&self) -> f64 {
        self.y.get(0, 0)
    }

    pub fn iterations(&self) -> usize {
        self.history.len().max(1)
    }
}

/// How the atom mean is kept inside the conditional band.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Constraint {
    Reflect,
    /// Penalty intensity `n Δt`.
    Penalty(f64),
}

impl Constraint {
    /// Corrected atom mean `m` for the uncorrected mean `c`.
    fn correct(self, c: f64, lower: f64, upper: f64) -> f64 {
        match self {
            Constraint::Reflect => c.max(lower).min(upper),
            Constraint::Penalty(q) => {
                if c < lower {
                    (c + q * lower) / (1.0 + q)
                } else if c > upper {
                    (c + q * upper) / (1.0 + q)
                } else {
                    c
                }
            }
        }
    }
}

/// How the driver enters a backward step.
enum Step<'a> {
    /// Values fixed in advance.
    Frozen(&'a FProcess),
    /// `f(k, ·, Y_k, Z_k)` solved by a per-level fixed point.
    Implicit,
}

fn backward(p: &Problem, step: Step<'_>, constraint: Constraint) -> Result<SolutionTriple> {
    let tree = p.tree();
    let sub = p.sub();
    let n = tree.steps();
    let dt = tree.dt();
    let mut y = FProcess::zeros(tree);
    let mut z = FProcess::zeros(tree);
    y.level_mut(n).copy_from_slice(p.terminal());
    let mut dk_plus: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut dk_minus: Vec<Vec<f64>> = vec![Vec::new(); n];
    for k in (0..n).rev() {
        let next = y.level(k + 1).to_vec();
        let mean = tree.cond_expect(&next, k)?;
        let zk = tree.martingale_coeff(&next, k)?;
        let (lo, hi) = (p.lower_g().level(k), p.upper_g().level(k));
        let apply = |cont: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let cbar = sub.cond_expect(cont, k)?;
            let shift: Vec<f64> =
                cbar.iter().enumerate().map(|(g, &c)| constraint.correct(c, lo[g], hi[g]) - c).collect();
            let yk = cont.iter().zip(sub.lift(&shift, k)).map(|(c, s)| c + s).collect();
            Ok((yk, shift))
        };
        let (yk, shift) = match step {
            Step::Frozen(fv) => {
                let cont: Vec<f64> = mean.iter().zip(fv.level(k)).map(|(m, f)| m + f * dt).collect();
                apply(&cont)?
            }
            Step::Implicit => {
                let mut cur = mean.clone();
                let mut result = None;
                let mut change = f64::INFINITY;
                for _ in 0..INNER_MAX_ITER {
                    let cont: Vec<f64> = (0..tree.width(k))
                        .map(|i| mean[i] + p.driver().eval(tree.ctx(k, i), cur[i], zk[i]) * dt)
                        .collect();
                    let (yk, shift) = apply(&cont)?;
                    change = yk.iter().zip(&cur).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    let size = yk.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    cur = yk.clone();
                    if change <= 4.0 * f64::EPSILON * size {
                        result = Some((yk, shift));
                        break;
                    }
                }
                result.ok_or_else(|| Error::NonConvergence {
                    iterations: INNER_MAX_ITER,
                    last_change: change,
                    context: format!("implicit driver step at level {k} (reduce λΔt)"),
                })?
            }
        };
        y.level_mut(k).copy_from_slice(&yk);
        z.level_mut(k).copy_from_slice(&zk);
        dk_plus[k] = shift.iter().map(|s| s.max(0.0)).collect();
        dk_minus[k] = shift.iter().map(|s| (-s).max(0.0)).collect();
    }
    let mut k_plus = FProcess::zeros(tree);
    let mut k_minus = FProcess::zeros(tree);
    for k in 0..n {
        for (i, node) in tree.level(k).iter().enumerate() {
            let g = sub.atom_of(k, i);
            let (kp, km) = (k_plus.get(k, i) + dk_plus[k][g], k_minus.get(k, i) + dk_minus[k][g]);
            for c in node.children.clone() {
                k_plus.set(k + 1, c, kp);
                k_minus.set(k + 1, c, km);
            }
        }
    }
    Ok(SolutionTriple { y, z, k_plus, k_minus, history: Vec::new(), diagnostics: None })
}

/// Reflected solution for given driver values along the path, i.e. the
/// driver frozen at `fv` (levels `0..N`).
pub fn solve_frozen(p: &Problem, fv: &FProcess) -> Result<SolutionTriple> {
    fv.check_shape(p.tree(), "driver values")?;
    backward(p, Step::Frozen(fv), Constraint::Reflect)
}

/// Solution for a driver that does not depend on `(y, z)`: the conditional
/// means follow the clipped recursion `Ȳ_k = clip(E[Ȳ_{k+1} + f_k Δt | G_k])`
/// and the clipping amounts are the increments of `K`.
pub fn solve_constant_driver(p: &Problem) -> Result<SolutionTriple> {
    if p.lipschitz() != 0.0 {
        return Err(Error::Precondition(format!(
            "constant-driver solve needs a driver independent of (y, z); declared Lipschitz constant is {}",
            p.lipschitz()
        )));
    }
    let zero = FProcess::zeros(p.tree());
    let fv = p.driver_values(&zero, &zero);
    let mut s = solve_frozen(p, &fv)?;
    s.diagnostics = Some(verify_solution(p, &s));
    Ok(s)
}

fn check_step_size(p: &Problem) -> Result<()> {
    let ldt = p.lipschitz() * p.tree().dt();
    if ldt >= 1.0 {
        return Err(Error::Precondition(format!(
            "λΔt = {ldt} must be below 1; refine the time grid"
        )));
    }
    Ok(())
}

/// `β = 4λ² + 1`.
pub fn beta(lambda: f64) -> f64 {
    4.0 * lambda * lambda + 1.0
}

/// `(Σ_{k<N} e^{β t_k} E[|ΔY_k|² + |ΔZ_k|²] Δt)^{1/2}`.
pub fn weighted_norm(p: &Problem, dy: &FProcess, dz: &FProcess) -> f64 {
    let tree = p.tree();
    let b = beta(p.lipschitz());
    let total: f64 = (0..tree.steps())
        .map(|k| {
            let e: f64 = tree
                .level(k)
                .iter()
                .enumerate()
                .map(|(i, node)| node.path_prob * (dy.get(k, i).powi(2) + dz.get(k, i).powi(2)))
                .sum();
            (b * tree.time(k)).exp() * e * tree.dt()
        })
        .sum();
    total.sqrt()
}

/// Picard iteration on the whole path: each iterate solves the reflected
/// equation with the driver frozen at the previous `(Y, Z)`.
pub fn solve_picard(p: &Problem) -> Result<SolutionTriple> {
    solve_picard_with(p, PICARD_TOL, PICARD_MAX_ITER)
}

pub fn solve_picard_with(p: &Problem, tol: f64, max_iter: usize) -> Result<SolutionTriple> {
    check_step_size(p)?;
    if p.lipschitz() == 0.0 {
        return solve_constant_driver(p);
    }
    let tree = p.tree();
    let mut y = FProcess::zeros(tree);
    let mut z = FProcess::zeros(tree);
    let mut history = Vec::new();
    for it in 0..max_iter {
        let fv = p.driver_values(&y, &z);
        let mut s = solve_frozen(p, &fv)?;
        let diff = weighted_norm(p, &s.y.sub(&y), &s.z.sub(&z));
        history.push(diff);
        debug!("picard iteration {it}: weighted difference {diff:e}");
        let size = s.y.sup_abs().max(s.z.sup_abs()).max(1.0);
        // below `tol`, or stalled at rounding level
        let stalled = it > 2 && diff >= history[it - 1] && diff <= 1e3 * f64::EPSILON * size;
        if diff < tol || stalled {
            s.history = history;
            s.diagnostics = Some(verify_solution(p, &s));
            return Ok(s);
        }
        y = s.y;
        z = s.z;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        last_change: *history.last().unwrap_or(&f64::NAN),
        context: "Picard iteration is not contracting (λΔt too large; refine the grid)".into(),
    })
}

/// Penalized equation with intensity `n`: the atom mean is pulled towards the
/// band by `n Δt (m - L̄)⁻ - n Δt (m - Ū)⁺`, solved in closed form per atom.
pub fn solve_penalized(p: &Problem, n: f64) -> Result<SolutionTriple> {
    check_step_size(p)?;
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Precondition(format!("penalty level must be finite and nonnegative, got {n}")));
    }
    let q = n * p.tree().dt();
    let mut s = if p.lipschitz() == 0.0 {
        let zero = FProcess::zeros(p.tree());
        backward(p, Step::Frozen(&p.driver_values(&zero, &zero)), Constraint::Penalty(q))?
    } else {
        backward(p, Step::Implicit, Constraint::Penalty(q))?
    };
    s.diagnostics = Some(verify_solution(p, &s));
    Ok(s)
}

/// Geometric grid `2^lo/Δt, ..., 2^hi/Δt`.
pub fn penalty_grid(dt: f64, lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e) / dt).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: f64,
    /// `max (E[Yⁿ - L|G])⁻ ∨ (E[Yⁿ - U|G])⁺` over levels and atoms.
    pub violation: f64,
    /// `sup |Yⁿ - Y|` against the reflected solution.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log v(n)` against `log n`, over rows with `v > 0`.
    pub violation_slope: Option<f64>,
    pub reference_y0: f64,
}

/// Violation of the conditional constraint by `y`.
pub fn constraint_violation(p: &Problem, y: &FProcess) -> f64 {
    let yg = p.sub().cond_expect_process(y);
    let mut worst = 0.0f64;
    for k in 0..yg.num_levels() {
        for g in 0..yg.level(k).len() {
            let v = yg.get(k, g);
            worst = worst.max(p.lower_g().get(k, g) - v).max(v - p.upper_g().get(k, g));
        }
    }
    worst
}

pub fn penalization_sweep(p: &Problem, grid: &[f64]) -> Result<SweepReport> {
    let reference = solve_picard(p)?;
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&n| {
            let s = solve_penalized(p, n)?;
            Ok(SweepRow {
                n,
                violation: constraint_violation(p, &s.y),
                distance: s.y.max_abs_diff(&reference.y),
            })
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.violation > 0.0).map(|r| (r.n.ln(), r.violation.ln())).collect();
    Ok(SweepReport { violation_slope: fit_slope(&pts), rows, reference_y0: reference.y0() })
}

/// Ordinary least-squares slope; `None` with fewer than two points.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    (sxx > 0.0).then(|| sxy / sxx)
}

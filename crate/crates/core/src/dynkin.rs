//! Snell envelopes and Dynkin games over the subfiltration.
//!
//! All processes here are atom-indexed ([`GProcess`]). The game pays
//! `ξ(τ)` when `τ <= σ` and `ζ(σ)` when `σ < τ`; the maximizer picks `τ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finprob::{enumerate_stopping_times_in_atom, GProcess, StoppingTime, SubFiltration};

/// Fixed-point tolerance of [`coupled_families`].
pub const FAMILY_TOL: f64 = 1e-12;
/// Allowed gap between the recursive value and `J - J'`.
pub const FAIRNESS_TOL: f64 = 1e-10;

/// Who collects when both players stop at the same time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// `ξ(τ)` on `{τ <= σ}`; recursion `max(ξ, min(ζ, c))`.
    #[default]
    LowerOnTies,
    /// `ζ(σ)` on `{σ <= τ}`; recursion `min(ζ, max(ξ, c))`.
    UpperOnTies,
}

impl Criterion {
    fn combine(self, lower: f64, upper: f64, cont: f64) -> f64 {
        match self {
            Criterion::LowerOnTies => lower.max(upper.min(cont)),
            Criterion::UpperOnTies => upper.min(lower.max(cont)),
        }
    }

    fn payoff(self, tau: usize, sigma: usize, lower: f64, upper: f64) -> f64 {
        let lower_wins = match self {
            Criterion::LowerOnTies => tau <= sigma,
            Criterion::UpperOnTies => tau < sigma,
        };
        if lower_wins {
            lower
        } else {
            upper
        }
    }
}

/// Lower reward `ξ` and upper reward `ζ` with zero terminal values.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardPair {
    lower: GProcess,
    upper: GProcess,
}

impl RewardPair {
    pub fn new(sub: &SubFiltration, lower: GProcess, upper: GProcess) -> Result<Self> {
        lower.check_shape(sub, "lower reward")?;
        upper.check_shape(sub, "upper reward")?;
        let n = sub.tree().steps();
        for g in 0..sub.num_atoms(n) {
            let (a, b) = (lower.get(n, g), upper.get(n, g));
            if a != 0.0 || b != 0.0 {
                return Err(Error::Precondition(format!(
                    "rewards must vanish at the terminal level (atom {g}: {a}, {b})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &GProcess {
        &self.lower
    }

    pub fn upper(&self) -> &GProcess {
        &self.upper
    }

    /// True when `ξ > ζ` on some atom.
    pub fn is_crossed(&self) -> bool {
        self.lower
            .levels()
            .iter()
            .flatten()
            .zip(self.upper.levels().iter().flatten())
            .any(|(a, b)| a > b)
    }
}

/// Values of the game per level and atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueProfile {
    pub lower: GProcess,
    pub upper: GProcess,
    /// Common value, present when `upper - lower <= 1e-10` everywhere.
    pub value: Option<GProcess>,
    /// `sup |Y - (J - J')|`; `None` when the coupled families diverge.
    pub families_gap: Option<f64>,
}

impl ValueProfile {
    pub fn fairness_gap(&self) -> f64 {
        self.upper.max_abs_diff(&self.lower)
    }

    fn from_bounds(lower: GProcess, upper: GProcess, families_gap: Option<f64>) -> Self {
        let value = (upper.max_abs_diff(&lower) <= FAIRNESS_TOL).then(|| lower.clone());
        Self { lower, upper, value, families_gap }
    }
}

/// Smallest G-supermartingale dominating `phi`.
pub fn snell_envelope(sub: &SubFiltration, phi: &GProcess) -> Result<GProcess> {
    phi.check_shape(sub, "reward")?;
    let n = sub.tree().steps();
    let mut r = phi.clone();
    for k in (0..n).rev() {
        let cont = sub.cond_expect_next(r.level(k + 1), k);
        for (g, c) in cont.into_iter().enumerate() {
            r.set(k, g, phi.get(k, g).max(c));
        }
    }
    Ok(r)
}

/// Largest violation of `E[X_{k+1} | G_k] <= X_k`.
pub fn supermartingale_violation(sub: &SubFiltration, x: &GProcess) -> f64 {
    let n = sub.tree().steps();
    (0..n)
        .flat_map(|k| {
            let cont = sub.cond_expect_next(x.level(k + 1), k);
            cont.into_iter().enumerate().map(move |(g, c)| c - x.get(k, g))
        })
        .fold(0.0, f64::max)
}

/// Minimal nonnegative pair with `J = R(J' + ξ)` and `J' = R(J - ζ)`, by
/// monotone iteration from zero. Diverges exactly when no such pair exists,
/// which happens for crossed rewards.
pub fn coupled_families(sub: &SubFiltration, rw: &RewardPair) -> Result<(GProcess, GProcess)> {
    let n = sub.tree().steps();
    let cap = 10 * (n + 1);
    let mut j = GProcess::zeros(sub);
    let mut jp = GProcess::zeros(sub);
    let mut change = f64::INFINITY;
    for _ in 0..cap {
        let j_next = snell_envelope(sub, &jp.add(&rw.lower))?;
        let jp_next = snell_envelope(sub, &j.sub(&rw.upper))?;
        change = j_next.max_abs_diff(&j).max(jp_next.max_abs_diff(&jp));
        j = j_next;
        jp = jp_next;
        if change < FAMILY_TOL {
            return Ok((j, jp));
        }
    }
    Err(Error::NonConvergence {
        iterations: cap,
        last_change: change,
        context: "coupled supermartingale families (no pair fits between the rewards)".into(),
    })
}

/// Backward recursion for the game value under the default criterion, with
/// the `J - J'` cross-check.
pub fn game_value_recursive(sub: &SubFiltration, rw: &RewardPair) -> Result<ValueProfile> {
    game_value_recursive_with(sub, rw, Criterion::default())
}

pub fn game_value_recursive_with(
    sub: &SubFiltration,
    rw: &RewardPair,
    criterion: Criterion,
) -> Result<ValueProfile> {
    let y = recursive_values(sub, &rw.lower, &rw.upper, criterion);
    let families_gap = match coupled_families(sub, rw) {
        Ok((j, jp)) => {
            let gap = y.max_abs_diff(&j.sub(&jp));
            if gap > FAIRNESS_TOL {
                return Err(Error::NotASolution { residual: gap, tolerance: FAIRNESS_TOL });
            }
            Some(gap)
        }
        Err(Error::NonConvergence { .. }) if rw.is_crossed() => None,
        Err(e) => return Err(e),
    };
    Ok(ValueProfile::from_bounds(y.clone(), y, families_gap))
}

/// The game recursion on rewards with arbitrary (but equal) terminal values.
pub fn recursive_values(sub: &SubFiltration, lower: &GProcess, upper: &GProcess, criterion: Criterion) -> GProcess {
    let n = sub.tree().steps();
    let mut y = lower.clone();
    for k in (0..n).rev() {
        let cont = sub.cond_expect_next(y.level(k + 1), k);
        for (g, c) in cont.into_iter().enumerate() {
            y.set(k, g, criterion.combine(lower.get(k, g), upper.get(k, g), c));
        }
    }
    y
}

/// Exhaustive `max_τ min_σ` and `min_σ max_τ` of `E[I(τ, σ) | G_k]` on every
/// atom, over stopping times from level `k`.
pub fn game_value_bruteforce(
    sub: &SubFiltration,
    rw: &RewardPair,
    criterion: Criterion,
    cap: usize,
) -> Result<ValueProfile> {
    let (lower, upper) = bruteforce_bounds(sub, &rw.lower, &rw.upper, criterion, cap)?;
    Ok(ValueProfile::from_bounds(lower, upper, None))
}

/// Brute-force lower/upper values for rewards with possibly nonzero terminals.
pub fn bruteforce_bounds(
    sub: &SubFiltration,
    lower: &GProcess,
    upper: &GProcess,
    criterion: Criterion,
    cap: usize,
) -> Result<(GProcess, GProcess)> {
    lower.check_shape(sub, "lower reward")?;
    upper.check_shape(sub, "upper reward")?;
    let tree = sub.tree();
    let n = tree.steps();
    let jobs: Vec<(usize, usize)> = (0..=n).flat_map(|k| (0..sub.num_atoms(k)).map(move |g| (k, g))).collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(k, g)| {
            let times = enumerate_stopping_times_in_atom(sub, k, g, cap)?;
            let leaves: Vec<usize> = sub.atom_leaves(k, g).collect();
            let mass = sub.atom_prob(k, g);
            let value = |tau: &StoppingTime, sigma: &StoppingTime| {
                leaves
                    .iter()
                    .map(|&l| {
                        let (t, s) = (tau.at(l), sigma.at(l));
                        let pay = criterion.payoff(
                            t,
                            s,
                            lower.along_leaf(sub, l, t),
                            upper.along_leaf(sub, l, s),
                        );
                        tree.leaf_prob(l) * pay
                    })
                    .sum::<f64>()
                    / mass
            };
            let table: Vec<Vec<f64>> =
                times.iter().map(|tau| times.iter().map(|sigma| value(tau, sigma)).collect()).collect();
            let maxmin = table.iter().map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).fold(f64::NEG_INFINITY, f64::max);
            let minmax = (0..times.len())
                .map(|s| table.iter().map(|row| row[s]).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            Ok((maxmin, minmax))
        })
        .collect::<Result<_>>()?;
    let mut lo = GProcess::zeros(sub);
    let mut hi = GProcess::zeros(sub);
    for (&(k, g), &(a, b)) in jobs.iter().zip(&results) {
        lo.set(k, g, a);
        hi.set(k, g, b);
    }
    Ok((lo, hi))
}

/// Subtracts `E[ξ_N | G_k]` from both rewards. Returns the shifted pair and
/// the shift, so that `value(original) = value(shifted) + shift`.
pub fn reward_shift(sub: &SubFiltration, lower: &GProcess, upper: &GProcess) -> Result<(RewardPair, GProcess)> {
    lower.check_shape(sub, "lower reward")?;
    upper.check_shape(sub, "upper reward")?;
    let n = sub.tree().steps();
    for g in 0..sub.num_atoms(n) {
        if lower.get(n, g) != upper.get(n, g) {
            return Err(Error::UnequalTerminals { atom: g, lower: lower.get(n, g), upper: upper.get(n, g) });
        }
    }
    let mut shift = GProcess::zeros(sub);
    shift.level_mut(n).copy_from_slice(lower.level(n));
    for k in (0..n).rev() {
        let c = sub.cond_expect_next(shift.level(k + 1), k);
        shift.level_mut(k).copy_from_slice(&c);
    }
    let mut lo = lower.sub(&shift);
    let mut hi = upper.sub(&shift);
    // exact zeros at the terminal level
    lo.level_mut(n).fill(0.0);
    hi.level_mut(n).fill(0.0);
    Ok((RewardPair { lower: lo, upper: hi }, shift))
}

/// Game value for rewards with equal, possibly nonzero, terminal values.
pub fn game_value_with_terminal(
    sub: &SubFiltration,
    lower: &GProcess,
    upper: &GProcess,
) -> Result<(ValueProfile, GProcess)> {
    let (rw, shift) = reward_shift(sub, lower, upper)?;
    let profile = game_value_recursive(sub, &rw)?;
    let y = profile.lower.add(&shift);
    Ok((ValueProfile { lower: y.clone(), upper: y.clone(), value: Some(y), families_gap: profile.families_gap }, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finprob::{enumerate_stopping_times, ScenarioTree, DEFAULT_ENUMERATION_CAP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_g(sub: &SubFiltration, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GProcess {
        GProcess::from_levels(
            (0..=sub.tree().steps()).map(|k| (0..sub.num_atoms(k)).map(|_| rng.gen_range(lo..hi)).collect()).collect(),
        )
    }

    fn zero_terminal(sub: &SubFiltration, mut x: GProcess) -> GProcess {
        x.level_mut(sub.tree().steps()).fill(0.0);
        x
    }

    fn subs(n: usize, rng: &mut ChaCha8Rng) -> Vec<SubFiltration> {
        let tree = Arc::new(ScenarioTree::binary(n, 1.0).unwrap());
        vec![
            SubFiltration::full(tree.clone()),
            SubFiltration::trivial(tree.clone()),
            SubFiltration::delayed(tree.clone(), 1),
            SubFiltration::random(tree, 2, rng),
        ]
    }

    #[test]
    fn zero_reward_envelope() {
        let sub = SubFiltration::full(Arc::new(ScenarioTree::binary(3, 1.0).unwrap()));
        let r = snell_envelope(&sub, &GProcess::zeros(&sub)).unwrap();
        assert_eq!(r.sup_abs(), 0.0);
    }

    #[test]
    fn decreasing_deterministic_reward_is_its_own_envelope() {
        let sub = SubFiltration::trivial(Arc::new(ScenarioTree::binary(4, 1.0).unwrap()));
        let phi = GProcess::from_levels((0..=4).map(|k| vec![4.0 - k as f64]).collect());
        assert_eq!(snell_envelope(&sub, &phi).unwrap(), phi);
    }

    /// Snell envelope against exhaustive optimal stopping.
    #[test]
    fn envelope_matches_optimal_stopping() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3 {
            for sub in subs(n, &mut rng) {
                let phi = random_g(&sub, &mut rng, -1.0, 1.0);
                let r = snell_envelope(&sub, &phi).unwrap();
                assert!(supermartingale_violation(&sub, &r) <= 1e-12);
                for k in 0..=n {
                    for g in 0..sub.num_atoms(k) {
                        let best = enumerate_stopping_times_in_atom(&sub, k, g, 10_000)
                            .unwrap()
                            .iter()
                            .map(|tau| {
                                sub.atom_leaves(k, g)
                                    .map(|l| sub.tree().leaf_prob(l) * phi.along_leaf(&sub, l, tau.at(l)))
                                    .sum::<f64>()
                                    / sub.atom_prob(k, g)
                            })
                            .fold(f64::NEG_INFINITY, f64::max);
                        assert!((best - r.get(k, g)).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn band_containing_zero_gives_zero_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sub = SubFiltration::full(Arc::new(ScenarioTree::binary(3, 1.0).unwrap()));
        let lo = zero_terminal(&sub, random_g(&sub, &mut rng, -1.0, 0.0));
        let hi = zero_terminal(&sub, random_g(&sub, &mut rng, 0.0, 1.0));
        let rw = RewardPair::new(&sub, lo, hi).unwrap();
        let (j, jp) = coupled_families(&sub, &rw).unwrap();
        assert_eq!(j.sup_abs(), 0.0);
        assert_eq!(jp.sup_abs(), 0.0);
    }

    #[test]
    fn constant_band_around_zero_has_zero_value() {
        let sub = SubFiltration::trivial(Arc::new(ScenarioTree::binary(3, 1.0).unwrap()));
        let lo = zero_terminal(&sub, GProcess::constant(&sub, -1.0));
        let hi = zero_terminal(&sub, GProcess::constant(&sub, 1.0));
        let p = game_value_recursive(&sub, &RewardPair::new(&sub, lo, hi).unwrap()).unwrap();
        assert_eq!(p.value.unwrap().sup_abs(), 0.0);
    }

    /// One step, two equally likely atoms: J = (a⁺ stuff) worked by hand.
    #[test]
    fn forced_stop_reproduces_envelope() {
        let sub = SubFiltration::full(Arc::new(ScenarioTree::binary(2, 1.0).unwrap()));
        let xi = GProcess::from_levels(vec![vec![0.1], vec![0.4, -0.2], vec![0.0; 4]]);
        let rw = RewardPair::new(&sub, xi.clone(), xi.clone()).unwrap();
        let p = game_value_recursive(&sub, &rw).unwrap();
        // level 1: stop is forced at the reward; level 0: max/min with E = 0.1
        let y = p.value.unwrap();
        assert_eq!(y.level(1), &[0.4, -0.2]);
        assert!((y.get(0, 0) - 0.1).abs() < 1e-15);
        assert!(p.families_gap.unwrap() <= 1e-12);
    }

    #[test]
    fn families_are_nonnegative_supermartingales_and_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=3 {
            for sub in subs(n, &mut rng) {
                let lo = zero_terminal(&sub, random_g(&sub, &mut rng, -1.0, 0.5));
                let hi = zero_terminal(&sub, lo.map(|v| v + 0.3).zip_with(&random_g(&sub, &mut rng, 0.0, 1.0), |a, b| a + b));
                let rw = RewardPair::new(&sub, lo.clone(), hi.clone()).unwrap();
                let (j, jp) = coupled_families(&sub, &rw).unwrap();
                assert!(supermartingale_violation(&sub, &j) <= 1e-12);
                assert!(supermartingale_violation(&sub, &jp) <= 1e-12);
                assert!(j.levels().iter().flatten().all(|&v| v >= 0.0));
                assert!(jp.levels().iter().flatten().all(|&v| v >= 0.0));
                // (J + c, J' + c) solves the same fixed-point system
                for c in [0.5, 2.0] {
                    let (h1, h2) = (j.map(|v| v + c), jp.map(|v| v + c));
                    assert!(snell_envelope(&sub, &h2.add(&lo)).unwrap().max_abs_diff(&h1) <= 1e-12);
                    assert!(snell_envelope(&sub, &h1.sub(&hi)).unwrap().max_abs_diff(&h2) <= 1e-12);
                }
                // the iteration started above zero lands on the same or a larger pair
                let start = GProcess::constant(&sub, 1.0);
                let (mut a, mut b) = (start.clone(), start);
                for _ in 0..200 {
                    let a2 = snell_envelope(&sub, &b.add(&lo)).unwrap();
                    b = snell_envelope(&sub, &a.sub(&hi)).unwrap();
                    a = a2;
                }
                assert!(j.levels().iter().flatten().zip(a.levels().iter().flatten()).all(|(x, y)| *x <= y + 1e-12));
                assert!(jp.levels().iter().flatten().zip(b.levels().iter().flatten()).all(|(x, y)| *x <= y + 1e-12));
                let y = j.sub(&jp);
                for ((v, l), u) in y.levels().iter().flatten().zip(lo.levels().iter().flatten()).zip(hi.levels().iter().flatten()) {
                    assert!(*l - 1e-12 <= *v && *v <= *u + 1e-12);
                }
            }
        }
    }

    #[test]
    fn recursion_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=3 {
            for sub in subs(n, &mut rng) {
                let lo = zero_terminal(&sub, random_g(&sub, &mut rng, -1.0, 0.5));
                let hi = zero_terminal(&sub, lo.zip_with(&random_g(&sub, &mut rng, 0.0, 1.0), |a, b| a + b));
                let rw = RewardPair::new(&sub, lo, hi).unwrap();
                let rec = game_value_recursive(&sub, &rw).unwrap();
                let bf = game_value_bruteforce(&sub, &rw, Criterion::LowerOnTies, DEFAULT_ENUMERATION_CAP).unwrap();
                assert!(bf.fairness_gap() <= 1e-10);
                assert!(rec.value.unwrap().max_abs_diff(&bf.lower) <= 1e-10);
            }
        }
    }

    #[test]
    fn crossed_rewards_follow_the_tie_rule() {
        let sub = SubFiltration::trivial(Arc::new(ScenarioTree::binary(1, 1.0).unwrap()));
        let lo = GProcess::from_levels(vec![vec![0.3], vec![0.0]]);
        let hi = GProcess::from_levels(vec![vec![0.2], vec![0.0]]);
        let rw = RewardPair::new(&sub, lo, hi).unwrap();
        for (criterion, expected) in [(Criterion::LowerOnTies, 0.3), (Criterion::UpperOnTies, 0.2)] {
            let rec = game_value_recursive_with(&sub, &rw, criterion).unwrap();
            assert!(rec.families_gap.is_none());
            assert_eq!(rec.value.unwrap().get(0, 0), expected);
            let bf = game_value_bruteforce(&sub, &rw, criterion, 100).unwrap();
            assert_eq!((bf.lower.get(0, 0), bf.upper.get(0, 0)), (expected, expected));
        }
    }

    #[test]
    fn crossed_random_rewards_still_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for sub in subs(3, &mut rng) {
            let lo = zero_terminal(&sub, random_g(&sub, &mut rng, -1.0, 1.0));
            let hi = zero_terminal(&sub, random_g(&sub, &mut rng, -1.0, 1.0));
            let rw = RewardPair::new(&sub, lo, hi).unwrap();
            for criterion in [Criterion::LowerOnTies, Criterion::UpperOnTies] {
                let rec = game_value_recursive_with(&sub, &rw, criterion).unwrap();
                let bf = game_value_bruteforce(&sub, &rw, criterion, DEFAULT_ENUMERATION_CAP).unwrap();
                assert!(bf.fairness_gap() <= 1e-10);
                assert!(rec.lower.max_abs_diff(&bf.lower) <= 1e-10);
            }
        }
    }

    #[test]
    fn terminal_only_game() {
        let sub = SubFiltration::full(Arc::new(ScenarioTree::binary(2, 1.0).unwrap()));
        let times = enumerate_stopping_times(&sub, 2, 10).unwrap();
        assert_eq!(times.len(), 1);
        let lo = GProcess::from_levels(vec![vec![0.0], vec![0.0, 0.0], vec![0.5, -0.5, 1.0, 2.0]]);
        let (lower, upper) = bruteforce_bounds(&sub, &lo, &lo, Criterion::LowerOnTies, 100).unwrap();
        assert_eq!(lower.level(2), lo.level(2));
        assert_eq!(upper.level(2), lo.level(2));
    }

    #[test]
    fn shift_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for sub in subs(3, &mut rng) {
            let n = 3;
            let zero_lo = zero_terminal(&sub, random_g(&sub, &mut rng, -1.0, 0.0));
            let zero_hi = zero_terminal(&sub, random_g(&sub, &mut rng, 0.0, 1.0));
            let (rw, shift) = reward_shift(&sub, &zero_lo, &zero_hi).unwrap();
            assert_eq!(shift.sup_abs(), 0.0);
            assert_eq!(rw.lower(), &zero_lo);

            let mut lo = zero_lo.map(|v| v + 2.5);
            let mut hi = zero_hi.map(|v| v + 2.5);
            lo.level_mut(n).fill(2.5);
            hi.level_mut(n).fill(2.5);
            let (_, shift) = reward_shift(&sub, &lo, &hi).unwrap();
            assert!(shift.levels().iter().flatten().all(|&v| (v - 2.5).abs() < 1e-15));

            let terminal = random_g(&sub, &mut rng, -1.0, 1.0);
            let mut lo = random_g(&sub, &mut rng, -2.0, 0.0);
            let mut hi = lo.map(|v| v + 1.0);
            lo.level_mut(n).copy_from_slice(terminal.level(n));
            hi.level_mut(n).copy_from_slice(terminal.level(n));
            let (profile, _) = game_value_with_terminal(&sub, &lo, &hi).unwrap();
            let direct = recursive_values(&sub, &lo, &hi, Criterion::LowerOnTies);
            assert!(profile.value.unwrap().max_abs_diff(&direct) <= 1e-12);
        }
    }

    #[test]
    fn unequal_terminals_rejected() {
        let sub = SubFiltration::trivial(Arc::new(ScenarioTree::binary(1, 1.0).unwrap()));
        let lo = GProcess::from_levels(vec![vec![0.0], vec![0.0]]);
        let hi = GProcess::from_levels(vec![vec![1.0], vec![0.5]]);
        assert!(matches!(reward_shift(&sub, &lo, &hi), Err(Error::UnequalTerminals { atom: 0, .. })));
        assert!(RewardPair::new(&sub, lo, hi).is_err());
    }
}

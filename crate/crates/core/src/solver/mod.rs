//! Solvers for reflected BSDEs whose constraint acts on conditional means
//! given the subfiltration:
//!
//! ```text
//! Y_k = Y_{k+1} + f(k, Y_k, Z_k) Δt - Z_k ΔB_{k+1} + ΔK⁺_k - ΔK⁻_k,
//! E[L_k|G_k] <= E[Y_k|G_k] <= E[U_k|G_k],
//! ```
//!
//! with `K±` nondecreasing, `G`-adapted and increasing only while the
//! conditional mean sits on the matching barrier.
//!
//! The driver is implicit in `y` and explicit in `z` within a step. All
//! schemes work level by level from `N` down to `0`.

mod problem;
mod sample;
mod scheme;
mod verify;

pub use problem::{Driver, FnDriver, Problem, ProcessDriver, LIPSCHITZ_PROBES};
pub use sample::{random_problem, InstanceSpec, SubMode};
pub use scheme::{
    beta, constraint_violation, fit_slope, penalization_sweep, penalty_grid, solve_constant_driver, solve_frozen,
    solve_penalized, solve_picard, solve_picard_with, weighted_norm, SolutionTriple, SweepReport, SweepRow,
    INNER_MAX_ITER, PICARD_MAX_ITER, PICARD_TOL,
};
pub use verify::{
    game_representation, game_representation_bruteforce, k_representation, stability_estimate, transformed_rewards,
    verify_solution, Diagnostics, ADAPTEDNESS_TOL, CONSTRAINT_TOL, DYNAMICS_TOL, FLAT_OFF_TOL,
};

//! Finite filtered probability spaces: scenario trees, subfiltrations,
//! conditional expectations, martingale representation and stopping times.

mod filtration;
mod process;
mod stopping;
mod tree;

pub use filtration::{AtomMaps, SubFiltration};
pub use process::{Adaptedness, FProcess, GProcess};
pub use stopping::{
    count_stopping_times_from, enumerate_stopping_times, enumerate_stopping_times_from,
    enumerate_stopping_times_in_atom, StoppingTime, DEFAULT_ENUMERATION_CAP,
};
pub use tree::{BranchSpec, Node, NodeCtx, ScenarioTree, TreeSpec, REPRESENTATION_TOL, TREE_TOL};

//! The master problem: Benders cuts, the user graph, loop searches and GBMA.

pub mod cut;
pub mod gbma;
pub mod graph;
pub mod search;

pub use cut::{group_weight, Cut, CutKind, SizeModel};
pub use gbma::{gbma, GbmaOptions, GbmaOutcome};
pub use graph::{apply_loop, build_graph, canonical_rotation, Loop, LoopGraph};
pub use search::{ebsa, exhaustive, gfsa, LoopSearch, LoopSet};

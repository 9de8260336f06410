//! Pair-color refinement on colored complete graphs.
//!
//! Three refinement operators are implemented over a shared color interner:
//! two-dimensional Weisfeiler-Leman, k-walk refinement and walk refinement.
//! The latter two go through linear-algebra closure of the color matrices.
//! The `cfi` and `game` modules build the grid instances used to show that
//! walk refinement can need linearly many iterations.

pub mod algebra;
pub mod cfi;
pub mod color;
pub mod coloring;
pub mod error;
pub mod experiment;
pub mod field;
pub mod game;
pub mod graph;
pub mod logic;
pub mod partition;
pub mod refine;

pub use color::{ColorId, ColorInterner, Signature};
pub use coloring::{initial_coloring, ColoredCompleteGraph};
pub use error::{Error, Result};
pub use graph::SimpleGraph;
pub use partition::{compare_partitions, PairPartition, PartitionOrder};
pub use refine::{ArithMode, RefinementHistory, RefinementKind, StepOptions, Workspace};

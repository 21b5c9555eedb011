//! Dataset reconstruction attacks against trained random forests.
//!
//! A trained forest exposes, for every node, the number of training examples
//! of each class that passed through it. Together with the split structure
//! this is enough to recover most or all of the training data: the library
//! encodes the recovery problem over a finite-domain constraint solver,
//! solves it, and measures how close the reconstruction is to the original
//! under an optimal bipartite matching.
//!
//! The crate is organised around that pipeline:
//!
//! - [`data_model`]: attribute schemas, datasets, CSV/JSON interchange.
//! - [`forest`]: forests with per-node class counts, validation, split sets.
//! - [`trainer`]: a small CART forest trainer used to produce targets.
//! - [`solver`]: the finite-domain branch-and-bound solver.
//! - [`recon`]: the reconstruction encodings, likelihood objective, decoding.
//! - [`reduction`]: an executable 3-SAT hardness gadget used as an oracle.
//! - [`eval`]: matching-based reconstruction-error measurement.
//! - [`cli`]: the `forestleak` command-line surface.

pub mod cli;
pub mod data_model;
pub mod eval;
pub mod forest;
pub mod recon;
pub mod reduction;
pub mod solver;
pub mod trainer;

pub use data_model::{AttributeKind, AttributeSchema, Dataset, Value};
pub use forest::{Forest, Node, NodeKind, SplitSets, Tree};
pub use solver::{SolveLimits, SolveResult, SolveStatus};

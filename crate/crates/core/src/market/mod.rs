//! Finite event-tree market models.

pub mod io;
pub mod measure;
pub mod process;
pub mod random;
pub mod tree;

pub use io::{load_model, model_to_json, parse_model, ModelDocument};
pub use measure::ArbitrageCertificate;
pub use process::{AdaptedProcess, GainDirection, Measure, OutcomeVector, PredictableStrategy};
pub use random::{random_tree, random_tree_seeded, RandomTreeConfig};
pub use tree::{
    validate_tree, validate_tree_with_floor, MarketTree, Node, NodeSpec, ValidationReport, Violation, ViolationKind,
    PROBABILITY_FLOOR, PROBABILITY_SUM_TOL,
};

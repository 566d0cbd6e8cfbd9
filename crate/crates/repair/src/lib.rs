//! Patch generation and validation on top of the trained models.

pub mod beam;
pub mod pipeline;
pub mod rank;
pub mod reconstruct;
pub mod validate;

pub use beam::{beam_search, BeamConfig, Hypothesis};
pub use pipeline::{repair, BugInput, RepairError, RepairOptions, RepairReport};
pub use rank::{rank_merge, Ranked};
pub use reconstruct::reconstruct_patch;
pub use validate::{validate, Outcome, PatchVerdict, ValidateOptions};

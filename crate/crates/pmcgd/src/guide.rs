//! The user guide, chapter by chapter.
//!
//! The rendered book lives in `book/` at the workspace root (build it with
//! `mdbook build book`). Each chapter is included here so that every code
//! sample in it compiles and runs under `cargo test --doc`, keeping the
//! guide and the library in lockstep.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/contaminated-model.md")]
pub mod contaminated_model {}

#[doc = include_str!("../../../book/src/covariance-structures.md")]
pub mod covariance_structures {}

#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}

#[doc = include_str!("../../../book/src/model-selection.md")]
pub mod model_selection {}

#[doc = include_str!("../../../book/src/bad-points.md")]
pub mod bad_points {}

#[doc = include_str!("../../../book/src/data-generation.md")]
pub mod data_generation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

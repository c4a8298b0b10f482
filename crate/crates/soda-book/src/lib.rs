//! Keeps the guide honest: every Rust code block in `book/src` is included
//! here as module documentation, so `cargo test --doc -p soda-book` compiles
//! and runs all of them against the current library. mdbook itself cannot
//! test snippets against a workspace crate; this shim can.
//!
//! One module per chapter, so a failing doctest names the chapter it came
//! from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/getting-started.md")]
pub mod getting_started {}

#[doc = include_str!("../../../book/src/text-scores.md")]
pub mod text_scores {}

#[doc = include_str!("../../../book/src/source-similarity.md")]
pub mod source_similarity {}

#[doc = include_str!("../../../book/src/similarity-graph.md")]
pub mod similarity_graph {}

#[doc = include_str!("../../../book/src/propagation.md")]
pub mod propagation {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/file-formats.md")]
pub mod file_formats {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

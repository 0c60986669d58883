//! Compiles the guide's code samples as doc-tests.
//!
//! mdbook cannot resolve external crates when testing, so each chapter is
//! pulled in as a module doc and `cargo test --doc` runs the snippets.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/feature-files.md")]
pub mod feature_files {}
#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}
#[doc = include_str!("../../../book/src/transfer-network.md")]
pub mod transfer_network {}
#[doc = include_str!("../../../book/src/classification.md")]
pub mod classification {}
#[doc = include_str!("../../../book/src/grid-search.md")]
pub mod grid_search {}
#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}

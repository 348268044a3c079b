//! The user guide, mounted into the crate docs chapter by chapter.
//!
//! The markdown lives in `book/` at the workspace root and renders with
//! mdbook; including it here makes every fenced code block a doctest, so
//! `cargo test --doc` keeps the book in sync with the sources.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/matrices.md")]
pub mod matrices {}

#[doc = include_str!("../../../book/src/paths.md")]
pub mod paths {}

#[doc = include_str!("../../../book/src/spectral-shift.md")]
pub mod spectral_shift {}

#[doc = include_str!("../../../book/src/spectral-flow.md")]
pub mod spectral_flow {}

#[doc = include_str!("../../../book/src/dirac.md")]
pub mod dirac {}

#[doc = include_str!("../../../book/src/doi.md")]
pub mod doi {}

#[doc = include_str!("../../../book/src/eta.md")]
pub mod eta {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

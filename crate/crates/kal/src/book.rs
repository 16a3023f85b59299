//! Keeps the guide's code examples honest.
//!
//! Each chapter of the mdbook guide under `book/src/` is included as
//! the documentation of a private module here, so every fenced Rust
//! block in the book compiles and runs with `cargo test --doc`. A
//! snippet the library has drifted away from fails the suite instead
//! of misleading a reader.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/rules.md")]
mod rules {}

#[doc = include_str!("../../../book/src/lowering.md")]
mod lowering {}

#[doc = include_str!("../../../book/src/model.md")]
mod model {}

#[doc = include_str!("../../../book/src/data.md")]
mod data {}

#[doc = include_str!("../../../book/src/strategies.md")]
mod strategies {}

#[doc = include_str!("../../../book/src/xai.md")]
mod xai {}

#[doc = include_str!("../../../book/src/harness.md")]
mod harness {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

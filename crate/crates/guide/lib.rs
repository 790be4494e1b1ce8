//! The chapters of the book, one module each, so that `cargo test --doc`
//! runs every listing.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/input-reconstruction.md")]
pub mod input_reconstruction {}
#[doc = include_str!("../../book/src/scoring.md")]
pub mod scoring {}
#[doc = include_str!("../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../book/src/differential-evolution.md")]
pub mod differential_evolution {}
#[doc = include_str!("../../book/src/ensembling.md")]
pub mod ensembling {}
#[doc = include_str!("../../book/src/overlap.md")]
pub mod overlap {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}

//! mdbook cannot test Rust listings against an external crate, so every chapter
//! is included here as the documentation of an empty module and
//! `cargo test -p gbl-book --doc` runs its code blocks. One module per chapter
//! keeps failures traceable to their source file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/feedback-graphs.md")]
pub mod feedback_graphs {}
#[doc = include_str!("src/regularizer.md")]
pub mod regularizer {}
#[doc = include_str!("src/solver.md")]
pub mod solver {}
#[doc = include_str!("src/learner.md")]
pub mod learner {}
#[doc = include_str!("src/environments.md")]
pub mod environments {}
#[doc = include_str!("src/experiments.md")]
pub mod experiments {}

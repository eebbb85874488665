//! Best-of-both-worlds online learning with undirected feedback graphs.
//!
//! A learner repeatedly picks one of `N` arms; playing an arm reveals the losses
//! of all its neighbors in a feedback graph. Given a partition of the graph into
//! `K` cliques, the learner runs Follow-the-Regularized-Leader over the truncated
//! simplex with a regularizer that behaves like the 1/2-Tsallis entropy across
//! clique marginals and like a shifted Shannon entropy inside each clique, plus a
//! log-barrier on the marginals. Its regret scales with `K` rather than `N`, both
//! against adversarial losses and, logarithmically, against stochastic ones.
//!
//! Modules, bottom-up:
//!
//! - [`graph`]: feedback graphs, clique covers, and the graph text format.
//! - [`simplex`]: probability vectors and clique marginals.
//! - [`entropy`]: the Tsallis-Shannon regularizer, the log-barrier, and their derivatives.
//! - [`solver`]: the per-round FTRL minimization (damped Newton with an active set).
//! - [`learner`]: the online algorithm: sampling, feedback, loss estimates, updates.
//! - [`environments`]: stochastic, corrupted, and adversarial loss generators.
//! - [`baselines`]: the graph-oblivious Tsallis-INF learner.
//! - [`harness`]: runs with invariant monitors, regret diagnostics, output files, and the CLI.
//!
//! ```
//! use gbl::graph::CliqueCover;
//! use gbl::learner::LearnerState;
//!
//! let cover = CliqueCover::blocks(&[2, 3]).unwrap();
//! let mut learner = LearnerState::with_horizon(cover, 1000).unwrap();
//! let p = learner.next_distribution().unwrap();
//! assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Arm indices address several parallel arrays at once; index loops read best there.
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod entropy;
pub mod environments;
pub mod error;
pub mod graph;
pub mod harness;
pub mod learner;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};

//! A desk-scale laboratory for learning branching policies on mixed-integer
//! programs.
//!
//! The crate bundles everything needed to study lifelong imitation of a
//! strong-branching expert:
//!
//! - [`milp`]: problem data, LP relaxations and the plain-text instance format.
//! - [`lp`]: a bounded-variable primal simplex with warm starts.
//! - [`bnb`]: best-bound branch-and-bound, branching policies, the strong
//!   branching expert and imitation sample collection.
//! - [`features`]: the bipartite variable/constraint state encoding.
//! - [`gat`]: the edge-weighted bipartite graph attention policy with a
//!   hand-written backward pass and Adam.
//! - [`lifelong`]: imitation, distillation and weight-consolidation losses,
//!   the reservoir buffer and the task-sequence training loop.
//! - [`instgen`]: seeded set cover, independent set and facility location
//!   generators.
//! - [`harness`]: experiment configuration, evaluation metrics and reports.

pub mod bnb;
pub mod codec;
pub mod error;
pub mod features;
pub mod gat;
pub mod harness;
pub mod instgen;
pub mod lifelong;
pub mod lp;
pub mod milp;
pub mod rng;

pub use error::{Error, Result};

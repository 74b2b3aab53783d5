//! Closed-loop simulation of adaptive backstepping controllers for
//! strict-feedback nonlinear plants whose drift terms can change abruptly.
//!
//! Each backstepping level carries a two-layer approximator augmented with a
//! softmax-addressed working memory: the hidden-layer output is continuously
//! written to memory and the recalled contents modify the approximator's
//! output. Three controller variants share one code path (the full memory
//! controller, a memory-free baseline, and an ablation whose memory is read
//! but never updated) so their responses to the same abrupt-change scenario
//! can be compared settling time for settling time.

pub mod adaptation;
pub mod controller;
pub mod error;
pub mod memory;
pub mod metrics;
pub mod nn;
pub mod numerics;
pub mod plant;
pub mod simulator;

pub use error::{Error, Result};

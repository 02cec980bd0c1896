//! Data preparation for masked video modeling with synthetic object motion.
//!
//! The crate turns clips into training samples: segmented objects are
//! composited along smoothed random trajectories with keyframed rotation and
//! scale ([`geometry`], [`compositor`]), the augmented clip is cut into
//! space-time tokens ([`tokenizer`]), tokens are hidden by tube and
//! trajectory masking ([`masking`]), and reconstruction targets are aligned
//! per token ([`targets`]). [`pipeline`] orchestrates sample generation and
//! shard serialization.

pub mod compositor;
pub mod error;
pub mod geometry;
pub mod io;
pub mod masking;
pub mod pipeline;
pub mod preview;
pub mod rng;
pub mod synth;
pub mod targets;
pub mod tokenizer;

pub use error::{Error, ErrorClass, Result};

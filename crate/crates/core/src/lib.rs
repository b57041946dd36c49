//! Membership-inference laboratory.
//!
//! Small dense classifiers trained either normally or with the relaxed-loss
//! procedure (descent above a target loss level, alternating ascent and
//! posterior flattening below it), the black-box and white-box membership
//! attacks used to audit them, and the loss-distribution statistics that
//! explain why the defense works.

pub mod analysis;
pub mod attacks;
pub mod data;
pub mod error;
pub mod nn;
pub mod relaxloss;
pub mod rng;

pub use error::{Error, Result};

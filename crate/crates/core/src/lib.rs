//! Deterministic multi-agent simulation engine.
//!
//! Two agent-based models share one environment abstraction: the minority
//! game ([`mg`]) and a simplified seasonal influenza vaccination model on a
//! contact network ([`flu`]). Agents are either the models' default
//! behavioral rules or small feedforward policies ([`nn`]) trained with
//! policy-gradient learners and the multi-agent actor-critic ([`rl`]).
//!
//! The crate is `no_std` and only needs `alloc`. All randomness flows
//! through named [`rng::RngStream`]s, so every run is a pure function of its
//! configuration and seed.
#![no_std]

extern crate alloc;

pub mod error;
pub mod flu;
pub mod mg;
pub mod nn;
pub mod rl;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use rng::RngStream;

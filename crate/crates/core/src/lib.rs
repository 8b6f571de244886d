//! Ambiguous radial keyboard driven by foot rotation: layout design,
//! decoding, gesture recognition, typing sessions and simulation.

pub mod cli;
pub mod corpus;
pub mod decoder;
pub mod error;
pub mod geometry;
pub mod input;
pub mod layout;
pub mod service;
pub mod session;
pub mod simulator;
pub mod taps;

pub use error::{Error, Result};

//! Portfolio pursuit in a simulated insurance market.
//!
//! An insurer quoting on a price comparison site wants both profit and a target
//! mix of customers by the end of each epoch. This crate provides the market
//! simulator, a standard pricing pipeline, an industry-style modulation baseline,
//! a backward-trained value function that turns portfolio goals into per-customer
//! break-even multipliers (k-values), and an experiment harness comparing them.

pub mod baseline;
pub mod error;
pub mod harness;
pub mod market;
pub mod models;
pub mod pipeline;
pub mod portfolio;
pub mod replay;
pub mod rl;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

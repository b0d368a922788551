//! Radio resource management for multibeam high-throughput satellites.
//!
//! Given users with rate demands on a plane, the crate places beams, assigns
//! users to beams, shares the band of each amplifier pair between its two
//! beams and schedules carriers inside each beam. Several strategies are
//! provided, from fixed geometry with a uniform carrier plan to joint beam
//! placement and flexible bandwidth.

pub mod allocation;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod intra_beam;
pub mod link_budget;
pub mod mapping;
pub mod metrics;
pub mod oracles;
pub mod strategies;
pub mod traffic;

pub use error::{Error, Result};

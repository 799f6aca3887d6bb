//! Energy-efficiency optimization for terrestrial-satellite networks whose
//! ground stations reach their satellites through hot-air-balloon relays
//! hovering at different heights.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`geometry`] turns balloon heights and minimum elevation angles into
//!    visibility windows and nested relay time segments.
//! 2. [`waterfill`] spreads the inter-satellite traffic matrix over those
//!    segments with tapped geometric water-filling.
//! 3. [`schedule`] covers each per-segment matrix with configuration matrices
//!    and derives how many lasers each satellite needs.
//! 4. [`optimizer`] solves the resulting geometric program, searching the
//!    Taylor truncation order and the relay anchor index, and [`energy`]
//!    scores every candidate with exact formulas.
//!
//! [`harness`] wires scenarios, seeded traffic and parameter sweeps around it.

pub mod energy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod optimizer;
pub mod schedule;
pub mod waterfill;

pub use error::{Error, Result};

//! Energy-efficient trajectory and user-scheduling design for a rotary-wing
//! UAV serving ground users under stochastic wind.
//!
//! The crate is organized bottom-up:
//!
//! * [`wind`] samples and evaluates the Weibull/von Mises wind field,
//! * [`propulsion`] evaluates the wind-aware 3D propulsion power model,
//! * [`airlink`] holds the probabilistic and geometric air-to-ground channels,
//! * [`convex`] provides the conic solver, Dinkelbach and SCA drivers,
//! * [`planner`] runs the offline stochastic-programming design,
//! * [`online`] adapts the velocity slot by slot against measured wind,
//! * [`bench`] orchestrates Monte Carlo scheme comparisons and file output.

pub mod airlink;
pub mod convex;
pub mod planner;
pub mod propulsion;
pub mod wind;
pub mod error;
pub mod online;
pub mod bench;

pub use error::{Error, Result};

/// 3-vector in the world frame (x east, y north, z up).
pub type Vec3 = nalgebra::Vector3<f64>;
/// Horizontal 2-vector.
pub type Vec2 = nalgebra::Vector2<f64>;

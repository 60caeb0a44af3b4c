//! Air-to-ground links: the probabilistic LoS channel used for planning and
//! a generated city with geometric blockage used for evaluation.

mod channel;
mod city;

pub use channel::{db_to_linear, dbm_to_watts, elevation_deg, expected_rate, plos, rate_floor, rates, ChannelParams, GroundUser};
pub use city::{generate_city, los_blocked, realized_rate, Building, CityGenParams, CityModel, Rect};

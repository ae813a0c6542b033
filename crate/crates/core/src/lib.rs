//! Motion cueing from driving-simulator g-forces to two-arm chair motion.
//!
//! Data flows `telemetry -> synthesis -> rig -> kinematics`, orchestrated
//! per frame by [`pipeline`].

pub mod config;
pub mod dsp;
pub mod kinematics;
pub mod pipeline;
pub mod rig;
pub mod synthesis;
pub mod telemetry;

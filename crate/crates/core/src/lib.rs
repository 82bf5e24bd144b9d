//! Closed-loop workbench for automated basal-bolus insulin dosing in simulated
//! type 1 diabetes.
//!
//! The crate is split the same way a run flows:
//!
//! * [`sim`] minute-resolution glucose-insulin simulator and synthetic cohort,
//! * [`scenario`] the three meal/disturbance scenarios,
//! * [`therapy`] the conventional bolus-calculator baseline,
//! * [`reward`] basal (fasting-band) and bolus (action/BG) rewards,
//! * [`sac`] a dependency-light soft actor-critic with manual backprop,
//! * [`training`] the two-stage basal-then-bolus curriculum,
//! * [`eval`] glycemic metrics, CVGA and paired t-tests.

pub mod error;
pub mod eval;
pub mod reward;
pub mod rng;
pub mod sac;
pub mod scenario;
pub mod sim;
pub mod therapy;
pub mod training;

pub use error::{Error, Result};

/// Minutes per simulated day.
pub const MINUTES_PER_DAY: u32 = 1440;

/// Simulations start at 07:00; minute 0 of a run is 420 minutes into the day.
pub const START_MINUTE_OF_DAY: u32 = 420;

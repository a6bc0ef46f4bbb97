//! Joint pinching-antenna placement and power control for uplink multiuser
//! MISO under MMSE combining, with and without successive interference
//! cancellation.
//!
//! The optimizer alternates closed-form fractional-programming updates for
//! the auxiliary variables and the powers with a per-antenna gradient ascent
//! for the positions. [`experiments`] wraps it in seeded Monte-Carlo sweeps
//! against a fixed uniform linear array, and [`cli`] drives those from the
//! command line.

pub mod bcd;
pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fp;
pub mod position;
pub mod rates;
pub mod scenario;

#[cfg(test)]
mod testutil;

pub use bcd::{optimize, optimize_baseline, BcdOptions, BcdResult};
pub use channel::EffectiveChannel;
pub use error::{Error, Result};
pub use fp::Mode;
pub use position::{GdOptions, PositionObjectiveKind};
pub use rates::RateReport;
pub use scenario::{PinchLayout, PowerAlloc, SystemParams, UserSet};

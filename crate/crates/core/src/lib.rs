//! Multiplicative coalescent with linear deletion: graphical construction,
//! forward simulators, truncation bounds, and the mean-field frozen
//! percolation model with its rescaling.

pub mod error;
pub mod json;
pub mod mass;
pub mod dsu;
pub mod clock;
pub mod stats;
pub mod trajectory;
pub mod graphical;
pub mod event;
pub mod truncation;
pub mod oracle;
pub mod frozen;
pub mod feller;
pub mod acceptance;

pub use clock::{ClockField, ClockSource, EventClockView};
pub use error::{Error, Result};
pub use mass::{dist, ord, OrderedMassVector, WeightedPartition};
pub use trajectory::{EventKind, McldEvent, Observer, Trajectory};

//! Lossy two-mode photon-number correlated channels.
//!
//! Joint photon-number distributions of two-mode correlated sources after
//! independent loss in each arm, and the capacity of threshold-decoded
//! photon counting between the two receivers.

pub mod distribution;
pub mod error;
pub mod info;
pub mod loss;
pub mod protocol;
pub mod specfun;
pub mod states;
pub mod verify;

pub use distribution::JointDistribution;
pub use error::{Error, Result};
pub use info::SymbolTable;
pub use loss::{ChannelParams, LossyJoint};
pub use protocol::{CapacityResult, ThresholdSet};
pub use states::{Source, StateKind};

//! Zeroth-order reconfiguration of wireless channels.
//!
//! Modules follow the data flow of an experiment: [`channel`] generates the
//! hidden propagation state, [`oracle`] exposes it as a pilot-counted black
//! box, [`zo`] and [`baselines`] optimize through that box, and [`harness`]
//! runs paired Monte-Carlo comparisons.

pub mod baselines;
pub mod channel;
pub mod harness;
mod linalg;
pub mod oracle;
pub mod zo;

pub use channel::{CascadedChannel, PathSet, Position, RisPhases};
pub use oracle::{PilotOracle, ReconfigVariable, Scenario};

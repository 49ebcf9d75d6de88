//! Online max-min fair allocation (the Santa Claus problem).
//!
//! Items arrive one at a time and must be irrevocably split (or assigned)
//! among `n` agents; the objective is the smallest total value any agent
//! ends up with. The crate provides the smooth greedy policy with a
//! mid-stream restart and its baselines, online randomized rounding, exact
//! offline optima for small or unit-valued instances, the hard instance
//! families used in lower-bound arguments, and Monte Carlo checks of the
//! associated probability bounds.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod instances;
pub mod oracles;
pub mod policies;
pub mod rng;
pub mod smoothing;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    min_load, ArrivalOrder, Decisions, FractionalAssignment, Instance, LoadVector, Metadata,
    OptKind, OptResult, Trace,
};

//! Classical simulation and numerics for coherent-state appointment scheduling.
//!
//! Every protocol state here is a product of coherent states, so a message is
//! fully described by one complex amplitude per optical mode. The crate tracks
//! those amplitudes exactly through beamsplitters, phase flips and channel
//! loss, samples threshold detectors with dark counts, and evaluates the
//! closed-form information-leakage bounds that go with each protocol.
//!
//! Module map:
//!
//! - [`optics`]: mode amplitudes, beamsplitter, loss, detection, overlaps.
//! - [`and_protocols`]: single-date AND subroutines and their wrappers.
//! - [`scheduler`]: the full subsample-then-AND scheduling protocol.
//! - [`grover`]: coherent-state distributed Grover search and its blocked variant.
//! - [`leakage`]: entropy primitives, leakage upper bounds, classical lower bounds.
//! - [`montecarlo`]: seeded parallel trial runner and per-protocol summaries.
//! - [`optimizer`]: parameter search over the bounds and CSV sweeps.
//! - [`netsim`]: two-endpoint execution over an in-process or TCP transport.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod and_protocols;
pub mod error;
pub mod grover;
pub mod leakage;
pub mod montecarlo;
pub mod netsim;
pub mod optics;
pub mod optimizer;
pub mod rng;
pub mod scheduler;
pub mod stats;

pub use error::{Error, Result};
pub use optics::{ChannelModel, ClickPattern, ModeAmplitudes};
pub use stats::ExecStats;

//! Deterministic discrete-event simulation of clock synchronization over
//! wireline and wireless links.
//!
//! The crate models three ways of distributing time to end stations:
//! two-step PTP across a wired bridge, the same profile across a jittery
//! asymmetric wireless link, and a radio-frame-anchored scheme in which a
//! reference station pairs frame numbers with network time and publishes the
//! pairs so that receivers can correct their clocks without knowing the
//! transport delay. A pair of simulated linear carriages converts residual
//! clock error into a position disagreement that can be measured the way a
//! laser distance sensor would see it.
//!
//! Everything is integer nanoseconds inside; all randomness flows from one
//! seed through per-link counter-mode streams, so a scenario re-run is
//! byte-identical.

pub mod clock;
pub mod config;
pub mod demonstrator;
pub mod gptp;
pub mod netsim;
pub mod pubsub;
pub mod radioframe;
pub mod ratio;
pub mod scenario;
pub mod sfnsync;
pub mod summary;
pub mod trace;
pub mod translator;

pub use clock::{SimTime, SimulatedClock};
pub use netsim::{Delivery, Direction, Link, LinkModel, NodeId, SimRng, Simulator};
pub use ratio::RateRatio;

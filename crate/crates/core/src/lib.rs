//! Deterministic discrete-event simulator of Bluetooth-mesh style managed
//! flooding over advertising bearers, with a scenario harness for
//! reliability/latency experiments on static and mobile topologies.

pub mod bearer;
pub mod engine;
pub mod harness;
pub mod messages;
pub mod metrics;
pub mod mobility;
pub mod network;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod transport;
pub mod types;
pub mod world;

pub use engine::{EventQueue, RunSummary, SimTime, Simulation};
pub use types::{Address, AddressClass, NodeId, SubnetId};

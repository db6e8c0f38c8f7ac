//! Simulated network, adversaries, invariant observer, metrics and the
//! scenario format behind the `falcon` binary.

pub mod aaba_net;
pub mod adversary;
pub mod log;
pub mod metrics;
pub mod net;
pub mod observer;
pub mod output;
pub mod scenario;

pub use log::{EventLog, Record, What};
pub use net::{simulate, RunOutcome, Simulation};
pub use observer::{observe, Violation};
pub use scenario::{FaultKind, FaultSpec, Mode, Scenario, SimConfig};

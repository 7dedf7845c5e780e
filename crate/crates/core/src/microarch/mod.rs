//! Cycle-approximate model of the accelerator datapath.
//!
//! Functionally the simulator is bit-exact with [`crate::oracle`]; timing
//! follows the streaming model in [`cycles`]. Each submodule is one block of
//! the machine: buffer bank, COL buffer, CU engine, ACCU scratchpad and the
//! max-pool unit, driven by [`sim::Simulator`] from a command stream.

pub mod bank;
pub mod colbuf;
mod config;
pub mod cu;
pub mod cycles;
pub mod pool;
mod report;
pub mod scratchpad;
mod sim;

pub use config::MachineConfig;
pub use report::{SimReport, StageReport};
pub use sim::{SimOutput, Simulator};

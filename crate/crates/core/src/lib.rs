//! Core of the streaming CNN accelerator toolkit.
//!
//! Everything here is `no_std` (with `alloc`): fixed-point arithmetic, the
//! network data model, a brute-force reference evaluator, filter
//! decomposition, the command-stream ISA, the cycle-approximate datapath
//! simulator and the compiler that lowers a network onto it. File formats,
//! the CLI and anything touching the host live in the `streamcnn` crate.
//!
//! The pipeline is:
//!
//! ```text
//! NetworkDesc --lower--> Program { commands, weight_stream } --Simulator::run--> outputs + SimReport
//!      \______________________ oracle::run_network _____________________________/  (bit-exact)
//! ```

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod compiler;
pub mod decomp;
mod error;
pub mod fxp;
pub mod isa;
pub mod microarch;
pub mod model;
pub mod oracle;
pub mod reference;

pub use compiler::{lower, LowerOptions, Program};
pub use error::{Error, Result};
pub use fxp::{Accum, Fxp, FxpFormat};
pub use isa::Command;
pub use microarch::{MachineConfig, SimOutput, SimReport, Simulator};
pub use model::{ConvLayerDesc, Layer, NetworkDesc, PoolKind, PoolLayerDesc, Shape, Tensor};

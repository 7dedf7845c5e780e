use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Invalid fixed-point format (fraction bits outside `0..=15`).
    InvalidFormat(u8),
    /// Operands carry different fixed-point formats.
    FormatMismatch {
        left: u8,
        right: u8,
    },
    /// The 64-bit accumulator would wrap.
    AccumOverflow,
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    /// Tensor or layer shapes do not line up.
    Shape(String),
    /// A layer failed validation; `layer` is its position in the network.
    InvalidLayer {
        layer: usize,
        reason: String,
    },
    KernelOutOfRange(usize),
    /// Weight data does not match what the network declares.
    Weights(String),
    Encode(String),
    Decode {
        offset: usize,
        reason: String,
    },
    /// A buffer capacity was exceeded at plan or simulation time.
    Capacity(String),
    /// The DMA weight stream ran dry before the program finished.
    WeightUnderrun {
        needed: usize,
        available: usize,
    },
    /// Command sequence the simulator cannot execute.
    Malformed {
        command: usize,
        reason: String,
    },
    Unsupported(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidFormat(bits) => {
                write!(
                    f,
                    "invalid fixed-point format: {bits} fraction bits (allowed 0..=15)"
                )
            }
            Error::FormatMismatch { left, right } => {
                write!(f, "fixed-point format mismatch: {left} vs {right} fraction bits")
            }
            Error::AccumOverflow => f.write_str("accumulator overflow"),
            Error::IndexOutOfRange { what, index, bound } => {
                write!(f, "{what} index {index} out of range (bound {bound})")
            }
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::InvalidLayer { layer, reason } => write!(f, "layer {layer}: {reason}"),
            Error::KernelOutOfRange(k) => write!(f, "kernel size {k} out of range 1..=23"),
            Error::Weights(msg) => write!(f, "weights: {msg}"),
            Error::Encode(msg) => write!(f, "encode: {msg}"),
            Error::Decode { offset, reason } => write!(f, "decode error at word {offset}: {reason}"),
            Error::Capacity(msg) => write!(f, "capacity exceeded: {msg}"),
            Error::WeightUnderrun { needed, available } => write!(
                f,
                "weight stream underrun: needed word {needed} but only {available} available"
            ),
            Error::Malformed { command, reason } => {
                write!(f, "malformed program at command {command}: {reason}")
            }
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

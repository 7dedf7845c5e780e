//! Buffer bank: an input set and an output set, each split into Bank A
//! (odd-numbered channels, i.e. even indices 0, 2, ...) and Bank B
//! (even-numbered channels). A set too large for its banks lives in DRAM
//! when spilling is allowed; its traffic is then charged as DMA bytes.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fxp::FxpFormat;
use crate::model::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetId {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BankId {
    A,
    B,
}

/// Bank holding channel index `channel` (0-based).
pub fn bank_of(channel: usize) -> BankId {
    if channel.is_multiple_of(2) {
        BankId::A
    } else {
        BankId::B
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankAccess {
    pub set: SetId,
    pub bank: BankId,
    pub channel: usize,
    pub write: bool,
}

/// Bytes a tensor of `shape` occupies in Bank A and Bank B.
pub fn bank_footprint(shape: Shape) -> (usize, usize) {
    let plane = shape.rows * shape.cols * 2;
    let a = shape.channels.div_ceil(2) * plane;
    let b = shape.channels / 2 * plane;
    (a, b)
}

#[derive(Debug, Clone)]
pub struct SetState {
    pub tensor: Tensor,
    pub spilled: bool,
}

#[derive(Debug, Clone)]
pub struct BufferBank {
    bank_bytes: usize,
    spill_to_dram: bool,
    input: SetState,
    output: SetState,
    pub reads: u64,
    pub writes: u64,
    pub dma_activation_bytes: u64,
    pub log: Option<Vec<BankAccess>>,
}

impl BufferBank {
    pub fn new(bank_bytes: usize, spill_to_dram: bool, trace: bool) -> Self {
        let empty = || SetState {
            tensor: Tensor::zeros(Shape::new(0, 0, 0), FxpFormat::Q8_8),
            spilled: false,
        };
        BufferBank {
            bank_bytes,
            spill_to_dram,
            input: empty(),
            output: empty(),
            reads: 0,
            writes: 0,
            dma_activation_bytes: 0,
            log: trace.then(Vec::new),
        }
    }

    fn place(&self, what: &str, tensor: Tensor) -> Result<SetState> {
        let (a, b) = bank_footprint(tensor.shape());
        let spilled = a > self.bank_bytes || b > self.bank_bytes;
        if spilled && !self.spill_to_dram {
            return Err(Error::Capacity(format!(
                "{what} set {} needs {a} B in bank A and {b} B in bank B, each bank holds {} B",
                tensor.shape(),
                self.bank_bytes
            )));
        }
        Ok(SetState { tensor, spilled })
    }

    pub fn load_input(&mut self, tensor: Tensor) -> Result<()> {
        self.input = self.place("input", tensor)?;
        Ok(())
    }

    pub fn alloc_output(&mut self, shape: Shape, format: FxpFormat) -> Result<()> {
        self.output = self.place("output", Tensor::zeros(shape, format))?;
        Ok(())
    }

    /// The finished output set becomes the input of the next layer.
    pub fn swap(&mut self) {
        core::mem::swap(&mut self.input, &mut self.output);
    }

    pub fn input(&self) -> &SetState {
        &self.input
    }

    pub fn output(&self) -> &SetState {
        &self.output
    }

    pub fn take_output(&mut self) -> Tensor {
        self.output.tensor.clone()
    }

    /// Account for `words` values read from one input channel.
    pub fn note_read(&mut self, channel: usize, words: u64) {
        self.reads += words;
        if self.input.spilled {
            self.dma_activation_bytes += 2 * words;
        }
        if let Some(log) = &mut self.log {
            log.push(BankAccess {
                set: SetId::Input,
                bank: bank_of(channel),
                channel,
                write: false,
            });
        }
    }

    /// Write one output row segment.
    pub fn write(&mut self, channel: usize, row: usize, col: usize, values: &[i16]) {
        let shape = self.output.tensor.shape();
        let start = (channel * shape.rows + row) * shape.cols + col;
        self.output.tensor.raw_mut()[start..start + values.len()].copy_from_slice(values);
        let words = values.len() as u64;
        self.writes += words;
        if self.output.spilled {
            self.dma_activation_bytes += 2 * words;
        }
        if let Some(log) = &mut self.log {
            log.push(BankAccess {
                set: SetId::Output,
                bank: bank_of(channel),
                channel,
                write: true,
            });
        }
    }
}

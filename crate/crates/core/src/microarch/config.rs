use alloc::format;

use crate::error::{Error, Result};

/// Machine parameters. Defaults describe the 144-PE chip at 500 MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineConfig {
    pub n_cu: usize,
    pub pes_per_cu: usize,
    pub buffer_bank_bytes: usize,
    pub scratchpad_bytes: usize,
    pub bank_read_bits_per_cycle: usize,
    /// Only used to scale cycle counts into throughput.
    pub clock_hz: f64,
    /// Pipeline fill charged once per streaming pass.
    pub pipeline_fill_cycles: u64,
    /// Requantize the scratchpad to 16 bits after every accumulate, as a
    /// 16-bit-only scratchpad would. Breaks bit-exactness with the oracle.
    pub strict_requantize: bool,
    /// Let buffer-bank sets that exceed their SRAM live in DRAM; their traffic
    /// is charged as DMA activation bytes. When false, overflow is an error.
    pub spill_to_dram: bool,
    /// Skip the accumulating sub-buffer capacity check (functional studies only).
    pub allow_oversize_scratchpad: bool,
    /// Record every buffer-bank access.
    pub trace_bank_access: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            n_cu: 16,
            pes_per_cu: 9,
            buffer_bank_bytes: 96 * 1024,
            scratchpad_bytes: 16 * 1024,
            bank_read_bits_per_cycle: 256,
            clock_hz: 5e8,
            pipeline_fill_cycles: 12,
            strict_requantize: false,
            spill_to_dram: true,
            allow_oversize_scratchpad: false,
            trace_bank_access: false,
        }
    }
}

impl MachineConfig {
    /// The datapath model is built around 16 CUs of 9 PEs fed by a 256-bit
    /// bank port (8 odd-channel rows + 8 even-channel rows per cycle).
    pub fn validate(&self) -> Result<()> {
        if self.n_cu * self.pes_per_cu != 144 || self.pes_per_cu != 9 {
            return Err(Error::Unsupported(format!(
                "{} CUs x {} PEs; the datapath model needs 16 x 9",
                self.n_cu, self.pes_per_cu
            )));
        }
        if self.bank_read_bits_per_cycle != 256 {
            return Err(Error::Unsupported(format!(
                "bank port of {} bits; the datapath model needs 256",
                self.bank_read_bits_per_cycle
            )));
        }
        if !self.clock_hz.is_finite() || self.clock_hz <= 0.0 {
            return Err(Error::Unsupported("clock must be positive".into()));
        }
        if self.scratchpad_bytes < 4 || self.buffer_bank_bytes < 4 {
            return Err(Error::Unsupported("memories too small".into()));
        }
        Ok(())
    }

    pub fn total_pes(&self) -> usize {
        self.n_cu * self.pes_per_cu
    }

    /// Rows streamed per channel set per cycle.
    pub fn rows_per_set(&self) -> usize {
        self.bank_read_bits_per_cycle / 16 / 2
    }

    /// Bytes in one of the two sets (input or output).
    pub fn set_bytes(&self) -> usize {
        self.buffer_bank_bytes / 2
    }

    /// Bytes in bank A or bank B of one set.
    pub fn bank_bytes(&self) -> usize {
        self.buffer_bank_bytes / 4
    }

    /// 16-bit words in one ping-pong sub-buffer.
    pub fn subbuffer_words(&self) -> usize {
        self.scratchpad_bytes / 2 / 2
    }

    /// Two operations per MAC on every PE, every cycle.
    pub fn peak_gops(&self) -> f64 {
        2.0 * self.total_pes() as f64 * self.clock_hz / 1e9
    }
}

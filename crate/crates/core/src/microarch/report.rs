use alloc::vec::Vec;

use crate::isa::Mode;

/// Per-layer (per pipeline stage) statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub mode: Mode,
    pub fused_maxpool: bool,
    pub bands: usize,
    pub cycles: u64,
    pub mac_ops: u64,
    pub zero_pad_macs: u64,
    pub exec_commands: u64,
    pub weight_words: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimReport {
    pub cycles: u64,
    /// Equal to the active PE cycles: every active PE performs one MAC.
    pub mac_ops: u64,
    pub active_pe_cycles: u64,
    pub idle_pe_cycles: u64,
    pub utilization: f64,
    /// MACs spent on zero weights added by kernel extension.
    pub zero_pad_macs: u64,
    /// All weight-stream words fetched (filter weights and biases), in bytes.
    pub dma_weight_bytes: u64,
    pub dma_bias_bytes: u64,
    pub dma_activation_bytes: u64,
    pub bank_reads: u64,
    pub bank_writes: u64,
    pub effective_gops: f64,
    pub peak_gops: f64,
    pub clock_hz: f64,
    pub commands: u64,
    pub max_queue_occupancy: usize,
    pub stages: Vec<StageReport>,
}

impl SimReport {
    pub(crate) fn finish(&mut self, total_pes: usize, clock_hz: f64, peak_gops: f64) {
        let capacity = total_pes as u64 * self.cycles;
        self.idle_pe_cycles = capacity - self.active_pe_cycles;
        self.utilization = if capacity == 0 {
            0.0
        } else {
            self.active_pe_cycles as f64 / capacity as f64
        };
        self.effective_gops = if self.cycles == 0 {
            0.0
        } else {
            2.0 * self.mac_ops as f64 * clock_hz / self.cycles as f64 / 1e9
        };
        self.peak_gops = peak_gops;
        self.clock_hz = clock_hz;
    }

    /// Filter-weight words fetched, biases excluded.
    pub fn filter_weight_words(&self) -> u64 {
        (self.dma_weight_bytes - self.dma_bias_bytes) / 2
    }
}

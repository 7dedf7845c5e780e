//! Cycle model.
//!
//! A streaming pass pushes one column of 8 rows per channel set per cycle. A
//! band of output rows at stride `s` spans `s * (rows - 1) + 1` window origin
//! rows, streamed in chunks of 8; each chunk scans every input column the
//! windows touch. Odd and even channel sets run side by side in the same
//! cycles. Every pass pays a fixed pipeline fill. Draining a finished feature
//! reads one 8-row column address per cycle and overlaps the next feature's
//! accumulation; only the final drain of a layer is exposed.

/// Window origin rows covered by `rows` output rows at `stride`.
pub fn origin_span(rows: usize, stride: usize) -> usize {
    if rows == 0 {
        0
    } else {
        stride * (rows - 1) + 1
    }
}

/// 8-row chunks needed to stream `origin_rows` window origins.
pub fn chunks(origin_rows: usize) -> usize {
    origin_rows.div_ceil(8)
}

/// Input columns scanned to produce `out_cols` windows of width `window`.
pub fn scan_cols(out_cols: usize, stride: usize, window: usize) -> usize {
    if out_cols == 0 {
        0
    } else {
        stride * (out_cols - 1) + window
    }
}

/// One (feature, channel pair, sub-filter) pass over a band.
pub fn pass_cycles(band_rows: usize, out_cols: usize, stride: usize, window: usize, fill: u64) -> u64 {
    (chunks(origin_span(band_rows, stride)) * scan_cols(out_cols, stride, window)) as u64 + fill
}

/// Draining one feature plane of a band through readout.
pub fn drain_cycles(band_rows: usize, out_cols: usize, stride: usize) -> u64 {
    (chunks(origin_span(band_rows, stride)) * out_cols) as u64
}

/// Streaming one stored channel through the max-pool unit.
pub fn maxpool_only_cycles(rows: usize, cols: usize, fill: u64) -> u64 {
    (chunks(rows) * cols) as u64 + fill
}

/// Cycles after the last drain column until the pool unit emits its last window.
pub fn pool_tail_cycles(k: usize) -> u64 {
    k as u64
}

/// Overlap of accumulation with the previous unit's drain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overlap {
    pub cycles: u64,
    pending_drain: u64,
}

impl Overlap {
    /// An accumulation unit finished; its drain becomes pending.
    pub fn unit(&mut self, accumulate: u64, drain: u64) {
        self.cycles += accumulate.max(self.pending_drain);
        self.pending_drain = drain;
    }

    /// Extra drain from a second feature plane in the same unit.
    pub fn add_drain(&mut self, drain: u64) {
        self.pending_drain += drain;
    }

    /// Expose the last drain (plus any tail) and return the total.
    pub fn finish(&mut self, tail: u64) -> u64 {
        self.cycles += self.pending_drain + tail;
        self.pending_drain = 0;
        self.cycles
    }
}

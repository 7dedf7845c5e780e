//! ACCU buffer scratchpad: two sub-buffers in ping-pong. One accumulates CU
//! partials while the other drains through readout and max pooling.
//!
//! Values are held as wide accumulators (see `strict` for the 16-bit
//! behaviour); capacity is still charged at 16 bits per value.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fxp::requantize_raw;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Accumulating,
    Draining,
}

#[derive(Debug, Clone, Default)]
pub struct SubBuffer {
    pub planes: usize,
    pub rows: usize,
    pub cols: usize,
    data: Vec<i64>,
}

impl SubBuffer {
    pub fn get(&self, plane: usize, row: usize, col: usize) -> i64 {
        self.data[(plane * self.rows + row) * self.cols + col]
    }

    pub fn plane(&self, plane: usize) -> &[i64] {
        let n = self.rows * self.cols;
        &self.data[plane * n..(plane + 1) * n]
    }
}

#[derive(Debug, Clone)]
pub struct Scratchpad {
    bufs: [SubBuffer; 2],
    accumulating: usize,
    capacity_words: usize,
    enforce_capacity: bool,
    /// Operand fraction bits when every accumulate is rounded to 16 bits.
    strict: Option<u8>,
}

impl Scratchpad {
    pub fn new(capacity_words: usize, enforce_capacity: bool, strict: Option<u8>) -> Self {
        Scratchpad {
            bufs: [SubBuffer::default(), SubBuffer::default()],
            accumulating: 0,
            capacity_words,
            enforce_capacity,
            strict,
        }
    }

    pub fn role(&self, buffer: usize) -> Role {
        if buffer == self.accumulating {
            Role::Accumulating
        } else {
            Role::Draining
        }
    }

    /// Clear the accumulating sub-buffer and size it for `planes` features.
    pub fn reset(&mut self, planes: usize, rows: usize, cols: usize) -> Result<()> {
        let words = planes * rows * cols;
        if self.enforce_capacity && words > self.capacity_words {
            return Err(Error::Capacity(format!(
                "{planes} plane(s) of {rows}x{cols} need {words} words, sub-buffer holds {}",
                self.capacity_words
            )));
        }
        let buf = &mut self.bufs[self.accumulating];
        buf.planes = planes;
        buf.rows = rows;
        buf.cols = cols;
        buf.data.clear();
        buf.data.resize(words, 0);
        Ok(())
    }

    /// `scratch[plane][row][col] += partial`.
    pub fn accumulate(&mut self, plane: usize, row: usize, col: usize, partial: i64) -> Result<()> {
        let buf = &mut self.bufs[self.accumulating];
        if plane >= buf.planes || row >= buf.rows || col >= buf.cols {
            return Err(Error::IndexOutOfRange {
                what: "scratchpad position",
                index: (plane * buf.rows + row) * buf.cols + col,
                bound: buf.planes * buf.rows * buf.cols,
            });
        }
        let slot = &mut buf.data[(plane * buf.rows + row) * buf.cols + col];
        let mut v = slot.checked_add(partial).ok_or(Error::AccumOverflow)?;
        if let Some(frac) = self.strict {
            v = (requantize_raw(v, 2 * frac, frac) as i64) << frac;
        }
        *slot = v;
        Ok(())
    }

    /// Hand the finished sub-buffer to the drain side.
    pub fn swap(&mut self) {
        self.accumulating ^= 1;
    }

    pub fn draining(&self) -> &SubBuffer {
        &self.bufs[self.accumulating ^ 1]
    }

    pub fn accumulating(&self) -> &SubBuffer {
        &self.bufs[self.accumulating]
    }
}

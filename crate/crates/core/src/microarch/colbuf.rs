//! COL buffer: a two-row FIFO per channel set turns 8 streamed rows into 10
//! overlapping rows, so 8 CUs each see a full 3-row window column.

use alloc::vec;
use alloc::vec::Vec;

/// Rows `r..r+9` at one column: the two rows held in the FIFO followed by
/// the 8 rows streamed this cycle.
pub fn col_buffer_expand(fifo: [i16; 2], rows8: [i16; 8]) -> [i16; 10] {
    let mut out = [0i16; 10];
    out[..2].copy_from_slice(&fifo);
    out[2..].copy_from_slice(&rows8);
    out
}

/// The FIFO for one channel set, one entry pair per scanned column.
#[derive(Debug, Clone)]
pub struct ColBuffer {
    fifo: Vec<[i16; 2]>,
}

impl ColBuffer {
    /// Primed with the first two rows of the band (zeros outside the channel).
    pub fn primed(row0: &[i16], row1: &[i16]) -> Self {
        debug_assert_eq!(row0.len(), row1.len());
        ColBuffer {
            fifo: row0.iter().zip(row1).map(|(&a, &b)| [a, b]).collect(),
        }
    }

    pub fn empty(cols: usize) -> Self {
        ColBuffer {
            fifo: vec![[0, 0]; cols],
        }
    }

    /// Expand column `col` and keep its last two rows for the next chunk.
    pub fn expand(&mut self, col: usize, rows8: [i16; 8]) -> [i16; 10] {
        let out = col_buffer_expand(self.fifo[col], rows8);
        self.fifo[col] = [rows8[6], rows8[7]];
        out
    }
}

//! Max-pool unit: a comparator over up to three row values plus a feedback
//! register, fed from the draining scratchpad. A MUX drops the CU rows that
//! hold no output when the convolution stride is above one.

use alloc::vec;
use alloc::vec::Vec;

/// CU rows of an 8-row column that carry outputs at convolution `stride`.
pub fn mux_valid_rows(stride: usize) -> [bool; 8] {
    core::array::from_fn(|k| k % stride == 0)
}

/// The valid rows of one drained 8-row column, top to bottom.
pub fn mux_select(column: &[i16; 8], stride: usize) -> Vec<i16> {
    let valid = mux_valid_rows(stride);
    column
        .iter()
        .zip(valid)
        .filter_map(|(&v, ok)| ok.then_some(v))
        .collect()
}

/// One pooled output in flight: per cycle it takes one column of the
/// window (up to three rows) and folds it into the feedback register.
#[derive(Debug, Clone)]
pub struct MaxPoolUnit {
    k: usize,
    seen: usize,
    feedback: i16,
}

impl MaxPoolUnit {
    pub fn new(k: usize) -> Self {
        MaxPoolUnit {
            k,
            seen: 0,
            feedback: i16::MIN,
        }
    }

    /// Returns the pooled value once `k` columns have been consumed.
    pub fn step(&mut self, column: &[i16]) -> Option<i16> {
        debug_assert!(!column.is_empty() && column.len() <= 3);
        let m = column.iter().copied().fold(self.feedback, i16::max);
        self.seen += 1;
        if self.seen == self.k {
            self.seen = 0;
            self.feedback = i16::MIN;
            Some(m)
        } else {
            self.feedback = m;
            None
        }
    }
}

/// Pools a whole feature that arrives row by row (in drain order). Column
/// maxima of windows whose rows are not all in yet are parked until the
/// missing rows arrive.
#[derive(Debug, Clone)]
pub struct MaxPoolEngine {
    k: usize,
    stride: usize,
    out_rows: usize,
    out_cols: usize,
    /// `parked[pr][c]`: max so far of column `c` over the rows of pooled row `pr`.
    parked: Vec<Vec<i16>>,
    next_row: usize,
}

impl MaxPoolEngine {
    pub fn new(k: usize, stride: usize, rows: usize, cols: usize) -> Self {
        let out = |n: usize| if n < k { 0 } else { (n - k) / stride + 1 };
        let (out_rows, out_cols) = (out(rows), out(cols));
        MaxPoolEngine {
            k,
            stride,
            out_rows,
            out_cols,
            parked: vec![vec![i16::MIN; cols]; out_rows],
            next_row: 0,
        }
    }

    pub fn out_dims(&self) -> (usize, usize) {
        (self.out_rows, self.out_cols)
    }

    /// Feed the next feature row. Returns every pooled row it completes.
    pub fn push_row(&mut self, row: &[i16]) -> Vec<(usize, Vec<i16>)> {
        let r = self.next_row;
        self.next_row += 1;
        let mut done = Vec::new();
        for pr in 0..self.out_rows {
            let top = pr * self.stride;
            if r < top || r >= top + self.k {
                continue;
            }
            for (p, &v) in self.parked[pr].iter_mut().zip(row) {
                *p = (*p).max(v);
            }
            if r == top + self.k - 1 {
                done.push((pr, self.sweep(pr)));
            }
        }
        done
    }

    fn sweep(&self, pr: usize) -> Vec<i16> {
        let cols = &self.parked[pr];
        (0..self.out_cols)
            .map(|pc| {
                let mut unit = MaxPoolUnit::new(self.k);
                let start = pc * self.stride;
                let mut out = None;
                for &v in &cols[start..start + self.k] {
                    out = unit.step(&[v]);
                }
                out.expect("unit emits after k columns")
            })
            .collect()
    }
}

//! Convolution unit: nine multiplying PEs and an adder.
//!
//! Values are raw fixed-point words; products and partial sums are raw
//! accumulator values at twice the fraction width.

/// Window held in the PE chain. Each new column enters on the right and the
/// D flip-flops pass the older columns left.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CuWindow {
    /// `cols[m][l]`: column `m` (0 = oldest), row `l`.
    cols: [[i16; 3]; 3],
}

impl CuWindow {
    pub fn shift_in(&mut self, column: [i16; 3]) {
        self.cols[0] = self.cols[1];
        self.cols[1] = self.cols[2];
        self.cols[2] = column;
    }

    /// Row-major 3x3 view.
    pub fn window(&self) -> [i16; 9] {
        let mut w = [0i16; 9];
        for l in 0..3 {
            for m in 0..3 {
                w[3 * l + m] = self.cols[m][l];
            }
        }
        w
    }
}

/// 3x3 inner product. Returns the partial and the number of PEs that fired.
pub fn cu_step_3x3(window: &[i16; 9], weights: &[i16; 9]) -> (i64, u32) {
    let partial = window
        .iter()
        .zip(weights)
        .map(|(&x, &w)| x as i64 * w as i64)
        .sum();
    (partial, 9)
}

/// Interleaved 1x1 step: the odd-channel CU and the even-channel CU each
/// multiply their pixel by two features' weights, and the cross-channel
/// adder merges them into one partial per feature.
///
/// `weights` is `[feat1_odd, feat1_even, feat2_odd, feat2_even]`.
pub fn cu_step_1x1(odd: i16, even: i16, weights: [i16; 4]) -> (i64, i64) {
    let [w1o, w1e, w2o, w2e] = weights.map(|w| w as i64);
    let (odd, even) = (odd as i64, even as i64);
    (odd * w1o + even * w1e, odd * w2o + even * w2e)
}

/// PEs per CU that are on in 1x1 mode.
pub const PES_1X1: u32 = 2;

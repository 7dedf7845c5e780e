//! Tensors, layer descriptions and networks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fxp::{Fxp, FxpFormat};

pub const MAX_CHANNELS: usize = 1024;
pub const MAX_KERNEL: usize = 23;
pub const CONV_STRIDES: [usize; 3] = [1, 2, 4];
pub const MAX_POOL_KERNELS: [usize; 2] = [2, 3];
pub const MAX_POOL_STRIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(channels: usize, rows: usize, cols: usize) -> Self {
        Shape { channels, rows, cols }
    }

    pub fn len(&self) -> usize {
        self.channels * self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.rows * self.cols
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.rows, self.cols)
    }
}

/// `floor((input + 2*pad - kernel) / stride) + 1`, or `None` when the window
/// does not fit.
pub fn out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let span = (input + 2 * pad).checked_sub(kernel)?;
    Some(span / stride + 1)
}

/// Channel-major, row-major image data sharing a single fixed-point format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    shape: Shape,
    format: FxpFormat,
    data: Vec<i16>,
}

impl Tensor {
    pub fn zeros(shape: Shape, format: FxpFormat) -> Self {
        Tensor {
            shape,
            format,
            data: vec![0; shape.len()],
        }
    }

    pub fn from_raw(shape: Shape, format: FxpFormat, data: Vec<i16>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "tensor {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Tensor { shape, format, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn format(&self) -> FxpFormat {
        self.format
    }

    pub fn raw(&self) -> &[i16] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [i16] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<i16> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[i16] {
        let n = self.shape.plane();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [i16] {
        let n = self.shape.plane();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn index(&self, channel: usize, row: usize, col: usize) -> Result<usize> {
        let s = self.shape;
        for (what, index, bound) in [
            ("channel", channel, s.channels),
            ("row", row, s.rows),
            ("col", col, s.cols),
        ] {
            if index >= bound {
                return Err(Error::IndexOutOfRange { what, index, bound });
            }
        }
        Ok((channel * s.rows + row) * s.cols + col)
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> Result<Fxp> {
        let i = self.index(channel, row, col)?;
        Ok(Fxp::from_raw(self.data[i], self.format))
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: Fxp) -> Result<()> {
        if value.format() != self.format {
            return Err(Error::FormatMismatch {
                left: self.format.frac_bits(),
                right: value.format().frac_bits(),
            });
        }
        let i = self.index(channel, row, col)?;
        self.data[i] = value.raw();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolLayerDesc {
    pub kind: PoolKind,
    pub k: usize,
    pub stride: usize,
}

impl PoolLayerDesc {
    pub fn max(k: usize, stride: usize) -> Self {
        PoolLayerDesc {
            kind: PoolKind::Max,
            k,
            stride,
        }
    }

    pub fn avg(k: usize, stride: usize) -> Self {
        PoolLayerDesc {
            kind: PoolKind::Avg,
            k,
            stride,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Option<Shape> {
        Some(Shape::new(
            input.channels,
            out_dim(input.rows, self.k, self.stride, 0)?,
            out_dim(input.cols, self.k, self.stride, 0)?,
        ))
    }

    fn check(&self) -> core::result::Result<(), alloc::string::String> {
        match self.kind {
            PoolKind::Max => {
                if !MAX_POOL_KERNELS.contains(&self.k) {
                    return Err(format!("max pool kernel {} not in {{2, 3}}", self.k));
                }
                if !(1..=MAX_POOL_STRIDE).contains(&self.stride) {
                    return Err(format!("max pool stride {} not in 1..=4", self.stride));
                }
            }
            PoolKind::Avg => {
                if !(1..=MAX_KERNEL).contains(&self.k) {
                    return Err(format!("avg pool kernel {} not in 1..=23", self.k));
                }
                // Average pooling runs on the convolution engine, so it inherits its strides.
                if !CONV_STRIDES.contains(&self.stride) {
                    return Err(format!("avg pool stride {} not in {{1, 2, 4}}", self.stride));
                }
            }
        }
        Ok(())
    }
}

/// One convolution layer: `fo` filters of `fi` `k`x`k` kernels plus a bias each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvLayerDesc {
    pub fi: usize,
    pub fo: usize,
    pub k: usize,
    pub stride: usize,
    /// Zero padding on every side of the input.
    pub pad: usize,
    pub relu: bool,
    /// Raw words indexed `[io][ii][i][j]`, interpreted in the network's format.
    pub weights: Vec<i16>,
    pub bias: Vec<i16>,
}

impl ConvLayerDesc {
    /// A layer with all-zero weights and biases.
    pub fn new(fi: usize, fo: usize, k: usize, stride: usize, pad: usize, relu: bool) -> Self {
        ConvLayerDesc {
            fi,
            fo,
            k,
            stride,
            pad,
            relu,
            weights: vec![0; fo * fi * k * k],
            bias: vec![0; fo],
        }
    }

    pub fn weight_index(&self, io: usize, ii: usize, i: usize, j: usize) -> usize {
        ((io * self.fi + ii) * self.k + i) * self.k + j
    }

    pub fn weight(&self, io: usize, ii: usize, i: usize, j: usize) -> i16 {
        self.weights[self.weight_index(io, ii, i, j)]
    }

    /// The `k`x`k` kernel applied by filter `io` to channel `ii`.
    pub fn kernel(&self, io: usize, ii: usize) -> &[i16] {
        let n = self.k * self.k;
        let start = (io * self.fi + ii) * n;
        &self.weights[start..start + n]
    }

    pub fn weight_words(&self) -> usize {
        self.fo * self.fi * self.k * self.k + self.fo
    }

    pub fn output_shape(&self, input: Shape) -> Option<Shape> {
        Some(Shape::new(
            self.fo,
            out_dim(input.rows, self.k, self.stride, self.pad)?,
            out_dim(input.cols, self.k, self.stride, self.pad)?,
        ))
    }

    fn check(&self) -> core::result::Result<(), alloc::string::String> {
        if !(1..=MAX_CHANNELS).contains(&self.fi) || !(1..=MAX_CHANNELS).contains(&self.fo) {
            return Err(format!(
                "channel counts fi={} fo={} outside 1..=1024",
                self.fi, self.fo
            ));
        }
        if !(1..=MAX_KERNEL).contains(&self.k) {
            return Err(format!("kernel size {} not in 1..=23", self.k));
        }
        if !CONV_STRIDES.contains(&self.stride) {
            return Err(format!("stride {} not in {{1, 2, 4}}", self.stride));
        }
        if self.weights.len() != self.fo * self.fi * self.k * self.k {
            return Err(format!(
                "weight array has {} entries, expected {}",
                self.weights.len(),
                self.fo * self.fi * self.k * self.k
            ));
        }
        if self.bias.len() != self.fo {
            return Err(format!(
                "bias array has {} entries, expected {}",
                self.bias.len(),
                self.fo
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layer {
    Conv(ConvLayerDesc),
    Pool(PoolLayerDesc),
}

impl Layer {
    pub fn output_shape(&self, input: Shape) -> Option<Shape> {
        match self {
            Layer::Conv(c) => c.output_shape(input),
            Layer::Pool(p) => p.output_shape(input),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkDesc {
    pub input: Shape,
    pub layers: Vec<Layer>,
    pub format: FxpFormat,
}

impl NetworkDesc {
    /// Build and validate.
    pub fn new(input: Shape, layers: Vec<Layer>, format: FxpFormat) -> Result<Self> {
        let net = NetworkDesc {
            input,
            layers,
            format,
        };
        net.output_shapes()?;
        Ok(net)
    }

    /// Shape check: the output shape of every layer, in order.
    pub fn output_shapes(&self) -> Result<Vec<Shape>> {
        if self.input.is_empty() {
            return Err(Error::Shape(format!("empty input {}", self.input)));
        }
        if self.input.channels > MAX_CHANNELS {
            return Err(Error::Shape(format!(
                "input has {} channels, limit is 1024",
                self.input.channels
            )));
        }
        let mut shape = self.input;
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (index, layer) in self.layers.iter().enumerate() {
            let invalid = |reason| Error::InvalidLayer { layer: index, reason };
            match layer {
                Layer::Conv(c) => {
                    c.check().map_err(invalid)?;
                    if c.fi != shape.channels {
                        return Err(invalid(format!(
                            "expects {} input channels but receives {}",
                            c.fi, shape.channels
                        )));
                    }
                }
                Layer::Pool(p) => p.check().map_err(invalid)?,
            }
            shape = layer.output_shape(shape).ok_or_else(|| {
                invalid(format!(
                    "kernel does not fit the {}x{} input",
                    shape.rows, shape.cols
                ))
            })?;
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Input shape of each layer.
    pub fn input_shapes(&self) -> Result<Vec<Shape>> {
        let outs = self.output_shapes()?;
        let mut ins = Vec::with_capacity(outs.len());
        ins.push(self.input);
        ins.extend(outs.iter().take(outs.len().saturating_sub(1)).copied());
        ins.truncate(self.layers.len());
        Ok(ins)
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &ConvLayerDesc> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            Layer::Pool(_) => None,
        })
    }

    /// 16-bit words in a weight file for this network.
    pub fn weight_word_count(&self) -> usize {
        self.conv_layers().map(ConvLayerDesc::weight_words).sum()
    }

    /// Fill weights and biases from a flat word stream: layer order, then
    /// `[io][ii][i][j]` weights, then the layer's biases.
    pub fn load_weight_words(&mut self, words: &[i16]) -> Result<()> {
        let expected = self.weight_word_count();
        if words.len() < expected {
            return Err(Error::Weights(format!(
                "truncated: {} words present, {expected} required",
                words.len()
            )));
        }
        if words.len() > expected {
            return Err(Error::Weights(format!(
                "size mismatch: {} words present, {expected} required",
                words.len()
            )));
        }
        let mut at = 0;
        for layer in &mut self.layers {
            if let Layer::Conv(c) = layer {
                let n = c.fo * c.fi * c.k * c.k;
                c.weights.clear();
                c.weights.extend_from_slice(&words[at..at + n]);
                at += n;
                c.bias.clear();
                c.bias.extend_from_slice(&words[at..at + c.fo]);
                at += c.fo;
            }
        }
        Ok(())
    }

    pub fn weight_words(&self) -> Vec<i16> {
        let mut out = Vec::with_capacity(self.weight_word_count());
        for c in self.conv_layers() {
            out.extend_from_slice(&c.weights);
            out.extend_from_slice(&c.bias);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fxp::quantize;

    fn conv(fi: usize, fo: usize, k: usize, stride: usize, pad: usize) -> Layer {
        Layer::Conv(ConvLayerDesc::new(fi, fo, k, stride, pad, true))
    }

    #[test]
    fn tensor_get_set() {
        let mut t = Tensor::zeros(Shape::new(3, 4, 5), FxpFormat::Q8_8);
        let x = quantize(1.5, FxpFormat::Q8_8);
        t.set(0, 0, 0, x).unwrap();
        assert_eq!(t.get(0, 0, 0).unwrap(), x);
        assert_eq!(t.index(2, 3, 4).unwrap(), 2 * 20 + 3 * 5 + 4);
        assert_eq!(t.index(2, 3, 4).unwrap(), 59);
        assert!(matches!(
            t.get(3, 0, 0),
            Err(Error::IndexOutOfRange {
                what: "channel",
                index: 3,
                bound: 3
            })
        ));
        assert!(t.get(0, 4, 0).is_err());
        assert!(t
            .set(0, 0, 0, Fxp::from_raw(1, FxpFormat::new(3).unwrap()))
            .is_err());
    }

    #[test]
    fn tensor_from_raw_checks_length() {
        assert!(Tensor::from_raw(Shape::new(1, 2, 2), FxpFormat::Q8_8, vec![0; 3]).is_err());
    }

    #[test]
    fn shape_formula() {
        assert_eq!(out_dim(33, 3, 2, 0), Some(16));
        assert_eq!(out_dim(32, 5, 1, 2), Some(32));
        assert_eq!(out_dim(2, 3, 1, 0), None);
    }

    #[test]
    fn one_by_one_preserves_shape() {
        let net = NetworkDesc::new(Shape::new(1, 7, 9), vec![conv(1, 1, 1, 1, 0)], FxpFormat::Q8_8).unwrap();
        assert_eq!(net.output_shapes().unwrap(), vec![Shape::new(1, 7, 9)]);
    }

    #[test]
    fn strided_conv_shape() {
        let net =
            NetworkDesc::new(Shape::new(1, 33, 33), vec![conv(1, 4, 3, 2, 0)], FxpFormat::Q8_8).unwrap();
        assert_eq!(net.output_shapes().unwrap(), vec![Shape::new(4, 16, 16)]);
    }

    #[test]
    fn validation_names_the_layer() {
        let err = NetworkDesc::new(
            Shape::new(3, 8, 8),
            vec![conv(3, 4, 3, 1, 1), conv(5, 4, 3, 3, 1)],
            FxpFormat::Q8_8,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidLayer { layer: 1, .. }));

        let err =
            NetworkDesc::new(Shape::new(3, 8, 8), vec![conv(3, 4, 3, 3, 1)], FxpFormat::Q8_8).unwrap_err();
        assert!(matches!(err, Error::InvalidLayer { layer: 0, .. }));

        let err = NetworkDesc::new(
            Shape::new(3, 8, 8),
            vec![Layer::Pool(PoolLayerDesc::max(4, 2))],
            FxpFormat::Q8_8,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidLayer { layer: 0, .. }));

        let err =
            NetworkDesc::new(Shape::new(3, 4, 4), vec![conv(3, 4, 7, 1, 0)], FxpFormat::Q8_8).unwrap_err();
        assert!(matches!(err, Error::InvalidLayer { layer: 0, .. }));
    }

    #[test]
    fn weight_words_round_trip() {
        let mut net = NetworkDesc::new(
            Shape::new(3, 8, 8),
            vec![
                conv(3, 2, 3, 1, 1),
                Layer::Pool(PoolLayerDesc::max(2, 2)),
                conv(2, 1, 1, 1, 0),
            ],
            FxpFormat::Q8_8,
        )
        .unwrap();
        let n = net.weight_word_count();
        assert_eq!(n, 2 * 3 * 9 + 2 + 2 + 1);
        let words: Vec<i16> = (0..n as i16).map(|i| i * 7 - 40).collect();
        net.load_weight_words(&words).unwrap();
        assert_eq!(net.weight_words(), words);
        if let Layer::Conv(c) = &net.layers[0] {
            assert_eq!(c.weight(1, 2, 0, 1), words[27 + 18 + 1]);
            assert_eq!(c.bias, vec![words[54], words[55]]);
        }

        let short = &words[..n - 1];
        match net.load_weight_words(short) {
            Err(Error::Weights(msg)) => assert!(msg.contains("truncated")),
            other => panic!("unexpected {other:?}"),
        }
        let mut long = words.clone();
        long.push(0);
        assert!(net.load_weight_words(&long).is_err());
    }
}

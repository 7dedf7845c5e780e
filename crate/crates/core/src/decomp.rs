//! Filter decomposition: any `K`x`K` kernel becomes a grid of 3x3 sub-filters
//! with shift addresses, so the CU engine only ever runs 3x3 (or 1x1) windows.
//!
//! A kernel is zero-extended on the bottom/right to `k_ext = 3 * ceil(K / 3)`
//! and cut into `(k_ext / 3)^2` blocks. Block `(i, j)` holds weights
//! `f(3i + l, 3j + m)` and has shift `(3i, 3j)`. Applied at input origin
//! `(s*X + 3i, s*Y + 3j)` and summed over all blocks it reproduces the
//! original convolution exactly: the padded weights are zero and integer
//! addition reorders freely.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fxp::{quantize, requantize_raw, FxpFormat};
use crate::model::{ConvLayerDesc, Layer, NetworkDesc, PoolKind, PoolLayerDesc, Shape, Tensor};

/// Top-left offset of a sub-filter inside the extended kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shift {
    /// Row offset.
    pub x: usize,
    /// Column offset.
    pub y: usize,
}

impl Shift {
    pub const ZERO: Shift = Shift { x: 0, y: 0 };

    pub fn new(x: usize, y: usize) -> Self {
        Shift { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubFilter {
    /// Row-major 3x3 raw weights.
    pub weights: [i16; 9],
    pub shift: Shift,
    pub src_feature: usize,
    pub src_channel: usize,
}

impl SubFilter {
    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposedFilter {
    pub sub_filters: Vec<SubFilter>,
    pub k_orig: usize,
    pub k_ext: usize,
    /// MACs per filter application spent on padded weights.
    pub zero_pad_macs: usize,
    /// MACs per filter application, padding included.
    pub total_macs: usize,
}

/// Extended kernel size. 1x1 and 3x3 run natively; everything else rounds up
/// to a multiple of three (so 2 becomes 3).
pub fn extended_size(k: usize) -> Result<usize> {
    if !(1..=crate::model::MAX_KERNEL).contains(&k) {
        return Err(Error::KernelOutOfRange(k));
    }
    Ok(if k == 1 { 1 } else { 3 * k.div_ceil(3) })
}

/// Every shift address of a kernel of size `k`, row-major.
pub fn shift_grid(k: usize) -> Result<Vec<Shift>> {
    let n = extended_size(k)?.div_ceil(3);
    Ok((0..n * n).map(|b| Shift::new(3 * (b / n), 3 * (b % n))).collect())
}

/// Zero-extend a `k`x`k` kernel on the bottom and right.
pub fn extend_filter(w: &[i16], k: usize) -> Result<(Vec<i16>, usize)> {
    let k_ext = extended_size(k)?;
    if w.len() != k * k {
        return Err(Error::Shape(format!(
            "kernel of size {k} needs {} weights, got {}",
            k * k,
            w.len()
        )));
    }
    let mut out = vec![0i16; k_ext * k_ext];
    for i in 0..k {
        out[i * k_ext..i * k_ext + k].copy_from_slice(&w[i * k..(i + 1) * k]);
    }
    Ok((out, k_ext))
}

/// Split a kernel into 3x3 sub-filters. A 1x1 kernel yields a single
/// sub-filter with its weight in the top-left slot.
pub fn decompose(w: &[i16], k: usize, io: usize, ii: usize) -> Result<DecomposedFilter> {
    let (ext, k_ext) = extend_filter(w, k)?;
    let blocks = k_ext.div_ceil(3);
    let mut sub_filters = Vec::with_capacity(blocks * blocks);
    for bi in 0..blocks {
        for bj in 0..blocks {
            let mut weights = [0i16; 9];
            for l in 0..3 {
                for m in 0..3 {
                    let (r, c) = (3 * bi + l, 3 * bj + m);
                    if r < k_ext && c < k_ext {
                        weights[3 * l + m] = ext[r * k_ext + c];
                    }
                }
            }
            sub_filters.push(SubFilter {
                weights,
                shift: Shift::new(3 * bi, 3 * bj),
                src_feature: io,
                src_channel: ii,
            });
        }
    }
    Ok(DecomposedFilter {
        sub_filters,
        k_orig: k,
        k_ext,
        zero_pad_macs: k_ext * k_ext - k * k,
        total_macs: k_ext * k_ext,
    })
}

/// Output of one sub-filter over one channel, pre-bias, on the layer's
/// output grid: `partial[X][Y] = sum_{l,m} I[s*X + x + l - pad][s*Y + y + m - pad] * w[l][m]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialPlane {
    pub rows: usize,
    pub cols: usize,
    pub shift: Shift,
    /// Raw accumulator values at `2 * frac_bits`.
    pub accum: Vec<i64>,
}

/// Evaluate one sub-filter over channel `sub.src_channel` of `input`.
pub fn apply_subfilter(
    input: &Tensor,
    sub: &SubFilter,
    stride: usize,
    pad: usize,
    out_rows: usize,
    out_cols: usize,
) -> Result<PartialPlane> {
    let s = input.shape();
    if sub.src_channel >= s.channels {
        return Err(Error::IndexOutOfRange {
            what: "channel",
            index: sub.src_channel,
            bound: s.channels,
        });
    }
    let plane = input.plane(sub.src_channel);
    let mut accum = vec![0i64; out_rows * out_cols];
    for x in 0..out_rows {
        for y in 0..out_cols {
            let mut acc = 0i64;
            for l in 0..3 {
                let r = (stride * x + sub.shift.x + l) as isize - pad as isize;
                if r < 0 || r as usize >= s.rows {
                    continue;
                }
                for m in 0..3 {
                    let c = (stride * y + sub.shift.y + m) as isize - pad as isize;
                    if c < 0 || c as usize >= s.cols {
                        continue;
                    }
                    acc += plane[r as usize * s.cols + c as usize] as i64 * sub.weights[3 * l + m] as i64;
                }
            }
            accum[x * out_cols + y] = acc;
        }
    }
    Ok(PartialPlane {
        rows: out_rows,
        cols: out_cols,
        shift: sub.shift,
        accum,
    })
}

/// Sum decomposed partials of one output feature, add the bias once,
/// requantize once and apply ReLU. Returns the feature plane (row-major raws).
pub fn recombine(
    partials: &[PartialPlane],
    out_rows: usize,
    out_cols: usize,
    bias: i16,
    relu: bool,
    format: FxpFormat,
) -> Result<Vec<i16>> {
    let frac = format.frac_bits();
    let mut sums = vec![(bias as i64) << frac; out_rows * out_cols];
    for (n, p) in partials.iter().enumerate() {
        if p.rows != out_rows || p.cols != out_cols || p.accum.len() != out_rows * out_cols {
            return Err(Error::Shape(format!(
                "partial {n} is {}x{}, feature is {out_rows}x{out_cols}",
                p.rows, p.cols
            )));
        }
        if p.shift.x % 3 != 0 || p.shift.y % 3 != 0 {
            return Err(Error::Shape(format!(
                "partial {n} has shift ({}, {}) off the 3-grid",
                p.shift.x, p.shift.y
            )));
        }
        for (acc, v) in sums.iter_mut().zip(&p.accum) {
            *acc = acc.checked_add(*v).ok_or(Error::AccumOverflow)?;
        }
    }
    Ok(sums
        .into_iter()
        .map(|acc| {
            let v = requantize_raw(acc, 2 * frac, frac);
            if relu {
                v.max(0)
            } else {
                v
            }
        })
        .collect())
}

/// Run a whole convolution layer through decomposition and recombination.
pub fn conv_decomposed(input: &Tensor, layer: &ConvLayerDesc) -> Result<Tensor> {
    if input.shape().channels != layer.fi {
        return Err(Error::Shape(format!(
            "conv expects {} channels, input is {}",
            layer.fi,
            input.shape()
        )));
    }
    let out = layer
        .output_shape(input.shape())
        .ok_or_else(|| Error::Shape(format!("kernel {} does not fit {}", layer.k, input.shape())))?;
    let mut data = Vec::with_capacity(out.len());
    for io in 0..layer.fo {
        let mut partials = Vec::new();
        for ii in 0..layer.fi {
            let d = decompose(layer.kernel(io, ii), layer.k, io, ii)?;
            for sub in &d.sub_filters {
                partials.push(apply_subfilter(
                    input,
                    sub,
                    layer.stride,
                    layer.pad,
                    out.rows,
                    out.cols,
                )?);
            }
        }
        data.extend(recombine(
            &partials,
            out.rows,
            out.cols,
            layer.bias[io],
            layer.relu,
            input.format(),
        )?);
    }
    Tensor::from_raw(out, input.format(), data)
}

/// Average pooling as a convolution: `W[io][ii] = quantize(1/K^2)` on the
/// diagonal, zero elsewhere, no bias, no ReLU.
pub fn avgpool_to_conv(pool: &PoolLayerDesc, channels: usize, format: FxpFormat) -> ConvLayerDesc {
    debug_assert_eq!(pool.kind, PoolKind::Avg);
    let w = quantize(1.0 / (pool.k * pool.k) as f64, format).raw();
    let mut layer = ConvLayerDesc::new(channels, channels, pool.k, pool.stride, 0, false);
    for io in 0..channels {
        for i in 0..pool.k {
            for j in 0..pool.k {
                let idx = layer.weight_index(io, io, i, j);
                layer.weights[idx] = w;
            }
        }
    }
    layer
}

/// Geometry of one convolution for MAC accounting. Kernels may be
/// rectangular here so published topologies with `1xN` factorized filters can
/// be analysed; the datapath itself only runs square kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    /// Input channels seen by one filter (per group for grouped convolutions).
    pub fi: usize,
    pub fo: usize,
    pub out_rows: usize,
    pub out_cols: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvShape {
    pub fn square(fi: usize, fo: usize, out: usize, k: usize) -> Self {
        ConvShape {
            fi,
            fo,
            out_rows: out,
            out_cols: out,
            kh: k,
            kw: k,
        }
    }

    fn ext(d: usize) -> usize {
        if d == 1 {
            1
        } else {
            3 * d.div_ceil(3)
        }
    }

    pub fn applications(&self) -> u64 {
        (self.fo * self.fi * self.out_rows * self.out_cols) as u64
    }

    pub fn total_macs(&self) -> u64 {
        self.applications() * (Self::ext(self.kh) * Self::ext(self.kw)) as u64
    }

    pub fn zero_pad_macs(&self) -> u64 {
        self.applications() * (Self::ext(self.kh) * Self::ext(self.kw) - self.kh * self.kw) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLoss {
    /// Index of the layer in the network (or shape list).
    pub layer: usize,
    pub zero_pad_macs: u64,
    pub total_macs: u64,
}

impl LayerLoss {
    pub fn ratio(&self) -> f64 {
        if self.total_macs == 0 {
            0.0
        } else {
            self.zero_pad_macs as f64 / self.total_macs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EfficiencyLoss {
    pub layers: Vec<LayerLoss>,
    pub zero_pad_macs: u64,
    pub total_macs: u64,
}

impl EfficiencyLoss {
    /// Network efficiency loss `sum(zero-pad MACs) / sum(total MACs)`.
    pub fn ratio(&self) -> f64 {
        if self.total_macs == 0 {
            0.0
        } else {
            self.zero_pad_macs as f64 / self.total_macs as f64
        }
    }
}

pub fn efficiency_loss_shapes(shapes: &[ConvShape]) -> EfficiencyLoss {
    let mut el = EfficiencyLoss::default();
    for (layer, s) in shapes.iter().enumerate() {
        let l = LayerLoss {
            layer,
            zero_pad_macs: s.zero_pad_macs(),
            total_macs: s.total_macs(),
        };
        el.zero_pad_macs += l.zero_pad_macs;
        el.total_macs += l.total_macs;
        el.layers.push(l);
    }
    el
}

/// The convolution geometry of every layer that runs on the CU engine,
/// tagged with its network index. Average pools count, as they become
/// convolutions; max pools do not.
pub fn conv_shapes(net: &NetworkDesc) -> Result<Vec<(usize, ConvShape)>> {
    let ins = net.input_shapes()?;
    let outs = net.output_shapes()?;
    let mut shapes = Vec::new();
    for (index, layer) in net.layers.iter().enumerate() {
        let (fi, k): (usize, usize) = match layer {
            Layer::Conv(c) => (c.fi, c.k),
            Layer::Pool(p) if p.kind == PoolKind::Avg => (ins[index].channels, p.k),
            Layer::Pool(_) => continue,
        };
        let out: Shape = outs[index];
        shapes.push((
            index,
            ConvShape {
                fi,
                fo: out.channels,
                out_rows: out.rows,
                out_cols: out.cols,
                kh: k,
                kw: k,
            },
        ));
    }
    Ok(shapes)
}

/// Per-layer and network efficiency loss; layer indices refer to `net.layers`.
pub fn efficiency_loss(net: &NetworkDesc) -> Result<EfficiencyLoss> {
    let tagged = conv_shapes(net)?;
    let shapes: Vec<ConvShape> = tagged.iter().map(|(_, s)| *s).collect();
    let mut el = efficiency_loss_shapes(&shapes);
    for (l, (index, _)) in el.layers.iter_mut().zip(&tagged) {
        l.layer = *index;
    }
    Ok(el)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{avgpool_ref, conv_ref};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(k: usize) -> Vec<i16> {
        (1..=(k * k) as i16).collect()
    }

    #[test]
    fn extend_five_adds_one_row_and_column() {
        let (ext, k_ext) = extend_filter(&ramp(5), 5).unwrap();
        assert_eq!(k_ext, 6);
        for r in 0..6 {
            for c in 0..6 {
                let v = ext[r * 6 + c];
                if r < 5 && c < 5 {
                    assert_eq!(v, (r * 5 + c + 1) as i16);
                } else {
                    assert_eq!(v, 0);
                }
            }
        }
    }

    #[test]
    fn extend_native_sizes_pass_through() {
        assert_eq!(extend_filter(&ramp(3), 3).unwrap(), (ramp(3), 3));
        assert_eq!(extend_filter(&[7], 1).unwrap(), (vec![7], 1));
        assert_eq!(extended_size(2).unwrap(), 3);
        assert_eq!(extended_size(23).unwrap(), 24);
        assert_eq!(extend_filter(&[], 0), Err(Error::KernelOutOfRange(0)));
        assert_eq!(extended_size(24), Err(Error::KernelOutOfRange(24)));
    }

    #[test]
    fn eleven_wastes_23_of_144() {
        let d = decompose(&ramp(11), 11, 0, 0).unwrap();
        assert_eq!(d.k_ext, 12);
        assert_eq!(d.zero_pad_macs, 144 - 121);
        assert_eq!(d.zero_pad_macs, 23);
        assert_eq!(d.total_macs, 144);
        assert_eq!(d.sub_filters.len(), 16);
    }

    #[test]
    fn five_by_five_shifts_and_blocks() {
        let d = decompose(&ramp(5), 5, 4, 2).unwrap();
        let shifts: Vec<Shift> = d.sub_filters.iter().map(|s| s.shift).collect();
        assert_eq!(
            shifts,
            vec![
                Shift::new(0, 0),
                Shift::new(0, 3),
                Shift::new(3, 0),
                Shift::new(3, 3)
            ]
        );
        assert_eq!(d.sub_filters[0].weights, [1, 2, 3, 6, 7, 8, 11, 12, 13]);
        assert_eq!(d.sub_filters[1].weights, [4, 5, 0, 9, 10, 0, 14, 15, 0]);
        assert_eq!(d.sub_filters[2].weights, [16, 17, 18, 21, 22, 23, 0, 0, 0]);
        assert_eq!(d.sub_filters[3].weights, [19, 20, 0, 24, 25, 0, 0, 0, 0]);
        assert!(d
            .sub_filters
            .iter()
            .all(|s| s.src_feature == 4 && s.src_channel == 2));
    }

    #[test]
    fn three_and_seven() {
        let d = decompose(&ramp(3), 3, 0, 0).unwrap();
        assert_eq!(d.sub_filters.len(), 1);
        assert_eq!(d.sub_filters[0].shift, Shift::ZERO);
        assert_eq!(&d.sub_filters[0].weights[..], &ramp(3)[..]);

        let d = decompose(&ramp(7), 7, 0, 0).unwrap();
        let mut expected = Vec::new();
        for x in [0, 3, 6] {
            for y in [0, 3, 6] {
                expected.push(Shift::new(x, y));
            }
        }
        let shifts: Vec<Shift> = d.sub_filters.iter().map(|s| s.shift).collect();
        assert_eq!(shifts, expected);
        assert_eq!(shift_grid(7).unwrap(), expected);
    }

    fn random_layer(
        rng: &mut ChaCha8Rng,
        fi: usize,
        fo: usize,
        k: usize,
        s: usize,
        pad: usize,
    ) -> ConvLayerDesc {
        let mut layer = ConvLayerDesc::new(fi, fo, k, s, pad, rng.random_bool(0.5));
        for w in layer.weights.iter_mut() {
            *w = rng.random_range(i16::MIN..=i16::MAX);
        }
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(i16::MIN..=i16::MAX);
        }
        layer
    }

    fn random_input(rng: &mut ChaCha8Rng, shape: Shape) -> Tensor {
        Tensor::from_raw(
            shape,
            FxpFormat::Q8_8,
            (0..shape.len())
                .map(|_| rng.random_range(i16::MIN..=i16::MAX))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn recombine_single_subfilter_passes_through_with_bias() {
        let p = PartialPlane {
            rows: 1,
            cols: 2,
            shift: Shift::ZERO,
            accum: vec![256 * 256, -3 * 256 * 256],
        };
        let out = recombine(&[p], 1, 2, 256, false, FxpFormat::Q8_8).unwrap();
        assert_eq!(out, vec![512, -512]);
    }

    #[test]
    fn recombine_rejects_inconsistent_partials() {
        let p = PartialPlane {
            rows: 2,
            cols: 2,
            shift: Shift::ZERO,
            accum: vec![0; 4],
        };
        assert!(recombine(core::slice::from_ref(&p), 1, 2, 0, false, FxpFormat::Q8_8).is_err());
        let off = PartialPlane {
            shift: Shift::new(1, 0),
            ..p
        };
        assert!(recombine(&[off], 2, 2, 0, false, FxpFormat::Q8_8).is_err());
    }

    #[test]
    fn five_by_five_all_ones() {
        let input = Tensor::from_raw(Shape::new(1, 7, 7), FxpFormat::Q8_8, vec![256; 49]).unwrap();
        let mut layer = ConvLayerDesc::new(1, 1, 5, 1, 0, false);
        layer.weights.fill(256);
        let dec = conv_decomposed(&input, &layer).unwrap();
        assert_eq!(dec, conv_ref(&input, &layer).unwrap());
        assert!(dec.raw().iter().all(|&v| v == 25 * 256));
    }

    #[test]
    fn eleven_by_eleven_strided() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let input = random_input(&mut rng, Shape::new(1, 16, 16));
        let layer = random_layer(&mut rng, 1, 2, 11, 2, 0);
        assert_eq!(
            conv_decomposed(&input, &layer).unwrap(),
            conv_ref(&input, &layer).unwrap()
        );
    }

    #[test]
    fn dropping_zero_subfilters_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let input = random_input(&mut rng, Shape::new(1, 12, 12));
        let mut w = vec![0i16; 16];
        w[0] = 300;
        w[5] = -20;
        let d = decompose(&w, 4, 0, 0).unwrap();
        let all: Vec<PartialPlane> = d
            .sub_filters
            .iter()
            .map(|s| apply_subfilter(&input, s, 1, 1, 11, 11).unwrap())
            .collect();
        let nonzero: Vec<PartialPlane> = d
            .sub_filters
            .iter()
            .filter(|s| !s.is_zero())
            .map(|s| apply_subfilter(&input, s, 1, 1, 11, 11).unwrap())
            .collect();
        assert!(nonzero.len() < all.len());
        assert_eq!(
            recombine(&all, 11, 11, 9, true, FxpFormat::Q8_8).unwrap(),
            recombine(&nonzero, 11, 11, 9, true, FxpFormat::Q8_8).unwrap()
        );
    }

    #[test]
    fn avgpool_rewrite_weights() {
        let c = avgpool_to_conv(&PoolLayerDesc::avg(2, 2), 1, FxpFormat::Q8_8);
        assert_eq!(c.weights, vec![64; 4]);
        assert_eq!(c.bias, vec![0]);
        assert!(!c.relu);
        assert_eq!(c.stride, 2);

        let c = avgpool_to_conv(&PoolLayerDesc::avg(3, 1), 2, FxpFormat::Q8_8);
        let ninth = quantize(1.0 / 9.0, FxpFormat::Q8_8).raw();
        assert_eq!(ninth, 28);
        assert_eq!(c.fo, 2);
        for io in 0..2 {
            for ii in 0..2 {
                let expected = if io == ii { ninth } else { 0 };
                assert!(c.kernel(io, ii).iter().all(|&w| w == expected));
            }
        }
    }

    #[test]
    fn avgpool_rewrite_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let input = random_input(&mut rng, Shape::new(3, 9, 9));
        for (k, s) in [(2, 2), (3, 1), (5, 2)] {
            let pool = PoolLayerDesc::avg(k, s);
            let conv = avgpool_to_conv(&pool, 3, FxpFormat::Q8_8);
            assert_eq!(
                conv_ref(&input, &conv).unwrap(),
                avgpool_ref(&input, &pool).unwrap()
            );
        }
    }

    #[test]
    fn efficiency_examples() {
        let el = efficiency_loss_shapes(&[ConvShape::square(3, 96, 55, 11)]);
        assert_eq!(el.zero_pad_macs * 144, el.total_macs * 23);
        assert!((el.ratio() - 0.1597).abs() < 1e-4);

        let el = efficiency_loss_shapes(&[ConvShape::square(8, 8, 10, 3), ConvShape::square(8, 8, 10, 1)]);
        assert_eq!(el.ratio(), 0.0);
        assert_eq!(el.zero_pad_macs, 0);
    }

    #[test]
    fn efficiency_of_network_counts_avg_pools() {
        let net = NetworkDesc::new(
            Shape::new(2, 12, 12),
            vec![
                Layer::Conv(ConvLayerDesc::new(2, 4, 5, 1, 2, true)),
                Layer::Pool(PoolLayerDesc::max(2, 2)),
                Layer::Pool(PoolLayerDesc::avg(2, 2)),
            ],
            FxpFormat::Q8_8,
        )
        .unwrap();
        let el = efficiency_loss(&net).unwrap();
        assert_eq!(el.layers.len(), 2);
        assert_eq!(el.layers[0].layer, 0);
        assert_eq!(el.layers[1].layer, 2);
        assert_eq!(el.layers[0].total_macs, 4 * 2 * 144 * 36);
        assert_eq!(el.layers[0].zero_pad_macs, 4 * 2 * 144 * 11);
        // 2x2 avg pool over 4 channels: 16 channel-to-channel filters, 9 outputs,
        // 3x3 extended window with 5 of 9 MACs padded.
        assert_eq!(el.layers[1].total_macs, 4 * 4 * 9 * 9);
        assert_eq!(el.layers[1].zero_pad_macs, 4 * 4 * 9 * 5);
    }
}

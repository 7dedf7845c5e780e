//! Brute-force reference evaluation of convolution, pooling and ReLU.
//!
//! Written straight from the layer definitions with no tiling, decomposition or
//! streaming, so it can serve as ground truth for the compiler and simulator.
//! It shares only the fixed-point kernel with them.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fxp::{acc_add, mul_exact, quantize, requantize, Accum, Fxp};
use crate::model::{ConvLayerDesc, Layer, NetworkDesc, PoolKind, PoolLayerDesc, Tensor};

fn check_conv_input(input: &Tensor, layer: &ConvLayerDesc) -> Result<()> {
    if input.shape().channels != layer.fi {
        return Err(Error::Shape(format!(
            "conv expects {} channels, input is {}",
            layer.fi,
            input.shape()
        )));
    }
    if layer.weights.len() != layer.fo * layer.fi * layer.k * layer.k || layer.bias.len() != layer.fo {
        return Err(Error::Weights(format!(
            "conv layer {}->{} k={} has incomplete weights",
            layer.fi, layer.fo, layer.k
        )));
    }
    Ok(())
}

/// Pre-bias accumulators of a convolution, `[io][r][c]`, exact.
pub fn conv_ref_accum(input: &Tensor, layer: &ConvLayerDesc) -> Result<Vec<Accum>> {
    check_conv_input(input, layer)?;
    let out = layer
        .output_shape(input.shape())
        .ok_or_else(|| Error::Shape(format!("kernel {} does not fit {}", layer.k, input.shape())))?;
    let format = input.format();
    let frac = 2 * format.frac_bits();
    let (rows, cols) = (input.shape().rows as isize, input.shape().cols as isize);
    let mut accs = Vec::with_capacity(out.len());
    for io in 0..layer.fo {
        for r in 0..out.rows {
            for c in 0..out.cols {
                let mut acc = Accum::zero(frac);
                for ii in 0..layer.fi {
                    for i in 0..layer.k {
                        let y = (layer.stride * r + i) as isize - layer.pad as isize;
                        if y < 0 || y >= rows {
                            continue;
                        }
                        for j in 0..layer.k {
                            let x = (layer.stride * c + j) as isize - layer.pad as isize;
                            if x < 0 || x >= cols {
                                continue;
                            }
                            let pixel = input.get(ii, y as usize, x as usize)?;
                            let w = Fxp::from_raw(layer.weight(io, ii, i, j), format);
                            acc = acc_add(acc, mul_exact(pixel, w)?)?;
                        }
                    }
                }
                accs.push(acc);
            }
        }
    }
    Ok(accs)
}

/// `O[io][r][c] = B[io] + sum_{ii,i,j} I[ii][s*r+i-pad][s*c+j-pad] * W[io][ii][i][j]`,
/// requantized once, then ReLU if the layer asks for it.
pub fn conv_ref(input: &Tensor, layer: &ConvLayerDesc) -> Result<Tensor> {
    let accs = conv_ref_accum(input, layer)?;
    let out = layer
        .output_shape(input.shape())
        .expect("checked by conv_ref_accum");
    let format = input.format();
    let plane = out.plane();
    let mut data = Vec::with_capacity(out.len());
    for (n, acc) in accs.into_iter().enumerate() {
        let bias = Fxp::from_raw(layer.bias[n / plane], format).widen();
        let mut v = requantize(acc_add(acc, bias)?, format).raw();
        if layer.relu {
            v = v.max(0);
        }
        data.push(v);
    }
    Tensor::from_raw(out, format, data)
}

fn pool_shape(input: &Tensor, pool: &PoolLayerDesc) -> Result<crate::model::Shape> {
    pool.output_shape(input.shape())
        .ok_or_else(|| Error::Shape(format!("pool window {} does not fit {}", pool.k, input.shape())))
}

pub fn maxpool_ref(input: &Tensor, pool: &PoolLayerDesc) -> Result<Tensor> {
    if pool.kind != PoolKind::Max {
        return Err(Error::Shape("maxpool_ref needs a max pool".into()));
    }
    let out = pool_shape(input, pool)?;
    let mut data = Vec::with_capacity(out.len());
    for ch in 0..out.channels {
        for r in 0..out.rows {
            for c in 0..out.cols {
                let mut best = i16::MIN;
                for i in 0..pool.k {
                    for j in 0..pool.k {
                        let v = input.get(ch, pool.stride * r + i, pool.stride * c + j)?.raw();
                        best = best.max(v);
                    }
                }
                data.push(best);
            }
        }
    }
    Tensor::from_raw(out, input.format(), data)
}

/// Window sum times `quantize(1/K^2)`, exactly, then one requantize. This is
/// what the convolution engine computes for an average pool, not the real mean.
pub fn avgpool_ref(input: &Tensor, pool: &PoolLayerDesc) -> Result<Tensor> {
    if pool.kind != PoolKind::Avg {
        return Err(Error::Shape("avgpool_ref needs an average pool".into()));
    }
    let out = pool_shape(input, pool)?;
    let format = input.format();
    let inv_area = quantize(1.0 / (pool.k * pool.k) as f64, format);
    let mut data = Vec::with_capacity(out.len());
    for ch in 0..out.channels {
        for r in 0..out.rows {
            for c in 0..out.cols {
                let mut sum: i64 = 0;
                for i in 0..pool.k {
                    for j in 0..pool.k {
                        sum += input.get(ch, pool.stride * r + i, pool.stride * c + j)?.raw() as i64;
                    }
                }
                let acc = Accum::new(
                    sum.checked_mul(inv_area.raw() as i64)
                        .ok_or(Error::AccumOverflow)?,
                    2 * format.frac_bits(),
                );
                data.push(requantize(acc, format).raw());
            }
        }
    }
    Tensor::from_raw(out, format, data)
}

pub fn relu_ref(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for v in out.raw_mut() {
        *v = (*v).max(0);
    }
    out
}

pub fn layer_ref(input: &Tensor, layer: &Layer) -> Result<Tensor> {
    match layer {
        Layer::Conv(c) => conv_ref(input, c),
        Layer::Pool(p) => match p.kind {
            PoolKind::Max => maxpool_ref(input, p),
            PoolKind::Avg => avgpool_ref(input, p),
        },
    }
}

/// Every layer's output for one input, in network order.
pub fn run_network(net: &NetworkDesc, input: &Tensor) -> Result<Vec<Tensor>> {
    if input.shape() != net.input {
        return Err(Error::Shape(format!(
            "network expects input {}, got {}",
            net.input,
            input.shape()
        )));
    }
    let mut outputs: Vec<Tensor> = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let next = layer_ref(outputs.last().unwrap_or(input), layer)?;
        outputs.push(next);
    }
    Ok(outputs)
}

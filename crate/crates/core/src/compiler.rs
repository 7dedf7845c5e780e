//! Lowering a network onto the accelerator.
//!
//! Each pipeline stage is one network layer, or a convolution with the max
//! pool that follows it fused into its readout. Average pools become
//! diagonal convolutions. Loop order per stage is feature unit (a feature,
//! or a feature pair in 1x1 mode), then row band, then channel pair, then
//! sub-filter. Weights are emitted in exactly that consumption order.
//!
//! A layer whose accumulation does not fit one scratchpad sub-buffer is cut
//! into row bands. When a band needs a single pass (one channel pair, one
//! sub-filter), consecutive bands hold the CU weights instead of fetching
//! them again.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::decomp::{avgpool_to_conv, extend_filter, extended_size, shift_grid, ConvShape, Shift};
use crate::error::{Error, Result};
use crate::fxp::FxpFormat;
use crate::isa::{encode, Command, LayerConfig, MaxPoolConfig, Mode};
use crate::microarch::bank::bank_footprint;
use crate::microarch::cycles::{drain_cycles, maxpool_only_cycles, pass_cycles, pool_tail_cycles, Overlap};
use crate::microarch::MachineConfig;
use crate::model::{ConvLayerDesc, Layer, NetworkDesc, PoolKind, Shape};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowerOptions {
    /// Split every convolution into this many row bands.
    pub force_bands: Option<usize>,
    /// Fuse a max pool into the readout of the convolution before it.
    pub fuse_maxpool: bool,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions {
            force_bands: None,
            fuse_maxpool: true,
        }
    }
}

/// Output rows `row_start..row_start + rows` of a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub row_start: usize,
    pub rows: usize,
}

/// What a stage computes, by origin in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageSource {
    Conv,
    AvgPool,
    MaxPool,
}

/// Buffer placement of one stage. Byte counts are per bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryMap {
    pub input_bank_a: usize,
    pub input_bank_b: usize,
    pub output_bank_a: usize,
    pub output_bank_b: usize,
    pub bank_capacity: usize,
    pub input_in_dram: bool,
    pub output_in_dram: bool,
    /// Words one band occupies in the accumulating sub-buffer.
    pub scratch_words: usize,
    pub subbuffer_words: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    /// Network layer indices this stage covers (two when a pool is fused).
    pub net_layers: Vec<usize>,
    pub source: StageSource,
    pub mode: Mode,
    pub input: Shape,
    /// Convolution output (equal to `stored_output` without a fused pool).
    pub conv_output: Shape,
    pub stored_output: Shape,
    pub k: usize,
    pub k_ext: usize,
    pub sub_filters: usize,
    pub stride: usize,
    pub pad: usize,
    pub maxpool: Option<MaxPoolConfig>,
    pub bands: Vec<Band>,
    pub memory: MemoryMap,
    pub exec_commands: usize,
    pub weight_words: usize,
    pub zero_pad_macs: u64,
    pub total_macs: u64,
    pub predicted_cycles: u64,
    pub predicted_mac_ops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub commands: Vec<Command>,
    pub weight_stream: Vec<i16>,
    pub plans: Vec<LayerPlan>,
    pub format: FxpFormat,
}

impl Program {
    pub fn encode(&self) -> Result<Vec<u16>> {
        encode(&self.commands)
    }

    pub fn predicted_cycles(&self) -> u64 {
        self.plans.iter().map(|p| p.predicted_cycles).sum()
    }

    pub fn predicted_mac_ops(&self) -> u64 {
        self.plans.iter().map(|p| p.predicted_mac_ops).sum()
    }

    pub fn predicted_utilization(&self, cfg: &MachineConfig) -> f64 {
        let cycles = self.predicted_cycles();
        if cycles == 0 {
            return 0.0;
        }
        self.predicted_mac_ops() as f64 / (cfg.total_pes() as f64 * cycles as f64)
    }

    pub fn predicted_gops(&self, cfg: &MachineConfig) -> f64 {
        let cycles = self.predicted_cycles();
        if cycles == 0 {
            return 0.0;
        }
        2.0 * self.predicted_mac_ops() as f64 * cfg.clock_hz / cycles as f64 / 1e9
    }
}

/// Row bands for a convolution output of `rows` x `cols` with `planes`
/// features accumulating at once.
pub fn plan_bands(
    rows: usize,
    cols: usize,
    planes: usize,
    cfg: &MachineConfig,
    force_bands: Option<usize>,
) -> Result<Vec<Band>> {
    let cap = cfg.subbuffer_words();
    let per_row = cols * planes;
    let band_rows = match force_bands {
        Some(0) => return Err(Error::Unsupported("zero row bands requested".into())),
        Some(n) => {
            let band = rows.div_ceil(n);
            if band * per_row > cap && !cfg.allow_oversize_scratchpad {
                return Err(Error::Capacity(format!(
                    "{n} band(s) of {band} rows need {} words, sub-buffer holds {cap}",
                    band * per_row
                )));
            }
            band
        }
        None if per_row > cap => {
            if !cfg.allow_oversize_scratchpad {
                return Err(Error::Unsupported(format!(
                    "one output row needs {per_row} words ({planes} plane(s) of {cols}); \
                     the sub-buffer limit is {cap} words"
                )));
            }
            rows
        }
        None => {
            let fit = cap / per_row;
            if fit >= rows {
                rows
            } else if fit >= 8 {
                fit / 8 * 8
            } else {
                fit
            }
        }
    };
    Ok((0..rows)
        .step_by(band_rows)
        .map(|row_start| Band {
            row_start,
            rows: band_rows.min(rows - row_start),
        })
        .collect())
}

/// Bank placement of a stage's input and stored output.
pub fn plan_memory(
    input: Shape,
    stored: Shape,
    scratch_words: usize,
    cfg: &MachineConfig,
) -> Result<MemoryMap> {
    let (ia, ib) = bank_footprint(input);
    let (oa, ob) = bank_footprint(stored);
    let cap = cfg.bank_bytes();
    let map = MemoryMap {
        input_bank_a: ia,
        input_bank_b: ib,
        output_bank_a: oa,
        output_bank_b: ob,
        bank_capacity: cap,
        input_in_dram: ia > cap || ib > cap,
        output_in_dram: oa > cap || ob > cap,
        scratch_words,
        subbuffer_words: cfg.subbuffer_words(),
    };
    if (map.input_in_dram || map.output_in_dram) && !cfg.spill_to_dram {
        return Err(Error::Capacity(format!(
            "input {input} or output {stored} exceeds a {cap}-byte bank and DRAM spill is off"
        )));
    }
    Ok(map)
}

pub fn lower(net: &NetworkDesc, cfg: &MachineConfig, opts: &LowerOptions) -> Result<Program> {
    cfg.validate()?;
    let ins = net.input_shapes()?;
    let mut prog = Program {
        commands: Vec::new(),
        weight_stream: Vec::new(),
        plans: Vec::new(),
        format: net.format,
    };
    let mut i = 0;
    while i < net.layers.len() {
        let input = ins[i];
        match &net.layers[i] {
            Layer::Pool(p) if p.kind == PoolKind::Max => {
                let mp = MaxPoolConfig {
                    k: p.k,
                    stride: p.stride,
                };
                lower_maxpool(&mut prog, i, input, mp, cfg)?;
                i += 1;
            }
            layer => {
                let (conv, source) = match layer {
                    Layer::Conv(c) => (c.clone(), StageSource::Conv),
                    Layer::Pool(p) => (
                        avgpool_to_conv(p, input.channels, net.format),
                        StageSource::AvgPool,
                    ),
                };
                let next_max = match net.layers.get(i + 1) {
                    Some(Layer::Pool(p)) if p.kind == PoolKind::Max && opts.fuse_maxpool => {
                        Some(MaxPoolConfig {
                            k: p.k,
                            stride: p.stride,
                        })
                    }
                    _ => None,
                };
                let fused = lower_conv(&mut prog, i, input, &conv, source, next_max, cfg, opts)
                    .map_err(|e| name_layer(e, i))?;
                i += if fused { 2 } else { 1 };
            }
        }
    }
    Ok(prog)
}

fn name_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::Capacity(reason) | Error::Unsupported(reason) => Error::InvalidLayer { layer, reason },
        e => e,
    }
}

fn lower_maxpool(
    prog: &mut Program,
    index: usize,
    input: Shape,
    mp: MaxPoolConfig,
    cfg: &MachineConfig,
) -> Result<()> {
    let pool = crate::model::PoolLayerDesc::max(mp.k, mp.stride);
    let stored = pool
        .output_shape(input)
        .ok_or_else(|| Error::Shape(format!("layer {index}: pool does not fit {input}")))?;
    let memory = plan_memory(input, stored, 0, cfg)?;
    prog.commands.push(Command::ConfigLayer(LayerConfig {
        mode: Mode::MaxPoolOnly,
        fi: input.channels,
        fo: input.channels,
        in_rows: input.rows,
        in_cols: input.cols,
        k: mp.k,
        stride: 1,
        pad: 0,
        frac_bits: prog.format.frac_bits(),
        relu: false,
        maxpool: Some(mp),
        band_row_start: 0,
        band_rows: input.rows,
        begin_layer: true,
    }));
    for c in 0..input.channels {
        prog.commands.push(Command::ReadoutFeature {
            dest_feature_index: c,
            slot: 0,
        });
    }
    prog.plans.push(LayerPlan {
        net_layers: vec![index],
        source: StageSource::MaxPool,
        mode: Mode::MaxPoolOnly,
        input,
        conv_output: input,
        stored_output: stored,
        k: mp.k,
        k_ext: mp.k,
        sub_filters: 0,
        stride: mp.stride,
        pad: 0,
        maxpool: Some(mp),
        bands: vec![Band {
            row_start: 0,
            rows: input.rows,
        }],
        memory,
        exec_commands: 0,
        weight_words: 0,
        zero_pad_macs: 0,
        total_macs: 0,
        predicted_cycles: input.channels as u64
            * maxpool_only_cycles(input.rows, input.cols, cfg.pipeline_fill_cycles),
        predicted_mac_ops: 0,
    });
    Ok(())
}

/// 3x3 blocks of one extended kernel, in shift order.
fn sub_blocks(kernel: &[i16], k: usize) -> Result<Vec<[i16; 9]>> {
    let (ext, k_ext) = extend_filter(kernel, k)?;
    let n = k_ext / 3;
    let mut blocks = Vec::with_capacity(n * n);
    for bi in 0..n {
        for bj in 0..n {
            blocks.push(core::array::from_fn(|t| {
                ext[(3 * bi + t / 3) * k_ext + 3 * bj + t % 3]
            }));
        }
    }
    Ok(blocks)
}

/// Returns whether the following max pool was fused.
#[allow(clippy::too_many_arguments)]
fn lower_conv(
    prog: &mut Program,
    index: usize,
    input: Shape,
    conv: &ConvLayerDesc,
    source: StageSource,
    next_max: Option<MaxPoolConfig>,
    cfg: &MachineConfig,
    opts: &LowerOptions,
) -> Result<bool> {
    let out = conv
        .output_shape(input)
        .ok_or_else(|| Error::Shape(format!("layer {index}: kernel does not fit {input}")))?;
    let one = conv.k == 1;
    let mode = if one { Mode::Conv1x1 } else { Mode::Conv3x3 };
    let planes = if one && conv.fo >= 2 { 2 } else { 1 };
    let bands = plan_bands(out.rows, out.cols, planes, cfg, opts.force_bands)?;
    let maxpool = next_max.filter(|_| bands.len() == 1);
    let stored = match maxpool {
        Some(mp) => crate::model::PoolLayerDesc::max(mp.k, mp.stride)
            .output_shape(out)
            .ok_or_else(|| Error::Shape(format!("layer {}: pool does not fit {out}", index + 1)))?,
        None => out,
    };
    let band_max = bands.iter().map(|b| b.rows).max().unwrap_or(0);
    let memory = plan_memory(input, stored, band_max * out.cols * planes, cfg)?;

    let k_ext = extended_size(conv.k)?;
    let shifts: Vec<Shift> = if one {
        vec![Shift::ZERO]
    } else {
        shift_grid(conv.k)?
    };
    let n_pairs = conv.fi.div_ceil(2);
    let units: Vec<(usize, Option<usize>)> = if one {
        (0..conv.fo)
            .step_by(2)
            .map(|f| (f, (f + 1 < conv.fo).then_some(f + 1)))
            .collect()
    } else {
        (0..conv.fo).map(|f| (f, None)).collect()
    };
    // blocks[io][ii][shift]
    let blocks: Vec<Vec<Vec<[i16; 9]>>> = if one {
        Vec::new()
    } else {
        (0..conv.fo)
            .map(|io| {
                (0..conv.fi)
                    .map(|ii| sub_blocks(conv.kernel(io, ii), conv.k))
                    .collect()
            })
            .collect::<Result<_>>()?
    };

    let base = LayerConfig {
        mode,
        fi: conv.fi,
        fo: conv.fo,
        in_rows: input.rows,
        in_cols: input.cols,
        k: conv.k,
        stride: conv.stride,
        pad: conv.pad,
        frac_bits: prog.format.frac_bits(),
        relu: conv.relu,
        maxpool,
        band_row_start: 0,
        band_rows: out.rows,
        begin_layer: true,
    };
    let weights_before = prog.weight_stream.len();
    let mut execs = 0;
    let mut last_pass = None;
    let mut overlap = Overlap::default();
    let window = if one { 1 } else { 3 };
    let fill = cfg.pipeline_fill_cycles;
    let w = &mut prog.weight_stream;
    for (u, &(f1, f2)) in units.iter().enumerate() {
        for (b, band) in bands.iter().enumerate() {
            if u == 0 || bands.len() > 1 {
                prog.commands.push(Command::ConfigLayer(LayerConfig {
                    band_row_start: band.row_start,
                    band_rows: band.rows,
                    begin_layer: u == 0 && b == 0,
                    ..base
                }));
            }
            prog.commands.push(Command::ResetScratchpad);
            for p in 0..n_pairs {
                let (odd, even) = (2 * p, 2 * p + 1);
                let even_present = even < conv.fi;
                for (s, shift) in shifts.iter().enumerate() {
                    let key = (u, p, s);
                    let hold = last_pass == Some(key);
                    last_pass = Some(key);
                    prog.commands.push(Command::ExecConv {
                        shift_x: shift.x,
                        shift_y: shift.y,
                        channel_pair: p,
                        first_channel_pair: p == 0,
                        last_channel_pair: p + 1 == n_pairs,
                        hold_weights: hold,
                    });
                    execs += 1;
                    if hold {
                        continue;
                    }
                    if one {
                        let tap = |f: Option<usize>, ii: usize| f.map_or(0, |f| conv.weight(f, ii, 0, 0));
                        w.push(tap(Some(f1), odd));
                        if even_present {
                            w.push(tap(Some(f1), even));
                        }
                        w.push(tap(f2, odd));
                        if even_present {
                            w.push(tap(f2, even));
                        }
                    } else {
                        w.extend_from_slice(&blocks[f1][odd][s]);
                        if even_present {
                            w.extend_from_slice(&blocks[f1][even][s]);
                        }
                    }
                }
            }
            prog.commands.push(Command::ReadoutFeature {
                dest_feature_index: f1,
                slot: 0,
            });
            w.push(conv.bias[f1]);
            let drain = drain_cycles(band.rows, out.cols, conv.stride);
            let accum =
                (n_pairs * shifts.len()) as u64 * pass_cycles(band.rows, out.cols, conv.stride, window, fill);
            overlap.unit(accum, drain);
            if let Some(f2) = f2 {
                prog.commands.push(Command::ReadoutFeature {
                    dest_feature_index: f2,
                    slot: 1,
                });
                w.push(conv.bias[f2]);
                overlap.add_drain(drain);
            }
        }
    }
    let tail = maxpool.map_or(0, |mp| pool_tail_cycles(mp.k));
    let windows = (out.rows * out.cols) as u64;
    let predicted_mac_ops = if one {
        units.len() as u64 * 2 * conv.fi as u64 * windows
    } else {
        (conv.fo * conv.fi * shifts.len() * 9) as u64 * windows
    };
    let shape = ConvShape::square(conv.fi, conv.fo, 0, conv.k);
    let shape = ConvShape {
        out_rows: out.rows,
        out_cols: out.cols,
        ..shape
    };
    let mut net_layers = vec![index];
    if maxpool.is_some() {
        net_layers.push(index + 1);
    }
    prog.plans.push(LayerPlan {
        net_layers,
        source,
        mode,
        input,
        conv_output: out,
        stored_output: stored,
        k: conv.k,
        k_ext,
        sub_filters: shifts.len(),
        stride: conv.stride,
        pad: conv.pad,
        maxpool,
        bands,
        memory,
        exec_commands: execs,
        weight_words: prog.weight_stream.len() - weights_before,
        zero_pad_macs: shape.zero_pad_macs(),
        total_macs: shape.total_macs(),
        predicted_cycles: overlap.finish(tail),
        predicted_mac_ops,
    });
    Ok(maxpool.is_some())
}

//! Command stream: configuration and execution commands as 16-bit words.
//!
//! Every command starts with an opcode word whose top four bits select the
//! command; the low twelve bits carry small fields. Wider fields follow as
//! operand words. Unused bits must be zero.
//!
//! | opcode | command          | words | opcode-word bits                                                          | operand words |
//! |--------|------------------|-------|---------------------------------------------------------------------------|---------------|
//! | 0x0    | `ResetScratchpad`| 1     | all zero                                                                  | none |
//! | 0x1    | `ConfigLayer`    | 10    | `[11:10]` mode, `[9:8]` stride code (1,2,4 = 0,1,2), `[7]` ReLU, `[6]` max-pool enable, `[5]` max-pool K (2 = 0, 3 = 1), `[4:3]` max-pool stride - 1, `[2]` begin layer | fi, fo, in_rows, in_cols, k, pad, frac_bits, band_row_start, band_rows |
//! | 0x2    | `ExecConv`       | 2     | `[11:9]` shift_x / 3, `[8:6]` shift_y / 3, `[5]` first pair, `[4]` last pair, `[3]` hold weights | channel_pair |
//! | 0x3    | `ReadoutFeature` | 2     | `[0]` scratchpad slot                                                     | dest_feature_index |
//!
//! Mode codes: 0 = 3x3 convolution, 1 = interleaved 1x1 convolution,
//! 2 = max-pool only.
//!
//! Weights are not addressed by commands. Every `ExecConv` without the hold
//! bit pulls its operands from the DMA weight stream in order, and every
//! convolution `ReadoutFeature` pulls one bias word. A `ConfigLayer` with the
//! begin bit opens a new layer (the output set becomes the next input set);
//! without it, it only moves to another row band of the same layer. In
//! max-pool-only mode, `ReadoutFeature` streams one stored channel through the
//! pool unit.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const QUEUE_DEPTH: usize = 128;
pub const MAX_SHIFT: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Conv3x3,
    Conv1x1,
    MaxPoolOnly,
}

impl Mode {
    fn code(self) -> u16 {
        match self {
            Mode::Conv3x3 => 0,
            Mode::Conv1x1 => 1,
            Mode::MaxPoolOnly => 2,
        }
    }

    fn from_code(code: u16) -> Option<Self> {
        match code {
            0 => Some(Mode::Conv3x3),
            1 => Some(Mode::Conv1x1),
            2 => Some(Mode::MaxPoolOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaxPoolConfig {
    pub k: usize,
    pub stride: usize,
}

/// Layer (or row-band tile) configuration. Row and column counts describe the
/// layer input; the band selects a range of output rows of the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerConfig {
    pub mode: Mode,
    pub fi: usize,
    pub fo: usize,
    pub in_rows: usize,
    pub in_cols: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub frac_bits: u8,
    pub relu: bool,
    pub maxpool: Option<MaxPoolConfig>,
    pub band_row_start: usize,
    pub band_rows: usize,
    /// First configuration of a layer, as opposed to a further row band.
    pub begin_layer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    ResetScratchpad,
    ConfigLayer(LayerConfig),
    /// One pass of a 3x3 sub-filter (or 1x1 weights) over a channel pair.
    ExecConv {
        shift_x: usize,
        shift_y: usize,
        channel_pair: usize,
        first_channel_pair: bool,
        last_channel_pair: bool,
        /// Reuse the weights already in the CU engine instead of fetching.
        hold_weights: bool,
    },
    ReadoutFeature {
        dest_feature_index: usize,
        slot: usize,
    },
}

impl Command {
    pub fn word_len(&self) -> usize {
        match self {
            Command::ResetScratchpad => 1,
            Command::ConfigLayer(_) => 10,
            Command::ExecConv { .. } | Command::ReadoutFeature { .. } => 2,
        }
    }
}

const OP_RESET: u16 = 0x0;
const OP_CONFIG: u16 = 0x1;
const OP_EXEC: u16 = 0x2;
const OP_READOUT: u16 = 0x3;

fn field(name: &str, value: usize, lo: usize, hi: usize) -> Result<u16> {
    if value < lo || value > hi {
        return Err(Error::Encode(format!("{name} = {value} outside {lo}..={hi}")));
    }
    Ok(value as u16)
}

fn shift_code(name: &str, shift: usize) -> Result<u16> {
    if !shift.is_multiple_of(3) || shift > MAX_SHIFT {
        return Err(Error::Encode(format!(
            "{name} = {shift} is not a multiple of 3 in 0..=21"
        )));
    }
    Ok((shift / 3) as u16)
}

fn encode_one(cmd: &Command, out: &mut Vec<u16>) -> Result<()> {
    match *cmd {
        Command::ResetScratchpad => out.push(OP_RESET << 12),
        Command::ConfigLayer(c) => {
            let stride = match c.stride {
                1 => 0,
                2 => 1,
                4 => 2,
                s => return Err(Error::Encode(format!("stride {s} not in {{1, 2, 4}}"))),
            };
            let mut low =
                c.mode.code() << 10 | stride << 8 | (c.relu as u16) << 7 | (c.begin_layer as u16) << 2;
            if let Some(mp) = c.maxpool {
                let k = match mp.k {
                    2 => 0,
                    3 => 1,
                    k => return Err(Error::Encode(format!("max-pool K {k} not in {{2, 3}}"))),
                };
                low |= 1 << 6 | k << 5 | (field("max-pool stride", mp.stride, 1, 4)? - 1) << 3;
            }
            out.push(OP_CONFIG << 12 | low);
            out.push(field("fi", c.fi, 1, 1024)?);
            out.push(field("fo", c.fo, 1, 1024)?);
            out.push(field("in_rows", c.in_rows, 1, 0xFFFF)?);
            out.push(field("in_cols", c.in_cols, 1, 0xFFFF)?);
            out.push(field("k", c.k, 1, 23)?);
            out.push(field("pad", c.pad, 0, 0xFFFF)?);
            out.push(field("frac_bits", c.frac_bits as usize, 0, 15)?);
            out.push(field("band_row_start", c.band_row_start, 0, 0xFFFF)?);
            out.push(field("band_rows", c.band_rows, 1, 0xFFFF)?);
        }
        Command::ExecConv {
            shift_x,
            shift_y,
            channel_pair,
            first_channel_pair,
            last_channel_pair,
            hold_weights,
        } => {
            let low = shift_code("shift_x", shift_x)? << 9
                | shift_code("shift_y", shift_y)? << 6
                | (first_channel_pair as u16) << 5
                | (last_channel_pair as u16) << 4
                | (hold_weights as u16) << 3;
            out.push(OP_EXEC << 12 | low);
            out.push(field("channel_pair", channel_pair, 0, 1023)?);
        }
        Command::ReadoutFeature {
            dest_feature_index,
            slot,
        } => {
            out.push(OP_READOUT << 12 | field("slot", slot, 0, 1)?);
            out.push(field("dest_feature_index", dest_feature_index, 0, 1023)?);
        }
    }
    Ok(())
}

pub fn encode(cmds: &[Command]) -> Result<Vec<u16>> {
    let mut out = Vec::with_capacity(cmds.iter().map(Command::word_len).sum());
    for cmd in cmds {
        encode_one(cmd, &mut out)?;
    }
    Ok(out)
}

fn decode_err(offset: usize, reason: String) -> Error {
    Error::Decode { offset, reason }
}

pub fn decode(words: &[u16]) -> Result<Vec<Command>> {
    let mut cmds = Vec::new();
    let mut at = 0;
    while at < words.len() {
        let head = words[at];
        let (op, low) = (head >> 12, head & 0x0FFF);
        let operands = match op {
            OP_RESET => 0,
            OP_CONFIG => 9,
            OP_EXEC | OP_READOUT => 1,
            _ => return Err(decode_err(at, format!("unknown opcode {op:#x}"))),
        };
        if at + 1 + operands > words.len() {
            return Err(decode_err(
                at,
                format!(
                    "truncated: opcode {op:#x} needs {operands} operand words, {} remain",
                    words.len() - at - 1
                ),
            ));
        }
        let arg = |n: usize| words[at + 1 + n] as usize;
        let reserved = |mask: u16| -> Result<()> {
            if low & mask != 0 {
                Err(decode_err(at, format!("reserved bits {:#05x} set", low & mask)))
            } else {
                Ok(())
            }
        };
        let cmd = match op {
            OP_RESET => {
                reserved(0x0FFF)?;
                Command::ResetScratchpad
            }
            OP_CONFIG => {
                reserved(0x0003)?;
                let mode = Mode::from_code(low >> 10)
                    .ok_or_else(|| decode_err(at, format!("unknown mode {}", low >> 10)))?;
                let stride = match (low >> 8) & 3 {
                    0 => 1,
                    1 => 2,
                    2 => 4,
                    _ => return Err(decode_err(at, "stride code 3 is undefined".into())),
                };
                let maxpool = if low & (1 << 6) != 0 {
                    Some(MaxPoolConfig {
                        k: if low & (1 << 5) != 0 { 3 } else { 2 },
                        stride: ((low >> 3) & 3) as usize + 1,
                    })
                } else {
                    reserved(0x0038)?;
                    None
                };
                let c = LayerConfig {
                    mode,
                    fi: arg(0),
                    fo: arg(1),
                    in_rows: arg(2),
                    in_cols: arg(3),
                    k: arg(4),
                    stride,
                    pad: arg(5),
                    frac_bits: arg(6) as u8,
                    relu: low & (1 << 7) != 0,
                    maxpool,
                    band_row_start: arg(7),
                    band_rows: arg(8),
                    begin_layer: low & (1 << 2) != 0,
                };
                // Re-encoding enforces the same operand ranges as encode.
                encode_one(&Command::ConfigLayer(c), &mut Vec::new())
                    .map_err(|e| decode_err(at, format!("{e}")))?;
                Command::ConfigLayer(c)
            }
            OP_EXEC => {
                reserved(0x0007)?;
                let cmd = Command::ExecConv {
                    shift_x: 3 * ((low >> 9) & 7) as usize,
                    shift_y: 3 * ((low >> 6) & 7) as usize,
                    channel_pair: arg(0),
                    first_channel_pair: low & (1 << 5) != 0,
                    last_channel_pair: low & (1 << 4) != 0,
                    hold_weights: low & (1 << 3) != 0,
                };
                encode_one(&cmd, &mut Vec::new()).map_err(|e| decode_err(at, format!("{e}")))?;
                cmd
            }
            _ => {
                reserved(0x0FFE)?;
                let cmd = Command::ReadoutFeature {
                    dest_feature_index: arg(0),
                    slot: (low & 1) as usize,
                };
                encode_one(&cmd, &mut Vec::new()).map_err(|e| decode_err(at, format!("{e}")))?;
                cmd
            }
        };
        cmds.push(cmd);
        at += 1 + operands;
    }
    Ok(cmds)
}

/// The 128-deep command FIFO between the host driver and the decoder.
#[derive(Debug, Default)]
pub struct CommandQueue {
    fifo: VecDeque<Command>,
    max_occupancy: usize,
}

impl CommandQueue {
    pub fn new() -> Self {
        CommandQueue {
            fifo: VecDeque::with_capacity(QUEUE_DEPTH),
            max_occupancy: 0,
        }
    }

    /// Returns the command back when the FIFO is full.
    pub fn push(&mut self, cmd: Command) -> core::result::Result<(), Command> {
        if self.fifo.len() >= QUEUE_DEPTH {
            return Err(cmd);
        }
        self.fifo.push_back(cmd);
        self.max_occupancy = self.max_occupancy.max(self.fifo.len());
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Command> {
        self.fifo.pop_front()
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.fifo.len() >= QUEUE_DEPTH
    }

    pub fn max_occupancy(&self) -> usize {
        self.max_occupancy
    }
}

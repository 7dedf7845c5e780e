//! Command-driven simulator.
//!
//! A host driver keeps the 128-deep command FIFO topped up; the decoder pops
//! one command at a time. Each `ExecConv` streams one channel pair through
//! the COL buffers and CU engine for the current row band and accumulates
//! into the scratchpad; `ReadoutFeature` swaps the ping-pong halves and
//! drains one feature through bias, requantize, ReLU and the optional
//! max-pool unit into the output set.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::bank::{BankAccess, BufferBank};
use super::colbuf::ColBuffer;
use super::config::MachineConfig;
use super::cu::{cu_step_1x1, cu_step_3x3, CuWindow, PES_1X1};
use super::cycles::{
    chunks, drain_cycles, maxpool_only_cycles, origin_span, pass_cycles, pool_tail_cycles, scan_cols, Overlap,
};
use super::pool::{mux_select, MaxPoolEngine};
use super::report::{SimReport, StageReport};
use super::scratchpad::Scratchpad;
use crate::decomp::extended_size;
use crate::error::{Error, Result};
use crate::fxp::requantize_raw;
use crate::isa::{decode, Command, CommandQueue, LayerConfig, Mode};
use crate::model::{out_dim, Shape, Tensor};

#[derive(Debug, Clone)]
pub struct SimOutput {
    /// One tensor per network layer. A convolution with a fused max pool
    /// yields two: the readout tap and the pooled output.
    pub layers: Vec<Tensor>,
    pub report: SimReport,
    /// Buffer-bank accesses, when tracing is enabled.
    pub bank_log: Vec<BankAccess>,
}

#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: MachineConfig,
}

impl Simulator {
    pub fn new(cfg: MachineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Simulator { cfg })
    }

    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn run(&self, commands: &[Command], weights: &[i16], input: &Tensor) -> Result<SimOutput> {
        let mut m = Machine::new(&self.cfg, weights, input)?;
        let mut queue = CommandQueue::new();
        let mut next = 0;
        loop {
            while next < commands.len() && !queue.is_full() {
                // cannot fail: the queue was just checked for space
                let _ = queue.push(commands[next]);
                next += 1;
            }
            let Some(cmd) = queue.pop() else { break };
            let index = m.report.commands as usize;
            m.report.commands += 1;
            m.execute(cmd).map_err(|e| at_command(e, index))?;
        }
        m.report.max_queue_occupancy = queue.max_occupancy();
        m.finish().map_err(|e| at_command(e, commands.len()))
    }

    /// Decode an encoded command stream and run it.
    pub fn run_words(&self, words: &[u16], weights: &[i16], input: &Tensor) -> Result<SimOutput> {
        self.run(&decode(words)?, weights, input)
    }
}

#[derive(Debug, Clone, Copy)]
enum Held {
    Conv3x3 { odd: [i16; 9], even: [i16; 9] },
    Conv1x1([i16; 4]),
}

struct Stage {
    cfg: LayerConfig,
    /// Convolution output dims (pool input dims in max-pool-only mode).
    out_rows: usize,
    out_cols: usize,
    k_ext: usize,
    planes: usize,
    tap: Option<Tensor>,
    overlap: Overlap,
    pool_cycles: u64,
    unit_accum: u64,
    unit_execs: u64,
    unit_reset: bool,
    unit_swapped: bool,
    held: Option<Held>,
    band_starts: Vec<usize>,
    report: StageReport,
}

struct Machine<'a> {
    cfg: &'a MachineConfig,
    weights: &'a [i16],
    wpos: usize,
    bank: BufferBank,
    scratch: Scratchpad,
    stage: Option<Stage>,
    outputs: Vec<Tensor>,
    report: SimReport,
}

/// The command index is filled in by the driver loop.
fn malformed(command: &str, reason: String) -> Error {
    Error::Malformed {
        command: 0,
        reason: format!("{command}: {reason}"),
    }
}

fn at_command(e: Error, index: usize) -> Error {
    match e {
        Error::Malformed { reason, .. } => Error::Malformed {
            command: index,
            reason,
        },
        e => e,
    }
}

/// Same layer, ignoring which row band is selected.
fn same_layer(a: &LayerConfig, b: &LayerConfig) -> bool {
    let strip = |c: &LayerConfig| LayerConfig {
        band_row_start: 0,
        band_rows: 0,
        begin_layer: false,
        ..*c
    };
    strip(a) == strip(b)
}

impl<'a> Machine<'a> {
    fn new(cfg: &'a MachineConfig, weights: &'a [i16], input: &Tensor) -> Result<Self> {
        let mut bank = BufferBank::new(cfg.bank_bytes(), cfg.spill_to_dram, cfg.trace_bank_access);
        bank.load_input(input.clone())?;
        Ok(Machine {
            cfg,
            weights,
            wpos: 0,
            bank,
            scratch: Scratchpad::new(cfg.subbuffer_words(), !cfg.allow_oversize_scratchpad, None),
            stage: None,
            outputs: Vec::new(),
            report: SimReport::default(),
        })
    }

    fn fetch<const N: usize>(&mut self) -> Result<[i16; N]> {
        let available = self.weights.len() - self.wpos;
        if available < N {
            return Err(Error::WeightUnderrun { needed: N, available });
        }
        let mut out = [0i16; N];
        out.copy_from_slice(&self.weights[self.wpos..self.wpos + N]);
        self.wpos += N;
        self.report.dma_weight_bytes += 2 * N as u64;
        if let Some(st) = &mut self.stage {
            st.report.weight_words += N as u64;
        }
        Ok(out)
    }

    fn execute(&mut self, cmd: Command) -> Result<()> {
        match cmd {
            Command::ConfigLayer(c) => self.config(c),
            Command::ResetScratchpad => self.reset(),
            Command::ExecConv {
                shift_x,
                shift_y,
                channel_pair,
                hold_weights,
                ..
            } => self.exec(shift_x, shift_y, channel_pair, hold_weights),
            Command::ReadoutFeature {
                dest_feature_index,
                slot,
            } => self.readout(dest_feature_index, slot),
        }
    }

    fn config(&mut self, c: LayerConfig) -> Result<()> {
        if !c.begin_layer {
            let st = self
                .stage
                .as_mut()
                .ok_or_else(|| malformed("ConfigLayer", "row band selected before any layer began".into()))?;
            if !same_layer(&st.cfg, &c) {
                return Err(malformed(
                    "ConfigLayer",
                    "band configuration differs from its layer".into(),
                ));
            }
            check_band(&c, st.out_rows)?;
            if !st.band_starts.contains(&c.band_row_start) {
                st.band_starts.push(c.band_row_start);
                st.report.bands = st.band_starts.len();
            }
            st.cfg = c;
            return Ok(());
        }
        self.close_stage()?;

        let input = self.bank.input().tensor.shape();
        let format = self.bank.input().tensor.format();
        if input != Shape::new(c.fi, c.in_rows, c.in_cols) {
            return Err(Error::Shape(format!(
                "layer expects input {}x{}x{}, buffer bank holds {input}",
                c.fi, c.in_rows, c.in_cols
            )));
        }
        if format.frac_bits() != c.frac_bits {
            return Err(malformed(
                "ConfigLayer",
                format!("frac_bits {} but data is Q.{}", c.frac_bits, format.frac_bits()),
            ));
        }
        let (out_rows, out_cols, k_ext) = match c.mode {
            Mode::MaxPoolOnly => {
                if c.maxpool.is_none() || c.fi != c.fo {
                    return Err(malformed(
                        "ConfigLayer",
                        "max-pool-only layer needs a pool config and fi == fo".into(),
                    ));
                }
                (c.in_rows, c.in_cols, 0)
            }
            Mode::Conv1x1 | Mode::Conv3x3 => {
                if (c.mode == Mode::Conv1x1) != (c.k == 1) {
                    return Err(malformed(
                        "ConfigLayer",
                        format!("kernel {} does not run in {:?} mode", c.k, c.mode),
                    ));
                }
                let rows = out_dim(c.in_rows, c.k, c.stride, c.pad);
                let cols = out_dim(c.in_cols, c.k, c.stride, c.pad);
                let (Some(rows), Some(cols)) = (rows, cols) else {
                    return Err(Error::Shape(format!(
                        "kernel {} does not fit {}x{} with pad {}",
                        c.k, c.in_rows, c.in_cols, c.pad
                    )));
                };
                (rows, cols, extended_size(c.k)?)
            }
        };
        let stored = match c.maxpool {
            Some(mp) => {
                let rows = out_dim(out_rows, mp.k, mp.stride, 0);
                let cols = out_dim(out_cols, mp.k, mp.stride, 0);
                let (Some(rows), Some(cols)) = (rows, cols) else {
                    return Err(Error::Shape(format!(
                        "pool window {} does not fit {out_rows}x{out_cols}",
                        mp.k
                    )));
                };
                Shape::new(c.fo, rows, cols)
            }
            None => Shape::new(c.fo, out_rows, out_cols),
        };
        let fused = c.maxpool.is_some() && c.mode != Mode::MaxPoolOnly;
        if fused && (c.band_row_start != 0 || c.band_rows != out_rows) {
            return Err(malformed(
                "ConfigLayer",
                "a fused max pool needs the whole feature in one band".into(),
            ));
        }
        if c.mode != Mode::MaxPoolOnly {
            check_band(&c, out_rows)?;
        }
        self.bank.alloc_output(stored, format)?;
        let strict = self.cfg.strict_requantize.then_some(c.frac_bits);
        self.scratch = Scratchpad::new(
            self.cfg.subbuffer_words(),
            !self.cfg.allow_oversize_scratchpad,
            strict,
        );
        let planes = if c.mode == Mode::Conv1x1 && c.fo >= 2 {
            2
        } else {
            1
        };
        self.stage = Some(Stage {
            cfg: c,
            out_rows,
            out_cols,
            k_ext,
            planes,
            tap: fused.then(|| Tensor::zeros(Shape::new(c.fo, out_rows, out_cols), format)),
            overlap: Overlap::default(),
            pool_cycles: 0,
            unit_accum: 0,
            unit_execs: 0,
            unit_reset: false,
            unit_swapped: false,
            held: None,
            band_starts: vec![c.band_row_start],
            report: StageReport {
                mode: c.mode,
                fused_maxpool: fused,
                bands: 1,
                cycles: 0,
                mac_ops: 0,
                zero_pad_macs: 0,
                exec_commands: 0,
                weight_words: 0,
            },
        });
        Ok(())
    }

    fn conv_stage(&mut self, command: &str) -> Result<&mut Stage> {
        match &mut self.stage {
            Some(st) if st.cfg.mode != Mode::MaxPoolOnly => Ok(st),
            Some(_) => Err(malformed(command, "not valid in max-pool-only mode".into())),
            None => Err(malformed(command, "no layer configured".into())),
        }
    }

    fn reset(&mut self) -> Result<()> {
        let st = self.conv_stage("ResetScratchpad")?;
        if st.unit_execs > 0 && !st.unit_swapped {
            return Err(malformed(
                "ResetScratchpad",
                "accumulated results were never read out".into(),
            ));
        }
        let (planes, rows, cols) = (st.planes, st.cfg.band_rows, st.out_cols);
        st.unit_accum = 0;
        st.unit_execs = 0;
        st.unit_reset = true;
        st.unit_swapped = false;
        self.scratch.reset(planes, rows, cols)
    }

    fn exec(&mut self, sx: usize, sy: usize, pair: usize, hold: bool) -> Result<()> {
        let fill = self.cfg.pipeline_fill_cycles;
        let st = self.conv_stage("ExecConv")?;
        if !st.unit_reset || st.unit_swapped {
            return Err(malformed(
                "ExecConv",
                "scratchpad not reset for this accumulation".into(),
            ));
        }
        let c = st.cfg;
        let n_pairs = c.fi.div_ceil(2);
        if pair >= n_pairs {
            return Err(malformed(
                "ExecConv",
                format!("channel pair {pair} but layer has {n_pairs}"),
            ));
        }
        if sx >= st.k_ext || sy >= st.k_ext {
            return Err(malformed(
                "ExecConv",
                format!("shift ({sx},{sy}) outside a {0}x{0} extended kernel", st.k_ext),
            ));
        }
        let even_present = 2 * pair + 1 < c.fi;
        let held = st.held;
        let window = if c.mode == Mode::Conv1x1 { 1 } else { 3 };
        st.unit_accum += pass_cycles(c.band_rows, st.out_cols, c.stride, window, fill);
        st.unit_execs += 1;
        st.report.exec_commands += 1;

        let weights = if hold {
            held.ok_or_else(|| malformed("ExecConv", "hold with no weights loaded".into()))?
        } else if c.mode == Mode::Conv1x1 {
            // feature 1 odd, feature 1 even, feature 2 odd, feature 2 even
            let mut w = [0i16; 4];
            w[0] = self.fetch::<1>()?[0];
            if even_present {
                w[1] = self.fetch::<1>()?[0];
            }
            w[2] = self.fetch::<1>()?[0];
            if even_present {
                w[3] = self.fetch::<1>()?[0];
            }
            Held::Conv1x1(w)
        } else {
            let odd = self.fetch::<9>()?;
            let even = if even_present { self.fetch::<9>()? } else { [0; 9] };
            Held::Conv3x3 { odd, even }
        };
        match (weights, c.mode) {
            (Held::Conv3x3 { .. }, Mode::Conv3x3) | (Held::Conv1x1(_), Mode::Conv1x1) => {}
            _ => {
                return Err(malformed(
                    "ExecConv",
                    "held weights belong to another mode".into(),
                ))
            }
        }
        if let Some(st) = &mut self.stage {
            st.held = Some(weights);
        }
        match weights {
            Held::Conv3x3 { odd, even } => self.pass_3x3(pair, sx, sy, [odd, even], even_present),
            Held::Conv1x1(w) => self.pass_1x1(pair, w, even_present),
        }
    }

    fn pass_3x3(
        &mut self,
        pair: usize,
        sx: usize,
        sy: usize,
        w: [[i16; 9]; 2],
        even_present: bool,
    ) -> Result<()> {
        let st = self.stage.as_ref().expect("stage checked by exec");
        let c = st.cfg;
        let s = c.stride;
        let span = origin_span(c.band_rows, s);
        let scan = scan_cols(st.out_cols, s, 3);
        let row0 = (s * c.band_row_start + sx) as isize - c.pad as isize;
        let col0 = sy as isize - c.pad as isize;
        let sets = 1 + even_present as usize;
        // Taps of this sub-filter that fall on kernel-extension zeros.
        let real = c.k.saturating_sub(sx).min(3) * c.k.saturating_sub(sy).min(3);
        let pad_taps = (9 - real) as u64;

        let input = &self.bank.input().tensor;
        let (rows, cols) = (input.shape().rows as isize, input.shape().cols as isize);
        let planes = [
            input.plane(2 * pair),
            if even_present {
                input.plane(2 * pair + 1)
            } else {
                &[]
            },
        ];
        let mut reads = [0u64; 2];
        let mut at = |set: usize, r: isize, col: isize| -> i16 {
            if r < 0 || col < 0 || r >= rows || col >= cols {
                0
            } else {
                reads[set] += 1;
                planes[set][(r * cols + col) as usize]
            }
        };

        let mut bufs: Vec<ColBuffer> = (0..sets)
            .map(|set| {
                let r0: Vec<i16> = (0..scan).map(|j| at(set, row0, col0 + j as isize)).collect();
                let r1: Vec<i16> = (0..scan).map(|j| at(set, row0 + 1, col0 + j as isize)).collect();
                ColBuffer::primed(&r0, &r1)
            })
            .collect();
        let mut active = 0u64;
        let mut pad_macs = 0u64;
        for ch in 0..chunks(span) {
            let mut win = [[CuWindow::default(); 8]; 2];
            let rbase = row0 + 8 * ch as isize + 2;
            for j in 0..scan {
                let col = col0 + j as isize;
                for set in 0..sets {
                    let new8: [i16; 8] = core::array::from_fn(|p| at(set, rbase + p as isize, col));
                    let rows10 = bufs[set].expand(j, new8);
                    for (k, cu) in win[set].iter_mut().enumerate() {
                        cu.shift_in([rows10[k], rows10[k + 1], rows10[k + 2]]);
                    }
                }
                if j < 2 || (j - 2) % s != 0 {
                    continue;
                }
                let y = (j - 2) / s;
                for k in 0..8 {
                    let o = 8 * ch + k;
                    if o >= span || o % s != 0 {
                        // EN_Ctrl gates this CU
                        continue;
                    }
                    let mut partial = 0i64;
                    for set in 0..sets {
                        let (p, pes) = cu_step_3x3(&win[set][k].window(), &w[set]);
                        partial += p;
                        active += pes as u64;
                        pad_macs += pad_taps;
                    }
                    self.scratch.accumulate(0, o / s, y, partial)?;
                }
            }
        }
        self.bank.note_read(2 * pair, reads[0]);
        if even_present {
            self.bank.note_read(2 * pair + 1, reads[1]);
        }
        self.count_macs(active, pad_macs);
        Ok(())
    }

    fn pass_1x1(&mut self, pair: usize, w: [i16; 4], even_present: bool) -> Result<()> {
        let st = self.stage.as_ref().expect("stage checked by exec");
        let c = st.cfg;
        let s = c.stride;
        let span = origin_span(c.band_rows, s);
        let scan = scan_cols(st.out_cols, s, 1);
        let two = st.planes == 2;
        let row0 = (s * c.band_row_start) as isize - c.pad as isize;
        let col0 = -(c.pad as isize);

        let input = &self.bank.input().tensor;
        let (rows, cols) = (input.shape().rows as isize, input.shape().cols as isize);
        let planes = [
            input.plane(2 * pair),
            if even_present {
                input.plane(2 * pair + 1)
            } else {
                &[]
            },
        ];
        let mut reads = [0u64; 2];
        let mut at = |set: usize, r: isize, col: isize| -> i16 {
            if r < 0 || col < 0 || r >= rows || col >= cols {
                0
            } else {
                reads[set] += 1;
                planes[set][(r * cols + col) as usize]
            }
        };
        let pes_per_cu = PES_1X1 as u64 * (1 + even_present as u64);
        let mut active = 0u64;
        for ch in 0..chunks(span) {
            for j in 0..scan {
                let col = col0 + j as isize;
                for k in 0..8 {
                    let o = 8 * ch + k;
                    let r = row0 + o as isize;
                    let odd = at(0, r, col);
                    let even = if even_present { at(1, r, col) } else { 0 };
                    if o >= span || o % s != 0 || j % s != 0 {
                        continue;
                    }
                    let (f1, f2) = cu_step_1x1(odd, even, w);
                    active += pes_per_cu;
                    self.scratch.accumulate(0, o / s, j / s, f1)?;
                    if two {
                        self.scratch.accumulate(1, o / s, j / s, f2)?;
                    }
                }
            }
        }
        self.bank.note_read(2 * pair, reads[0]);
        if even_present {
            self.bank.note_read(2 * pair + 1, reads[1]);
        }
        self.count_macs(active, 0);
        Ok(())
    }

    fn count_macs(&mut self, active: u64, pad_macs: u64) {
        self.report.active_pe_cycles += active;
        self.report.mac_ops += active;
        self.report.zero_pad_macs += pad_macs;
        if let Some(st) = &mut self.stage {
            st.report.mac_ops += active;
            st.report.zero_pad_macs += pad_macs;
        }
    }

    fn readout(&mut self, dest: usize, slot: usize) -> Result<()> {
        let st = self
            .stage
            .as_ref()
            .ok_or_else(|| malformed("ReadoutFeature", "no layer configured".into()))?;
        if dest >= st.cfg.fo {
            return Err(malformed(
                "ReadoutFeature",
                format!("feature {dest} but layer has {}", st.cfg.fo),
            ));
        }
        if st.cfg.mode == Mode::MaxPoolOnly {
            return self.pool_channel(dest);
        }
        if slot >= st.planes {
            return Err(malformed(
                "ReadoutFeature",
                format!("slot {slot} but the scratchpad holds {} plane(s)", st.planes),
            ));
        }
        if !st.unit_reset || st.unit_execs == 0 {
            return Err(malformed("ReadoutFeature", "nothing accumulated".into()));
        }
        let bias = self.fetch::<1>()?[0];
        self.report.dma_bias_bytes += 2;

        let st = self.stage.as_mut().expect("checked above");
        let c = st.cfg;
        let drain = drain_cycles(c.band_rows, st.out_cols, c.stride);
        if !st.unit_swapped {
            self.scratch.swap();
            st.unit_swapped = true;
            st.overlap.unit(st.unit_accum, drain);
        } else {
            st.overlap.add_drain(drain);
        }

        let f = c.frac_bits;
        let s = c.stride;
        let span = origin_span(c.band_rows, s);
        let out_cols = st.out_cols;
        let mut engine = c
            .maxpool
            .map(|mp| MaxPoolEngine::new(mp.k, mp.stride, st.out_rows, out_cols));
        let buf = self.scratch.draining();
        let plane = buf.plane(slot);
        for ch in 0..chunks(span) {
            let valid = (8 * ch..(8 * ch + 8).min(span)).filter(|o| o % s == 0).count();
            let first = 8 * ch / s;
            let mut rows = vec![vec![0i16; out_cols]; valid];
            for y in 0..out_cols {
                // one scratchpad column address: the eight CU rows of this chunk
                let column: [i16; 8] = core::array::from_fn(|k| {
                    let o = 8 * ch + k;
                    if o < span && o % s == 0 {
                        let acc = plane[(o / s) * out_cols + y] + ((bias as i64) << f);
                        let v = requantize_raw(acc, 2 * f, f);
                        if c.relu {
                            v.max(0)
                        } else {
                            v
                        }
                    } else {
                        0
                    }
                });
                for (r, v) in mux_select(&column, s).into_iter().take(valid).enumerate() {
                    rows[r][y] = v;
                }
            }
            for (r, row) in rows.iter().enumerate() {
                let out_row = c.band_row_start + first + r;
                match (&mut engine, &mut st.tap) {
                    (Some(engine), Some(tap)) => {
                        let start = (dest * st.out_rows + out_row) * out_cols;
                        tap.raw_mut()[start..start + out_cols].copy_from_slice(row);
                        for (pr, pooled) in engine.push_row(row) {
                            self.bank.write(dest, pr, 0, &pooled);
                        }
                    }
                    _ => self.bank.write(dest, out_row, 0, row),
                }
            }
        }
        Ok(())
    }

    /// Stream one stored channel through the max-pool unit.
    fn pool_channel(&mut self, channel: usize) -> Result<()> {
        let fill = self.cfg.pipeline_fill_cycles;
        let st = self.stage.as_mut().expect("caller checked");
        let mp = st.cfg.maxpool.expect("checked at config");
        let (rows, cols) = (st.out_rows, st.out_cols);
        st.pool_cycles += maxpool_only_cycles(rows, cols, fill);
        let mut engine = MaxPoolEngine::new(mp.k, mp.stride, rows, cols);
        let plane = self.bank.input().tensor.plane(channel).to_vec();
        self.bank.note_read(channel, (rows * cols) as u64);
        for r in 0..rows {
            for (pr, pooled) in engine.push_row(&plane[r * cols..(r + 1) * cols]) {
                self.bank.write(channel, pr, 0, &pooled);
            }
        }
        Ok(())
    }

    fn close_stage(&mut self) -> Result<()> {
        let Some(mut st) = self.stage.take() else {
            return Ok(());
        };
        if st.unit_execs > 0 && !st.unit_swapped {
            return Err(malformed(
                "ConfigLayer",
                "layer ended with results still accumulating".into(),
            ));
        }
        st.report.cycles = match st.cfg.mode {
            Mode::MaxPoolOnly => st.pool_cycles,
            _ => {
                let tail = match (st.tap.is_some(), st.cfg.maxpool) {
                    (true, Some(mp)) => pool_tail_cycles(mp.k),
                    _ => 0,
                };
                st.overlap.finish(tail)
            }
        };
        self.report.cycles += st.report.cycles;
        if let Some(tap) = st.tap.take() {
            self.outputs.push(tap);
        }
        self.outputs.push(self.bank.take_output());
        self.report.stages.push(st.report);
        self.bank.swap();
        Ok(())
    }

    fn finish(mut self) -> Result<SimOutput> {
        self.close_stage()?;
        let left = self.weights.len() - self.wpos;
        if left > 0 {
            return Err(Error::Weights(format!("{left} weight words left unconsumed")));
        }
        self.report.active_pe_cycles = self.report.mac_ops;
        self.report.bank_reads = self.bank.reads;
        self.report.bank_writes = self.bank.writes;
        self.report.dma_activation_bytes = self.bank.dma_activation_bytes;
        self.report
            .finish(self.cfg.total_pes(), self.cfg.clock_hz, self.cfg.peak_gops());
        Ok(SimOutput {
            layers: self.outputs,
            report: self.report,
            bank_log: self.bank.log.take().unwrap_or_default(),
        })
    }
}

fn check_band(c: &LayerConfig, out_rows: usize) -> Result<()> {
    if c.band_rows == 0 || c.band_row_start + c.band_rows > out_rows {
        return Err(malformed(
            "ConfigLayer",
            format!(
                "band rows {}..{} outside {out_rows} output rows",
                c.band_row_start,
                c.band_row_start + c.band_rows
            ),
        ));
    }
    Ok(())
}

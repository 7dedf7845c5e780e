//! Human-readable compiler plans and the efficiency/throughput table.

use std::fmt::Write;

use streamcnn_core::compiler::{LayerPlan, StageSource};
use streamcnn_core::decomp::{efficiency_loss, efficiency_loss_shapes, ConvShape, EfficiencyLoss};
use streamcnn_core::{Layer, MachineConfig, NetworkDesc, PoolKind, Program};

use crate::error::Result;
use crate::report::mode_name;

fn source_name(s: StageSource) -> &'static str {
    match s {
        StageSource::Conv => "conv",
        StageSource::AvgPool => "avgpool",
        StageSource::MaxPool => "maxpool",
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "dram"
    } else {
        "sram"
    }
}

fn plan_stage(s: &mut String, i: usize, p: &LayerPlan) {
    let layers: Vec<String> = p.net_layers.iter().map(usize::to_string).collect();
    writeln!(
        s,
        "stage {i}: {} ({}) net layers {}",
        mode_name(p.mode),
        source_name(p.source),
        layers.join(",")
    )
    .unwrap();
    writeln!(
        s,
        "  input {}  conv output {}  stored {}",
        p.input, p.conv_output, p.stored_output
    )
    .unwrap();
    let pool = match p.maxpool {
        Some(mp) => format!("max {}/{}", mp.k, mp.stride),
        None => "none".into(),
    };
    writeln!(
        s,
        "  k {}  k_ext {}  sub-filters {}  stride {}  pad {}  fused pool {}",
        p.k, p.k_ext, p.sub_filters, p.stride, p.pad, pool
    )
    .unwrap();
    let bands: Vec<String> = p
        .bands
        .iter()
        .map(|b| format!("{}+{}", b.row_start, b.rows))
        .collect();
    writeln!(s, "  bands {}: {}", p.bands.len(), bands.join(" ")).unwrap();
    let m = &p.memory;
    writeln!(
        s,
        "  memory input A {} B {} ({})  output A {} B {} ({})  bank capacity {}",
        m.input_bank_a,
        m.input_bank_b,
        yes_no(m.input_in_dram),
        m.output_bank_a,
        m.output_bank_b,
        yes_no(m.output_in_dram),
        m.bank_capacity
    )
    .unwrap();
    writeln!(
        s,
        "  scratchpad {} of {} words per sub-buffer",
        m.scratch_words, m.subbuffer_words
    )
    .unwrap();
    writeln!(
        s,
        "  exec commands {}  weight words {}  zero-pad MACs {} of {}",
        p.exec_commands, p.weight_words, p.zero_pad_macs, p.total_macs
    )
    .unwrap();
    writeln!(
        s,
        "  predicted cycles {}  predicted MACs {}",
        p.predicted_cycles, p.predicted_mac_ops
    )
    .unwrap();
}

pub fn plan_text(prog: &Program, cfg: &MachineConfig) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "program: {} commands, {} weight words, Q{}.{}",
        prog.commands.len(),
        prog.weight_stream.len(),
        15 - prog.format.frac_bits(),
        prog.format.frac_bits()
    )
    .unwrap();
    for (i, p) in prog.plans.iter().enumerate() {
        plan_stage(&mut s, i, p);
    }
    writeln!(
        s,
        "total: predicted cycles {}  MACs {}  utilization {:.4}  GOPS {:.3} at {:.0} Hz",
        prog.predicted_cycles(),
        prog.predicted_mac_ops(),
        prog.predicted_utilization(cfg),
        prog.predicted_gops(cfg),
        cfg.clock_hz
    )
    .unwrap();
    s
}

/// One row of the analysis table. Throughput fields are absent for
/// reference topologies, which are only analysed for efficiency loss.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub layer: usize,
    pub kind: String,
    pub fi: usize,
    pub fo: usize,
    pub k: String,
    pub out: String,
    pub zero_pad_macs: u64,
    pub total_macs: u64,
    pub cycles: Option<u64>,
    pub utilization: Option<f64>,
    pub gops: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub rows: Vec<AnalysisRow>,
    pub loss: EfficiencyLoss,
    pub cycles: Option<u64>,
    pub utilization: Option<f64>,
    pub gops: Option<f64>,
    pub clock_hz: f64,
}

fn ratio(mac_ops: u64, cycles: u64, cfg: &MachineConfig) -> (f64, f64) {
    if cycles == 0 {
        return (0.0, 0.0);
    }
    let util = mac_ops as f64 / (cfg.total_pes() as f64 * cycles as f64);
    (util, 2.0 * mac_ops as f64 * cfg.clock_hz / cycles as f64 / 1e9)
}

/// Efficiency loss from the layer shapes, throughput from the compiler's
/// cycle prediction. A fused max pool is charged to its convolution.
pub fn analyze_network(net: &NetworkDesc, cfg: &MachineConfig) -> Result<Analysis> {
    let loss = efficiency_loss(net)?;
    let prog = streamcnn_core::lower(net, cfg, &Default::default())?;
    let outs = net.output_shapes()?;
    let mut rows = Vec::new();
    for plan in &prog.plans {
        let index = plan.net_layers[0];
        let (kind, fi, fo, k) = match &net.layers[index] {
            Layer::Conv(c) => ("conv", c.fi, c.fo, c.k),
            Layer::Pool(p) => {
                let kind = if p.kind == PoolKind::Max {
                    "maxpool"
                } else {
                    "avgpool"
                };
                (kind, plan.input.channels, plan.input.channels, p.k)
            }
        };
        let kind = if plan.net_layers.len() > 1 {
            format!("{kind}+maxpool")
        } else {
            kind.to_string()
        };
        let el = loss.layers.iter().find(|l| l.layer == index);
        let (util, gops) = ratio(plan.predicted_mac_ops, plan.predicted_cycles, cfg);
        let out = outs[*plan.net_layers.last().unwrap()];
        rows.push(AnalysisRow {
            layer: index,
            kind,
            fi,
            fo,
            k: k.to_string(),
            out: format!("{}x{}", out.rows, out.cols),
            zero_pad_macs: el.map_or(0, |l| l.zero_pad_macs),
            total_macs: el.map_or(0, |l| l.total_macs),
            cycles: Some(plan.predicted_cycles),
            utilization: Some(util),
            gops: Some(gops),
        });
    }
    let (util, gops) = ratio(prog.predicted_mac_ops(), prog.predicted_cycles(), cfg);
    Ok(Analysis {
        rows,
        loss,
        cycles: Some(prog.predicted_cycles()),
        utilization: Some(util),
        gops: Some(gops),
        clock_hz: cfg.clock_hz,
    })
}

pub fn analyze_shapes(shapes: &[ConvShape], cfg: &MachineConfig) -> Analysis {
    let loss = efficiency_loss_shapes(shapes);
    let rows = shapes
        .iter()
        .zip(&loss.layers)
        .map(|(s, l)| AnalysisRow {
            layer: l.layer,
            kind: "conv".into(),
            fi: s.fi,
            fo: s.fo,
            k: if s.kh == s.kw {
                s.kh.to_string()
            } else {
                format!("{}x{}", s.kh, s.kw)
            },
            out: format!("{}x{}", s.out_rows, s.out_cols),
            zero_pad_macs: l.zero_pad_macs,
            total_macs: l.total_macs,
            cycles: None,
            utilization: None,
            gops: None,
        })
        .collect();
    Analysis {
        rows,
        loss,
        cycles: None,
        utilization: None,
        gops: None,
        clock_hz: cfg.clock_hz,
    }
}

fn pct(zero: u64, total: u64) -> String {
    if total == 0 {
        "-".into()
    } else {
        format!("{:.2}%", 100.0 * zero as f64 / total as f64)
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "-".into(), f)
}

pub fn analysis_table(a: &Analysis) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:>5} {:<14} {:>5} {:>5} {:>5} {:>9} {:>8} {:>12} {:>7} {:>8}",
        "layer", "type", "fi", "fo", "k", "out", "EL", "cycles", "util", "GOPS"
    )
    .unwrap();
    for r in &a.rows {
        writeln!(
            s,
            "{:>5} {:<14} {:>5} {:>5} {:>5} {:>9} {:>8} {:>12} {:>7} {:>8}",
            r.layer,
            r.kind,
            r.fi,
            r.fo,
            r.k,
            r.out,
            pct(r.zero_pad_macs, r.total_macs),
            opt(r.cycles, |c| c.to_string()),
            opt(r.utilization, |u| format!("{u:.4}")),
            opt(r.gops, |g| format!("{g:.2}")),
        )
        .unwrap();
    }
    writeln!(
        s,
        "{:>5} {:<14} {:>5} {:>5} {:>5} {:>9} {:>8} {:>12} {:>7} {:>8}",
        "total",
        "",
        "",
        "",
        "",
        "",
        pct(a.loss.zero_pad_macs, a.loss.total_macs),
        opt(a.cycles, |c| c.to_string()),
        opt(a.utilization, |u| format!("{u:.4}")),
        opt(a.gops, |g| format!("{g:.2}")),
    )
    .unwrap();
    writeln!(
        s,
        "zero-pad MACs {} of {}; clock {:.0} Hz",
        a.loss.zero_pad_macs, a.loss.total_macs, a.clock_hz
    )
    .unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfile::parse_network;

    fn single(k: usize, rows: usize) -> NetworkDesc {
        parse_network(&format!(
            "[input]\nchannels = 1\nrows = {rows}\ncols = {rows}\n[format]\nfrac_bits = 8\n\
             [[layers]]\ntype = \"conv\"\nfo = 1\nk = {k}\nstride = 1\n"
        ))
        .unwrap()
    }

    #[test]
    fn eleven_by_eleven() {
        let a = analyze_network(&single(11, 30), &MachineConfig::default()).unwrap();
        assert_eq!(a.loss.zero_pad_macs * 144, a.loss.total_macs * 23);
        assert!(analysis_table(&a).contains("15.97%"));
    }

    #[test]
    fn all_three_by_three() {
        let a = analyze_network(&single(3, 20), &MachineConfig::default()).unwrap();
        assert_eq!(a.loss.zero_pad_macs, 0);
        assert!(analysis_table(&a).contains("0.00%"));
    }

    #[test]
    fn fused_pool_is_one_row() {
        let net = parse_network(include_str!("../nets/traffic_sign.toml")).unwrap();
        let a = analyze_network(&net, &MachineConfig::default()).unwrap();
        let kinds: Vec<&str> = a.rows.iter().map(|r| r.kind.as_str()).collect();
        assert_eq!(kinds, ["conv+maxpool", "conv+maxpool", "conv"]);
        let sum: u64 = a.rows.iter().filter_map(|r| r.cycles).sum();
        assert_eq!(Some(sum), a.cycles);
    }

    #[test]
    fn plan_lists_sub_filters() {
        let net = parse_network(include_str!("../nets/traffic_sign.toml")).unwrap();
        let cfg = MachineConfig::default();
        let prog = streamcnn_core::lower(&net, &cfg, &Default::default()).unwrap();
        let text = plan_text(&prog, &cfg);
        assert_eq!(text.matches("sub-filters 4 ").count(), 3, "{text}");
    }
}

//! Simulation report as `key = value` text or JSON.

use std::fmt::Write;

use serde::Serialize;
use streamcnn_core::isa::Mode;
use streamcnn_core::SimReport;

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Conv3x3 => "conv3x3",
        Mode::Conv1x1 => "conv1x1",
        Mode::MaxPoolOnly => "maxpool",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageDoc {
    pub mode: &'static str,
    pub fused_maxpool: bool,
    pub bands: usize,
    pub cycles: u64,
    pub mac_ops: u64,
    pub zero_pad_macs: u64,
    pub exec_commands: u64,
    pub weight_words: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDoc {
    pub cycles: u64,
    pub mac_ops: u64,
    pub active_pe_cycles: u64,
    pub idle_pe_cycles: u64,
    pub utilization: f64,
    pub zero_pad_macs: u64,
    pub dma_weight_bytes: u64,
    pub dma_bias_bytes: u64,
    pub dma_activation_bytes: u64,
    pub bank_reads: u64,
    pub bank_writes: u64,
    pub effective_gops: f64,
    pub peak_gops: f64,
    pub clock_hz: f64,
    pub commands: u64,
    pub max_queue_occupancy: usize,
    pub stages: Vec<StageDoc>,
}

impl From<&SimReport> for ReportDoc {
    fn from(r: &SimReport) -> Self {
        ReportDoc {
            cycles: r.cycles,
            mac_ops: r.mac_ops,
            active_pe_cycles: r.active_pe_cycles,
            idle_pe_cycles: r.idle_pe_cycles,
            utilization: r.utilization,
            zero_pad_macs: r.zero_pad_macs,
            dma_weight_bytes: r.dma_weight_bytes,
            dma_bias_bytes: r.dma_bias_bytes,
            dma_activation_bytes: r.dma_activation_bytes,
            bank_reads: r.bank_reads,
            bank_writes: r.bank_writes,
            effective_gops: r.effective_gops,
            peak_gops: r.peak_gops,
            clock_hz: r.clock_hz,
            commands: r.commands,
            max_queue_occupancy: r.max_queue_occupancy,
            stages: r
                .stages
                .iter()
                .map(|s| StageDoc {
                    mode: mode_name(s.mode),
                    fused_maxpool: s.fused_maxpool,
                    bands: s.bands,
                    cycles: s.cycles,
                    mac_ops: s.mac_ops,
                    zero_pad_macs: s.zero_pad_macs,
                    exec_commands: s.exec_commands,
                    weight_words: s.weight_words,
                })
                .collect(),
        }
    }
}

pub fn report_text(r: &SimReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
    kv("cycles", r.cycles.to_string());
    kv("mac_ops", r.mac_ops.to_string());
    kv("active_pe_cycles", r.active_pe_cycles.to_string());
    kv("idle_pe_cycles", r.idle_pe_cycles.to_string());
    kv("utilization", format!("{:.6}", r.utilization));
    kv("zero_pad_macs", r.zero_pad_macs.to_string());
    kv("dma_weight_bytes", r.dma_weight_bytes.to_string());
    kv("dma_bias_bytes", r.dma_bias_bytes.to_string());
    kv("dma_activation_bytes", r.dma_activation_bytes.to_string());
    kv("bank_reads", r.bank_reads.to_string());
    kv("bank_writes", r.bank_writes.to_string());
    kv("effective_gops", format!("{:.3}", r.effective_gops));
    kv("peak_gops", format!("{:.3}", r.peak_gops));
    kv("clock_hz", format!("{:.0}", r.clock_hz));
    kv("commands", r.commands.to_string());
    kv("max_queue_occupancy", r.max_queue_occupancy.to_string());
    for (i, st) in r.stages.iter().enumerate() {
        kv(&format!("stage.{i}.mode"), mode_name(st.mode).to_string());
        kv(&format!("stage.{i}.fused_maxpool"), st.fused_maxpool.to_string());
        kv(&format!("stage.{i}.bands"), st.bands.to_string());
        kv(&format!("stage.{i}.cycles"), st.cycles.to_string());
        kv(&format!("stage.{i}.mac_ops"), st.mac_ops.to_string());
        kv(&format!("stage.{i}.zero_pad_macs"), st.zero_pad_macs.to_string());
        kv(&format!("stage.{i}.exec_commands"), st.exec_commands.to_string());
        kv(&format!("stage.{i}.weight_words"), st.weight_words.to_string());
    }
    s
}

pub fn report_json(r: &SimReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportDoc::from(r)).expect("report serializes");
    s.push('\n');
    s
}

/// Look up one key of a text report.
pub fn report_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|line| {
        let (k, v) = line.split_once(" = ")?;
        (k == key).then_some(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SimReport {
        SimReport {
            cycles: 100,
            mac_ops: 7200,
            active_pe_cycles: 7200,
            idle_pe_cycles: 7200,
            utilization: 0.5,
            effective_gops: 72.0,
            peak_gops: 144.0,
            clock_hz: 5e8,
            ..SimReport::default()
        }
    }

    #[test]
    fn text_keys() {
        let text = report_text(&sample());
        assert_eq!(report_value(&text, "cycles"), Some("100"));
        assert_eq!(report_value(&text, "utilization"), Some("0.500000"));
        assert_eq!(report_value(&text, "clock_hz"), Some("500000000"));
        assert_eq!(report_value(&text, "nope"), None);
    }

    #[test]
    fn json_matches_text() {
        let v: serde_json::Value = serde_json::from_str(&report_json(&sample())).unwrap();
        assert_eq!(v["cycles"], 100);
        assert_eq!(v["mac_ops"], 7200);
        assert_eq!(v["utilization"], 0.5);
        assert!(v["stages"].as_array().unwrap().is_empty());
    }
}

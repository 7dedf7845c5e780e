//! The compile / run / compare flows behind the CLI, as library calls.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streamcnn_core::isa::{decode, Command};
use streamcnn_core::oracle::run_network;
use streamcnn_core::{
    lower, FxpFormat, LowerOptions, MachineConfig, NetworkDesc, Program, Shape, SimOutput, Simulator, Tensor,
};

use crate::analysis::plan_text;
use crate::error::{Error, Result};
use crate::formats::{
    read_i16_file, read_u16_file, save_tensor, write_bytes, write_i16_file, write_u16_file,
};
use crate::report::report_text;

pub const PROGRAM_FILE: &str = "program.bin";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const PLAN_FILE: &str = "plan.txt";
pub const REPORT_FILE: &str = "report.txt";

pub fn layer_file(index: usize) -> String {
    format!("layer_{index:02}.bin")
}

/// Lower `net` and write the command stream, the ordered weight stream and
/// the plan into `out_dir`.
pub fn compile_to_dir(
    net: &NetworkDesc,
    cfg: &MachineConfig,
    opts: &LowerOptions,
    out_dir: &Path,
) -> Result<Program> {
    let prog = lower(net, cfg, opts)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_u16_file(&out_dir.join(PROGRAM_FILE), &prog.encode()?)?;
    write_i16_file(&out_dir.join(WEIGHTS_FILE), &prog.weight_stream)?;
    write_bytes(&out_dir.join(PLAN_FILE), plan_text(&prog, cfg).as_bytes())?;
    Ok(prog)
}

/// A compiled program read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedProgram {
    pub commands: Vec<Command>,
    pub weights: Vec<i16>,
    /// Shape and format of the first stage's input.
    pub input: Shape,
    pub format: FxpFormat,
}

pub fn load_program(dir: &Path) -> Result<LoadedProgram> {
    let path = dir.join(PROGRAM_FILE);
    let words = read_u16_file(&path)?;
    let weights = read_i16_file(&dir.join(WEIGHTS_FILE))?;
    let commands = decode(&words).map_err(|e| Error::format(&path, e.to_string()))?;
    let Some(Command::ConfigLayer(first)) = commands.first() else {
        return Err(Error::format(
            &path,
            "program does not start with a layer configuration",
        ));
    };
    Ok(LoadedProgram {
        input: Shape::new(first.fi, first.in_rows, first.in_cols),
        format: FxpFormat::new(first.frac_bits)?,
        commands,
        weights,
    })
}

/// Simulate and write `layer_NN.bin` per network layer plus `report.txt`.
pub fn run_to_dir(
    prog: &LoadedProgram,
    input: &Tensor,
    cfg: &MachineConfig,
    out_dir: &Path,
) -> Result<SimOutput> {
    let out = Simulator::new(cfg.clone())?.run(&prog.commands, &prog.weights, input)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (i, t) in out.layers.iter().enumerate() {
        save_tensor(&out_dir.join(layer_file(i)), t)?;
    }
    write_bytes(&out_dir.join(REPORT_FILE), report_text(&out.report).as_bytes())?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Mismatch {
        layer: usize,
        channel: usize,
        row: usize,
        col: usize,
        sim: i16,
        oracle: i16,
    },
    /// Layer counts or shapes differ.
    Structure(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        *self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Mismatch {
                layer,
                channel,
                row,
                col,
                sim,
                oracle,
            } => write!(
                f,
                "FAIL layer {layer} channel {channel} row {row} col {col}: sim {sim} oracle {oracle}"
            ),
            Verdict::Structure(msg) => write!(f, "FAIL {msg}"),
        }
    }
}

/// First position where the simulator and oracle outputs differ.
pub fn diff_layers(sim: &[Tensor], oracle: &[Tensor]) -> Verdict {
    if sim.len() != oracle.len() {
        return Verdict::Structure(format!(
            "{} layers simulated, oracle has {}",
            sim.len(),
            oracle.len()
        ));
    }
    for (layer, (got, want)) in sim.iter().zip(oracle).enumerate() {
        if got.shape() != want.shape() {
            return Verdict::Structure(format!(
                "layer {layer} shape {} vs oracle {}",
                got.shape(),
                want.shape()
            ));
        }
        if let Some(i) = got.raw().iter().zip(want.raw()).position(|(a, b)| a != b) {
            let s = want.shape();
            return Verdict::Mismatch {
                layer,
                channel: i / s.plane(),
                row: i % s.plane() / s.cols,
                col: i % s.cols,
                sim: got.raw()[i],
                oracle: want.raw()[i],
            };
        }
    }
    Verdict::Pass
}

/// Run the oracle and the simulator side by side. `perturb` flips the low
/// bit of one weight-stream word before simulation.
pub fn compare(
    net: &NetworkDesc,
    input: &Tensor,
    cfg: &MachineConfig,
    opts: &LowerOptions,
    perturb: Option<usize>,
) -> Result<(Verdict, SimOutput)> {
    let mut prog = lower(net, cfg, opts)?;
    if let Some(i) = perturb {
        let n = prog.weight_stream.len();
        let w = prog.weight_stream.get_mut(i).ok_or_else(|| {
            Error::Core(streamcnn_core::Error::Weights(format!(
                "cannot perturb word {i}: stream has {n}"
            )))
        })?;
        *w ^= 1;
    }
    let sim = Simulator::new(cfg.clone())?;
    let (expected, got) = std::thread::scope(|s| {
        let oracle = s.spawn(|| run_network(net, input));
        let got = sim.run(&prog.commands, &prog.weight_stream, input);
        (oracle.join().expect("oracle thread panicked"), got)
    });
    let (expected, got) = (expected?, got?);
    Ok((diff_layers(&got.layers, &expected), got))
}

/// Seed for random test data: `STREAMCNN_SEED`, else 0.
pub fn seed_from_env() -> Result<u64> {
    match std::env::var("STREAMCNN_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("STREAMCNN_SEED={s:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

pub fn random_words(seed: u64, n: usize, lo: i16, hi: i16) -> Vec<i16> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfile::parse_network;

    #[test]
    fn verdict_text() {
        let v = Verdict::Mismatch {
            layer: 2,
            channel: 1,
            row: 0,
            col: 3,
            sim: 5,
            oracle: 6,
        };
        assert_eq!(
            v.to_string(),
            "FAIL layer 2 channel 1 row 0 col 3: sim 5 oracle 6"
        );
        assert_eq!(Verdict::Pass.to_string(), "PASS");
    }

    #[test]
    fn perturbed_weight_fails() {
        let mut net = parse_network(include_str!("../nets/traffic_sign.toml")).unwrap();
        net.load_weight_words(&random_words(1, net.weight_word_count(), -64, 64))
            .unwrap();
        let input =
            Tensor::from_raw(net.input, net.format, random_words(2, net.input.len(), -256, 256)).unwrap();
        let cfg = MachineConfig::default();
        let opts = LowerOptions::default();
        let (v, _) = compare(&net, &input, &cfg, &opts, None).unwrap();
        assert!(v.is_pass(), "{v}");
        let (v, _) = compare(&net, &input, &cfg, &opts, Some(0)).unwrap();
        assert!(matches!(v, Verdict::Mismatch { layer: 0, .. }), "{v}");
    }

    #[test]
    fn seeded_words_repeat() {
        assert_eq!(random_words(9, 50, -3, 3), random_words(9, 50, -3, 3));
        assert_ne!(random_words(9, 50, -3, 3), random_words(10, 50, -3, 3));
        assert!(random_words(9, 500, -3, 3).iter().all(|w| (-3..=3).contains(w)));
    }
}

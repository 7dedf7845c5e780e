use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use streamcnn::analysis::{analysis_table, analyze_network, analyze_shapes};
use streamcnn::formats::{load_tensor, load_weights, read_text, write_bytes, write_i16_file};
use streamcnn::pipeline::{compare, compile_to_dir, load_program, random_words, run_to_dir, seed_from_env};
use streamcnn::report::{report_json, report_text};
use streamcnn::{parse_network_with, Error};
use streamcnn_core::reference;
use streamcnn_core::{LowerOptions, MachineConfig, NetworkDesc, Shape, SimReport};

const EXIT_COMPARE_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "streamcnn",
    version,
    about = "Compile, simulate and analyse CNNs on the streaming accelerator model"
)]
struct Cli {
    #[command(flatten)]
    machine: MachineArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct MachineArgs {
    /// Override the network's fraction bits.
    #[arg(long, global = true)]
    frac_bits: Option<u8>,
    /// Requantize the scratchpad to 16 bits after every accumulation.
    #[arg(long, global = true)]
    strict_requantize: bool,
    /// Cut every convolution into N row bands.
    #[arg(long, global = true, value_name = "N")]
    force_bands: Option<usize>,
    #[arg(long, global = true, value_name = "H", default_value_t = 5e8)]
    clock_hz: f64,
    /// Also write the report (or analysis table) here; `.json` selects JSON.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower a network to program.bin, weights.bin and plan.txt.
    Compile {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a compiled program on one input tensor.
    Run {
        /// Directory written by `compile`.
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diff every layer of the simulator against the reference evaluator.
    Compare {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Flip the low bit of this weight-stream word before simulating.
        #[arg(long, value_name = "INDEX")]
        perturb_weight_word: Option<usize>,
    },
    /// Per-layer efficiency loss and predicted throughput.
    Analyze {
        #[arg(long, conflicts_with = "reference", required_unless_present = "reference")]
        net: Option<PathBuf>,
        /// A built-in topology: alexnet, resnet18, resnet50, inception_v3.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Random input tensor (seed from STREAMCNN_SEED).
    GenInput {
        /// Take the shape from a network's input.
        #[arg(long, conflicts_with = "shape", required_unless_present = "shape")]
        net: Option<PathBuf>,
        /// CHANNELS,ROWS,COLS
        #[arg(long, value_parser = parse_shape)]
        shape: Option<Shape>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = -256, allow_negative_numbers = true)]
        lo: i16,
        #[arg(long, default_value_t = 256, allow_negative_numbers = true)]
        hi: i16,
    },
    /// Random weight file for a network (seed from STREAMCNN_SEED).
    GenWeights {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = -64, allow_negative_numbers = true)]
        lo: i16,
        #[arg(long, default_value_t = 64, allow_negative_numbers = true)]
        hi: i16,
    },
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    let dims: Vec<usize> = s
        .split(',')
        .map(|d| d.trim().parse().map_err(|_| format!("bad dimension {d:?}")))
        .collect::<Result<_, _>>()?;
    match dims[..] {
        [c, r, k] if c * r * k > 0 => Ok(Shape::new(c, r, k)),
        _ => Err("expected three positive dimensions CHANNELS,ROWS,COLS".into()),
    }
}

struct Failure {
    code: u8,
    msg: String,
}

fn input_err(e: Error) -> Failure {
    Failure {
        code: EXIT_INPUT,
        msg: e.to_string(),
    }
}

fn runtime_err(e: Error) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        msg: e.to_string(),
    }
}

impl MachineArgs {
    fn config(&self) -> MachineConfig {
        MachineConfig {
            clock_hz: self.clock_hz,
            strict_requantize: self.strict_requantize,
            ..MachineConfig::default()
        }
    }

    fn lower_options(&self) -> LowerOptions {
        LowerOptions {
            force_bands: self.force_bands,
            ..LowerOptions::default()
        }
    }

    fn load_net(&self, path: &Path) -> Result<NetworkDesc, Failure> {
        let text = read_text(path).map_err(input_err)?;
        parse_network_with(&text, self.frac_bits).map_err(|e| input_err(Error::format(path, e.to_string())))
    }

    fn write_report(&self, r: &SimReport) -> Result<(), Failure> {
        let Some(path) = &self.report else { return Ok(()) };
        let body = if path.extension().is_some_and(|e| e == "json") {
            report_json(r)
        } else {
            report_text(r)
        };
        write_bytes(path, body.as_bytes()).map_err(runtime_err)
    }
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    let m = &cli.machine;
    let cfg = m.config();
    cfg.validate().map_err(|e| input_err(e.into()))?;
    match cli.cmd {
        Cmd::Compile { net, weights, out } => {
            let mut desc = m.load_net(&net)?;
            load_weights(&weights, &mut desc).map_err(input_err)?;
            let prog = compile_to_dir(&desc, &cfg, &m.lower_options(), &out).map_err(input_err)?;
            println!(
                "{} commands, {} weight words, {} stages -> {}",
                prog.commands.len(),
                prog.weight_stream.len(),
                prog.plans.len(),
                out.display()
            );
        }
        Cmd::Run { program, input, out } => {
            let prog = load_program(&program).map_err(runtime_err)?;
            let tensor = load_tensor(&input, prog.input, prog.format).map_err(input_err)?;
            let sim = run_to_dir(&prog, &tensor, &cfg, &out).map_err(runtime_err)?;
            m.write_report(&sim.report)?;
            print!("{}", report_text(&sim.report));
        }
        Cmd::Compare {
            net,
            weights,
            input,
            perturb_weight_word,
        } => {
            let mut desc = m.load_net(&net)?;
            load_weights(&weights, &mut desc).map_err(input_err)?;
            let tensor = load_tensor(&input, desc.input, desc.format).map_err(input_err)?;
            let (verdict, sim) = compare(&desc, &tensor, &cfg, &m.lower_options(), perturb_weight_word)
                .map_err(runtime_err)?;
            m.write_report(&sim.report)?;
            if verdict.is_pass() {
                println!("{verdict}");
            } else {
                let note = if m.strict_requantize {
                    " (mode-mismatch: strict requantize is not bit-exact by design)"
                } else {
                    ""
                };
                println!("{verdict}{note}");
                return Ok(EXIT_COMPARE_FAIL);
            }
        }
        Cmd::Analyze { net, reference: name } => {
            let analysis = match (net, name) {
                (Some(path), _) => {
                    let desc = m.load_net(&path)?;
                    analyze_network(&desc, &cfg).map_err(input_err)?
                }
                (None, Some(name)) => {
                    let shapes = reference::by_name(&name).ok_or_else(|| Failure {
                        code: EXIT_INPUT,
                        msg: format!(
                            "unknown reference {name:?}; known: {}",
                            reference::NAMES.join(", ")
                        ),
                    })?;
                    analyze_shapes(&shapes, &cfg)
                }
                (None, None) => unreachable!("clap requires one of --net and --reference"),
            };
            let table = analysis_table(&analysis);
            print!("{table}");
            if let Some(path) = &m.report {
                write_bytes(path, table.as_bytes()).map_err(runtime_err)?;
            }
        }
        Cmd::GenInput {
            net,
            shape,
            out,
            lo,
            hi,
        } => {
            let shape = match (net, shape) {
                (Some(path), _) => m.load_net(&path)?.input,
                (None, Some(s)) => s,
                (None, None) => unreachable!("clap requires one of --net and --shape"),
            };
            let seed = seed_from_env().map_err(input_err)?;
            check_range(lo, hi)?;
            write_i16_file(&out, &random_words(seed, shape.len(), lo, hi)).map_err(runtime_err)?;
        }
        Cmd::GenWeights { net, out, lo, hi } => {
            let desc = m.load_net(&net)?;
            let seed = seed_from_env().map_err(input_err)?;
            check_range(lo, hi)?;
            write_i16_file(&out, &random_words(seed, desc.weight_word_count(), lo, hi))
                .map_err(runtime_err)?;
        }
    }
    Ok(0)
}

fn check_range(lo: i16, hi: i16) -> Result<(), Failure> {
    if lo > hi {
        return Err(Failure {
            code: EXIT_INPUT,
            msg: format!("empty range {lo}..={hi}"),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

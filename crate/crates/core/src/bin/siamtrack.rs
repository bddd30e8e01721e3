//! Command-line harness. Log level comes from `SIAMTRACK_LOG`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use siamtrack::bench::{analytic, bench};
use siamtrack::config::Config;
use siamtrack::eval::{evaluate, read_results, write_boxes};
use siamtrack::sequence::SequenceDir;
use siamtrack::synth::SynthSequence;
use siamtrack::tracker::{track_frames, TrackerModel, SEARCH_SIZE};
use siamtrack::train::finetune;
use siamtrack::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "siamtrack", version, about = "Temporal Siamese tracker harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value assignments applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> siamtrack::Result<Config> {
        Config::resolve(self.config.as_deref(), &self.set)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Render a synthetic sequence and its ground truth.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a sequence directory from its frame-0 box.
    Track {
        #[arg(long)]
        seq: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a results file against ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Parameter and multiply-accumulate counts per component.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Search crop side in pixels.
        #[arg(long, default_value_t = SEARCH_SIZE)]
        search_size: usize,
    },
    /// Fine-tune the head on synthetic sequences and save all parameters.
    Finetune {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Cmd) -> siamtrack::Result<()> {
    match cmd {
        Cmd::Synth { cfg, out } => {
            let cfg = cfg.resolve()?;
            let seq = SynthSequence::generate(&cfg.synth)?;
            seq.write(&out)?;
            info!("wrote {} frames to {}", seq.len(), out.display());
        }
        Cmd::Track { seq, cfg, out } => {
            let cfg = cfg.resolve()?;
            let model = TrackerModel::load(&cfg.run)?;
            let seq = SequenceDir::open(&seq)?;
            let boxes = track_frames(&model, &cfg.run, seq.iter_frames(), seq.gt[0])?;
            write_boxes(&out, &boxes)?;
            info!("tracked {} frames", boxes.len());
        }
        Cmd::Eval { results, gt, json, csv } => {
            let report = evaluate(&read_results(&results, &gt)?)?;
            if json {
                println!("{}", report.to_json());
            } else if csv {
                print!("{}", report.to_csv());
            } else {
                println!("frames {}", report.frames);
                for (k, v) in report.summary() {
                    println!("{k} {v:.6}");
                }
            }
        }
        Cmd::Bench { cfg, search_size } => {
            let cfg = cfg.resolve()?;
            let model = TrackerModel::new(&cfg.run)?;
            let started = std::time::Instant::now();
            let measured = bench(&model, &cfg.run, search_size)?;
            info!("measured pass took {:?}", started.elapsed());
            print!("{measured}");
            let expected = analytic(&cfg.run, measured.search_size, measured.template_size);
            if measured != expected {
                return Err(Error::Invariant(format!(
                    "measured counts differ from closed form:\n{measured}expected:\n{expected}"
                )));
            }
            println!("closed-form check ok");
        }
        Cmd::Finetune { cfg, out } => {
            let cfg = cfg.resolve()?;
            let (model, rep) = finetune(&cfg.run)?;
            model.save(&out)?;
            println!("steps {} loss {:.6} -> {:.6}", rep.steps, rep.initial_loss, rep.final_loss);
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIAMTRACK_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pnr_harness::commands::{run_analyze, run_process, run_simulate};
use pnr_harness::config::{AnalysisSpec, Mode, RunConfig};
use pnr_harness::presets::{run_preset, PresetOptions};
use pnr_harness::{HarnessError, Result};

/// Digital twin of a SiPM photon-number-resolving detection chain.
///
/// Exit status: 0 success, 2 configuration error, 3 I/O error,
/// 4 numerical failure (fit did not converge, estimator undefined).
#[derive(Parser)]
#[command(name = "pnrtwin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    events: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.events {
            cfg.events = e;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate events: counts.csv, plus channelK.pnrw in full-waveform mode.
    Simulate {
        #[command(flatten)]
        run: Overrides,
        /// Output directory (default: the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run PNRW waveform files through the pipeline; writes event,q1,q2 CSV (or binary for *.bin).
    Process {
        /// Configuration supplying the pipeline section; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// One or two PNRW files (channel 1 first).
        #[arg(long, required = true, num_args = 1..=2)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectra and photon statistics of a counts or charges file.
    Analyze {
        /// Configuration supplying the analysis section and block count; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a figure preset into <out>/<preset>/.
    Preset {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Events per sweep point (preset default when absent).
        #[arg(long)]
        events: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Parse and check a configuration without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, out } => {
            let cfg = run.load()?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            for f in run_simulate(&cfg, &dir)? {
                println!("{}", f.display());
            }
        }
        Command::Process { config, input, out } => {
            let pipeline = match config {
                Some(p) => RunConfig::load(&p)?.pipeline,
                None => Default::default(),
            };
            let n = run_process(&input, &pipeline, &out)?;
            println!("{n} events -> {}", out.display());
        }
        Command::Analyze { config, input, out } => {
            let (spec, blocks) = match config {
                Some(p) => {
                    let cfg = RunConfig::load(&p)?;
                    (cfg.analysis, cfg.blocks)
                }
                None => (AnalysisSpec::default(), 4),
            };
            if blocks < 2 {
                return Err(HarnessError::config("blocks must be >= 2"));
            }
            run_analyze(&input, &spec, blocks, &out)?;
            println!("{}", out.join("report.json").display());
        }
        Command::Preset { preset, seed, events, out, workers } => {
            if workers == Some(0) {
                return Err(HarnessError::config("workers must be >= 1"));
            }
            let bundle = run_preset(&preset, &PresetOptions { seed, events, workers }, &out)?;
            for f in bundle.files {
                println!("{}", f.display());
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = RunConfig::load(&config)?;
            let resolved = cfg.validate()?;
            println!(
                "ok: {} events, {} blocks, {:?}, {} detector(s)",
                cfg.events,
                cfg.blocks,
                cfg.mode,
                resolved.detectors.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

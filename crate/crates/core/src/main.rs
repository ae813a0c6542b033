use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::error;

use motion_cue::config::PipelineConfig;
use motion_cue::pipeline::{self, PipelineError, StopWhen};
use motion_cue::synthesis::SynthMode;
use motion_cue::telemetry::{encode_log_line, synth_lap, LapProfile, DEFAULT_RATE_HZ};

#[derive(Parser)]
#[command(
    name = "motion-cue",
    version,
    about = "G-force motion cueing for a two-arm chair rig"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic lap as JSON lines.
    SynthLap {
        /// default, curb or zero
        #[arg(long, default_value = "default")]
        profile: String,
        #[arg(long, default_value_t = 45.0)]
        duration: f64,
        #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
        rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a recorded log through the pipeline and write traces.
    Replay {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mode: Option<SynthMode>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "traces")]
        out_dir: PathBuf,
    },
    /// Serve live UDP telemetry until interrupted.
    Serve {
        /// Overrides the config's port (9537 by default).
        #[arg(long)]
        udp_port: Option<u16>,
        #[arg(long)]
        mode: Option<SynthMode>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "traces")]
        out_dir: PathBuf,
    },
    /// Time the full pipeline over generated frames.
    Bench {
        #[arg(long, default_value_t = 6000)]
        frames: usize,
        #[arg(long)]
        mode: Option<SynthMode>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(
    path: Option<&Path>,
    mode: Option<SynthMode>,
) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = mode {
        cfg.pipeline.mode = m;
    }
    Ok(cfg)
}

fn write_lap(
    profile: &str,
    duration: f64,
    rate: f64,
    seed: u64,
    out: &Path,
) -> Result<(), PipelineError> {
    let profile = LapProfile::by_name(profile).ok_or_else(|| {
        PipelineError::InvalidArgument(format!("unknown lap profile `{profile}`"))
    })?;
    let lap = synth_lap(&profile, duration, rate, seed)
        .map_err(|e| PipelineError::InvalidArgument(e.to_string()))?;
    let mut w = BufWriter::new(std::fs::File::create(out)?);
    for s in &lap {
        writeln!(w, "{}", encode_log_line(s))?;
    }
    w.flush()?;
    println!("wrote {} samples to {}", lap.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.cmd {
        Cmd::SynthLap {
            profile,
            duration,
            rate,
            seed,
            out,
        } => write_lap(&profile, duration, rate, seed, &out),
        Cmd::Replay {
            input,
            mode,
            config,
            out_dir,
        } => {
            let cfg = load_config(config.as_deref(), mode)?;
            let report = pipeline::run_replay(&input, &cfg, &out_dir)?;
            print!("{report}");
            Ok(())
        }
        Cmd::Serve {
            udp_port,
            mode,
            config,
            out_dir,
        } => {
            let cfg = load_config(config.as_deref(), mode)?;
            let shutdown = Arc::new(AtomicBool::new(false));
            let flag = shutdown.clone();
            ctrlc::set_handler(move || flag.store(true, Ordering::Release)).map_err(|e| {
                PipelineError::InvalidArgument(format!("cannot install signal handler: {e}"))
            })?;
            let port = udp_port.unwrap_or(cfg.pipeline.udp_port);
            let report = pipeline::run_udp(port, &cfg, &out_dir, StopWhen::on_flag(shutdown))?;
            print!("{report}");
            Ok(())
        }
        Cmd::Bench {
            frames,
            mode,
            config,
        } => {
            let cfg = load_config(config.as_deref(), mode)?;
            let report = pipeline::bench(&cfg, frames)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

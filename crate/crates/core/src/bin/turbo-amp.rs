use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use turbo_amp::cli::config::ConfigFile;
use turbo_amp::cli::{cmd_benchmark, cmd_reconstruct, cmd_synth, ExperimentSpec, Method};

/// Compressive imaging by turbo AMP / hidden-Markov-tree message passing.
///
/// Every flag can also be given as an environment variable TURBO_AMP_<FLAG>
/// (e.g. TURBO_AMP_M=5000); config-file keys likewise as TURBO_AMP_<KEY>.
/// Exit status: 0 success, 1 usage error, 2 runtime failure.
#[derive(Parser)]
#[command(name = "turbo-amp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure an image with a seeded Gaussian operator and reconstruct it.
    Synth(Common),
    /// Reconstruct from a .meas file written by `synth`.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Ground-truth image for the NMSE column.
        #[arg(long, env = "TURBO_AMP_TRUTH")]
        truth: Option<PathBuf>,
    },
    /// Run every .pgm image in a directory and summarize.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Process images in parallel.
        #[arg(long, env = "TURBO_AMP_PARALLEL")]
        parallel: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Image, measurement file or directory, depending on the command.
    #[arg(long, env = "TURBO_AMP_INPUT")]
    input: PathBuf,
    /// Number of measurements.
    #[arg(long, env = "TURBO_AMP_M", default_value_t = 5000)]
    m: usize,
    /// Measurement noise variance.
    #[arg(long, env = "TURBO_AMP_SIGMA2", default_value_t = 0.0)]
    sigma2: f64,
    /// Methods to run: bg, gm, or the flat baseline bg-amp (comma separated).
    #[arg(long, env = "TURBO_AMP_MODEL", value_delimiter = ',', default_value = "bg,gm")]
    model: Vec<String>,
    /// Seed of the measurement operator and noise.
    #[arg(long, env = "TURBO_AMP_SEED", default_value_t = 0)]
    seed: u64,
    /// key = value configuration file.
    #[arg(long, env = "TURBO_AMP_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "TURBO_AMP_OUT", default_value = "out")]
    out: PathBuf,
    /// Center-crop images to the largest power-of-two square.
    #[arg(long, env = "TURBO_AMP_CROP")]
    crop: bool,
    #[arg(long, env = "TURBO_AMP_MAX_TURBO")]
    max_turbo: Option<usize>,
    #[arg(long, env = "TURBO_AMP_MAX_AMP")]
    max_amp: Option<usize>,
    /// Write per-round trace CSVs.
    #[arg(long, env = "TURBO_AMP_TRACE")]
    trace: bool,
}

impl Common {
    fn spec(self) -> turbo_amp::Result<ExperimentSpec> {
        let config = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        }
        .with_env(std::env::vars());
        let methods = self
            .model
            .iter()
            .map(|m| m.parse())
            .collect::<turbo_amp::Result<Vec<Method>>>()?;
        Ok(ExperimentSpec {
            input: self.input,
            m: self.m,
            sigma2: self.sigma2,
            methods,
            seed: self.seed,
            config,
            out: self.out,
            crop: self.crop,
            max_turbo: self.max_turbo,
            max_amp: self.max_amp,
            trace: self.trace,
            parallel: false,
            truth: None,
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (spec, run): (_, fn(&ExperimentSpec) -> turbo_amp::Result<_>) = match cli.command {
        Command::Synth(c) => (c.spec(), cmd_synth),
        Command::Reconstruct { common, truth } => (
            common.spec().map(|s| ExperimentSpec { truth, ..s }),
            cmd_reconstruct,
        ),
        Command::Benchmark { common, parallel } => (
            common.spec().map(|s| ExperimentSpec { parallel, ..s }),
            cmd_benchmark,
        ),
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&spec) {
        Ok(rows) => {
            for r in rows {
                println!(
                    "{},{},{},{},{},{},{},{}",
                    r.image_id, r.m, r.model, r.nmse_db, r.turbo_iters, r.total_amp_iters, r.wall_time_s, r.seed
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

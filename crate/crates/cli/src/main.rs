mod artifacts;
mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::SynthOptions;

#[derive(Parser)]
#[command(name = "filer", version, about = "Multimodal image matching and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the consensus seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn pipeline(&self) -> Result<filer::matcher::PipelineConfig> {
        let mut c = config::load_config(self.config.as_deref())?;
        if let Some(s) = self.seed {
            c.consensus.rng_seed = s;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Match two images; writes matches.tsv, affine.txt, overlay.png and
    /// diagnostics.json.
    Match {
        image_a: PathBuf,
        image_b: PathBuf,
        /// Ground-truth affine (A to B) for NCM and CMR in the diagnostics.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Detect features in one image; writes features.tsv, structure.png and
    /// energy.png.
    Detect {
        image: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate every pair of a manifest; writes report.csv and report.json.
    Eval {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Rotate B by each angle and match it against A; writes sweep.csv.
    SweepRotation {
        image_a: PathBuf,
        image_b: PathBuf,
        /// Degrees, comma separated. Defaults to 0, 15, ..., 345.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Vec<f64>,
        /// Affine from A to the unrotated B; identity when omitted.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Checkerboard mosaic of A and B warped into A's frame; writes
    /// mosaic.png.
    Mosaic {
        image_a: PathBuf,
        image_b: PathBuf,
        /// Affine mapping A to B.
        affine: PathBuf,
        #[arg(long, default_value_t = 32)]
        tile: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic pairs with ground truth and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 512)]
        size: usize,
        /// Rotation of B in degrees, cycled over the pairs.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Vec<f64>,
        /// blobs, checkerboard or edges.
        #[arg(long, default_value = "blobs")]
        pattern: String,
        /// Crop this image instead of drawing a pattern.
        #[arg(long)]
        base_image: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        invert: bool,
        /// Gaussian noise standard deviation on B.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Local warp amplitude in pixels.
        #[arg(long, default_value_t = 0.0)]
        warp: f64,
    },
    /// Print the default configuration file.
    Config,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Match {
            image_a,
            image_b,
            truth,
            common,
        } => commands::cmd_match(&image_a, &image_b, truth.as_deref(), &common.pipeline()?, &common.out),
        Command::Detect { image, common } => commands::cmd_detect(&image, &common.pipeline()?, &common.out),
        Command::Eval { manifest, common } => commands::cmd_eval(&manifest, &common.pipeline()?, &common.out),
        Command::SweepRotation {
            image_a,
            image_b,
            angles,
            truth,
            common,
        } => {
            let angles = if angles.is_empty() {
                commands::default_sweep_angles()
            } else {
                angles
            };
            commands::cmd_sweep_rotation(
                &image_a,
                &image_b,
                truth.as_deref(),
                &angles,
                &common.pipeline()?,
                &common.out,
            )
        }
        Command::Mosaic {
            image_a,
            image_b,
            affine,
            tile,
            out,
        } => commands::cmd_mosaic(&image_a, &image_b, &affine, tile, &out),
        Command::Synth {
            out,
            seed,
            count,
            size,
            angles,
            pattern,
            base_image,
            gamma,
            invert,
            noise,
            warp,
        } => commands::cmd_synth(
            &SynthOptions {
                count,
                size,
                angles,
                pattern,
                base_image,
                gamma,
                invert,
                noise,
                warp,
                seed,
            },
            &out,
        ),
        Command::Config => {
            print!("{}", config::render_config(&filer::matcher::PipelineConfig::default()));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

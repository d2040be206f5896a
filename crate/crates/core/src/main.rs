use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use incremesh::harness::{self, ExportFormats, RunConfig, ScenePreset, SynthArgs};
use incremesh::io::{ColorMode, DEFAULT_DEPTH_SCALE};
use incremesh::{Error, Strategy};

#[derive(Parser)]
#[command(
    name = "incremesh",
    version,
    about = "Incremental shared-vertex TSDF meshing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a dataset and write the mesh, per-frame stats and a manifest.
    Reconstruct {
        dataset: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run shared and loose meshing side by side and report vertex counts.
    Compare {
        dataset: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a synthetic dataset.
    Synth {
        #[arg(long, value_enum, default_value_t = SceneArg::Sphere)]
        scene: SceneArg,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long, default_value_t = 8.0)]
        tilt_deg: f64,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        /// Depth noise standard deviation in meters.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DEPTH_SCALE)]
        depth_scale: f64,
        #[arg(long, default_value = "dataset")]
        out: PathBuf,
    },
    /// Reconstruct a dataset and export the final mesh.
    Export {
        dataset: PathBuf,
        #[arg(long)]
        obj: bool,
        #[arg(long)]
        ply: bool,
        #[arg(long, value_enum, default_value_t = ColorArg::None)]
        color: ColorArg,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneArg {
    Plane,
    Sphere,
    Room,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColorArg {
    None,
    Age,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Serial,
    Claim,
    Partition,
}

#[derive(Args)]
struct RunArgs {
    /// Cube side length in meters.
    #[arg(long, default_value_t = 0.03)]
    cube_size: f64,
    /// Truncation band in meters (default: three cube widths).
    #[arg(long)]
    trunc: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, overrides_with = "no_refine")]
    refine: bool,
    #[arg(long = "no-refine")]
    no_refine: bool,
    #[arg(long, value_enum, default_value_t = StrategyArg::Claim)]
    strategy: StrategyArg,
    /// Loose baseline: three private vertices per triangle.
    #[arg(long)]
    baseline: bool,
    #[arg(long, default_value_t = 5.0)]
    max_range: f64,
    #[arg(long)]
    frustum_only: bool,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_DEPTH_SCALE)]
    depth_scale: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            cube_size: self.cube_size,
            truncation: self.trunc,
            epsilon: self.epsilon,
            refine: self.refine && !self.no_refine,
            strategy: match self.strategy {
                StrategyArg::Serial => Strategy::Serial,
                StrategyArg::Claim => Strategy::Claim,
                StrategyArg::Partition => Strategy::Partition,
            },
            baseline: self.baseline,
            max_range: self.max_range,
            frustum_only: self.frustum_only,
            workers: self.workers,
            seed: self.seed,
            depth_scale: self.depth_scale,
            out: self.out.clone(),
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Reconstruct { dataset, run } => {
            let s = harness::cmd_reconstruct(&run.config(), &dataset)?;
            println!(
                "{} frames, {} vertices, {} triangles",
                s.frames, s.vertices, s.triangles
            );
        }
        Command::Compare { dataset, run } => {
            let ratio = harness::cmd_compare(&run.config(), &dataset)?;
            println!("compact/loose vertex ratio {ratio:.4}");
        }
        Command::Synth {
            scene,
            frames,
            tilt_deg,
            radius,
            noise,
            seed,
            depth_scale,
            out,
        } => {
            let args = SynthArgs {
                scene: match scene {
                    SceneArg::Plane => ScenePreset::Plane,
                    SceneArg::Sphere => ScenePreset::Sphere,
                    SceneArg::Room => ScenePreset::Room,
                },
                frames,
                tilt_deg,
                radius,
                noise,
                seed,
            };
            harness::cmd_synth(&args, &out, depth_scale)?;
            println!("wrote {frames} frames to {}", out.display());
        }
        Command::Export {
            dataset,
            obj,
            ply,
            color,
            run,
        } => {
            let formats = ExportFormats {
                obj,
                ply,
                color: match color {
                    ColorArg::None => ColorMode::None,
                    ColorArg::Age => ColorMode::Age,
                },
            };
            let mesh = harness::cmd_export(&run.config(), &dataset, formats)?;
            println!(
                "{} vertices, {} triangles",
                mesh.vertex_count(),
                mesh.triangle_count()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

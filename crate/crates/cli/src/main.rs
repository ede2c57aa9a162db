//! One binary, subcommand dispatch: plan, eval, bench-argmax, simulate,
//! gen-scenarios, render. Reports are JSON on stdout (pretty behind
//! `--pretty`); exit codes are stable: 0 success, 2 no safe destination,
//! 3 destination unreachable, 1 any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use masknav::Error;

mod commands;

pub const EXIT_NO_DESTINATION: u8 = 2;
pub const EXIT_NO_PATH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "masknav",
    version,
    about = "Mask-based local navigation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the local navigation pipeline on one mask file.
    Plan {
        /// Label mask (PGM or grayscale PNG).
        #[arg(long)]
        mask: PathBuf,
        /// Class schema JSON; defaults to the built-in 9-class demo schema.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Calibration file with four src/dst point pairs.
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Pipeline config JSON (overridden by --calib when both given).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for trajectory.json and overlay.svg.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for distance/wavefront/gradient PGM heat dumps.
        #[arg(long)]
        dump_fields: Option<PathBuf>,
        /// Also write an SVG overlay (requires --out).
        #[arg(long)]
        overlay: bool,
        #[arg(long)]
        pretty: bool,
    },

    /// Evaluate predicted masks against ground truth.
    Eval {
        /// Prediction mask file or directory.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth mask file or directory (paired by filename).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: EvalMode,
        /// Worker threads for directory evaluation.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV table (one row per class or object).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        pretty: bool,
    },

    /// Benchmark the argmax kernel on a seeded random score volume.
    BenchArgmax {
        #[arg(long, default_value_t = 480)]
        width: usize,
        #[arg(long, default_value_t = 360)]
        height: usize,
        #[arg(long, default_value_t = 10)]
        channels: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        pretty: bool,
    },

    /// Run the camera+lidar fusion loop on a scenario file.
    Simulate {
        /// Scenario JSON (mask path, pose, rates, injections).
        #[arg(long)]
        scenario: PathBuf,
        /// Write the event log here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Generate synthetic corridor masks plus a manifest.
    GenScenarios {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 20)]
        corridor_width: usize,
        #[arg(long, default_value_t = 3)]
        cracks: usize,
        #[arg(long, default_value_t = 3)]
        blobs: usize,
        #[arg(long, default_value_t = 2)]
        puddles: usize,
        #[arg(long, default_value_t = 1)]
        walls: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },

    /// Render a mask (and optional trajectory / field heat) as SVG.
    Render {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Trajectory JSON produced by `plan`.
        #[arg(long)]
        traj: Option<PathBuf>,
        /// Overlay a field heat layer.
        #[arg(long, value_enum)]
        heat: Option<HeatField>,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EvalMode {
    Class,
    Category,
    Object,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum HeatField {
    Distance,
    Wavefront,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan {
            mask,
            schema,
            calib,
            config,
            out,
            dump_fields,
            overlay,
            pretty,
        } => commands::plan(
            mask,
            schema,
            calib,
            config,
            out,
            dump_fields,
            overlay,
            pretty,
        ),
        Command::Eval {
            pred,
            truth,
            schema,
            mode,
            workers,
            out,
            csv,
            pretty,
        } => commands::eval(pred, truth, schema, mode, workers, out, csv, pretty),
        Command::BenchArgmax {
            width,
            height,
            channels,
            reps,
            workers,
            seed,
            pretty,
        } => commands::bench_argmax(width, height, channels, reps, workers, seed, pretty),
        Command::Simulate { scenario, out } => commands::simulate(scenario, out),
        Command::GenScenarios {
            seed,
            count,
            width,
            height,
            corridor_width,
            cracks,
            blobs,
            puddles,
            walls,
            out,
        } => {
            let spec = masknav::scenario::ScenarioSpec {
                seed,
                width,
                height,
                cracks,
                blobs,
                puddles,
                walls,
                corridor_width,
            };
            commands::gen_scenarios(spec, count, out)
        }
        Command::Render {
            mask,
            schema,
            traj,
            heat,
            out,
        } => commands::render(mask, schema, traj, heat, out),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            match err {
                Error::NoDestination => ExitCode::from(EXIT_NO_DESTINATION),
                Error::NoPath => ExitCode::from(EXIT_NO_PATH),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

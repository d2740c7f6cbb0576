//! `stereozoom`: zoom geometry, synthetic pipeline runs, and detection evaluation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod errmodel;
mod eval;
mod pipeline;
mod render;
mod util;
mod zoom;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "stereozoom", version, about)]
struct Cli {
    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "STEREOZOOM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Zoom factors, disparity offset and zoomed intrinsics for one RoI.
    Zoom(zoom::ZoomArgs),
    /// Render, reconstruct, fit and score every object in synthetic scenes.
    Pipeline(pipeline::PipelineArgs),
    /// Average precision of KITTI-format detections.
    Eval(eval::EvalArgs),
    /// Predicted against measured depth error over a sweep.
    Errmodel(errmodel::ErrModelArgs),
    /// Write the disparity, part and mask maps of each scene object.
    SimRender(render::SimRenderArgs),
    /// Convert `sim-render` output into point clouds.
    PcdExport(render::PcdExportArgs),
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Zoom(a) => zoom::run(a)?,
        Command::Pipeline(a) => {
            let failed = pipeline::run(a)?;
            if failed > 0 {
                eprintln!("error: {failed} instance(s) failed; see diagnostics.json");
                return Ok(false);
            }
        }
        Command::Eval(a) => eval::run(a)?,
        Command::Errmodel(a) => errmodel::run(a)?,
        Command::SimRender(a) => render::sim_render(a)?,
        Command::PcdExport(a) => render::pcd_export(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

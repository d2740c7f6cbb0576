use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use stereozoom::calib::{parse_kitti_calib, zoomed_baseline, CameraIntrinsics};
use stereozoom::zoom::make_zoomed_view;

use crate::util::{parse_roi, parse_size, read_text};

#[derive(Args, Debug)]
pub struct ZoomArgs {
    /// KITTI calibration file.
    #[arg(long)]
    pub calib: PathBuf,
    /// Stereo RoI as `x,x_bar,y,w,h`.
    #[arg(long, allow_hyphen_values = true)]
    pub roi: String,
    #[arg(long, value_parser = parse_size, default_value = "256x128")]
    pub target: (usize, usize),
}

#[derive(Serialize)]
struct ZoomReport {
    target: (usize, usize),
    k: f64,
    m: f64,
    o_hat: f64,
    left: CameraIntrinsics,
    right: CameraIntrinsics,
    baseline: f64,
    zoomed_baseline: f64,
}

pub fn run(args: &ZoomArgs) -> Result<()> {
    let rig = parse_kitti_calib(&read_text(&args.calib)?).with_context(|| format!("parsing {}", args.calib.display()))?;
    let roi = parse_roi(&args.roi)?;
    let view = make_zoomed_view(&roi, &rig, args.target)?;
    let report = ZoomReport {
        target: args.target,
        k: view.k,
        m: view.m,
        o_hat: view.o_hat,
        left: view.left_cam,
        right: view.right_cam,
        baseline: rig.baseline(),
        zoomed_baseline: zoomed_baseline(&rig, view.k)?,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use stereozoom::calib::{parse_kitti_calib, zoom_intrinsics, StereoRig};
use stereozoom::pointcloud::backproject_pixel;
use stereozoom::synthetic::kitti_like_rig;
use stereozoom::zoom::{depth_error, ZoomedView};

use crate::util::{load_settings, path_string, read_text, Outputs};

#[derive(Args, Debug)]
pub struct ErrModelArgs {
    /// KITTI calibration file; a KITTI-like rig when omitted.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Depths in meters.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub zooms: Option<Vec<f64>>,
    /// Disparity errors in pixels of the zoomed image.
    #[arg(long, value_delimiter = ',')]
    pub disparity_errors: Option<Vec<f64>>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for `errmodel.csv` and the manifest; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweep {
    pub depths: Vec<f64>,
    pub zooms: Vec<f64>,
    pub disparity_errors: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            depths: vec![10.0, 20.0, 40.0],
            zooms: vec![1.0, 2.0, 4.0],
            disparity_errors: vec![1.0],
        }
    }
}

impl Sweep {
    fn validate(&self) -> Result<()> {
        if let Some(z) = self.depths.iter().find(|z| !(**z > 0.0 && z.is_finite())) {
            bail!("depths must be positive, got {z}");
        }
        if let Some(k) = self.zooms.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            bail!("zoom factors must be positive, got {k}");
        }
        if let Some(d) = self.disparity_errors.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            bail!("disparity errors must be non-negative, got {d}");
        }
        Ok(())
    }
}

/// One-pixel view at the principal point with no crop offset, zoomed by `k`.
fn probe_view(rig: &StereoRig, k: f64) -> Result<ZoomedView> {
    let cam = rig.left();
    Ok(ZoomedView {
        k,
        m: k,
        o_hat: 0.0,
        left_cam: zoom_intrinsics(cam, k, k)?,
        right_cam: zoom_intrinsics(rig.right(), k, k)?,
        width: 1,
        height: 1,
        origin: (cam.c_u, cam.c_v),
    })
}

/// Mean depth shift from perturbing the disparity by `+delta` and `-delta`.
fn empirical_error(rig: &StereoRig, z: f64, k: f64, delta: f64) -> Result<f64> {
    let view = probe_view(rig, k)?;
    let d = k * rig.left().f_u * rig.baseline() / z;
    let base = backproject_pixel(0.0, 0.0, d, &view, rig)?.z;
    let shifted = |s: f64| -> Result<f64> {
        let p = backproject_pixel(0.0, 0.0, d + s, &view, rig)
            .with_context(|| format!("disparity error {delta} px is too large at z={z} m, k={k}"))?;
        Ok((p.z - base).abs())
    };
    Ok((shifted(delta)? + shifted(-delta)?) / 2.0)
}

pub fn table(rig: &StereoRig, sweep: &Sweep) -> Result<String> {
    sweep.validate()?;
    let mut csv = String::from("z,k,delta_d,predicted,empirical\n");
    for &z in &sweep.depths {
        for &k in &sweep.zooms {
            for &delta in &sweep.disparity_errors {
                let predicted = depth_error(z, delta, k, rig)?;
                let empirical = empirical_error(rig, z, k, delta)?;
                writeln!(csv, "{z},{k},{delta},{predicted},{empirical}")?;
            }
        }
    }
    Ok(csv)
}

pub fn run(args: &ErrModelArgs) -> Result<()> {
    let mut sweep: Sweep = load_settings(args.config.as_deref())?;
    if let Some(v) = &args.depths {
        sweep.depths = v.clone();
    }
    if let Some(v) = &args.zooms {
        sweep.zooms = v.clone();
    }
    if let Some(v) = &args.disparity_errors {
        sweep.disparity_errors = v.clone();
    }
    let rig = match &args.calib {
        Some(p) => parse_kitti_calib(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => kitti_like_rig(),
    };
    let csv = table(&rig, &sweep)?;
    match &args.out {
        Some(dir) => {
            let mut out = Outputs::new(dir)?;
            out.write("errmodel.csv", csv)?;
            out.finish("errmodel", args.calib.iter().map(|p| path_string(p)).collect(), &sweep)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_recovers_depth() {
        let rig = kitti_like_rig();
        for k in [0.5, 1.0, 3.0] {
            let view = probe_view(&rig, k).unwrap();
            let d = k * rig.left().f_u * rig.baseline() / 25.0;
            let p = backproject_pixel(0.0, 0.0, d, &view, &rig).unwrap();
            assert!((p.z - 25.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_error_is_reported() {
        let sweep = Sweep {
            depths: vec![60.0],
            zooms: vec![1.0],
            disparity_errors: vec![50.0],
        };
        let err = table(&kitti_like_rig(), &sweep).unwrap_err();
        assert!(format!("{err:#}").contains("too large"), "{err:#}");
    }
}

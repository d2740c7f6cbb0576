use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use stereozoom::calib::StereoRig;
use stereozoom::io::{
    decode_mask_png, encode_disparity_png, encode_mask_png, encode_parts_png, read_pfm_gray, read_pfm_rgb,
    write_cloud_bin, write_pfm_gray, write_pfm_rgb, write_ply,
};
use stereozoom::pointcloud::{build_instance_cloud, sample_points, InstanceMaps};
use stereozoom::synthetic::{corrupt_maps, render_instance, render_instance_native, SyntheticScene};
use stereozoom::zoom::{StereoRoI, ZoomedView};
use stereozoom::Error;

use crate::util::{parse_size, path_string, read_text, Outputs};

#[derive(Args, Debug)]
pub struct SimRenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_size, default_value = "256x128")]
    pub target: (usize, usize),
    #[arg(long)]
    pub native: bool,
    /// Standard deviation of Gaussian disparity noise, pixels.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of foreground pixels whose part locations are replaced.
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Geometry needed to turn a rendered instance back into points.
#[derive(Debug, Serialize, Deserialize)]
pub struct ViewFile {
    pub rig: StereoRig,
    pub roi: StereoRoI,
    pub view: ZoomedView,
}

#[derive(Serialize)]
struct RenderSettings {
    target: (usize, usize),
    native: bool,
    noise: f64,
    outliers: f64,
    seed: u64,
}

pub fn sim_render(args: &SimRenderArgs) -> Result<()> {
    let scene = SyntheticScene::from_json(&read_text(&args.scene)?)
        .with_context(|| format!("parsing {}", args.scene.display()))?;
    let mut out = Outputs::new(&args.out)?;
    for i in 0..scene.objects.len() {
        let rendered = if args.native {
            render_instance_native(&scene, i)
        } else {
            render_instance(&scene, i, args.target)
        };
        let r = match rendered {
            Ok(r) => r,
            Err(Error::NotVisible(why)) => {
                warn!("instance {i} skipped: {why}");
                continue;
            }
            Err(e) => return Err(e).with_context(|| format!("rendering instance {i}")),
        };
        let seed = args.seed.wrapping_add(i as u64);
        let maps = corrupt_maps(&r.maps, args.noise, args.outliers, seed)?;
        let dir = format!("instance_{i:03}");
        let total = maps.disparity.map(|d| d + r.view.o_hat);

        let mut buf = Vec::new();
        write_pfm_gray(&mut buf, &maps.disparity)?;
        out.write(&format!("{dir}/disparity.pfm"), &buf)?;
        out.write(&format!("{dir}/disparity.png"), encode_disparity_png(&total, &maps.mask)?)?;
        out.write(&format!("{dir}/mask.png"), encode_mask_png(&maps.mask)?)?;
        buf.clear();
        write_pfm_rgb(&mut buf, &maps.parts)?;
        out.write(&format!("{dir}/parts.pfm"), &buf)?;
        out.write(&format!("{dir}/parts.png"), encode_parts_png(&maps.parts, &maps.mask)?)?;
        buf.clear();
        write_pfm_gray(&mut buf, &r.depth)?;
        out.write(&format!("{dir}/depth.pfm"), &buf)?;
        out.write_json(
            &format!("{dir}/view.json"),
            &ViewFile {
                rig: scene.rig,
                roi: r.roi,
                view: r.view,
            },
        )?;
    }
    let settings = RenderSettings {
        target: if args.native { (0, 0) } else { args.target },
        native: args.native,
        noise: args.noise,
        outliers: args.outliers,
        seed: args.seed,
    };
    out.finish("sim-render", vec![path_string(&args.scene)], &settings)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CloudFormat {
    Ply,
    Bin,
}

#[derive(Args, Debug)]
pub struct PcdExportArgs {
    /// Output directory of `sim-render`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sample this many points per instance; all foreground points when omitted.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "ply")]
    pub format: CloudFormat,
}

#[derive(Serialize)]
struct ExportSettings {
    samples: Option<usize>,
    seed: u64,
    format: CloudFormat,
}

fn instance_dirs(root: &Path) -> Result<Vec<String>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).with_context(|| format!("listing {}", root.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_dir() && name.starts_with("instance_") {
            dirs.push(name);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn load_instance(dir: &Path) -> Result<(ViewFile, InstanceMaps)> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read(&p).with_context(|| format!("reading {}", p.display()))
    };
    let view: ViewFile = serde_json::from_str(&read_text(&dir.join("view.json"))?)
        .with_context(|| format!("parsing {}", dir.join("view.json").display()))?;
    let maps = InstanceMaps::new(
        read_pfm_gray(&read("disparity.pfm")?)?,
        read_pfm_rgb(&read("parts.pfm")?)?,
        decode_mask_png(&read("mask.png")?)?,
    )?;
    Ok((view, maps))
}

pub fn pcd_export(args: &PcdExportArgs) -> Result<()> {
    let dirs = instance_dirs(&args.input)?;
    if dirs.is_empty() {
        bail!("no instance_* directories under {}", args.input.display());
    }
    let mut out = Outputs::new(&args.out)?;
    for (i, name) in dirs.iter().enumerate() {
        let (vf, maps) = load_instance(&args.input.join(name)).with_context(|| format!("loading {name}"))?;
        let (mut cloud, diag) = build_instance_cloud(&maps, &vf.view, &vf.rig)?;
        info!("{name}: {} points, {} dropped", cloud.len(), diag.dropped);
        if let Some(n) = args.samples {
            cloud = sample_points(&cloud, n, args.seed.wrapping_add(i as u64))?;
        }
        let mut buf = Vec::new();
        let ext = match args.format {
            CloudFormat::Ply => {
                write_ply(&mut buf, &cloud)?;
                "ply"
            }
            CloudFormat::Bin => {
                write_cloud_bin(&mut buf, &cloud)?;
                "bin"
            }
        };
        out.write(&format!("{name}.{ext}"), &buf)?;
    }
    let settings = ExportSettings {
        samples: args.samples,
        seed: args.seed,
        format: args.format,
    };
    out.finish("pcd-export", vec![path_string(&args.input)], &settings)
}

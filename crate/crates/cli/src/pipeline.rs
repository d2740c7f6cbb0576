use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use stereozoom::eval::{write_labels, KittiLabel};
use stereozoom::io::write_ply;
use stereozoom::pipeline::{run_scene, InstanceOutcome, PipelineConfig};
use stereozoom::pose::RansacParams;
use stereozoom::score::ScoreMode;
use stereozoom::synthetic::{scene_labels, SyntheticScene};
use stereozoom::Error;

use crate::util::{load_settings, parse_size, path_string, read_text, Outputs};

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Scene JSON files; each becomes one frame.
    #[arg(long = "scene", required = true, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with pipeline settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_size)]
    pub target: Option<(usize, usize)>,
    /// Skip zooming and work at native resolution.
    #[arg(long)]
    pub native: bool,
    /// Points sampled per instance.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub score_mode: Option<ScoreMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of Gaussian disparity noise, pixels.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fraction of foreground pixels whose part locations are replaced.
    #[arg(long)]
    pub outliers: Option<f64>,
    /// Round disparities to multiples of this step, pixels.
    #[arg(long)]
    pub quantize: Option<f64>,
    /// Fit with RANSAC instead of the closed form on all points.
    #[arg(long)]
    pub ransac: bool,
    #[arg(long)]
    pub ransac_iterations: Option<usize>,
    #[arg(long)]
    pub ransac_threshold: Option<f64>,
}

impl PipelineArgs {
    fn settings(&self) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig = load_settings(self.config.as_deref())?;
        if let Some(t) = self.target {
            cfg.target = t;
        }
        cfg.native |= self.native;
        macro_rules! apply {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        apply!(samples => sample_count, theta => theta, score_mode => score_mode, seed => seed,
            noise => disparity_noise, outliers => part_outliers);
        if self.quantize.is_some() {
            cfg.quantize_step = self.quantize;
        }
        if self.ransac || self.ransac_iterations.is_some() || self.ransac_threshold.is_some() {
            let mut p = cfg.ransac.unwrap_or(RansacParams {
                seed: cfg.seed,
                ..RansacParams::default()
            });
            if let Some(n) = self.ransac_iterations {
                p.iterations = n;
            }
            if let Some(t) = self.ransac_threshold {
                p.inlier_threshold = t;
            }
            cfg.ransac = Some(p);
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum InstanceRecord {
    Ok(Box<InstanceOutcome>),
    Skipped { index: usize, reason: String },
    Failed { index: usize, error: String },
}

#[derive(Serialize)]
struct FrameRecord {
    frame: String,
    scene: String,
    instances: Vec<InstanceRecord>,
}

#[derive(Serialize, Default)]
struct Summary {
    frames: usize,
    instances: usize,
    ok: usize,
    skipped: usize,
    failed: usize,
}

#[derive(Serialize)]
struct Diagnostics {
    summary: Summary,
    frames: Vec<FrameRecord>,
}

fn frame_id(scene: &SyntheticScene, path: &Path) -> String {
    scene.frame_id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "frame".into())
    })
}

struct FrameResult {
    id: String,
    record: FrameRecord,
    detections: Vec<KittiLabel>,
    ground_truth: Vec<KittiLabel>,
    clouds: Vec<(usize, Vec<u8>)>,
}

fn process(path: &Path, cfg: &PipelineConfig) -> Result<FrameResult> {
    let scene = SyntheticScene::from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let id = frame_id(&scene, path);
    let mut instances = Vec::new();
    let mut detections = Vec::new();
    let mut clouds = Vec::new();
    for (index, outcome) in run_scene(&scene, cfg).into_iter().enumerate() {
        match outcome {
            Ok(mut o) => {
                let mut ply = Vec::new();
                write_ply(&mut ply, &o.cloud)?;
                clouds.push((index, ply));
                detections.extend(o.detection.take());
                instances.push(InstanceRecord::Ok(Box::new(o)));
            }
            Err(Error::NotVisible(reason)) => instances.push(InstanceRecord::Skipped { index, reason }),
            Err(e) => {
                warn!("frame {id}, instance {index}: {e}");
                instances.push(InstanceRecord::Failed {
                    index,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(FrameResult {
        record: FrameRecord {
            frame: id.clone(),
            scene: path_string(path),
            instances,
        },
        ground_truth: scene_labels(&scene),
        id,
        detections,
        clouds,
    })
}

/// Returns the number of failed instances.
pub fn run(args: &PipelineArgs) -> Result<usize> {
    let cfg = args.settings()?;
    info!("pipeline settings: {cfg:?}");
    let frames: Vec<FrameResult> = args
        .scenes
        .par_iter()
        .map(|p| process(p, &cfg))
        .collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    for f in &frames {
        if !seen.insert(f.id.as_str()) {
            bail!("duplicate frame id {:?}", f.id);
        }
    }

    let mut out = Outputs::new(&args.out)?;
    let mut summary = Summary {
        frames: frames.len(),
        ..Summary::default()
    };
    let mut records = Vec::with_capacity(frames.len());
    for f in frames {
        out.write(&format!("detections/{}.txt", f.id), write_labels(&f.detections))?;
        out.write(&format!("gt/{}.txt", f.id), write_labels(&f.ground_truth))?;
        for (index, ply) in &f.clouds {
            out.write(&format!("clouds/{}_{index:03}.ply", f.id), ply)?;
        }
        for r in &f.record.instances {
            summary.instances += 1;
            match r {
                InstanceRecord::Ok(_) => summary.ok += 1,
                InstanceRecord::Skipped { .. } => summary.skipped += 1,
                InstanceRecord::Failed { .. } => summary.failed += 1,
            }
        }
        records.push(f.record);
    }
    let failed = summary.failed;
    out.write_json(
        "diagnostics.json",
        &Diagnostics {
            summary,
            frames: records,
        },
    )?;
    out.finish("pipeline", args.scenes.iter().map(|p| path_string(p)).collect(), &cfg)?;
    Ok(failed)
}

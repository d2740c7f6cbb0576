use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use stereozoom::eval::{
    compute_ap, parse_labels, ApResult, ApSampling, Difficulty, DifficultyThresholds, EvalConfig, KittiLabel, Metric,
};

use crate::util::{load_settings, parse_bucket, path_string, read_text, Outputs};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of detection label files, one `<frame>.txt` per frame.
    #[arg(long)]
    pub det: PathBuf,
    /// Directory of ground-truth label files.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub class: Option<String>,
    /// Comma-separated, from `bev` and `3d`.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,
    #[arg(long, value_delimiter = ',')]
    pub ious: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub difficulties: Option<Vec<Difficulty>>,
    /// Recall positions, 11 or 40.
    #[arg(long)]
    pub ap_samples: Option<usize>,
    /// Shorthand for `--ap-samples 11`.
    #[arg(long)]
    pub eleven_point: bool,
    /// Depth slices such as `0-20,20-40,40-inf`.
    #[arg(long, value_delimiter = ',')]
    pub distance_buckets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub occlusion_levels: Option<Vec<i32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub class: String,
    pub metrics: Vec<Metric>,
    pub ious: Vec<f64>,
    pub difficulties: Vec<Difficulty>,
    pub ap_samples: usize,
    pub distance_buckets: Vec<String>,
    pub occlusion_levels: Vec<i32>,
    pub thresholds: DifficultyThresholds,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            class: "Car".into(),
            metrics: vec![Metric::Bev, Metric::ThreeD],
            ious: vec![0.5, 0.7],
            difficulties: Difficulty::ALL.to_vec(),
            ap_samples: 40,
            distance_buckets: Vec::new(),
            occlusion_levels: Vec::new(),
            thresholds: DifficultyThresholds::default(),
        }
    }
}

impl EvalArgs {
    fn settings(&self) -> Result<EvalSettings> {
        let mut s: EvalSettings = load_settings(self.config.as_deref())?;
        if let Some(c) = &self.class {
            s.class = c.clone();
        }
        if let Some(v) = &self.metrics {
            s.metrics = v.clone();
        }
        if let Some(v) = &self.ious {
            s.ious = v.clone();
        }
        if let Some(v) = &self.difficulties {
            s.difficulties = v.clone();
        }
        if let Some(v) = self.ap_samples {
            s.ap_samples = v;
        }
        if self.eleven_point {
            s.ap_samples = 11;
        }
        if let Some(v) = &self.distance_buckets {
            s.distance_buckets = v.clone();
        }
        if let Some(v) = &self.occlusion_levels {
            s.occlusion_levels = v.clone();
        }
        Ok(s)
    }
}

fn sampling(n: usize) -> Result<ApSampling> {
    match n {
        11 => Ok(ApSampling::Eleven),
        40 => Ok(ApSampling::Forty),
        _ => bail!("--ap-samples must be 11 or 40, got {n}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Slice {
    All,
    Distance(String, (f64, f64)),
    Occlusion(i32),
}

impl Slice {
    fn name(&self) -> String {
        match self {
            Slice::All => "all".into(),
            Slice::Distance(s, _) => format!("dist:{s}"),
            Slice::Occlusion(o) => format!("occ:{o}"),
        }
    }
}

/// Label files by frame id, in sorted order.
fn label_stems(dir: &Path) -> Result<BTreeSet<String>> {
    let mut stems = BTreeSet::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(s) = path.file_stem() {
                stems.insert(s.to_string_lossy().into_owned());
            }
        }
    }
    Ok(stems)
}

fn load_frames(dir: &Path, frames: &[String], present: &BTreeSet<String>) -> Result<Vec<Vec<KittiLabel>>> {
    frames
        .iter()
        .map(|f| {
            if !present.contains(f) {
                return Ok(Vec::new());
            }
            let path = dir.join(format!("{f}.txt"));
            parse_labels(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))
        })
        .collect()
}

#[derive(Serialize)]
struct ApRecord {
    class: String,
    metric: String,
    iou: f64,
    difficulty: String,
    slice: String,
    ap_samples: usize,
    #[serde(flatten)]
    result: ApResult,
}

#[derive(Serialize)]
struct Missing {
    detections: Vec<String>,
    ground_truth: Vec<String>,
}

#[derive(Serialize)]
struct ApReport {
    frames: usize,
    missing: Missing,
    results: Vec<ApRecord>,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let s = args.settings()?;
    let samples = sampling(s.ap_samples)?;
    let mut slices = vec![Slice::All];
    for b in &s.distance_buckets {
        slices.push(Slice::Distance(b.clone(), parse_bucket(b)?));
    }
    slices.extend(s.occlusion_levels.iter().map(|&o| Slice::Occlusion(o)));

    let det_stems = label_stems(&args.det)?;
    let gt_stems = label_stems(&args.gt)?;
    let frames: Vec<String> = det_stems.union(&gt_stems).cloned().collect();
    let missing = Missing {
        detections: gt_stems.difference(&det_stems).cloned().collect(),
        ground_truth: det_stems.difference(&gt_stems).cloned().collect(),
    };
    if !missing.detections.is_empty() {
        warn!("{} frame(s) have no detection file", missing.detections.len());
    }
    if !missing.ground_truth.is_empty() {
        warn!("{} frame(s) have no ground-truth file", missing.ground_truth.len());
    }
    let dets = load_frames(&args.det, &frames, &det_stems)?;
    let gts = load_frames(&args.gt, &frames, &gt_stems)?;

    let mut jobs = Vec::new();
    for &metric in &s.metrics {
        for &iou in &s.ious {
            for &difficulty in &s.difficulties {
                for slice in &slices {
                    jobs.push((metric, iou, difficulty, slice));
                }
            }
        }
    }
    let results: Vec<ApRecord> = jobs
        .par_iter()
        .map(|&(metric, iou, difficulty, slice)| {
            let mut cfg = EvalConfig::new(metric, iou, difficulty);
            cfg.category = s.class.clone();
            cfg.ap_samples = samples;
            cfg.thresholds = s.thresholds;
            match slice {
                Slice::All => {}
                Slice::Distance(_, range) => cfg.distance_bucket = Some(*range),
                Slice::Occlusion(o) => cfg.occlusion_filter = Some(*o),
            }
            let result = compute_ap(&dets, &gts, &cfg)?;
            Ok(ApRecord {
                class: s.class.clone(),
                metric: metric.to_string(),
                iou,
                difficulty: difficulty.to_string(),
                slice: slice.name(),
                ap_samples: s.ap_samples,
                result,
            })
        })
        .collect::<Result<_>>()?;

    let mut ap_csv = String::from("class,metric,iou,difficulty,slice,ap_samples,ap,num_gt,num_tp,num_fp\n");
    let mut pr_csv = String::from("class,metric,iou,difficulty,slice,threshold,tp,fp,precision,recall\n");
    for r in &results {
        let key = format!("{},{},{},{},{}", r.class, r.metric, r.iou, r.difficulty, r.slice);
        writeln!(
            ap_csv,
            "{key},{},{:.4},{},{},{}",
            r.ap_samples, r.result.ap, r.result.num_gt, r.result.num_tp, r.result.num_fp
        )?;
        for p in &r.result.curve {
            writeln!(pr_csv, "{key},{},{},{},{},{}", p.threshold, p.tp, p.fp, p.precision, p.recall)?;
        }
    }
    for r in &results {
        println!(
            "{} {} iou={} {} {}: AP={:.2} ({} gt)",
            r.class, r.metric, r.iou, r.difficulty, r.slice, r.result.ap, r.result.num_gt
        );
    }

    let mut out = Outputs::new(&args.out)?;
    out.write("ap.csv", ap_csv)?;
    out.write("pr_curves.csv", pr_csv)?;
    out.write_json(
        "ap.json",
        &ApReport {
            frames: frames.len(),
            missing,
            results,
        },
    )?;
    out.finish("eval", vec![path_string(&args.det), path_string(&args.gt)], &s)
}

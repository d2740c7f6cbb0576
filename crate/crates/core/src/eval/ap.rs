//! Average precision with KITTI difficulty, `DontCare` and slice handling.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::iou::{bev_iou, box2d_coverage, iou_3d};
use super::label::KittiLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        })
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "moderate" | "mode" => Ok(Difficulty::Moderate),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::Input(format!("unknown difficulty {other:?}"))),
        }
    }
}

/// Difficulty class of a single ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DifficultyLevel {
    Easy,
    Moderate,
    Hard,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelLimits {
    pub min_height: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

/// Per-difficulty limits; the public benchmark values by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyThresholds {
    pub easy: LevelLimits,
    pub moderate: LevelLimits,
    pub hard: LevelLimits,
}

impl Default for DifficultyThresholds {
    fn default() -> Self {
        Self {
            easy: LevelLimits {
                min_height: 40.0,
                max_occlusion: 0,
                max_truncation: 0.15,
            },
            moderate: LevelLimits {
                min_height: 25.0,
                max_occlusion: 1,
                max_truncation: 0.30,
            },
            hard: LevelLimits {
                min_height: 25.0,
                max_occlusion: 2,
                max_truncation: 0.50,
            },
        }
    }
}

impl DifficultyThresholds {
    pub fn limits(&self, d: Difficulty) -> &LevelLimits {
        match d {
            Difficulty::Easy => &self.easy,
            Difficulty::Moderate => &self.moderate,
            Difficulty::Hard => &self.hard,
        }
    }

    fn admits(&self, d: Difficulty, label: &KittiLabel) -> bool {
        let l = self.limits(d);
        label.bbox_height() >= l.min_height
            && (0..=l.max_occlusion).contains(&label.occlusion)
            && label.truncation <= l.max_truncation
    }
}

pub fn assign_difficulty(label: &KittiLabel) -> DifficultyLevel {
    assign_difficulty_with(label, &DifficultyThresholds::default())
}

/// The strictest class whose limits the label meets.
pub fn assign_difficulty_with(label: &KittiLabel, th: &DifficultyThresholds) -> DifficultyLevel {
    if th.admits(Difficulty::Easy, label) {
        DifficultyLevel::Easy
    } else if th.admits(Difficulty::Moderate, label) {
        DifficultyLevel::Moderate
    } else if th.admits(Difficulty::Hard, label) {
        DifficultyLevel::Hard
    } else {
        DifficultyLevel::Ignored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Bev,
    ThreeD,
}

impl Metric {
    pub fn iou(&self, a: &KittiLabel, b: &KittiLabel) -> f64 {
        match self {
            Metric::Bev => bev_iou(&a.to_box(), &b.to_box()),
            Metric::ThreeD => iou_3d(&a.to_box(), &b.to_box()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Bev => "bev",
            Metric::ThreeD => "3d",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bev" => Ok(Metric::Bev),
            "3d" => Ok(Metric::ThreeD),
            other => Err(Error::Input(format!("unknown metric {other:?}"))),
        }
    }
}

/// Number of recall positions at which precision is sampled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApSampling {
    /// Recall 0, 0.1, ..., 1.
    Eleven,
    /// Recall 1/40, 2/40, ..., 1.
    #[default]
    Forty,
}

impl ApSampling {
    /// `(denominator, recall indices)`: recall `j / denominator` for each index.
    fn positions(&self) -> (usize, std::ops::RangeInclusive<usize>) {
        match self {
            ApSampling::Eleven => (10, 0..=10),
            ApSampling::Forty => (40, 1..=40),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            ApSampling::Eleven => 11,
            ApSampling::Forty => 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub category: String,
    pub iou_threshold: f64,
    pub difficulty: Difficulty,
    pub ap_samples: ApSampling,
    pub metric: Metric,
    /// Ground truth outside `[min, max)` in depth is ignored.
    pub distance_bucket: Option<(f64, f64)>,
    /// Only ground truth at this occlusion level is evaluated.
    pub occlusion_filter: Option<i32>,
    pub thresholds: DifficultyThresholds,
}

impl EvalConfig {
    pub fn new(metric: Metric, iou_threshold: f64, difficulty: Difficulty) -> Self {
        Self {
            category: "Car".into(),
            iou_threshold,
            difficulty,
            ap_samples: ApSampling::default(),
            metric,
            distance_bucket: None,
            occlusion_filter: None,
            thresholds: DifficultyThresholds::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Input(format!(
                "IoU threshold must be in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        Ok(())
    }
}

/// Class evaluated alongside `category` without counting as a miss or a false positive.
pub fn neighbor_category(category: &str) -> Option<&'static str> {
    match category {
        "Car" => Some("Van"),
        "Pedestrian" => Some("Person_sitting"),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    /// Average precision in percent.
    pub ap: f64,
    pub num_gt: usize,
    pub num_tp: usize,
    pub num_fp: usize,
    pub curve: Vec<PrPoint>,
    /// `(recall, interpolated precision)` at each sample position.
    pub sampled: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GtRole {
    Counted,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    TruePositive,
    FalsePositive,
    Discarded,
}

struct FrameTruth<'a> {
    objects: Vec<(&'a KittiLabel, GtRole)>,
    dont_care: Vec<&'a KittiLabel>,
}

fn classify_frame<'a>(gts: &'a [KittiLabel], cfg: &EvalConfig) -> FrameTruth<'a> {
    let neighbor = neighbor_category(&cfg.category);
    let mut objects = Vec::new();
    let mut dont_care = Vec::new();
    for gt in gts {
        if gt.is_dont_care() {
            dont_care.push(gt);
        } else if gt.category == cfg.category {
            let in_slice = cfg.thresholds.admits(cfg.difficulty, gt)
                && cfg
                    .distance_bucket
                    .is_none_or(|(lo, hi)| gt.location.z >= lo && gt.location.z < hi)
                && cfg.occlusion_filter.is_none_or(|o| gt.occlusion == o);
            let role = if in_slice {
                GtRole::Counted
            } else {
                GtRole::Ignored
            };
            objects.push((gt, role));
        } else if Some(gt.category.as_str()) == neighbor {
            objects.push((gt, GtRole::Ignored));
        }
    }
    FrameTruth { objects, dont_care }
}

struct Candidate<'a> {
    frame: usize,
    index: usize,
    score: f64,
    det: &'a KittiLabel,
}

fn box_key(l: &KittiLabel) -> [f64; 7] {
    [
        l.location.x,
        l.location.y,
        l.location.z,
        l.dims.height,
        l.dims.width,
        l.dims.length,
        l.rotation_y,
    ]
}

fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.frame.cmp(&b.frame))
        .then_with(|| {
            box_key(a.det)
                .iter()
                .zip(box_key(b.det).iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then(a.index.cmp(&b.index))
}

/// Average precision of `dets` against `gts`, one list per frame.
///
/// Detections are matched greedily in descending confidence to the unmatched
/// ground truth of highest IoU at or above the threshold. Matches to ignored
/// ground truth and detections covering `DontCare` regions count neither as
/// true nor false positives.
pub fn compute_ap(dets: &[Vec<KittiLabel>], gts: &[Vec<KittiLabel>], cfg: &EvalConfig) -> Result<ApResult> {
    cfg.validate()?;
    if dets.len() != gts.len() {
        return Err(Error::Input(format!(
            "{} detection frames vs {} ground-truth frames",
            dets.len(),
            gts.len()
        )));
    }
    let truth: Vec<FrameTruth> = gts.iter().map(|g| classify_frame(g, cfg)).collect();
    let num_gt = truth
        .iter()
        .flat_map(|t| &t.objects)
        .filter(|(_, role)| *role == GtRole::Counted)
        .count();

    let min_height = cfg.thresholds.limits(cfg.difficulty).min_height;
    let mut candidates = Vec::new();
    for (frame, frame_dets) in dets.iter().enumerate() {
        for (index, det) in frame_dets.iter().enumerate() {
            if det.category != cfg.category || det.bbox_height() < min_height {
                continue;
            }
            let score = det.score.ok_or_else(|| {
                Error::Input(format!("detection {index} in frame {frame} has no score"))
            })?;
            candidates.push(Candidate {
                frame,
                index,
                score,
                det,
            });
        }
    }
    candidates.sort_by(candidate_order);

    let mut taken: Vec<Vec<bool>> = truth.iter().map(|t| vec![false; t.objects.len()]).collect();
    let mut decisions: Vec<(f64, Outcome)> = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let frame = &truth[c.frame];
        let mut best: [Option<(usize, f64)>; 2] = [None, None];
        for (gi, (gt, role)) in frame.objects.iter().enumerate() {
            if taken[c.frame][gi] {
                continue;
            }
            let iou = cfg.metric.iou(c.det, gt);
            if iou < cfg.iou_threshold {
                continue;
            }
            let slot = &mut best[(*role == GtRole::Ignored) as usize];
            if slot.is_none_or(|(_, b)| iou > b) {
                *slot = Some((gi, iou));
            }
        }
        let outcome = if let Some((gi, _)) = best[0] {
            taken[c.frame][gi] = true;
            Outcome::TruePositive
        } else if let Some((gi, _)) = best[1] {
            taken[c.frame][gi] = true;
            Outcome::Discarded
        } else if frame
            .dont_care
            .iter()
            .any(|dc| box2d_coverage(&c.det.bbox2d, &dc.bbox2d) >= cfg.iou_threshold)
        {
            Outcome::Discarded
        } else {
            Outcome::FalsePositive
        };
        decisions.push((c.score, outcome));
    }

    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let kept: Vec<_> = decisions
        .iter()
        .filter(|(_, o)| *o != Outcome::Discarded)
        .collect();
    for (i, (score, outcome)) in kept.iter().enumerate() {
        match outcome {
            Outcome::TruePositive => tp += 1,
            _ => fp += 1,
        }
        let last_of_group = kept.get(i + 1).is_none_or(|(next, _)| next != score);
        if last_of_group {
            curve.push(PrPoint {
                threshold: *score,
                tp,
                fp,
                precision: tp as f64 / (tp + fp) as f64,
                recall: if num_gt == 0 {
                    0.0
                } else {
                    tp as f64 / num_gt as f64
                },
            });
        }
    }

    let (denom, positions) = cfg.ap_samples.positions();
    let sampled: Vec<(f64, f64)> = positions
        .map(|j| {
            let precision = if num_gt == 0 {
                0.0
            } else {
                curve
                    .iter()
                    .filter(|p| p.tp * denom >= j * num_gt)
                    .map(|p| p.precision)
                    .fold(0.0, f64::max)
            };
            (j as f64 / denom as f64, precision)
        })
        .collect();
    let ap = 100.0 * sampled.iter().map(|(_, p)| p).sum::<f64>() / sampled.len() as f64;
    Ok(ApResult {
        ap,
        num_gt,
        num_tp: tp,
        num_fp: fp,
        curve,
        sampled,
    })
}

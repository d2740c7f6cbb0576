//! Detection evaluation: overlap measures, label files and average precision.

pub mod ap;
pub mod iou;
pub mod label;

pub use ap::{
    assign_difficulty, assign_difficulty_with, compute_ap, neighbor_category, ApResult, ApSampling, Difficulty,
    DifficultyLevel, DifficultyThresholds, EvalConfig, LevelLimits, Metric, PrPoint,
};
pub use iou::{bev_intersection_area, bev_iou, box2d_coverage, iou_3d, polygon_area, vertical_overlap};
pub use label::{observation_angle, parse_labels, write_labels, KittiLabel, DONT_CARE};

//! KITTI object label and detection files.
//!
//! One object per line, whitespace separated:
//! `type truncated occluded alpha left top right bottom h w l x y z rotation_y [score]`.

use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parts::{normalize_angle, Box3D, Dimensions};

pub const DONT_CARE: &str = "DontCare";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KittiLabel {
    pub category: String,
    pub truncation: f64,
    /// 0 fully visible, 1 partly occluded, 2 largely occluded, 3 unknown
    /// (-1 on `DontCare` rows).
    pub occlusion: i32,
    pub alpha: f64,
    /// `(left, top, right, bottom)` in pixels.
    pub bbox2d: [f64; 4],
    pub dims: Dimensions,
    pub location: Vector3<f64>,
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabel {
    pub fn is_dont_care(&self) -> bool {
        self.category == DONT_CARE
    }

    pub fn to_box(&self) -> Box3D {
        Box3D {
            dims: self.dims,
            yaw: self.rotation_y,
            t: self.location,
        }
    }

    pub fn bbox_height(&self) -> f64 {
        self.bbox2d[3] - self.bbox2d[1]
    }

    /// A detection row for `b`, with the observation angle derived from its position.
    pub fn detection(category: &str, b: &Box3D, bbox2d: [f64; 4], score: f64) -> Self {
        Self {
            category: category.to_string(),
            truncation: -1.0,
            occlusion: -1,
            alpha: observation_angle(b),
            bbox2d,
            dims: b.dims,
            location: b.t,
            rotation_y: b.yaw,
            score: Some(score),
        }
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 15 && fields.len() != 16 {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected 15 or 16 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|e| Error::Format {
                line: lineno,
                message: format!("field {}: cannot parse {:?}: {e}", i + 1, fields[i]),
            })
        };
        let occlusion = fields[2].parse::<i32>().map_err(|e| Error::Format {
            line: lineno,
            message: format!("field 3: cannot parse {:?}: {e}", fields[2]),
        })?;
        Ok(Self {
            category: fields[0].to_string(),
            truncation: num(1)?,
            occlusion,
            alpha: num(3)?,
            bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
            dims: Dimensions::new(num(8)?, num(9)?, num(10)?),
            location: Vector3::new(num(11)?, num(12)?, num(13)?),
            rotation_y: num(14)?,
            score: if fields.len() == 16 { Some(num(15)?) } else { None },
        })
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            self.category,
            self.truncation,
            self.occlusion,
            self.alpha,
            self.bbox2d[0],
            self.bbox2d[1],
            self.bbox2d[2],
            self.bbox2d[3],
            self.dims.height,
            self.dims.width,
            self.dims.length,
            self.location.x,
            self.location.y,
            self.location.z,
            self.rotation_y
        );
        if let Some(score) = self.score {
            let _ = write!(s, " {score}");
        }
        s
    }
}

/// KITTI `alpha`: yaw relative to the viewing ray through the box centre.
pub fn observation_angle(b: &Box3D) -> f64 {
    normalize_angle(b.yaw - b.t.x.atan2(b.t.z))
}

pub fn parse_labels(text: &str) -> Result<Vec<KittiLabel>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| KittiLabel::parse_line(l, i + 1))
        .collect()
}

pub fn write_labels(labels: &[KittiLabel]) -> String {
    labels.iter().map(|l| l.to_line() + "\n").collect()
}

//! Rectified stereo camera model and KITTI calibration files.
//!
//! A camera is described by its 3×4 projection matrix
//!
//! ```text
//! [ f_u  0   c_u  -f_u*b_x ]
//! [ 0    f_v c_v   0       ]
//! [ 0    0   1     0       ]
//! ```
//!
//! where `b_x` is the horizontal offset (meters) of the camera with respect to
//! the reference camera. Zooming an image by `k` horizontally and `m`
//! vertically scales the pixel-valued parameters and leaves `b_x` untouched.

use std::fmt;

use log::warn;
use nalgebra::Matrix3x4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics of one camera of a rectified stereo rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub f_u: f64,
    pub f_v: f64,
    pub c_u: f64,
    pub c_v: f64,
    /// Offset relative to the reference camera, meters.
    pub b_x: f64,
}

impl CameraIntrinsics {
    pub fn new(f_u: f64, f_v: f64, c_u: f64, c_v: f64, b_x: f64) -> Result<Self> {
        let cam = Self {
            f_u,
            f_v,
            c_u,
            c_v,
            b_x,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.f_u, self.f_v, self.c_u, self.c_v, self.b_x];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCalibration(
                "non-finite intrinsic parameter".into(),
            ));
        }
        if self.f_u <= 0.0 || self.f_v <= 0.0 {
            return Err(Error::InvalidCalibration(format!(
                "focal lengths must be positive (f_u = {}, f_v = {})",
                self.f_u, self.f_v
            )));
        }
        Ok(())
    }

    /// Extract intrinsics from a row-major 3×4 KITTI projection matrix.
    pub fn from_projection(p: &[f64; 12]) -> Result<Self> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCalibration(
                "projection matrix has non-finite entries".into(),
            ));
        }
        if p[0] <= 0.0 {
            return Err(Error::InvalidCalibration(format!(
                "f_u must be positive, got {}",
                p[0]
            )));
        }
        if p[1] != 0.0 {
            warn!("projection matrix has nonzero skew {}; ignored", p[1]);
        }
        if p[7] != 0.0 {
            warn!("projection matrix has nonzero P[1][3] = {}; ignored", p[7]);
        }
        Self::new(p[0], p[5], p[2], p[6], -p[3] / p[0])
    }

    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        Matrix3x4::new(
            self.f_u,
            0.0,
            self.c_u,
            -self.f_u * self.b_x,
            0.0,
            self.f_v,
            self.c_v,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
        )
    }

    fn projection_row_major(&self) -> [f64; 12] {
        let p = self.projection_matrix();
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                out[r * 4 + c] = p[(r, c)];
            }
        }
        out
    }
}

/// Apply a `k` (horizontal) / `m` (vertical) zoom to a camera.
pub fn zoom_intrinsics(cam: &CameraIntrinsics, k: f64, m: f64) -> Result<CameraIntrinsics> {
    if !(k > 0.0 && k.is_finite()) || !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!(
            "zoom factors must be positive and finite (k = {k}, m = {m})"
        )));
    }
    Ok(CameraIntrinsics {
        f_u: k * cam.f_u,
        f_v: m * cam.f_v,
        c_u: k * cam.c_u,
        c_v: m * cam.c_v,
        b_x: cam.b_x,
    })
}

#[derive(Deserialize)]
struct RigParts {
    left: CameraIntrinsics,
    right: CameraIntrinsics,
}

/// The left (reference, `P2`) and right (`P3`) cameras of a rectified pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RigParts")]
pub struct StereoRig {
    left: CameraIntrinsics,
    right: CameraIntrinsics,
    #[serde(skip_serializing)]
    baseline: f64,
}

impl TryFrom<RigParts> for StereoRig {
    type Error = Error;

    fn try_from(parts: RigParts) -> Result<Self> {
        StereoRig::new(parts.left, parts.right)
    }
}

fn baseline_of(left: &CameraIntrinsics, right: &CameraIntrinsics) -> f64 {
    (-left.f_u * left.b_x + right.f_u * right.b_x) / left.f_u
}

impl StereoRig {
    pub fn new(left: CameraIntrinsics, right: CameraIntrinsics) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        if left.f_u != right.f_u {
            warn!(
                "left/right focal lengths differ ({} vs {}); rig may not be rectified",
                left.f_u, right.f_u
            );
        }
        let baseline = baseline_of(&left, &right);
        if !(baseline > 0.0) || !baseline.is_finite() {
            return Err(Error::InvalidCalibration(format!(
                "stereo baseline must be positive, got {baseline}"
            )));
        }
        Ok(Self {
            left,
            right,
            baseline,
        })
    }

    /// A rig with identical intrinsics for both cameras, the left camera at
    /// the reference position and the right camera `baseline` meters to its right.
    pub fn symmetric(f_u: f64, f_v: f64, c_u: f64, c_v: f64, baseline: f64) -> Result<Self> {
        let left = CameraIntrinsics::new(f_u, f_v, c_u, c_v, 0.0)?;
        let right = CameraIntrinsics::new(f_u, f_v, c_u, c_v, baseline)?;
        Self::new(left, right)
    }

    pub fn left(&self) -> &CameraIntrinsics {
        &self.left
    }

    pub fn right(&self) -> &CameraIntrinsics {
        &self.right
    }

    /// Distance between the two camera centres, meters.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }
}

/// Baseline of the rig after zooming both cameras by `k` horizontally.
///
/// The zoom factor cancels from numerator and denominator, so the result is
/// the unzoomed baseline, bit for bit.
pub fn zoomed_baseline(rig: &StereoRig, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("zoom factor must be positive, got {k}")));
    }
    Ok(baseline_of(&rig.left, &rig.right))
}

#[derive(Debug, Clone, PartialEq)]
struct CalibEntry {
    key: String,
    raw: String,
}

/// A KITTI object calibration file.
///
/// Only `P2` and `P3` are interpreted; every line is kept verbatim so that
/// serialising reproduces the remaining matrices unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiCalib {
    entries: Vec<CalibEntry>,
    rig: StereoRig,
}

fn parse_matrix(raw: &str, line: usize) -> Result<[f64; 12]> {
    let values = raw
        .split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>().map_err(|e| Error::Format {
                line,
                message: format!("field {}: cannot parse {tok:?}: {e}", i + 1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    values.try_into().map_err(|v: Vec<f64>| Error::Format {
        line,
        message: format!("expected 12 values, found {}", v.len()),
    })
}

impl KittiCalib {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut p2 = None;
        let mut p3 = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line.split_once(':').ok_or_else(|| Error::Format {
                line: lineno,
                message: "expected `KEY: values`".into(),
            })?;
            let key = key.trim().to_string();
            let raw = raw.trim().to_string();
            match key.as_str() {
                "P2" => p2 = Some(CameraIntrinsics::from_projection(&parse_matrix(&raw, lineno)?)?),
                "P3" => p3 = Some(CameraIntrinsics::from_projection(&parse_matrix(&raw, lineno)?)?),
                _ => {}
            }
            entries.push(CalibEntry { key, raw });
        }
        let missing = |k: &str| Error::Format {
            line: 0,
            message: format!("missing {k} line"),
        };
        let left = p2.ok_or_else(|| missing("P2"))?;
        let right = p3.ok_or_else(|| missing("P3"))?;
        Ok(Self {
            entries,
            rig: StereoRig::new(left, right)?,
        })
    }

    /// A minimal calibration file holding `P2`/`P3` for `rig`.
    pub fn from_rig(rig: &StereoRig) -> Self {
        let fmt_matrix = |cam: &CameraIntrinsics| {
            cam.projection_row_major()
                .iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let identity3 = "1e0 0e0 0e0 0e0 1e0 0e0 0e0 0e0 1e0".to_string();
        let entries = vec![
            CalibEntry {
                key: "P2".into(),
                raw: fmt_matrix(&rig.left),
            },
            CalibEntry {
                key: "P3".into(),
                raw: fmt_matrix(&rig.right),
            },
            CalibEntry {
                key: "R0_rect".into(),
                raw: identity3,
            },
        ];
        Self { entries, rig: *rig }
    }

    pub fn rig(&self) -> &StereoRig {
        &self.rig
    }

    /// Raw value text of an entry, e.g. `"Tr_velo_to_cam"`.
    pub fn raw_entry(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.raw.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }
}

impl fmt::Display for KittiCalib {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}: {}", e.key, e.raw)?;
        }
        Ok(())
    }
}

/// Parse the stereo rig out of KITTI calibration text.
pub fn parse_kitti_calib(text: &str) -> Result<StereoRig> {
    KittiCalib::parse(text).map(|c| c.rig)
}

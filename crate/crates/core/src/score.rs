//! 3D fitting score and detection confidence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parts::Box3D;

pub const DEFAULT_THETA: f64 = 8.0;

/// Direction of the fitting score.
///
/// `Literal` evaluates `1 - exp(-D / theta)`, which grows with the depth
/// error. `Exp` evaluates `exp(-D / theta)`, which shrinks with it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    #[default]
    Literal,
    Exp,
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ScoreMode::Literal),
            "exp" => Ok(ScoreMode::Exp),
            other => Err(Error::Input(format!("unknown score mode {other:?}"))),
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Literal => "literal",
            ScoreMode::Exp => "exp",
        })
    }
}

/// Mean absolute depth difference over corresponding points, clipped to `[0, 1]`.
pub fn mean_depth_error(pred_z: &[f64], gt_z: &[f64]) -> Result<f64> {
    if pred_z.is_empty() || pred_z.len() != gt_z.len() {
        return Err(Error::domain(format!(
            "depth lists must be non-empty and equal length ({} vs {})",
            pred_z.len(),
            gt_z.len()
        )));
    }
    let sum: f64 = pred_z.iter().zip(gt_z).map(|(a, b)| (a - b).abs()).sum();
    Ok((sum / pred_z.len() as f64).clamp(0.0, 1.0))
}

pub fn fitting_score(d_hat: f64, theta: f64, mode: ScoreMode) -> Result<f64> {
    if !(0.0..=1.0).contains(&d_hat) {
        return Err(Error::domain(format!("clipped depth error must be in [0, 1], got {d_hat}")));
    }
    if !(theta > 0.0) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    Ok(match mode {
        ScoreMode::Literal => -(-d_hat / theta).exp_m1(),
        ScoreMode::Exp => (-d_hat / theta).exp(),
    })
}

pub fn detection_confidence(prob_2d: f64, fit_score: f64) -> Result<f64> {
    for (name, v) in [("2D probability", prob_2d), ("fitting score", fit_score)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} must be in [0, 1], got {v}")));
        }
    }
    Ok(prob_2d * fit_score)
}

/// A scored 3D detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: Box3D,
    pub prob_2d: f64,
    pub fit_score: f64,
    pub confidence: f64,
}

impl Detection {
    pub fn new(bbox: Box3D, prob_2d: f64, fit_score: f64) -> Result<Self> {
        Ok(Self {
            bbox,
            prob_2d,
            fit_score,
            confidence: detection_confidence(prob_2d, fit_score)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_error_examples() {
        let gt = [10.0, 20.0, 30.0];
        assert_eq!(mean_depth_error(&gt, &gt).unwrap(), 0.0);
        assert_eq!(mean_depth_error(&[10.5, 19.5, 30.5], &gt).unwrap(), 0.5);
        assert_eq!(mean_depth_error(&[13.0, 17.0, 33.0], &gt).unwrap(), 1.0);
        assert!(mean_depth_error(&[], &[]).is_err());
        assert!(mean_depth_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fitting_score_examples() {
        assert_eq!(fitting_score(0.0, 8.0, ScoreMode::Literal).unwrap(), 0.0);
        let one = fitting_score(1.0, 8.0, ScoreMode::Literal).unwrap();
        assert!((one - 0.117503097415405).abs() < 1e-12);
        let half = fitting_score(0.5, 8.0, ScoreMode::Literal).unwrap();
        assert!((half - 0.060586937186524).abs() < 1e-12);
        assert_eq!(fitting_score(0.0, 8.0, ScoreMode::Exp).unwrap(), 1.0);
        assert!((fitting_score(1.0, 8.0, ScoreMode::Exp).unwrap() - 0.882496902584595).abs() < 1e-12);
        assert!(fitting_score(1.5, 8.0, ScoreMode::Literal).is_err());
        assert!(fitting_score(0.5, 0.0, ScoreMode::Literal).is_err());
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(detection_confidence(1.0, 1.0).unwrap(), 1.0);
        assert!((detection_confidence(0.9, 0.117503).unwrap() - 0.1057527).abs() < 1e-12);
        assert_eq!(detection_confidence(0.0, 0.3).unwrap(), 0.0);
        assert!(detection_confidence(1.1, 0.3).is_err());
        assert!(detection_confidence(0.5, -0.1).is_err());
    }

    #[test]
    fn modes_are_monotone() {
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(fitting_score(a, 8.0, ScoreMode::Literal).unwrap() < fitting_score(b, 8.0, ScoreMode::Literal).unwrap());
            assert!(fitting_score(a, 8.0, ScoreMode::Exp).unwrap() > fitting_score(b, 8.0, ScoreMode::Exp).unwrap());
        }
    }

    #[test]
    fn scaling_fit_scores_keeps_ranking() {
        let probs = [0.9, 0.4, 0.75, 0.2];
        let fits = [0.1, 0.3, 0.05, 0.9];
        let rank = |scale: f64| {
            let mut idx: Vec<usize> = (0..4).collect();
            let s: Vec<f64> = (0..4)
                .map(|i| detection_confidence(probs[i], fits[i] * scale).unwrap())
                .collect();
            idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
            idx
        };
        assert_eq!(rank(1.0), rank(0.37));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("exp".parse::<ScoreMode>().unwrap(), ScoreMode::Exp);
        assert_eq!(ScoreMode::default().to_string(), "literal");
        assert!("other".parse::<ScoreMode>().is_err());
    }
}

//! Instance point clouds from zoomed-view disparity, part and mask rasters.

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::StereoRig;
use crate::error::{Error, Result};
use crate::parts::PartLocation;
use crate::raster::Raster;
use crate::zoom::ZoomedView;

/// Number of points fed to pose estimation.
pub const DEFAULT_SAMPLE_COUNT: usize = 500;

/// Per-instance rasters at the zoomed resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMaps {
    pub disparity: Raster<f64>,
    pub parts: Raster<[f64; 3]>,
    pub mask: Raster<bool>,
}

impl InstanceMaps {
    pub fn new(disparity: Raster<f64>, parts: Raster<[f64; 3]>, mask: Raster<bool>) -> Result<Self> {
        let dims = disparity.dims();
        for found in [parts.dims(), mask.dims()] {
            if found != dims {
                return Err(Error::Shape {
                    expected: dims,
                    found,
                });
            }
        }
        Ok(Self {
            disparity,
            parts,
            mask,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.disparity.dims()
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m).count()
    }
}

/// One record of an `N x 6` instance cloud, plus the pixel it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub position: Vector3<f64>,
    pub part: PartLocation,
    pub pixel: (u32, u32),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstancePointCloud {
    pub points: Vec<CloudPoint>,
}

impl InstancePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Row-major `N x 6` matrix: `x y z p_x p_y p_z`.
    pub fn to_rows(&self) -> Vec<[f64; 6]> {
        self.points
            .iter()
            .map(|p| {
                let [a, b, c] = p.part.to_array();
                [p.position.x, p.position.y, p.position.z, a, b, c]
            })
            .collect()
    }
}

/// Counts reported by [`build_instance_cloud`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloudDiagnostics {
    pub foreground: usize,
    pub emitted: usize,
    /// Foreground pixels with non-positive or non-finite total disparity.
    pub dropped: usize,
}

/// Camera-frame point seen at zoomed pixel `(u, v)` with crop-local disparity `d`.
///
/// Pixel centres sit at integer coordinates.
pub fn backproject_pixel(u: f64, v: f64, d: f64, view: &ZoomedView, rig: &StereoRig) -> Result<Vector3<f64>> {
    if !(u >= 0.0 && u < view.width as f64 && v >= 0.0 && v < view.height as f64) {
        return Err(Error::domain(format!(
            "pixel ({u}, {v}) outside the {}x{} view",
            view.width, view.height
        )));
    }
    backproject_unchecked(u, v, d, view, rig)
}

fn backproject_unchecked(u: f64, v: f64, d: f64, view: &ZoomedView, rig: &StereoRig) -> Result<Vector3<f64>> {
    let total = d + view.o_hat;
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::NonPositiveDisparity {
            disparity: d,
            offset: view.o_hat,
        });
    }
    let (k, m) = (view.k, view.m);
    let (x0, y0) = view.origin;
    let cam = rig.left();
    let kf_u = k * cam.f_u;
    let z = kf_u * rig.baseline() / total;
    let x = (u + k * x0 - k * cam.c_u) * z / kf_u + cam.b_x;
    let y = (v + m * y0 - m * cam.c_v) * z / (m * cam.f_v);
    Ok(Vector3::new(x, y, z))
}

pub fn build_instance_cloud(
    maps: &InstanceMaps,
    view: &ZoomedView,
    rig: &StereoRig,
) -> Result<(InstancePointCloud, CloudDiagnostics)> {
    if maps.dims() != view.dims() {
        return Err(Error::Shape {
            expected: view.dims(),
            found: maps.dims(),
        });
    }
    let (width, height) = view.dims();
    let rows: Vec<(Vec<CloudPoint>, usize, usize)> = (0..height)
        .into_par_iter()
        .map(|v| {
            let mut points = Vec::new();
            let (mut fg, mut dropped) = (0, 0);
            for u in 0..width {
                if !*maps.mask.get(u, v) {
                    continue;
                }
                fg += 1;
                let d = *maps.disparity.get(u, v);
                match backproject_unchecked(u as f64, v as f64, d, view, rig) {
                    Ok(position) => points.push(CloudPoint {
                        position,
                        part: PartLocation::from_array(*maps.parts.get(u, v)),
                        pixel: (u as u32, v as u32),
                    }),
                    Err(_) => dropped += 1,
                }
            }
            (points, fg, dropped)
        })
        .collect();

    let mut diag = CloudDiagnostics::default();
    let mut points = Vec::new();
    for (row, fg, dropped) in rows {
        diag.foreground += fg;
        diag.dropped += dropped;
        points.extend(row);
    }
    diag.emitted = points.len();
    Ok((InstancePointCloud { points }, diag))
}

/// Sorted indices of `count` draws from `0..n`: without replacement when
/// `n >= count`; otherwise every index once followed by draws with replacement.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::domain("sample count must be positive"));
    }
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = if n >= count {
        index::sample(&mut rng, n, count).into_vec()
    } else {
        (0..n)
            .chain((n..count).map(|_| rng.random_range(0..n)))
            .collect()
    };
    idx.sort_unstable();
    Ok(idx)
}

pub fn sample_points(pc: &InstancePointCloud, count: usize, seed: u64) -> Result<InstancePointCloud> {
    let idx = sample_indices(pc.len(), count, seed)?;
    Ok(InstancePointCloud {
        points: idx.into_iter().map(|i| pc.points[i]).collect(),
    })
}

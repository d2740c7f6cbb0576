//! Yaw/translation estimation from an instance cloud with part locations.
//!
//! Part locations give each point its object-frame position, so pose
//! estimation reduces to a rigid registration with known correspondences and
//! a single rotational degree of freedom, solved in closed form.

use nalgebra::Vector3;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parts::{part_to_object, yaw_rotation, Box3D, Dimensions};
use crate::pointcloud::InstancePointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseFitResult {
    #[serde(rename = "box")]
    pub bbox: Box3D,
    /// RMS distance between points and their fitted correspondences, meters.
    pub residual: f64,
    pub inlier_count: usize,
    pub converged: bool,
    /// Isotropic scale, when scale refinement was requested.
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseOptions {
    pub refine_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Alignment {
    yaw: f64,
    t: Vector3<f64>,
}

impl Alignment {
    fn apply(&self, q: &Vector3<f64>) -> Vector3<f64> {
        yaw_rotation(self.yaw) * q + self.t
    }
}

fn centroid<'a>(pts: impl Iterator<Item = &'a Vector3<f64>>) -> Vector3<f64> {
    let (sum, n) = pts.fold((Vector3::zeros(), 0usize), |(s, n), p| (s + p, n + 1));
    sum / n as f64
}

/// Least-squares yaw and translation mapping `object` onto `camera`.
fn align(camera: &[Vector3<f64>], object: &[Vector3<f64>], dims: &Dimensions) -> Result<Alignment> {
    let cx = centroid(camera.iter());
    let cq = centroid(object.iter());
    let (mut cos_sum, mut sin_sum, mut spread) = (0.0, 0.0, 0.0);
    for (x, q) in camera.iter().zip(object) {
        let (x, q) = (x - cx, q - cq);
        cos_sum += x.x * q.x + x.z * q.z;
        sin_sum += x.x * q.z - x.z * q.x;
        spread += q.x * q.x + q.z * q.z;
    }
    let scale = dims.length * dims.length + dims.width * dims.width;
    let tiny = 1e-18 * camera.len() as f64 * scale;
    if spread <= tiny || cos_sum.hypot(sin_sum) <= tiny {
        return Err(Error::RankDeficient);
    }
    let yaw = sin_sum.atan2(cos_sum);
    let t = cx - yaw_rotation(yaw) * cq;
    Ok(Alignment { yaw, t })
}

fn rms(camera: &[Vector3<f64>], object: &[Vector3<f64>], a: &Alignment) -> f64 {
    let sq: f64 = camera
        .iter()
        .zip(object)
        .map(|(x, q)| (x - a.apply(q)).norm_squared())
        .sum();
    (sq / camera.len() as f64).sqrt()
}

/// Matched `(camera-frame, object-frame)` point lists.
type Pairs = (Vec<Vector3<f64>>, Vec<Vector3<f64>>);

fn correspondences(pc: &InstancePointCloud, dims: &Dimensions) -> Result<Pairs> {
    if !dims.is_valid() {
        return Err(Error::domain(format!("box dimensions must be positive: {dims:?}")));
    }
    if pc.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            found: pc.len(),
        });
    }
    let camera = pc.points.iter().map(|p| p.position).collect();
    let object = pc
        .points
        .iter()
        .map(|p| part_to_object(&p.part, dims))
        .collect();
    Ok((camera, object))
}

fn isotropic_scale(camera: &[Vector3<f64>], object: &[Vector3<f64>], yaw: f64) -> f64 {
    let cx = centroid(camera.iter());
    let cq = centroid(object.iter());
    let r = yaw_rotation(yaw);
    let (num, den) = camera
        .iter()
        .zip(object)
        .fold((0.0, 0.0), |(n, d), (x, q)| {
            let q = r * (q - cq);
            (n + (x - cx).dot(&q), d + q.norm_squared())
        });
    num / den
}

fn finish(
    camera: &[Vector3<f64>],
    object: &[Vector3<f64>],
    dims: Dimensions,
    opts: PoseOptions,
) -> Result<PoseFitResult> {
    let a = align(camera, object, &dims)?;
    Ok(PoseFitResult {
        bbox: Box3D::new(dims, a.yaw, a.t),
        residual: rms(camera, object, &a),
        inlier_count: camera.len(),
        converged: true,
        scale: opts.refine_scale.then(|| isotropic_scale(camera, object, a.yaw)),
    })
}

/// Closed-form pose from all points of `pc`; `dims` is passed through.
pub fn fit_pose(pc: &InstancePointCloud, dims: Dimensions) -> Result<PoseFitResult> {
    fit_pose_with(pc, dims, PoseOptions::default())
}

pub fn fit_pose_with(pc: &InstancePointCloud, dims: Dimensions, opts: PoseOptions) -> Result<PoseFitResult> {
    let (camera, object) = correspondences(pc, &dims)?;
    finish(&camera, &object, dims, opts)
}

#[derive(Debug, Clone)]
struct Consensus {
    index: usize,
    inliers: Vec<usize>,
    residual: f64,
}

fn consensus(
    camera: &[Vector3<f64>],
    object: &[Vector3<f64>],
    dims: &Dimensions,
    params: &RansacParams,
) -> Option<Consensus> {
    let n = camera.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples: Vec<[usize; 3]> = (0..params.iterations)
        .map(|_| {
            let s = index::sample(&mut rng, n, 3);
            [s.index(0), s.index(1), s.index(2)]
        })
        .collect();

    samples
        .par_iter()
        .enumerate()
        .filter_map(|(index, s)| {
            let cam = s.map(|i| camera[i]);
            let obj = s.map(|i| object[i]);
            let a = align(&cam, &obj, dims).ok()?;
            let mut inliers = Vec::new();
            let mut sq = 0.0;
            for i in 0..n {
                let r = (camera[i] - a.apply(&object[i])).norm();
                if r < params.inlier_threshold {
                    inliers.push(i);
                    sq += r * r;
                }
            }
            if inliers.len() < 3 {
                return None;
            }
            let residual = (sq / inliers.len() as f64).sqrt();
            Some(Consensus {
                index,
                inliers,
                residual,
            })
        })
        .min_by(|a, b| {
            b.inliers
                .len()
                .cmp(&a.inliers.len())
                .then(a.residual.total_cmp(&b.residual))
                .then(a.index.cmp(&b.index))
        })
}

/// RANSAC over 3-point hypotheses followed by a least-squares refit on the
/// best consensus set.
pub fn fit_pose_ransac(
    pc: &InstancePointCloud,
    dims: Dimensions,
    iterations: usize,
    inlier_threshold: f64,
    seed: u64,
) -> Result<PoseFitResult> {
    let params = RansacParams {
        iterations,
        inlier_threshold,
        seed,
    };
    fit_pose_ransac_with(pc, dims, &params, PoseOptions::default())
}

pub fn fit_pose_ransac_with(
    pc: &InstancePointCloud,
    dims: Dimensions,
    params: &RansacParams,
    opts: PoseOptions,
) -> Result<PoseFitResult> {
    if params.iterations == 0 {
        return Err(Error::domain("RANSAC needs at least one iteration"));
    }
    if !(params.inlier_threshold > 0.0) {
        return Err(Error::domain("inlier threshold must be positive"));
    }
    let (camera, object) = correspondences(pc, &dims)?;
    let best = consensus(&camera, &object, &dims, params)
        .ok_or_else(|| Error::FitFailure("no hypothesis reached 3 inliers".into()))?;
    let cam: Vec<_> = best.inliers.iter().map(|&i| camera[i]).collect();
    let obj: Vec<_> = best.inliers.iter().map(|&i| object[i]).collect();
    finish(&cam, &obj, dims, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::{encode_part_location, normalize_angle, PartLocation};
    use crate::pointcloud::CloudPoint;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn dims() -> Dimensions {
        Dimensions::new(1.5, 1.6, 3.9)
    }

    fn cloud_for(b: &Box3D, n: usize, seed: u64) -> InstancePointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|i| {
                let q = Vector3::new(
                    rng.random_range(-0.5..0.5) * b.dims.length,
                    -rng.random_range(0.0..1.0) * b.dims.height,
                    rng.random_range(-0.5..0.5) * b.dims.width,
                );
                let x = b.to_camera(&q);
                CloudPoint {
                    position: x,
                    part: encode_part_location(&x, b).unwrap(),
                    pixel: (i as u32, 0),
                }
            })
            .collect();
        InstancePointCloud { points }
    }

    #[test]
    fn exact_recovery() {
        let truth = Box3D::new(dims(), 0.61, Vector3::new(2.0, 1.65, 25.0));
        let pc = cloud_for(&truth, 500, 1);
        let fit = fit_pose(&pc, dims()).unwrap();
        assert!((fit.bbox.yaw - truth.yaw).abs() < 1e-6);
        assert!((fit.bbox.t - truth.t).norm() < 1e-6);
        assert!(fit.residual < 1e-9);
        assert_eq!(fit.inlier_count, 500);
        assert!(fit.converged);
        assert_eq!(fit.bbox.dims, dims());
    }

    #[test]
    fn object_frame_cloud_gives_identity() {
        let unit = Box3D::new(dims(), 0.0, Vector3::zeros());
        let pc = cloud_for(&unit, 50, 2);
        let fit = fit_pose(&pc, dims()).unwrap();
        assert!(fit.bbox.yaw.abs() < 1e-12);
        assert!(fit.bbox.t.norm() < 1e-12);
    }

    #[test]
    fn error_paths() {
        let unit = Box3D::new(dims(), 0.0, Vector3::zeros());
        let mut pc = cloud_for(&unit, 2, 3);
        assert!(matches!(
            fit_pose(&pc, dims()),
            Err(Error::InsufficientPoints { needed: 3, found: 2 })
        ));
        pc = cloud_for(&unit, 10, 3);
        for p in &mut pc.points {
            p.part = PartLocation::new(0.3, 0.4, 0.5);
        }
        assert!(matches!(fit_pose(&pc, dims()), Err(Error::RankDeficient)));
        assert!(fit_pose(&cloud_for(&unit, 10, 3), Dimensions::new(0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn scale_refinement_reports_scale() {
        let truth = Box3D::new(dims(), -1.1, Vector3::new(-3.0, 1.7, 14.0));
        let pc = cloud_for(&truth, 200, 4);
        let fit = fit_pose_with(&pc, dims(), PoseOptions { refine_scale: true }).unwrap();
        assert!((fit.scale.unwrap() - 1.0).abs() < 1e-9);

        // the same parts on a box 10% larger
        let big = Dimensions::new(1.65, 1.76, 4.29);
        let grown = Box3D::new(big, truth.yaw, truth.t);
        let mut pc2 = pc.clone();
        for p in &mut pc2.points {
            p.position = crate::parts::decode_part_location(&p.part, &grown);
        }
        let fit = fit_pose_with(&pc2, dims(), PoseOptions { refine_scale: true }).unwrap();
        assert!((fit.scale.unwrap() - 1.1).abs() < 1e-9);
        assert!((fit.bbox.yaw - truth.yaw).abs() < 1e-9);
    }

    fn corrupt(pc: &mut InstancePointCloud, fraction: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (pc.len() as f64 * fraction).round() as usize;
        for i in index::sample(&mut rng, pc.len(), n) {
            pc.points[i].part = PartLocation::new(rng.random(), rng.random(), rng.random());
        }
    }

    #[test]
    fn ransac_without_outliers_matches_plain_fit() {
        let truth = Box3D::new(dims(), 2.0, Vector3::new(1.0, 1.6, 30.0));
        let pc = cloud_for(&truth, 300, 5);
        let plain = fit_pose(&pc, dims()).unwrap();
        let robust = fit_pose_ransac(&pc, dims(), 50, 0.1, 9).unwrap();
        assert_eq!(robust.inlier_count, 300);
        assert!((plain.bbox.yaw - robust.bbox.yaw).abs() < 1e-9);
        assert!((plain.bbox.t - robust.bbox.t).norm() < 1e-9);
    }

    #[test]
    fn ransac_is_deterministic_and_robust() {
        let truth = Box3D::new(dims(), -0.3, Vector3::new(-4.0, 1.5, 35.0));
        let mut pc = cloud_for(&truth, 500, 6);
        corrupt(&mut pc, 0.4, 7);
        let a = fit_pose_ransac(&pc, dims(), 200, 0.1, 11).unwrap();
        let b = fit_pose_ransac(&pc, dims(), 200, 0.1, 11).unwrap();
        assert_eq!(a, b);
        assert!(normalize_angle(a.bbox.yaw - truth.yaw).abs() < 0.5f64.to_radians());
        assert!((a.bbox.t - truth.t).norm() < 0.05);
        assert!(a.inlier_count >= 300 && a.inlier_count <= 500);
    }

    #[test]
    fn refinement_does_not_increase_residual() {
        let truth = Box3D::new(dims(), 0.9, Vector3::new(2.0, 1.6, 20.0));
        let mut pc = cloud_for(&truth, 400, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in &mut pc.points {
            p.position += Vector3::new(
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
            );
        }
        corrupt(&mut pc, 0.3, 2);
        let d = dims();
        let (camera, object) = correspondences(&pc, &d).unwrap();
        let params = RansacParams::default();
        let best = consensus(&camera, &object, &d, &params).unwrap();
        let refined = fit_pose_ransac_with(&pc, d, &params, PoseOptions::default()).unwrap();
        assert_eq!(refined.inlier_count, best.inliers.len());
        assert!(refined.residual <= best.residual + 1e-15);
    }

    #[test]
    fn ransac_failure_and_params() {
        let truth = Box3D::new(dims(), 0.0, Vector3::new(0.0, 1.6, 20.0));
        let mut pc = cloud_for(&truth, 3, 9);
        pc.points[2].part = PartLocation::new(0.9, 0.1, 0.9);
        pc.points[1].part = PartLocation::new(0.1, 0.9, 0.1);
        pc.points[0].part = PartLocation::new(0.1, 0.1, 0.9);
        assert!(matches!(
            fit_pose_ransac(&pc, dims(), 10, 1e-6, 0),
            Err(Error::FitFailure(_))
        ));
        assert!(fit_pose_ransac(&pc, dims(), 0, 0.1, 0).is_err());
        assert!(fit_pose_ransac(&pc, dims(), 10, 0.0, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn equivariance(yaw in -PI..PI, tx in -10.0..10.0f64, tz in 5.0..60.0f64,
                        dyaw in -PI..PI, dx in -5.0..5.0f64, dy in -1.0..1.0f64, dz in -5.0..5.0f64, seed in 0u64..1000) {
            let truth = Box3D::new(dims(), yaw, Vector3::new(tx, 1.6, tz));
            let pc = cloud_for(&truth, 100, seed);
            let fit = fit_pose(&pc, dims()).unwrap();
            let r = yaw_rotation(dyaw);
            let dt = Vector3::new(dx, dy, dz);
            let mut moved = pc.clone();
            for p in &mut moved.points {
                p.position = r * p.position + dt;
            }
            let fit2 = fit_pose(&moved, dims()).unwrap();
            prop_assert!(normalize_angle(fit2.bbox.yaw - fit.bbox.yaw - dyaw).abs() < 1e-9);
            prop_assert!((fit2.bbox.t - (r * fit.bbox.t + dt)).norm() < 1e-9);
        }

        #[test]
        fn subsampling_keeps_yaw(yaw in -PI..PI, seed in 0u64..10_000) {
            let truth = Box3D::new(dims(), yaw, Vector3::new(1.0, 1.6, 25.0));
            let pc = cloud_for(&truth, 2000, 42);
            let sub = crate::pointcloud::sample_points(&pc, 500, seed).unwrap();
            let fit = fit_pose(&sub, dims()).unwrap();
            prop_assert!(normalize_angle(fit.bbox.yaw - truth.yaw).abs() < 1e-6);
        }
    }
}

//! Adaptive zooming of stereo regions of interest.
//!
//! A stereo RoI is cut out of both images and resampled to a fixed target
//! size `(W, H)`. The zoom factors `k = W / w` and `m = H / h` are applied to
//! both cameras, and crop-local disparities are offset by `k * (x - x_bar)`.

use serde::{Deserialize, Serialize};

use crate::calib::{zoom_intrinsics, CameraIntrinsics, StereoRig};
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Default second-stage input size `(W, H)`.
pub const DEFAULT_TARGET: (usize, usize) = (256, 128);

/// An associated left/right box pair sharing vertical extent and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoRoI {
    /// Left-image horizontal start.
    pub x: f64,
    /// Right-image horizontal start.
    pub x_bar: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Axis-aligned crop rectangle in source pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl StereoRoI {
    pub fn new(x: f64, x_bar: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let roi = Self { x, x_bar, y, w, h };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.x, self.x_bar, self.y, self.w, self.h]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::domain("RoI has non-finite coordinates"));
        }
        if !(self.w > 0.0 && self.h > 0.0) {
            return Err(Error::domain(format!(
                "RoI size must be positive ({} x {})",
                self.w, self.h
            )));
        }
        if self.x < self.x_bar {
            return Err(Error::NegativeDisparityOffset {
                x: self.x,
                x_bar: self.x_bar,
            });
        }
        Ok(())
    }

    pub fn left_crop(&self) -> CropRect {
        CropRect {
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
        }
    }

    pub fn right_crop(&self) -> CropRect {
        CropRect {
            x: self.x_bar,
            ..self.left_crop()
        }
    }
}

/// A RoI resampled to the target raster, with matching camera intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoomedView {
    pub k: f64,
    pub m: f64,
    /// Disparity offset between the zoomed left and right crops.
    pub o_hat: f64,
    pub left_cam: CameraIntrinsics,
    pub right_cam: CameraIntrinsics,
    pub width: usize,
    pub height: usize,
    /// Unzoomed RoI start `(x, y)` in the left image.
    pub origin: (f64, f64),
}

impl ZoomedView {
    fn build(roi: &StereoRoI, rig: &StereoRig, width: usize, height: usize, k: f64, m: f64) -> Result<Self> {
        Ok(Self {
            k,
            m,
            o_hat: k * (roi.x - roi.x_bar),
            left_cam: zoom_intrinsics(rig.left(), k, m)?,
            right_cam: zoom_intrinsics(rig.right(), k, m)?,
            width,
            height,
            origin: (roi.x, roi.y),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

pub fn make_zoomed_view(roi: &StereoRoI, rig: &StereoRig, target: (usize, usize)) -> Result<ZoomedView> {
    roi.validate()?;
    let (width, height) = target;
    if width == 0 || height == 0 {
        return Err(Error::domain("target size must be positive"));
    }
    let k = width as f64 / roi.w;
    let m = height as f64 / roi.h;
    ZoomedView::build(roi, rig, width, height, k, m)
}

/// Unzoomed (`k = m = 1`) view covering the RoI at native resolution.
pub fn make_native_view(roi: &StereoRoI, rig: &StereoRig) -> Result<ZoomedView> {
    roi.validate()?;
    let width = roi.w.ceil() as usize;
    let height = roi.h.ceil() as usize;
    ZoomedView::build(roi, rig, width, height, 1.0, 1.0)
}

/// First-order depth error caused by a disparity error `delta_d` at depth `z`
/// when disparities are measured on an image zoomed by `k`.
pub fn depth_error(z: f64, delta_d: f64, k: f64, rig: &StereoRig) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::domain(format!("depth must be positive, got {z}")));
    }
    if !(k > 0.0) {
        return Err(Error::domain(format!("zoom factor must be positive, got {k}")));
    }
    Ok(z * z * delta_d / (k * rig.left().f_u * rig.baseline()))
}

/// Values that can be bilinearly interpolated.
pub trait Lerp: Copy {
    fn lerp(a: Self, b: Self, t: f64) -> Self;
}

impl Lerp for f64 {
    fn lerp(a: f64, b: f64, t: f64) -> f64 {
        a + (b - a) * t
    }
}

impl Lerp for f32 {
    fn lerp(a: f32, b: f32, t: f64) -> f32 {
        a + (b - a) * t as f32
    }
}

impl<const N: usize> Lerp for [f64; N] {
    fn lerp(a: Self, b: Self, t: f64) -> Self {
        std::array::from_fn(|i| f64::lerp(a[i], b[i], t))
    }
}

/// Result of resampling a crop; `truncated` is set when the crop extended
/// past the source raster and edge pixels were replicated.
#[derive(Debug, Clone, PartialEq)]
pub struct Resampled<T> {
    pub raster: Raster<T>,
    pub truncated: bool,
}

fn check_crop<T>(src: &Raster<T>, crop: &CropRect, target: (usize, usize)) -> Result<bool> {
    if target.0 == 0 || target.1 == 0 {
        return Err(Error::domain("target size must be positive"));
    }
    if !(crop.w > 0.0 && crop.h > 0.0) {
        return Err(Error::domain("crop size must be positive"));
    }
    let (sw, sh) = (src.width() as f64, src.height() as f64);
    if src.width() == 0
        || src.height() == 0
        || crop.x >= sw
        || crop.y >= sh
        || crop.x + crop.w <= 0.0
        || crop.y + crop.h <= 0.0
    {
        return Err(Error::EmptyCrop);
    }
    Ok(crop.x < 0.0 || crop.y < 0.0 || crop.x + crop.w > sw || crop.y + crop.h > sh)
}

/// Bilinear resampling of `crop` to `target`. Output pixel `(i, j)` samples
/// source position `(crop.x + i / k, crop.y + j / m)`.
pub fn zoom_raster<T: Lerp>(src: &Raster<T>, crop: &CropRect, target: (usize, usize)) -> Result<Resampled<T>> {
    let truncated = check_crop(src, crop, target)?;
    let (k, m) = (target.0 as f64 / crop.w, target.1 as f64 / crop.h);
    let max_u = (src.width() - 1) as f64;
    let max_v = (src.height() - 1) as f64;
    let raster = Raster::from_fn(target.0, target.1, |i, j| {
        let su = (crop.x + i as f64 / k).clamp(0.0, max_u);
        let sv = (crop.y + j as f64 / m).clamp(0.0, max_v);
        let (u0, v0) = (su.floor(), sv.floor());
        let (fu, fv) = (su - u0, sv - v0);
        let (u0, v0) = (u0 as usize, v0 as usize);
        let u1 = (u0 + 1).min(src.width() - 1);
        let v1 = (v0 + 1).min(src.height() - 1);
        let top = T::lerp(*src.get(u0, v0), *src.get(u1, v0), fu);
        let bottom = T::lerp(*src.get(u0, v1), *src.get(u1, v1), fu);
        T::lerp(top, bottom, fv)
    });
    Ok(Resampled { raster, truncated })
}

/// Nearest-neighbour resampling for categorical rasters such as masks.
pub fn zoom_raster_nearest<T: Copy>(src: &Raster<T>, crop: &CropRect, target: (usize, usize)) -> Result<Resampled<T>> {
    let truncated = check_crop(src, crop, target)?;
    let (k, m) = (target.0 as f64 / crop.w, target.1 as f64 / crop.h);
    let max_u = (src.width() - 1) as f64;
    let max_v = (src.height() - 1) as f64;
    let raster = Raster::from_fn(target.0, target.1, |i, j| {
        let su = (crop.x + i as f64 / k).round().clamp(0.0, max_u) as usize;
        let sv = (crop.y + j as f64 / m).round().clamp(0.0, max_v) as usize;
        *src.get(su, sv)
    });
    Ok(Resampled { raster, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kitti_rig() -> StereoRig {
        StereoRig::symmetric(721.5377, 721.5377, 609.5593, 172.854, 0.54).unwrap()
    }

    #[test]
    fn zoom_factors_and_offset() {
        let rig = kitti_rig();
        let roi = StereoRoI::new(400.0, 380.0, 100.0, 128.0, 64.0).unwrap();
        let view = make_zoomed_view(&roi, &rig, (256, 128)).unwrap();
        assert_eq!((view.k, view.m, view.o_hat), (2.0, 2.0, 40.0));
        assert_eq!(view.left_cam.f_u, 2.0 * rig.left().f_u);
        assert_eq!(view.right_cam.b_x, rig.right().b_x);

        let roi = StereoRoI::new(400.0, 380.0, 100.0, 256.0, 128.0).unwrap();
        let view = make_zoomed_view(&roi, &rig, (256, 128)).unwrap();
        assert_eq!((view.k, view.m), (1.0, 1.0));

        let roi = StereoRoI::new(500.0, 495.0, 0.0, 64.0, 32.0).unwrap();
        let view = make_zoomed_view(&roi, &rig, (256, 128)).unwrap();
        assert_eq!((view.k, view.m, view.o_hat), (4.0, 4.0, 20.0));
    }

    #[test]
    fn offset_scales_with_k() {
        let rig = kitti_rig();
        let roi = StereoRoI::new(410.5, 397.25, 100.0, 50.0, 20.0).unwrap();
        let a = make_zoomed_view(&roi, &rig, (100, 40)).unwrap();
        let b = make_zoomed_view(&roi, &rig, (300, 40)).unwrap();
        assert!((b.o_hat - 3.0 * a.o_hat).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rois() {
        let rig = kitti_rig();
        let roi = StereoRoI {
            x: 380.0,
            x_bar: 400.0,
            y: 0.0,
            w: 10.0,
            h: 10.0,
        };
        assert!(matches!(
            make_zoomed_view(&roi, &rig, (256, 128)),
            Err(Error::NegativeDisparityOffset { .. })
        ));
        assert!(StereoRoI::new(1.0, 0.0, 0.0, 0.0, 1.0).is_err());
        let ok = StereoRoI::new(1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(make_zoomed_view(&ok, &rig, (0, 10)).is_err());
    }

    #[test]
    fn native_view_is_unzoomed() {
        let rig = kitti_rig();
        let roi = StereoRoI::new(400.0, 380.0, 100.0, 30.5, 20.0).unwrap();
        let view = make_native_view(&roi, &rig).unwrap();
        assert_eq!((view.k, view.m, view.o_hat), (1.0, 1.0, 20.0));
        assert_eq!(view.dims(), (31, 20));
        assert_eq!(&view.left_cam, rig.left());
    }

    #[test]
    fn depth_error_examples() {
        let rig = kitti_rig();
        let e1 = depth_error(40.0, 1.0, 1.0, &rig).unwrap();
        assert!((e1 - 1600.0 / (721.5377 * 0.54)).abs() < 1e-12);
        assert!((e1 - 4.106).abs() < 1e-3);
        let e2 = depth_error(40.0, 1.0, 2.0, &rig).unwrap();
        assert_eq!(e2, e1 / 2.0);
        let e_near = depth_error(20.0, 1.0, 1.0, &rig).unwrap();
        assert!((e_near - 1.0266).abs() < 1e-4);
        assert_eq!(e1, 4.0 * e_near);
        assert_eq!(depth_error(40.0, 0.0, 1.0, &rig).unwrap(), 0.0);
        assert!(depth_error(0.0, 1.0, 1.0, &rig).is_err());
        assert!(depth_error(10.0, 1.0, 0.0, &rig).is_err());
    }

    #[test]
    fn constant_raster_stays_constant() {
        let src = Raster::filled(40, 30, 7.25f64);
        let crop = CropRect {
            x: 3.3,
            y: 2.1,
            w: 17.7,
            h: 9.2,
        };
        let out = zoom_raster(&src, &crop, (64, 32)).unwrap();
        assert!(!out.truncated);
        assert!(out.raster.as_slice().iter().all(|&v| v == 7.25));
    }

    #[test]
    fn identity_crop_is_identity() {
        let src = Raster::from_fn(8, 5, |u, v| (u * 10 + v) as f64);
        let crop = CropRect {
            x: 0.0,
            y: 0.0,
            w: 8.0,
            h: 5.0,
        };
        let out = zoom_raster(&src, &crop, (8, 5)).unwrap();
        assert_eq!(out.raster, src);
    }

    #[test]
    fn checkerboard_upsampling() {
        let src = Raster::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let crop = CropRect {
            x: 0.0,
            y: 0.0,
            w: 2.0,
            h: 2.0,
        };
        let out = zoom_raster(&src, &crop, (4, 4)).unwrap().raster;
        assert_eq!(*out.get(0, 0), 0.0);
        assert_eq!(*out.get(2, 0), 1.0);
        assert_eq!(*out.get(0, 2), 1.0);
        assert_eq!(*out.get(2, 2), 0.0);
        // bottom-right samples (1.5, 1.5), clamped to the last source pixel
        assert_eq!(*out.get(3, 3), 0.0);
        // (0.5, 0) lies halfway between 0 and 1
        assert_eq!(*out.get(1, 0), 0.5);
        // (0.5, 0.5): mean of all four
        assert_eq!(*out.get(1, 1), 0.5);
    }

    #[test]
    fn truncation_and_empty_crop() {
        let src = Raster::filled(10, 10, 1.0f64);
        let partial = CropRect {
            x: -2.0,
            y: 5.0,
            w: 6.0,
            h: 8.0,
        };
        assert!(zoom_raster(&src, &partial, (4, 4)).unwrap().truncated);
        let outside = CropRect {
            x: 10.0,
            y: 0.0,
            w: 5.0,
            h: 5.0,
        };
        assert!(matches!(
            zoom_raster(&src, &outside, (4, 4)),
            Err(Error::EmptyCrop)
        ));
    }

    #[test]
    fn nearest_keeps_categories() {
        let src = Raster::from_fn(4, 4, |u, v| u >= 2 && v >= 2);
        let crop = CropRect {
            x: 0.0,
            y: 0.0,
            w: 4.0,
            h: 4.0,
        };
        let out = zoom_raster_nearest(&src, &crop, (8, 8)).unwrap().raster;
        let count = out.as_slice().iter().filter(|&&b| b).count();
        assert!(count > 0 && count < 64);
        assert!(*out.get(7, 7));
        assert!(!*out.get(0, 0));
    }
}

//! Ray-cast ground-truth instance maps for placed boxes.
//!
//! Rays are cast directly through the zoomed intrinsics of each instance, so
//! the rendered disparity, part and mask rasters are exact inverses of the
//! back-projection used by [`crate::pointcloud`].

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{CameraIntrinsics, StereoRig};
use crate::error::{Error, Result};
use crate::eval::label::{observation_angle, KittiLabel};
use crate::parts::{encode_part_location, Box3D, Dimensions};
use crate::pointcloud::InstanceMaps;
use crate::raster::Raster;
use crate::zoom::{make_native_view, make_zoomed_view, StereoRoI, ZoomedView};

/// Surface hit by rendering rays.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// Four sides and the top of the box; the bottom face is open.
    #[default]
    BoxShell,
    /// Ellipsoid inscribed in the box.
    Ellipsoid,
}

fn default_prob() -> f64 {
    1.0
}

fn default_category() -> String {
    "Car".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(default = "default_category")]
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: Box3D,
    #[serde(default)]
    pub surface: Surface,
    /// Stand-in for the 2D detector probability.
    #[serde(default = "default_prob")]
    pub prob_2d: f64,
    /// Occlusion level written to the ground-truth label.
    #[serde(default)]
    pub occlusion: i32,
}

impl SceneObject {
    pub fn car(bbox: Box3D) -> Self {
        Self {
            category: default_category(),
            bbox,
            surface: Surface::BoxShell,
            prob_2d: 1.0,
            occlusion: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub rig: StereoRig,
    /// `(width, height)` of the full left image.
    pub image_size: (usize, usize),
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub frame_id: Option<String>,
}

/// KITTI-like rectified rig: 721.5377 px focal length, 0.54 m baseline.
pub fn kitti_like_rig() -> StereoRig {
    StereoRig::symmetric(721.5377, 721.5377, 609.5593, 172.854, 0.54).expect("valid rig")
}

pub const KITTI_IMAGE_SIZE: (usize, usize) = (1242, 375);

impl SyntheticScene {
    pub fn new(rig: StereoRig, image_size: (usize, usize), objects: Vec<SceneObject>) -> Result<Self> {
        let scene = Self {
            rig,
            image_size,
            objects,
            frame_id: None,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return Err(Error::domain("image size must be positive"));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.bbox.dims.is_valid() {
                return Err(Error::domain(format!("object {i} has invalid dimensions")));
            }
            if !(o.bbox.t.z > 0.0) {
                return Err(Error::domain(format!("object {i} is not in front of the camera")));
            }
            if !(0.0..=1.0).contains(&o.prob_2d) {
                return Err(Error::domain(format!("object {i} has 2D probability {}", o.prob_2d)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn object(&self, index: usize) -> Result<&SceneObject> {
        self.objects
            .get(index)
            .ok_or_else(|| Error::Input(format!("no object {index} in a scene of {}", self.objects.len())))
    }
}

fn project(cam: &CameraIntrinsics, p: &Vector3<f64>) -> (f64, f64) {
    (
        cam.f_u * (p.x - cam.b_x) / p.z + cam.c_u,
        cam.f_v * p.y / p.z + cam.c_v,
    )
}

/// Left-image box `(left, top, right, bottom)` of the projected corners,
/// before clipping to the image.
fn projected_extent(cam: &CameraIntrinsics, b: &Box3D) -> [f64; 4] {
    let mut ext = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for c in b.corners() {
        let (u, v) = project(cam, &c);
        ext = [ext[0].min(u), ext[1].min(v), ext[2].max(u), ext[3].max(v)];
    }
    ext
}

fn check_visible(scene: &SyntheticScene, index: usize) -> Result<&SceneObject> {
    let obj = scene.object(index)?;
    if obj.bbox.corners().iter().any(|c| !(c.z > 0.0)) {
        return Err(Error::NotVisible(format!("object {index} extends behind the camera")));
    }
    let [l, t, r, b] = projected_extent(scene.rig.left(), &obj.bbox);
    let (w, h) = (scene.image_size.0 as f64, scene.image_size.1 as f64);
    if r <= 0.0 || l >= w || b <= 0.0 || t >= h {
        return Err(Error::NotVisible(format!("object {index} is outside the image")));
    }
    Ok(obj)
}

/// Stereo RoI spanned by the projected box corners in both images.
pub fn instance_roi(scene: &SyntheticScene, index: usize) -> Result<StereoRoI> {
    let obj = check_visible(scene, index)?;
    let [l, t, r, b] = projected_extent(scene.rig.left(), &obj.bbox);
    let [l_bar, ..] = projected_extent(scene.rig.right(), &obj.bbox);
    StereoRoI::new(l, l_bar, t, r - l, b - t)
}

/// Ground-truth KITTI label of a visible object.
pub fn ground_truth_label(scene: &SyntheticScene, index: usize) -> Result<KittiLabel> {
    let obj = check_visible(scene, index)?;
    let [l, t, r, b] = projected_extent(scene.rig.left(), &obj.bbox);
    let (w, h) = (scene.image_size.0 as f64, scene.image_size.1 as f64);
    let clipped = [l.max(0.0), t.max(0.0), r.min(w - 1.0), b.min(h - 1.0)];
    let area = |e: &[f64; 4]| (e[2] - e[0]).max(0.0) * (e[3] - e[1]).max(0.0);
    let full = area(&[l, t, r, b]);
    let truncation = if full > 0.0 {
        (1.0 - area(&clipped) / full).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(KittiLabel {
        category: obj.category.clone(),
        truncation,
        occlusion: obj.occlusion,
        alpha: observation_angle(&obj.bbox),
        bbox2d: clipped,
        dims: obj.bbox.dims,
        location: obj.bbox.t,
        rotation_y: obj.bbox.yaw,
        score: None,
    })
}

/// Labels of every visible object, in scene order.
pub fn scene_labels(scene: &SyntheticScene) -> Vec<KittiLabel> {
    (0..scene.objects.len())
        .filter_map(|i| ground_truth_label(scene, i).ok())
        .collect()
}

/// Ray parameter of the first hit on the box shell, if any.
fn hit_box_shell(o: &Vector3<f64>, d: &Vector3<f64>, dims: &Dimensions) -> Option<f64> {
    let lo = [-dims.length / 2.0, -dims.height, -dims.width / 2.0];
    let hi = [dims.length / 2.0, 0.0, dims.width / 2.0];
    let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut near_is_bottom = false;
    for a in 0..3 {
        if d[a] == 0.0 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
        let (enter, leave, enter_bottom) = if t0 < t1 {
            (t0, t1, false)
        } else {
            (t1, t0, a == 1)
        };
        if enter > t_near {
            t_near = enter;
            near_is_bottom = enter_bottom;
        }
        t_far = t_far.min(leave);
    }
    if t_far < t_near || t_far <= 0.0 {
        return None;
    }
    if t_near > 0.0 && !near_is_bottom {
        Some(t_near)
    } else {
        Some(t_far)
    }
}

fn hit_ellipsoid(o: &Vector3<f64>, d: &Vector3<f64>, dims: &Dimensions) -> Option<f64> {
    let axes = Vector3::new(dims.length / 2.0, dims.height / 2.0, dims.width / 2.0);
    let s = (o - Vector3::new(0.0, -dims.height / 2.0, 0.0)).component_div(&axes);
    let ds = d.component_div(&axes);
    let a = ds.norm_squared();
    let b = s.dot(&ds);
    let c = s.norm_squared() - 1.0;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    [(-b - root) / a, (-b + root) / a].into_iter().find(|&t| t > 0.0)
}

fn hit_object(obj: &SceneObject, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let o = obj.bbox.to_object(origin);
    let d = obj.bbox.to_object(&(origin + dir)) - o;
    match obj.surface {
        Surface::BoxShell => hit_box_shell(&o, &d, &obj.bbox.dims),
        Surface::Ellipsoid => hit_ellipsoid(&o, &d, &obj.bbox.dims),
    }
}

/// Rendered maps of one instance, with the exact hit depth per pixel
/// (0 where the mask is unset).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedInstance {
    pub roi: StereoRoI,
    pub view: ZoomedView,
    pub maps: InstanceMaps,
    pub depth: Raster<f64>,
}

/// Render instance `index` zoomed to `target`.
pub fn render_instance(scene: &SyntheticScene, index: usize, target: (usize, usize)) -> Result<RenderedInstance> {
    let roi = instance_roi(scene, index)?;
    let view = make_zoomed_view(&roi, &scene.rig, target)?;
    render_view(scene, index, roi, view)
}

/// Render instance `index` at native resolution (`k = m = 1`).
pub fn render_instance_native(scene: &SyntheticScene, index: usize) -> Result<RenderedInstance> {
    let roi = instance_roi(scene, index)?;
    let view = make_native_view(&roi, &scene.rig)?;
    render_view(scene, index, roi, view)
}

fn render_view(scene: &SyntheticScene, index: usize, roi: StereoRoI, view: ZoomedView) -> Result<RenderedInstance> {
    let target = &scene.objects[index];
    let cam = scene.rig.left();
    let origin = Vector3::new(cam.b_x, 0.0, 0.0);
    let (k, m) = (view.k, view.m);
    let (x0, y0) = view.origin;
    let kfb = k * cam.f_u * scene.rig.baseline();
    let (width, height) = view.dims();

    type Pixel = (f64, [f64; 3], bool, f64);
    let rows: Vec<Vec<Pixel>> = (0..height)
        .into_par_iter()
        .map(|v| {
            (0..width)
                .map(|u| {
                    let dir = Vector3::new(
                        (u as f64 + k * x0 - k * cam.c_u) / (k * cam.f_u),
                        (v as f64 + m * y0 - m * cam.c_v) / (m * cam.f_v),
                        1.0,
                    );
                    let mut nearest: Option<(usize, f64)> = None;
                    for (j, obj) in scene.objects.iter().enumerate() {
                        if let Some(t) = hit_object(obj, &origin, &dir) {
                            if nearest.is_none_or(|(_, best)| t < best) {
                                nearest = Some((j, t));
                            }
                        }
                    }
                    match nearest {
                        Some((j, z)) if j == index => {
                            let p = origin + dir * z;
                            let part = encode_part_location(&p, &target.bbox)
                                .map(|p| p.to_array())
                                .unwrap_or([0.0; 3]);
                            (kfb / z - view.o_hat, part, true, z)
                        }
                        _ => (0.0, [0.0; 3], false, 0.0),
                    }
                })
                .collect()
        })
        .collect();

    let n = width * height;
    let (mut disparity, mut parts, mut mask, mut depth) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (d, p, fg, z) in rows.into_iter().flatten() {
        disparity.push(d);
        parts.push(p);
        mask.push(fg);
        depth.push(z);
    }
    let maps = InstanceMaps::new(
        Raster::from_vec(width, height, disparity)?,
        Raster::from_vec(width, height, parts)?,
        Raster::from_vec(width, height, mask)?,
    )?;
    Ok(RenderedInstance {
        roi,
        view,
        maps,
        depth: Raster::from_vec(width, height, depth)?,
    })
}

/// Round every disparity to the nearest multiple of `step` pixels.
pub fn quantize_disparity(maps: &InstanceMaps, step: f64) -> Result<InstanceMaps> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::domain(format!("quantization step must be positive, got {step}")));
    }
    Ok(InstanceMaps {
        disparity: maps.disparity.map(|d| (d / step).round() * step),
        ..maps.clone()
    })
}

/// Add Gaussian noise to foreground disparities and replace the part
/// locations of `round(fraction * foreground)` pixels with uniform draws.
pub fn corrupt_maps(maps: &InstanceMaps, sigma: f64, fraction: f64, seed: u64) -> Result<InstanceMaps> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::domain(format!("outlier fraction must be in [0, 1), got {fraction}")));
    }
    let mut out = maps.clone();
    let fg: Vec<usize> = maps
        .mask
        .as_slice()
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
        let disp = out.disparity.as_mut_slice();
        for &i in &fg {
            disp[i] += normal.sample(&mut rng);
        }
    }
    let count = (fraction * fg.len() as f64).round() as usize;
    if count > 0 {
        let mut chosen = index::sample(&mut rng, fg.len(), count).into_vec();
        chosen.sort_unstable();
        let parts = out.parts.as_mut_slice();
        for c in chosen {
            parts[fg[c]] = [rng.random(), rng.random(), rng.random()];
        }
    }
    Ok(out)
}

/// Scene of `count` cars in front of a KITTI-like rig, between 8 m and 50 m
/// depth, fully inside the image and with disjoint 2D boxes (no occlusion).
///
/// Panics if the cars cannot be placed, which only happens for large `count`.
pub fn random_scene(count: usize, seed: u64) -> SyntheticScene {
    let rig = kitti_like_rig();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = SyntheticScene {
        rig,
        image_size: KITTI_IMAGE_SIZE,
        objects: Vec::with_capacity(count),
        frame_id: None,
    };
    let (w, h) = (scene.image_size.0 as f64, scene.image_size.1 as f64);
    let mut extents: Vec<[f64; 4]> = Vec::with_capacity(count);
    let mut attempts = 0;
    while scene.objects.len() < count {
        attempts += 1;
        assert!(attempts <= 100_000, "could not place {count} cars");
        let dims = Dimensions::new(
            rng.random_range(1.4..1.7),
            rng.random_range(1.5..1.9),
            rng.random_range(3.5..4.8),
        );
        let z = rng.random_range(8.0..50.0);
        let x = z * rng.random_range(-0.6..0.6);
        let yaw = rng.random_range(-PI..PI);
        let bbox = Box3D::new(dims, yaw, Vector3::new(x, rng.random_range(1.5..1.8), z));
        let [l, t, r, b] = projected_extent(scene.rig.left(), &bbox);
        let inside = l >= 0.0 && t >= 0.0 && r < w && b < h && bbox.corners().iter().all(|c| c.z > 1.0);
        let apart = extents
            .iter()
            .all(|e| e[2] < l || r < e[0] || e[3] < t || b < e[1]);
        if inside && apart {
            extents.push([l, t, r, b]);
            scene.objects.push(SceneObject::car(bbox));
        }
    }
    scene
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::build_instance_cloud;
    use crate::zoom::DEFAULT_TARGET;

    fn single(bbox: Box3D, surface: Surface) -> SyntheticScene {
        let mut obj = SceneObject::car(bbox);
        obj.surface = surface;
        SyntheticScene::new(kitti_like_rig(), KITTI_IMAGE_SIZE, vec![obj]).unwrap()
    }

    fn facing(z: f64) -> Box3D {
        // yaw pi/2 turns the box's rear face towards the camera
        Box3D::new(Dimensions::new(1.5, 1.6, 3.9), PI / 2.0, Vector3::new(0.0, 1.6, z))
    }

    #[test]
    fn fronto_parallel_face_has_constant_disparity() {
        let scene = single(facing(20.0), Surface::BoxShell);
        let r = render_instance(&scene, 0, DEFAULT_TARGET).unwrap();
        let near = 20.0 - 3.9 / 2.0;
        let expected = r.view.k * 721.5377 * 0.54 / near - r.view.o_hat;
        let mut on_face = 0;
        for (i, &m) in r.maps.mask.as_slice().iter().enumerate() {
            if m && (r.depth.as_slice()[i] - near).abs() < 1e-9 {
                assert!((r.maps.disparity.as_slice()[i] - expected).abs() < 1e-9);
                on_face += 1;
            }
        }
        assert!(on_face > 1000);
    }

    #[test]
    fn cloud_lies_on_surface() {
        for surface in [Surface::BoxShell, Surface::Ellipsoid] {
            let b = Box3D::new(Dimensions::new(1.5, 1.6, 3.9), 0.7, Vector3::new(3.0, 1.7, 25.0));
            let scene = single(b, surface);
            let r = render_instance(&scene, 0, DEFAULT_TARGET).unwrap();
            let (cloud, diag) = build_instance_cloud(&r.maps, &r.view, &scene.rig).unwrap();
            assert_eq!(diag.dropped, 0);
            assert!(cloud.len() > 1000);
            for p in &cloud.points {
                let q = b.to_object(&p.position);
                let dist = match surface {
                    Surface::BoxShell => {
                        let dx = (q.x.abs() - 3.9 / 2.0).abs();
                        let dy = q.y.abs().min((q.y + 1.5).abs());
                        let dz = (q.z.abs() - 1.6 / 2.0).abs();
                        dx.min(dy).min(dz)
                    }
                    Surface::Ellipsoid => {
                        let s = Vector3::new(q.x / 1.95, (q.y + 0.75) / 0.75, q.z / 0.8);
                        (s.norm() - 1.0).abs()
                    }
                };
                assert!(dist < 1e-6, "{surface:?} point off surface by {dist}");
                assert!(p.part.to_array().iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
            }
        }
    }

    #[test]
    fn disparity_positive_and_decreasing_with_depth() {
        let mean = |z: f64| {
            let r = render_instance(&single(facing(z), Surface::BoxShell), 0, DEFAULT_TARGET).unwrap();
            let mut sum = 0.0;
            let mut n = 0.0;
            for (d, &m) in r.maps.disparity.as_slice().iter().zip(r.maps.mask.as_slice()) {
                if m {
                    assert!(d + r.view.o_hat > 0.0);
                    sum += d + r.view.o_hat;
                    n += 1.0;
                }
            }
            sum / n / r.view.k
        };
        assert!(mean(10.0) > mean(20.0));
        assert!(mean(20.0) > mean(40.0));
    }

    #[test]
    fn occluder_masks_are_disjoint() {
        let near = Box3D::new(Dimensions::new(1.5, 1.6, 3.9), 0.2, Vector3::new(0.5, 1.6, 12.0));
        let far = Box3D::new(Dimensions::new(1.5, 1.6, 3.9), -0.3, Vector3::new(1.5, 1.6, 18.0));
        let scene = SyntheticScene::new(
            kitti_like_rig(),
            KITTI_IMAGE_SIZE,
            vec![SceneObject::car(near), SceneObject::car(far)],
        )
        .unwrap();
        // render both at native resolution over the same image grid
        let a = render_instance_native(&scene, 0).unwrap();
        let b = render_instance_native(&scene, 1).unwrap();
        let pixels = |r: &RenderedInstance| {
            let (x0, y0) = (r.view.origin.0, r.view.origin.1);
            let mut set = std::collections::BTreeSet::new();
            for v in 0..r.view.height {
                for u in 0..r.view.width {
                    if *r.maps.mask.get(u, v) {
                        set.insert(((u as f64 + x0).to_bits(), (v as f64 + y0).to_bits()));
                    }
                }
            }
            set
        };
        let (pa, pb) = (pixels(&a), pixels(&b));
        assert!(!pa.is_empty() && !pb.is_empty());
        assert!(pa.is_disjoint(&pb));
        let alone = SyntheticScene::new(kitti_like_rig(), KITTI_IMAGE_SIZE, vec![SceneObject::car(far)]).unwrap();
        let unoccluded = render_instance_native(&alone, 0).unwrap();
        assert!(unoccluded.maps.foreground_count() > b.maps.foreground_count());
    }

    #[test]
    fn invisible_objects() {
        let behind = Box3D::new(Dimensions::new(1.5, 1.6, 3.9), 0.0, Vector3::new(0.0, 1.6, 0.5));
        assert!(matches!(
            render_instance(&single(behind, Surface::BoxShell), 0, DEFAULT_TARGET),
            Err(Error::NotVisible(_))
        ));
        let aside = Box3D::new(Dimensions::new(1.5, 1.6, 3.9), 0.0, Vector3::new(80.0, 1.6, 10.0));
        assert!(matches!(
            render_instance(&single(aside, Surface::BoxShell), 0, DEFAULT_TARGET),
            Err(Error::NotVisible(_))
        ));
        assert!(render_instance(&single(facing(20.0), Surface::BoxShell), 3, DEFAULT_TARGET).is_err());
    }

    #[test]
    fn quantize_examples() {
        let scene = single(facing(20.0), Surface::BoxShell);
        let r = render_instance(&scene, 0, DEFAULT_TARGET).unwrap();
        let mut maps = r.maps.clone();
        maps.disparity = maps.disparity.map(|_| 37.3);
        let q = quantize_disparity(&maps, 1.0).unwrap();
        assert!(q.disparity.as_slice().iter().all(|&d| d == 37.0));
        assert_eq!(q.parts, maps.parts);
        assert_eq!(q.mask, maps.mask);
        let fine = quantize_disparity(&r.maps, 1e-9).unwrap();
        for (a, b) in fine.disparity.as_slice().iter().zip(r.maps.disparity.as_slice()) {
            assert!((a - b).abs() <= 5e-10);
        }
        assert!(quantize_disparity(&maps, 0.0).is_err());
    }

    #[test]
    fn corruption_is_seeded() {
        let scene = single(facing(20.0), Surface::BoxShell);
        let r = render_instance(&scene, 0, DEFAULT_TARGET).unwrap();
        assert_eq!(corrupt_maps(&r.maps, 0.0, 0.0, 9).unwrap(), r.maps);
        let a = corrupt_maps(&r.maps, 0.3, 0.3, 9).unwrap();
        assert_eq!(a, corrupt_maps(&r.maps, 0.3, 0.3, 9).unwrap());
        assert_ne!(a, corrupt_maps(&r.maps, 0.3, 0.3, 10).unwrap());
        let changed = a
            .parts
            .as_slice()
            .iter()
            .zip(r.maps.parts.as_slice())
            .filter(|(x, y)| x != y)
            .count();
        let expected = (0.3 * r.maps.foreground_count() as f64).round() as usize;
        assert_eq!(changed, expected);
        assert_eq!(a.mask, r.maps.mask);
        assert!(corrupt_maps(&r.maps, -1.0, 0.0, 0).is_err());
        assert!(corrupt_maps(&r.maps, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = random_scene(4, 3);
        let a = render_instance(&scene, 2, DEFAULT_TARGET).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| render_instance(&scene, 2, DEFAULT_TARGET).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn scene_json_round_trip() {
        let scene = random_scene(3, 11);
        let back = SyntheticScene::from_json(&scene.to_json().unwrap()).unwrap();
        assert_eq!(back, scene);
        let minimal = r#"{"rig": {"left": {"f_u": 700, "f_v": 700, "c_u": 600, "c_v": 180, "b_x": 0},
            "right": {"f_u": 700, "f_v": 700, "c_u": 600, "c_v": 180, "b_x": 0.5}},
            "image_size": [1200, 360],
            "objects": [{"box": {"dims": {"height": 1.5, "width": 1.6, "length": 3.9}, "yaw": 0.1, "t": [0, 1.6, 20]}}]}"#;
        let s = SyntheticScene::from_json(minimal).unwrap();
        assert_eq!(s.objects[0].surface, Surface::BoxShell);
        assert_eq!(s.rig.baseline(), 0.5);
        assert_eq!(scene_labels(&s).len(), 1);
    }

    #[test]
    fn labels_match_objects() {
        let scene = random_scene(5, 1);
        let labels = scene_labels(&scene);
        assert_eq!(labels.len(), 5);
        for (l, o) in labels.iter().zip(&scene.objects) {
            assert_eq!(l.to_box(), o.bbox);
            assert_eq!(l.truncation, 0.0);
            assert!(l.bbox_height() > 0.0);
        }
    }
}

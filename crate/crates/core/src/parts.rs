//! Oriented 3D boxes and normalized part locations.
//!
//! Object frame: origin at the centre of the bottom face, `x` along the
//! length, `y` pointing down (same as camera `y`), `z` along the width. Yaw
//! rotates the object frame about the camera `y` axis, as in KITTI labels.
//!
//! A part location maps the box interior onto `[0,1]^3`:
//! `p_x = q_x / length + 0.5`, `p_y = -q_y / height`, `p_z = q_z / width + 0.5`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartLocation {
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PartLocation {
    pub fn new(p_x: f64, p_y: f64, p_z: f64) -> Self {
        Self { p_x, p_y, p_z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p_x, self.p_y, self.p_z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Whether every component lies in `[0, 1]`.
    pub fn is_inside(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Box size in meters, KITTI order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub height: f64,
    pub width: f64,
    pub length: f64,
}

impl Dimensions {
    pub fn new(height: f64, width: f64, length: f64) -> Self {
        Self {
            height,
            width,
            length,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.height, self.width, self.length]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
    }

    pub fn volume(&self) -> f64 {
        self.height * self.width * self.length
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Rotation about the camera `y` axis taking object-frame vectors into the camera frame.
pub fn yaw_rotation(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Oriented box: dimensions, yaw, and bottom-centre translation in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub dims: Dimensions,
    pub yaw: f64,
    pub t: Vector3<f64>,
}

impl Box3D {
    pub fn new(dims: Dimensions, yaw: f64, t: Vector3<f64>) -> Self {
        Self {
            dims,
            yaw: normalize_angle(yaw),
            t,
        }
    }

    pub fn to_object(&self, p: &Vector3<f64>) -> Vector3<f64> {
        yaw_rotation(self.yaw).transpose() * (p - self.t)
    }

    pub fn to_camera(&self, q: &Vector3<f64>) -> Vector3<f64> {
        yaw_rotation(self.yaw) * q + self.t
    }

    /// The eight corners in camera coordinates; bottom face first.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let Dimensions {
            height,
            width,
            length,
        } = self.dims;
        let (hl, hw) = (length / 2.0, width / 2.0);
        let local = [
            (hl, 0.0, hw),
            (hl, 0.0, -hw),
            (-hl, 0.0, -hw),
            (-hl, 0.0, hw),
            (hl, -height, hw),
            (hl, -height, -hw),
            (-hl, -height, -hw),
            (-hl, -height, hw),
        ];
        local.map(|(x, y, z)| self.to_camera(&Vector3::new(x, y, z)))
    }

    /// Ground-plane footprint corners as `(x, z)` pairs, counter-clockwise
    /// when viewed with `x` right and `z` up.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let c = self.corners();
        let pts = [c[0], c[1], c[2], c[3]].map(|p| [p.x, p.z]);
        let area2: f64 = (0..4)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % 4]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area2 < 0.0 {
            [pts[3], pts[2], pts[1], pts[0]]
        } else {
            pts
        }
    }
}

pub fn encode_part_location(point_cam: &Vector3<f64>, b: &Box3D) -> Result<PartLocation> {
    if !b.dims.is_valid() {
        return Err(Error::domain(format!(
            "box dimensions must be positive: {:?}",
            b.dims
        )));
    }
    let q = b.to_object(point_cam);
    Ok(PartLocation {
        p_x: q.x / b.dims.length + 0.5,
        p_y: -q.y / b.dims.height,
        p_z: q.z / b.dims.width + 0.5,
    })
}

/// Object-frame coordinates of a part location for a box of size `dims`.
pub fn part_to_object(p: &PartLocation, dims: &Dimensions) -> Vector3<f64> {
    Vector3::new(
        (p.p_x - 0.5) * dims.length,
        -p.p_y * dims.height,
        (p.p_z - 0.5) * dims.width,
    )
}

pub fn decode_part_location(p: &PartLocation, b: &Box3D) -> Vector3<f64> {
    b.to_camera(&part_to_object(p, &b.dims))
}

/// Map a part location to an 8-bit RGB triple for visualization.
pub fn part_to_rgb(p: &PartLocation) -> [u8; 3] {
    p.to_array()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn car(yaw: f64, t: [f64; 3]) -> Box3D {
        Box3D::new(Dimensions::new(1.5, 1.6, 3.9), yaw, Vector3::from(t))
    }

    #[test]
    fn bottom_center_encodes_to_half() {
        let b = car(0.7, [2.0, 1.65, 25.0]);
        let p = encode_part_location(&b.t, &b).unwrap();
        assert_eq!((p.p_x, p.p_y, p.p_z), (0.5, 0.0, 0.5));
        assert!((decode_part_location(&p, &b) - b.t).norm() < 1e-12);
    }

    #[test]
    fn extremal_corner_encodes_to_one() {
        let b = car(0.0, [0.0, 0.0, 0.0]);
        let q = Vector3::new(1.95, -1.5, 0.8);
        let p = encode_part_location(&q, &b).unwrap();
        assert!((p.p_x - 1.0).abs() < 1e-15);
        assert!((p.p_y - 1.0).abs() < 1e-15);
        assert!((p.p_z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_box_decode() {
        let b = Box3D::new(Dimensions::new(1.0, 1.0, 1.0), 0.0, Vector3::zeros());
        let x = decode_part_location(&PartLocation::new(1.0, 1.0, 1.0), &b);
        assert_eq!(x, Vector3::new(0.5, -1.0, 0.5));
    }

    #[test]
    fn quarter_turn_moves_length_axis() {
        let b = car(std::f64::consts::FRAC_PI_2, [1.0, 1.0, 10.0]);
        // with yaw = pi/2 the object x axis points along camera -z
        let point = b.t + Vector3::new(0.0, 0.0, -1.0);
        let p = encode_part_location(&point, &b).unwrap();
        assert!((p.p_x - (0.5 + 1.0 / 3.9)).abs() < 1e-12);
        assert!((p.p_z - 0.5).abs() < 1e-12);
        let side = b.t + Vector3::new(0.3, 0.0, 0.0);
        let p = encode_part_location(&side, &b).unwrap();
        assert!((decode_part_location(&p, &b) - side).norm() < 1e-12);
        assert!((p.p_x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_box_errors() {
        let b = Box3D::new(Dimensions::new(0.0, 1.0, 1.0), 0.0, Vector3::zeros());
        assert!(encode_part_location(&Vector3::zeros(), &b).is_err());
    }

    #[test]
    fn corners_encode_to_unit_cube_vertices() {
        let b = car(-2.2, [3.0, 1.7, 30.0]);
        for c in b.corners() {
            let p = encode_part_location(&c, &b).unwrap();
            for v in p.to_array() {
                assert!(v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12, "{v}");
            }
        }
    }

    #[test]
    fn footprint_is_ccw() {
        let b = car(0.4, [1.0, 1.0, 12.0]);
        let fp = b.footprint();
        let area2: f64 = (0..4)
            .map(|i| fp[i][0] * fp[(i + 1) % 4][1] - fp[(i + 1) % 4][0] * fp[i][1])
            .sum();
        assert!((area2 / 2.0 - 3.9 * 1.6).abs() < 1e-9);
    }

    #[test]
    fn angles_normalize() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((normalize_angle(0.25) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rgb_mapping() {
        assert_eq!(part_to_rgb(&PartLocation::new(0.0, 1.0, 0.5)), [0, 255, 128]);
        assert_eq!(part_to_rgb(&PartLocation::new(-1.0, 2.0, 0.0)), [0, 255, 0]);
    }

    fn arb_box() -> impl Strategy<Value = Box3D> {
        (
            0.5..3.0f64,
            0.5..3.0f64,
            0.5..6.0f64,
            -PI..PI,
            -20.0..20.0f64,
            -3.0..3.0f64,
            1.0..80.0f64,
        )
            .prop_map(|(h, w, l, yaw, x, y, z)| {
                Box3D::new(Dimensions::new(h, w, l), yaw, Vector3::new(x, y, z))
            })
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(b in arb_box(), px in -50.0..50.0f64, py in -10.0..10.0f64, pz in -10.0..100.0f64) {
            let x = Vector3::new(px, py, pz);
            let p = encode_part_location(&x, &b).unwrap();
            prop_assert!((decode_part_location(&p, &b) - x).norm() < 1e-9);
        }

        #[test]
        fn interior_maps_into_unit_cube(b in arb_box(), a in 0.001..0.999f64, c in 0.001..0.999f64, d in 0.001..0.999f64) {
            let p = PartLocation::new(a, c, d);
            let x = decode_part_location(&p, &b);
            let back = encode_part_location(&x, &b).unwrap();
            prop_assert!(back.is_inside());
            prop_assert!((back.p_x - a).abs() < 1e-9 && (back.p_y - c).abs() < 1e-9 && (back.p_z - d).abs() < 1e-9);
        }

        #[test]
        fn rigid_motion_invariance(b in arb_box(), dyaw in -PI..PI, dx in -5.0..5.0f64, dz in -5.0..5.0f64,
                                   px in -5.0..5.0f64, py in -2.0..2.0f64, pz in -5.0..5.0f64) {
            let x = b.t + Vector3::new(px, py, pz);
            let p0 = encode_part_location(&x, &b).unwrap();
            let r = yaw_rotation(dyaw);
            let dt = Vector3::new(dx, 0.3, dz);
            let moved = Box3D::new(b.dims, b.yaw + dyaw, r * b.t + dt);
            let p1 = encode_part_location(&(r * x + dt), &moved).unwrap();
            for (u, v) in p0.to_array().iter().zip(p1.to_array()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}

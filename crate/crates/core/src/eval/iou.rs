//! Rotated-box overlap in the ground plane and in 3D.
//!
//! Footprints are convex quadrilaterals in the camera `x`/`z` plane. Their
//! intersection is found by clipping one against each edge of the other
//! (Sutherland-Hodgman) and measured with the shoelace formula.

use crate::parts::Box3D;

type P2 = [f64; 2];

/// Signed area of a polygon; positive when counter-clockwise.
pub fn polygon_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    twice / 2.0
}

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn line_intersection(p: P2, q: P2, a: P2, b: P2) -> P2 {
    let (cp, cq) = (cross(a, b, p), cross(a, b, q));
    let t = cp / (cp - cq);
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

/// Intersection of `subject` with the convex counter-clockwise polygon `clip`.
pub fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    out.push(line_intersection(prev, cur, a, b));
                }
                out.push(cur);
            } else if prev_in {
                out.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    out
}

/// Ground-plane intersection area of two boxes, square meters.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let (pa, pb) = (a.footprint(), b.footprint());
    if polygon_area(&pa) <= 0.0 || polygon_area(&pb) <= 0.0 {
        return 0.0;
    }
    polygon_area(&clip_convex(&pa, &pb)).max(0.0)
}

fn ratio(inter: f64, area_a: f64, area_b: f64) -> f64 {
    let union = area_a + area_b - inter;
    if !(union > 0.0) || !(area_a > 0.0) || !(area_b > 0.0) {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let area_a = a.dims.length * a.dims.width;
    let area_b = b.dims.length * b.dims.width;
    if a == b && area_a > 0.0 {
        return 1.0;
    }
    ratio(bev_intersection_area(a, b), area_a, area_b)
}

/// Overlap of the vertical extents `[y - h, y]` of two bottom-origin boxes.
pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let (ya, yb) = (a.t.y, b.t.y);
    (ya.min(yb) - (ya - a.dims.height).max(yb - b.dims.height)).max(0.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let (va, vb) = (a.dims.volume(), b.dims.volume());
    if a == b && va > 0.0 {
        return 1.0;
    }
    let inter = bev_intersection_area(a, b) * vertical_overlap(a, b);
    ratio(inter, va, vb)
}

/// Intersection of two image boxes `(left, top, right, bottom)` divided by
/// the area of the first.
pub fn box2d_coverage(det: &[f64; 4], region: &[f64; 4]) -> f64 {
    let w = (det[2].min(region[2]) - det[0].max(region[0])).max(0.0);
    let h = (det[3].min(region[3]) - det[1].max(region[1])).max(0.0);
    let area = (det[2] - det[0]) * (det[3] - det[1]);
    if area <= 0.0 {
        0.0
    } else {
        w * h / area
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parts::Dimensions;
    use nalgebra::Vector3;

    fn boxed(h: f64, w: f64, l: f64, yaw: f64, x: f64, y: f64, z: f64) -> Box3D {
        Box3D::new(Dimensions::new(h, w, l), yaw, Vector3::new(x, y, z))
    }

    #[test]
    fn identical_boxes() {
        let a = boxed(1.5, 1.6, 3.9, 0.3, 1.0, 2.0, 20.0);
        assert_eq!(bev_iou(&a, &a), 1.0);
        assert_eq!(iou_3d(&a, &a), 1.0);
    }

    #[test]
    fn offset_rectangles_third() {
        // 2 wide, 4 long, shifted 2 along the length
        let a = boxed(1.0, 2.0, 4.0, 0.0, 0.0, 0.0, 10.0);
        let b = boxed(1.0, 2.0, 4.0, 0.0, 2.0, 0.0, 10.0);
        assert!((bev_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
        assert!((iou_3d(&a, &b) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stacked_boxes_do_not_overlap_in_3d() {
        let a = boxed(1.5, 1.6, 3.9, 0.3, 1.0, 2.0, 20.0);
        let b = boxed(1.5, 1.6, 3.9, 0.3, 1.0, 0.5, 20.0);
        assert_eq!(bev_iou(&a, &b), 1.0);
        assert_eq!(iou_3d(&a, &b), 0.0);
    }

    #[test]
    fn half_vertical_overlap() {
        let a = boxed(2.0, 2.0, 4.0, 0.0, 0.0, 0.0, 10.0);
        let b = boxed(2.0, 2.0, 4.0, 0.0, 2.0, -1.0, 10.0);
        // plan overlap 4, vertical overlap 1 -> 4 / (16 + 16 - 4)
        assert!((iou_3d(&a, &b) - 4.0 / 28.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_and_degenerate() {
        let a = boxed(1.5, 1.6, 3.9, 0.0, 0.0, 1.7, 20.0);
        let b = boxed(1.5, 1.6, 3.9, 1.0, 10.0, 1.7, 20.0);
        assert_eq!(bev_iou(&a, &b), 0.0);
        let flat = boxed(1.5, 0.0, 3.9, 0.0, 0.0, 1.7, 20.0);
        assert_eq!(bev_iou(&a, &flat), 0.0);
        assert_eq!(iou_3d(&flat, &flat), 0.0);
    }

    #[test]
    fn rotated_square_in_square() {
        // unit-area square rotated 45 degrees inside a 2x2 square: the
        // diamond has half-diagonal 1/sqrt(2) < 1, so it lies fully inside
        let a = boxed(1.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0);
        let b = boxed(1.0, 1.0, 1.0, std::f64::consts::FRAC_PI_4, 0.0, 0.0, 0.0);
        assert!((bev_iou(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn coverage_of_image_boxes() {
        let det = [0.0, 0.0, 10.0, 10.0];
        assert_eq!(box2d_coverage(&det, &[5.0, 0.0, 20.0, 20.0]), 0.5);
        assert_eq!(box2d_coverage(&det, &[20.0, 0.0, 30.0, 10.0]), 0.0);
        assert_eq!(box2d_coverage(&[0.0, 0.0, 0.0, 5.0], &det), 0.0);
    }
}

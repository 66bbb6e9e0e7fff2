//! Planar poses, table edges and the transform from world coordinates into the
//! edge-relative feature frame the success model is learned in.
//!
//! The feature frame has its origin at the foot of the perpendicular from the
//! object to the edge line. Its x-axis points away from the table, so a robot
//! standing in front of the table has a positive `dx_rob`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("object off table: signed distance {0} behind the edge")]
    ObjectOffTable(f64),
    #[error("invalid table edge: {0}")]
    InvalidEdge(&'static str),
    #[error("no table edges given")]
    NoEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Point2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(F::zero(), F::zero())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> F {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> F {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> F {
        self.sub(o).norm()
    }

    /// Counterclockwise rotation by `a` radians.
    pub fn rotate(self, a: F) -> Self {
        let (s, c) = a.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> F {
        self.y.atan2(self.x)
    }
}

/// World-frame base or object pose. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2<F> {
    pub x: F,
    pub y: F,
    pub theta: F,
}

impl<F: Real> Pose2<F> {
    pub fn new(x: F, y: F, theta: F) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Point2<F> {
        Point2::new(self.x, self.y)
    }
}

/// One straight edge of a supporting plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEdge<F> {
    pub p0: Point2<F>,
    pub p1: Point2<F>,
    /// Unit normal pointing into the table.
    pub inward_normal: Point2<F>,
}

impl<F: Real> TableEdge<F> {
    pub fn new(p0: Point2<F>, p1: Point2<F>, inward_normal: Point2<F>) -> Result<Self, GeometryError> {
        let dir = p1.sub(p0);
        if dir.norm() <= F::epsilon() {
            return Err(GeometryError::InvalidEdge("degenerate segment"));
        }
        if (inward_normal.norm() - F::one()).abs() > F::lit(1e-6) {
            return Err(GeometryError::InvalidEdge("normal is not unit length"));
        }
        if (inward_normal.dot(dir) / dir.norm()).abs() > F::lit(1e-6) {
            return Err(GeometryError::InvalidEdge("normal not perpendicular to edge"));
        }
        Ok(Self { p0, p1, inward_normal })
    }

    /// Edge of a counterclockwise table polygon: the table lies to the left of `p0 -> p1`.
    pub fn ccw(p0: Point2<F>, p1: Point2<F>) -> Result<Self, GeometryError> {
        let dir = p1.sub(p0);
        let len = dir.norm();
        if len <= F::epsilon() {
            return Err(GeometryError::InvalidEdge("degenerate segment"));
        }
        let n = Point2::new(-dir.y / len, dir.x / len);
        Self::new(p0, p1, n)
    }

    /// Signed distance of `p` from the edge line, positive on the table side.
    pub fn signed_distance(&self, p: Point2<F>) -> F {
        p.sub(self.p0).dot(self.inward_normal)
    }

    /// Euclidean distance from `p` to the segment (not the infinite line).
    pub fn segment_distance(&self, p: Point2<F>) -> F {
        let d = self.p1.sub(self.p0);
        let t = (p.sub(self.p0).dot(d) / d.dot(d)).max(F::zero()).min(F::one());
        p.dist(self.p0.add(d.scale(t)))
    }

    /// The same edge after a rigid motion (rotation about the world origin, then translation).
    pub fn transformed(&self, rotation: F, translation: Point2<F>) -> Self {
        Self {
            p0: self.p0.rotate(rotation).add(translation),
            p1: self.p1.rotate(rotation).add(translation),
            inward_normal: self.inward_normal.rotate(rotation),
        }
    }
}

/// Builds the edges of a closed counterclockwise table polygon.
pub fn table_polygon<F: Real>(corners: &[Point2<F>]) -> Result<Vec<TableEdge<F>>, GeometryError> {
    if corners.len() < 3 {
        return Err(GeometryError::InvalidEdge("table polygon needs at least 3 corners"));
    }
    let n = corners.len();
    (0..n).map(|i| TableEdge::ccw(corners[i], corners[(i + 1) % n])).collect()
}

/// Edge whose segment is closest to the object; ties keep the first.
pub fn nearest_edge<F: Real>(object: Point2<F>, edges: &[TableEdge<F>]) -> Result<usize, GeometryError> {
    let mut best: Option<(usize, F)> = None;
    for (i, e) in edges.iter().enumerate() {
        let d = e.segment_distance(object);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(GeometryError::NoEdges)
}

/// Observable object features relative to the edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectFeatures<F> {
    /// Distance from the object to the edge line.
    pub dx_obj: F,
    /// Object heading relative to the inward edge normal, in (-pi, pi].
    pub dpsi_obj: F,
}

impl<F: Real> ObjectFeatures<F> {
    pub fn new(dx_obj: F, dpsi_obj: F) -> Self {
        Self { dx_obj, dpsi_obj: wrap_angle(dpsi_obj) }
    }
}

/// Controllable robot base position in the feature frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotOffset<F> {
    pub dx_rob: F,
    pub dy_rob: F,
}

impl<F: Real> RobotOffset<F> {
    pub fn new(dx_rob: F, dy_rob: F) -> Self {
        Self { dx_rob, dy_rob }
    }

    pub fn as_point(&self) -> Point2<F> {
        Point2::new(self.dx_rob, self.dy_rob)
    }
}

impl<F: Real> From<Point2<F>> for RobotOffset<F> {
    fn from(p: Point2<F>) -> Self {
        Self::new(p.x, p.y)
    }
}

/// Rigid placement of the feature frame in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTransform<F> {
    pub origin: Point2<F>,
    pub rotation: F,
}

impl<F: Real> FrameTransform<F> {
    pub fn new(origin: Point2<F>, rotation: F) -> Self {
        Self { origin, rotation: wrap_angle(rotation) }
    }

    /// Frame coordinates to world coordinates.
    pub fn apply(&self, local: Point2<F>) -> Point2<F> {
        local.rotate(self.rotation).add(self.origin)
    }

    /// World coordinates to frame coordinates.
    pub fn inverse_apply(&self, world: Point2<F>) -> Point2<F> {
        world.sub(self.origin).rotate(-self.rotation)
    }

    /// The frame shifted by `dy` along its own y-axis.
    pub fn shifted_y(&self, dy: F) -> Self {
        Self::new(self.apply(Point2::new(F::zero(), dy)), self.rotation)
    }
}

/// Feature frame for an object on a given edge.
pub fn gsm_frame<F: Real>(object_pose: &Pose2<F>, edge: &TableEdge<F>) -> Result<FrameTransform<F>, GeometryError> {
    let p = object_pose.position();
    let s = edge.signed_distance(p);
    if s < F::zero() {
        return Err(GeometryError::ObjectOffTable(s.as_f64()));
    }
    let n = edge.inward_normal;
    let origin = p.sub(n.scale(s));
    let rotation = (-n.y).atan2(-n.x);
    Ok(FrameTransform::new(origin, rotation))
}

pub fn object_features<F: Real>(object_pose: &Pose2<F>, edge: &TableEdge<F>) -> Result<ObjectFeatures<F>, GeometryError> {
    let s = edge.signed_distance(object_pose.position());
    if s < F::zero() {
        return Err(GeometryError::ObjectOffTable(s.as_f64()));
    }
    let normal_heading = edge.inward_normal.angle();
    Ok(ObjectFeatures::new(s, object_pose.theta - normal_heading))
}

/// Robot base position expressed in the feature frame. Base orientation is not part of the
/// feature space (the base always faces the table).
pub fn robot_offset<F: Real>(robot_pose: &Pose2<F>, frame: &FrameTransform<F>) -> RobotOffset<F> {
    frame.inverse_apply(robot_pose.position()).into()
}

/// Signed area of a closed polygon; positive when counterclockwise.
pub fn signed_area<F: Real>(pts: &[Point2<F>]) -> F {
    let n = pts.len();
    if n < 3 {
        return F::zero();
    }
    let mut acc = F::zero();
    for i in 0..n {
        acc += pts[i].cross(pts[(i + 1) % n]);
    }
    acc / F::lit(2.0)
}

/// Area-weighted centroid of a closed polygon.
pub fn polygon_centroid<F: Real>(pts: &[Point2<F>]) -> Point2<F> {
    let n = pts.len();
    let a = signed_area(pts);
    if a.abs() <= F::epsilon() {
        let s = pts.iter().fold(Point2::origin(), |acc, p| acc.add(*p));
        return s.scale(F::one() / F::count(n.max(1)));
    }
    let mut cx = F::zero();
    let mut cy = F::zero();
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let c = p.cross(q);
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    let k = F::one() / (F::lit(6.0) * a);
    Point2::new(cx * k, cy * k)
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon<F: Real>(p: Point2<F>, pts: &[Point2<F>]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = pts[i];
        let b = pts[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when no two non-adjacent edges of the closed polygon intersect.
pub fn is_simple_polygon<F: Real>(pts: &[Point2<F>]) -> bool {
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let seg_hit = |a: Point2<F>, b: Point2<F>, c: Point2<F>, d: Point2<F>| -> bool {
        let d1 = b.sub(a).cross(c.sub(a));
        let d2 = b.sub(a).cross(d.sub(a));
        let d3 = d.sub(c).cross(a.sub(c));
        let d4 = d.sub(c).cross(b.sub(c));
        (d1 > F::zero()) != (d2 > F::zero()) && (d3 > F::zero()) != (d4 > F::zero()) && d1 != F::zero() && d2 != F::zero()
    };
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if seg_hit(a, b, pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn y_axis_edge() -> TableEdge<f64> {
        TableEdge::new(Point2::new(0.0, -2.0), Point2::new(0.0, 2.0), Point2::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn axis_aligned_projection() {
        let edge = y_axis_edge();
        let f = gsm_frame(&Pose2::new(0.2, 0.7, 0.0), &edge).unwrap();
        assert!((f.origin.x).abs() < 1e-15 && (f.origin.y - 0.7).abs() < 1e-15);
        // frame x-axis is world (-1, 0)
        let x_axis = f.apply(Point2::new(1.0, 0.0)).sub(f.origin);
        assert!((x_axis.x + 1.0).abs() < 1e-12 && x_axis.y.abs() < 1e-12);
    }

    #[test]
    fn worked_example_features() {
        let feat = object_features(&Pose2::new(0.2, 0.7, 1.5), &y_axis_edge()).unwrap();
        assert!((feat.dx_obj - 0.2).abs() < 1e-12);
        assert!((feat.dpsi_obj - 1.5).abs() < 1e-12);
    }

    #[test]
    fn object_on_edge_and_aligned() {
        let edge = y_axis_edge();
        let feat = object_features(&Pose2::new(0.0, 0.3, 0.0), &edge).unwrap();
        assert_eq!(feat.dx_obj, 0.0);
        assert_eq!(feat.dpsi_obj, 0.0);
        let f = gsm_frame(&Pose2::new(0.0, 0.3, 0.0), &edge).unwrap();
        assert_eq!(f.origin, Point2::new(0.0, 0.3));
    }

    #[test]
    fn object_behind_edge_is_rejected() {
        let edge = y_axis_edge();
        assert!(matches!(gsm_frame(&Pose2::new(-0.01, 0.0, 0.0), &edge), Err(GeometryError::ObjectOffTable(_))));
        assert!(object_features(&Pose2::new(-0.5, 0.0, 0.0), &edge).is_err());
    }

    #[test]
    fn rotated_edge_matches_dense_line_scan() {
        let dir = Point2::new(1.0f64, 1.0).scale(1.0 / 2f64.sqrt());
        let p0 = Point2::new(0.3, -0.2);
        let p1 = p0.add(dir.scale(3.0));
        let edge = TableEdge::ccw(p0, p1).unwrap();
        let obj = Pose2::new(0.0, 1.0, 0.4);
        let frame = gsm_frame(&obj, &edge).unwrap();
        // brute force: scan the supporting line parameter
        let mut best = (f64::INFINITY, Point2::origin());
        let steps = 400_000;
        for k in 0..=steps {
            let t = -4.0 + 8.0 * k as f64 / steps as f64;
            let q = p0.add(dir.scale(t));
            let d = q.dist(obj.position());
            if d < best.0 {
                best = (d, q);
            }
        }
        assert!(frame.origin.dist(best.1) < 1e-4);
        let feat = object_features(&obj, &edge).unwrap();
        assert!((feat.dx_obj - best.0).abs() < 1e-8);
        // object sits on the frame's negative x-axis with zero y
        let local = frame.inverse_apply(obj.position());
        assert!(local.y.abs() < 1e-12);
        assert!((local.x + feat.dx_obj).abs() < 1e-12);
    }

    #[test]
    fn robot_offset_identity_and_matrix_oracle() {
        let frame = FrameTransform::<f64>::new(Point2::new(1.5, -0.25), 2.2);
        let at_origin = robot_offset(&Pose2::new(1.5, -0.25, 0.3), &frame);
        assert!(at_origin.dx_rob.abs() < 1e-15 && at_origin.dy_rob.abs() < 1e-15);

        let robot = Pose2::new(-0.4, 0.9, 1.0);
        let off = robot_offset(&robot, &frame);
        // explicit homogeneous 3x3 inverse
        let (s, c) = 2.2f64.sin_cos();
        let m = [[c, -s, 1.5], [s, c, -0.25], [0.0, 0.0, 1.0]];
        let inv = [
            [m[0][0], m[1][0], -(m[0][0] * m[0][2] + m[1][0] * m[1][2])],
            [m[0][1], m[1][1], -(m[0][1] * m[0][2] + m[1][1] * m[1][2])],
        ];
        let ex = inv[0][0] * robot.x + inv[0][1] * robot.y + inv[0][2];
        let ey = inv[1][0] * robot.x + inv[1][1] * robot.y + inv[1][2];
        assert!((off.dx_rob - ex).abs() < 1e-12 && (off.dy_rob - ey).abs() < 1e-12);
    }

    #[test]
    fn nearest_edge_of_rectangle() {
        let edges = table_polygon(&[
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        // inward normals of a ccw rectangle point inside
        for e in &edges {
            assert!(e.signed_distance(Point2::new(1.0, 0.5)) > 0.0);
        }
        assert_eq!(nearest_edge(Point2::new(1.0, 0.1), &edges).unwrap(), 0);
        assert_eq!(nearest_edge(Point2::new(1.9, 0.5), &edges).unwrap(), 1);
        assert_eq!(nearest_edge(Point2::new(1.0, 0.95), &edges).unwrap(), 2);
        assert!(nearest_edge::<f64>(Point2::origin(), &[]).is_err());
    }

    #[test]
    fn polygon_helpers() {
        let sq: [Point2<f64>; 4] = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
        assert_eq!(signed_area(&sq), 1.0);
        let c = polygon_centroid(&sq);
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Point2::new(1.5, 0.5), &sq));
        assert!(is_simple_polygon(&sq));
        let bow = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        assert!(!is_simple_polygon(&bow));
    }

    #[test]
    fn generic_over_f32() {
        let edge = TableEdge::<f32>::new(Point2::new(0.0, -2.0), Point2::new(0.0, 2.0), Point2::new(1.0, 0.0)).unwrap();
        let feat = object_features(&Pose2::new(0.2f32, 0.7, 1.5), &edge).unwrap();
        assert!((feat.dx_obj - 0.2).abs() < 1e-6 && (feat.dpsi_obj - 1.5).abs() < 1e-6);
        let _ = PI;
    }
}

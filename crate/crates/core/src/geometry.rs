//! Vectors, plane frames, and ray/plane intersection shared by every element.
//!
//! Lengths are millimeters throughout. Ray directions are unit vectors; the
//! constructors and ops below keep them unit-length to within 1e-12.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Minimum travel distance before a ray may meet the next surface, in mm.
/// Keeps a ray from re-intersecting the surface it just left.
pub const EPS_ADVANCE: f64 = 1e-9;

/// |direction . normal| below this counts as parallel to the plane.
pub const EPS_PARALLEL: f64 = 1e-12;

/// Unit-length tolerance for directions and frame axes.
pub const EPS_UNIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// None when the vector is too short to carry a direction.
    pub fn try_normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n < 1e-300 {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn normalized(self) -> Vec3 {
        self.try_normalized().expect("cannot normalize zero vector")
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= EPS_UNIT
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Right-handed orthonormal frame {u, v, n} anchored at a point. Every
/// optical surface lives in one of these; (u, v) are its in-plane axes and
/// n its normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub n: Vec3,
}

impl PlaneFrame {
    /// Frame perpendicular to the z axis: u = +x, v = +y, n = +z.
    pub fn axial(z: f64) -> PlaneFrame {
        PlaneFrame { origin: Vec3::new(0.0, 0.0, z), u: Vec3::X, v: Vec3::Y, n: Vec3::Z }
    }

    /// Builds a frame from a normal and an in-plane hint for u. The hint is
    /// projected into the plane; it must not be parallel to the normal.
    pub fn from_normal(origin: Vec3, normal: Vec3, u_hint: Vec3) -> PlaneFrame {
        let n = normal.normalized();
        let u = (u_hint - n * u_hint.dot(n))
            .try_normalized()
            .expect("u_hint parallel to normal");
        let v = n.cross(u);
        PlaneFrame { origin, u, v, n }
    }

    /// Axial frame whose normal is rotated by `tilt_deg` about the +x axis.
    pub fn axial_tilted(z: f64, tilt_deg: f64) -> PlaneFrame {
        let t = tilt_deg.to_radians();
        let n = Vec3::new(0.0, t.sin(), t.cos());
        let u = Vec3::X;
        let v = n.cross(u);
        PlaneFrame { origin: Vec3::new(0.0, 0.0, z), u, v, n }
    }

    /// In-plane coordinates of a point (assumed on or near the plane).
    pub fn in_plane(&self, p: Vec3) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(self.u), d.dot(self.v))
    }

    pub fn point_at(&self, u: f64, v: f64) -> Vec3 {
        self.origin + self.u * u + self.v * v
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.u.is_unit()
            && self.v.is_unit()
            && self.n.is_unit()
            && self.u.dot(self.v).abs() <= tol
            && self.u.dot(self.n).abs() <= tol
            && self.v.dot(self.n).abs() <= tol
            && (self.u.cross(self.v) - self.n).norm() <= tol
    }
}

/// A weighted ray. `direction` is unit length; `weight` is the carried
/// radiant share in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub weight: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, weight: f64) -> Ray {
        debug_assert!(direction.is_unit(), "ray direction must be unit length");
        debug_assert!((0.0..=1.0).contains(&weight), "ray weight in [0,1]");
        Ray { origin, direction, weight }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHit {
    pub t: f64,
    pub point: Vec3,
}

/// Forward intersection of a ray with a plane. None when the ray is parallel
/// to the plane or the intersection lies behind (or within EPS_ADVANCE of)
/// the ray origin.
pub fn intersect_plane(ray: &Ray, frame: &PlaneFrame) -> Option<PlaneHit> {
    let denom = ray.direction.dot(frame.n);
    if denom.abs() < EPS_PARALLEL {
        return None;
    }
    let t = (frame.origin - ray.origin).dot(frame.n) / denom;
    if t <= EPS_ADVANCE {
        return None;
    }
    Some(PlaneHit { t, point: ray.at(t) })
}

/// Splits a direction into its component along the plane normal and the
/// in-plane remainder, so that d = d_n + d_t.
pub fn transverse_decompose(d: Vec3, frame: &PlaneFrame) -> (Vec3, Vec3) {
    let d_n = frame.n * d.dot(frame.n);
    (d_n, d - d_n)
}

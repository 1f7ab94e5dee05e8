//! The optical element kinds and their ray transforms.
//!
//! Conventions shared by every op:
//! - an element acts exactly at its plane; rays advance between planes only,
//! - weights are multiplied, never added, so a branch weight stays in [0, 1],
//! - directions stay unit length to within 1e-12.

use crate::geometry::{PlaneFrame, Ray, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ideal thin lens. The reduced-slope rule below is exact for any hit height
/// inside the disk, not a paraxial approximation: every ray from an object
/// point at distance s crosses the conjugate point at s' with
/// 1/s + 1/s' = 1/focal_length.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinLens {
    pub frame: PlaneFrame,
    pub focal_length: f64,
    pub diameter: f64,
}

/// Circular hole; everything outside the closed disk is absorbed. The disk
/// center may sit off the frame origin (a decentered iris).
#[derive(Debug, Clone, PartialEq)]
pub struct CircularAperture {
    pub frame: PlaneFrame,
    pub radius: f64,
    pub center_offset: (f64, f64),
}

impl CircularAperture {
    pub fn effective_center(&self) -> Vec3 {
        self.frame.point_at(self.center_offset.0, self.center_offset.1)
    }
}

/// Plane-symmetric transfer plate. The Image mode retro-reflects both
/// transverse direction components, so a diverging bundle re-converges at the
/// mirror point of its source across the plate plane. The two Ghost modes
/// flip only one transverse component each (a single-reflection pass through
/// the plate), and Direct passes straight through.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferPlate {
    pub frame: PlaneFrame,
    pub eff_image: f64,
    pub eff_ghost_u: f64,
    pub eff_ghost_v: f64,
    pub eff_direct: f64,
    /// Acceptance half-angle in degrees: Image/Ghost transfer happens only
    /// for incidence angles up to this bound. Direct passes at any angle.
    pub theta_max_deg: f64,
    /// Tilt about the frame's u axis, in degrees; `frame` is derived from
    /// the axial position and this angle when the plate is built, and the
    /// value is kept so serialization round-trips bit-exactly.
    pub tilt_deg: f64,
}

impl TransferPlate {
    pub fn efficiency(&self, mode: PlateMode) -> f64 {
        match mode {
            PlateMode::Image => self.eff_image,
            PlateMode::GhostU => self.eff_ghost_u,
            PlateMode::GhostV => self.eff_ghost_v,
            PlateMode::Direct => self.eff_direct,
        }
    }

    pub fn efficiency_sum(&self) -> f64 {
        self.eff_image + self.eff_ghost_u + self.eff_ghost_v + self.eff_direct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlateMode {
    Image,
    GhostU,
    GhostV,
    Direct,
}

impl PlateMode {
    pub const ALL: [PlateMode; 4] =
        [PlateMode::Image, PlateMode::GhostU, PlateMode::GhostV, PlateMode::Direct];

    pub fn is_ghost(self) -> bool {
        matches!(self, PlateMode::GhostU | PlateMode::GhostV)
    }
}

/// Bounded detector plane with a bin grid for irradiance accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Screen {
    pub frame: PlaneFrame,
    pub half_width_u: f64,
    pub half_width_v: f64,
    pub bins_u: usize,
    pub bins_v: usize,
}

/// Pixel grid that emits ray bundles. Each pixel sends `samples_per_pixel`
/// rays of weight 1/samples_per_pixel toward stratified jittered points on a
/// target disk, so the emitted weight per pixel sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGrid {
    pub frame: PlaneFrame,
    pub pixels_u: usize,
    pub pixels_v: usize,
    pub pitch: f64,
    /// In-plane offset of the grid center; lets a field sit off-axis.
    pub center: (f64, f64),
    pub samples_per_pixel: usize,
}

impl SourceGrid {
    pub fn pixel_count(&self) -> usize {
        self.pixels_u * self.pixels_v
    }

    /// In-plane position of a pixel center, relative to the grid frame.
    pub fn pixel_uv(&self, iu: usize, iv: usize) -> (f64, f64) {
        let cu = (self.pixels_u as f64 - 1.0) / 2.0;
        let cv = (self.pixels_v as f64 - 1.0) / 2.0;
        (
            self.center.0 + (iu as f64 - cu) * self.pitch,
            self.center.1 + (iv as f64 - cv) * self.pitch,
        )
    }

    pub fn pixel_point(&self, index: usize) -> Vec3 {
        let (iu, iv) = (index % self.pixels_u, index / self.pixels_u);
        let (u, v) = self.pixel_uv(iu, iv);
        self.frame.point_at(u, v)
    }
}

/// The disk every source pixel aims its bundle at (the first lens aperture
/// in the scene, or the eye lens when the scene has no other lens).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDisk {
    pub frame: PlaneFrame,
    pub radius: f64,
}

/// Refraction at an ideal thin lens. The incoming direction is decomposed
/// into reduced slopes s = d_t / (d.n); the outgoing reduced slope is
/// s' = s - p/f with p the hit position relative to the lens center. The
/// sign of the normal component is preserved. None means the hit fell
/// outside the lens disk (vignetted at the rim).
pub fn lens_refract(ray: &Ray, lens: &ThinLens, hit: Vec3) -> Option<Ray> {
    let (pu, pv) = lens.frame.in_plane(hit);
    if (pu * pu + pv * pv).sqrt() > lens.diameter / 2.0 {
        return None;
    }
    let dn = ray.direction.dot(lens.frame.n);
    debug_assert!(dn.abs() > 1e-12, "lens hit by in-plane ray");
    let su = ray.direction.dot(lens.frame.u) / dn;
    let sv = ray.direction.dot(lens.frame.v) / dn;
    let su_out = su - pu / lens.focal_length;
    let sv_out = sv - pv / lens.focal_length;
    // Reduced slopes fix d' up to scale; the sign of d.n is preserved.
    let sign = if dn >= 0.0 { 1.0 } else { -1.0 };
    let dir = (lens.frame.u * su_out + lens.frame.v * sv_out + lens.frame.n).normalized() * sign;
    Some(Ray { origin: hit, direction: dir, weight: ray.weight })
}

/// Closed-disk membership test at an aperture plane.
pub fn aperture_pass(hit: Vec3, ap: &CircularAperture) -> bool {
    let (u, v) = ap.frame.in_plane(hit);
    let du = u - ap.center_offset.0;
    let dv = v - ap.center_offset.1;
    (du * du + dv * dv).sqrt() <= ap.radius
}

/// One transfer mode at the plate. Image negates both transverse direction
/// components (d' = 2(d.n)n - d), GhostU/GhostV negate one each, Direct
/// leaves the direction unchanged. The outgoing weight is scaled by the
/// mode efficiency. Image and Ghost return None beyond the acceptance
/// angle; Direct always passes.
pub fn plate_transfer(ray: &Ray, plate: &TransferPlate, hit: Vec3, mode: PlateMode) -> Option<Ray> {
    let d = ray.direction;
    let cos_inc = d.dot(plate.frame.n).abs();
    if mode != PlateMode::Direct {
        // Compare in cosine space; the 1e-12 slack keeps an incidence of
        // exactly theta_max on the passing side of the window.
        let cos_max = plate.theta_max_deg.to_radians().cos();
        if cos_inc + 1e-12 < cos_max {
            return None;
        }
    }
    let direction = match mode {
        PlateMode::Image => plate.frame.n * (2.0 * d.dot(plate.frame.n)) - d,
        PlateMode::GhostU => d - plate.frame.u * (2.0 * d.dot(plate.frame.u)),
        PlateMode::GhostV => d - plate.frame.v * (2.0 * d.dot(plate.frame.v)),
        PlateMode::Direct => d,
    };
    Some(Ray { origin: hit, direction, weight: ray.weight * plate.efficiency(mode) })
}

/// Intersects the ray with the screen plane and reports the in-plane hit
/// coordinates, or None when the ray misses the plane or the bounds.
pub fn screen_hit(ray: &Ray, screen: &Screen) -> Option<(f64, f64)> {
    let hit = crate::geometry::intersect_plane(ray, &screen.frame)?;
    screen_contains(screen, hit.point)
}

/// Bounds check for a point already on the screen plane.
pub fn screen_contains(screen: &Screen, point: Vec3) -> Option<(f64, f64)> {
    let (u, v) = screen.frame.in_plane(point);
    if u.abs() <= screen.half_width_u && v.abs() <= screen.half_width_v {
        Some((u, v))
    } else {
        None
    }
}

/// Rays for one pixel: stratified jittered points covering the target disk,
/// deterministic for a fixed (seed, pixel) pair. Stratification uses the
/// largest g*g grid that fits the sample count; any remainder is drawn
/// unstratified from the same stream.
pub fn sample_pixel_rays(
    src: &SourceGrid,
    target: &TargetDisk,
    seed: u64,
    pixel_index: usize,
) -> Vec<Ray> {
    let k = src.samples_per_pixel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pixel_index as u64 + 1);
    let origin = src.pixel_point(pixel_index);
    let weight = 1.0 / k as f64;
    let g = (k as f64).sqrt().floor() as usize;
    let mut rays = Vec::with_capacity(k);
    let push = |a: f64, b: f64, rays: &mut Vec<Ray>| {
        let r = target.radius * a.sqrt();
        let phi = std::f64::consts::TAU * b;
        let point = target.frame.point_at(r * phi.cos(), r * phi.sin());
        rays.push(Ray::new(origin, (point - origin).normalized(), weight));
    };
    for i in 0..g {
        for j in 0..g {
            let a = (i as f64 + rng.gen::<f64>()) / g as f64;
            let b = (j as f64 + rng.gen::<f64>()) / g as f64;
            push(a, b, &mut rays);
        }
    }
    for _ in g * g..k {
        let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
        push(a, b, &mut rays);
    }
    rays
}

/// All pixels' rays in pixel order, tagged with the pixel linear index.
pub fn source_sample_rays(src: &SourceGrid, target: &TargetDisk, seed: u64) -> Vec<(usize, Ray)> {
    let mut out = Vec::with_capacity(src.pixel_count() * src.samples_per_pixel);
    for p in 0..src.pixel_count() {
        for ray in sample_pixel_rays(src, target, seed, p) {
            out.push((p, ray));
        }
    }
    out
}

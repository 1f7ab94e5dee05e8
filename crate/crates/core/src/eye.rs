//! Reduced eye: iris aperture, varifocal thin lens, retina screen.
//!
//! The pupil and the lens decenter together when the gaze shifts
//! (`pupil_offset`); the retina stays centered on the device axis. Because
//! the lens rides with the pupil, a translated eye is not literally
//! invariant: it is equivariant, meaning the retinal image translates by the
//! offset times (1 + retina_distance / object_distance) while keeping its
//! shape. The tests below pin both facts.

use crate::elements::{
    aperture_pass, lens_refract, screen_contains, CircularAperture, Screen, ThinLens,
};
use crate::geometry::{intersect_plane, PlaneFrame, Ray, EPS_ADVANCE};

/// Minimum axial separation between the pupil and the eye lens. A literal
/// zero gap would put two surfaces on one plane and the advance epsilon
/// would skip the second; twice the epsilon keeps them ordered while staying
/// far below every tolerance the experiments use.
pub const EYE_STACK_MIN_GAP: f64 = 2.0 * EPS_ADVANCE;

#[derive(Debug, Clone, PartialEq)]
pub struct EyeModel {
    /// Pupil plane; `n` points into the eye, along propagation.
    pub frame: PlaneFrame,
    pub pupil_radius: f64,
    /// Transverse decenter of pupil and lens together, in frame (u, v).
    pub pupil_offset: (f64, f64),
    pub pupil_to_lens_gap: f64,
    pub lens_focal_length: f64,
    pub lens_diameter: f64,
    /// Lens plane to retina plane, along `n`.
    pub retina_distance: f64,
    pub retina_half_width: (f64, f64),
    pub retina_bins: (usize, usize),
}

/// The eye expanded into its three trace surfaces, in propagation order.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeStack {
    pub pupil: CircularAperture,
    pub lens: ThinLens,
    pub retina: Screen,
}

impl EyeModel {
    pub fn effective_gap(&self) -> f64 {
        self.pupil_to_lens_gap.max(EYE_STACK_MIN_GAP)
    }

    pub fn stack(&self) -> EyeStack {
        let f = &self.frame;
        let gap = self.effective_gap();
        let (ou, ov) = self.pupil_offset;
        let lens_origin = f.origin + f.n * gap + f.u * ou + f.v * ov;
        let retina_origin = f.origin + f.n * (gap + self.retina_distance);
        EyeStack {
            pupil: CircularAperture {
                frame: *f,
                radius: self.pupil_radius,
                center_offset: self.pupil_offset,
            },
            lens: ThinLens {
                frame: PlaneFrame { origin: lens_origin, u: f.u, v: f.v, n: f.n },
                focal_length: self.lens_focal_length,
                diameter: self.lens_diameter,
            },
            retina: Screen {
                frame: PlaneFrame { origin: retina_origin, u: f.u, v: f.v, n: f.n },
                half_width_u: self.retina_half_width.0,
                half_width_v: self.retina_half_width.1,
                bins_u: self.retina_bins.0,
                bins_v: self.retina_bins.1,
            },
        }
    }

    /// Focal length that images an object plane `distance` in front of the
    /// eye lens onto the retina.
    pub fn focus_for_distance(&self, distance: f64) -> f64 {
        distance * self.retina_distance / (distance + self.retina_distance)
    }

    pub fn with_pupil_offset(&self, offset: (f64, f64)) -> EyeModel {
        EyeModel { pupil_offset: offset, ..self.clone() }
    }

    pub fn with_focal_length(&self, f: f64) -> EyeModel {
        EyeModel { lens_focal_length: f, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EyeTrace {
    BlockedAtPupil,
    BlockedAtLens,
    MissedRetina,
    Hit { u: f64, v: f64, weight: f64 },
}

/// Traces one ray through the eye alone. The three surfaces are strictly
/// ordered along the axis with nothing between them, so sequential
/// propagation is exact here.
pub fn eye_trace(ray: &Ray, eye: &EyeModel) -> EyeTrace {
    let stack = eye.stack();
    let Some(hit) = intersect_plane(ray, &stack.pupil.frame) else {
        return EyeTrace::BlockedAtPupil;
    };
    if !aperture_pass(hit.point, &stack.pupil) {
        return EyeTrace::BlockedAtPupil;
    }
    let ray = Ray { origin: hit.point, ..*ray };
    let Some(hit) = intersect_plane(&ray, &stack.lens.frame) else {
        return EyeTrace::BlockedAtLens;
    };
    let Some(ray) = lens_refract(&ray, &stack.lens, hit.point) else {
        return EyeTrace::BlockedAtLens;
    };
    let Some(hit) = intersect_plane(&ray, &stack.retina.frame) else {
        return EyeTrace::MissedRetina;
    };
    match screen_contains(&stack.retina, hit.point) {
        Some((u, v)) => EyeTrace::Hit { u, v, weight: ray.weight },
        None => EyeTrace::MissedRetina,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_eye() -> EyeModel {
        EyeModel {
            frame: PlaneFrame::axial(0.0),
            pupil_radius: 2.0,
            pupil_offset: (0.0, 0.0),
            pupil_to_lens_gap: 0.0,
            lens_focal_length: 15.0,
            lens_diameter: 6.0,
            retina_distance: 17.0,
            retina_half_width: (10.0, 10.0),
            retina_bins: (128, 128),
        }
    }

    #[test]
    fn focus_formula_matches_hand_value() {
        let eye = test_eye();
        // 1/f = 1/160 + 1/17 at a 160 mm object distance.
        assert!((eye.focus_for_distance(160.0) - 2720.0 / 177.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_gap_is_nudged_but_real_gaps_are_kept() {
        let eye = test_eye();
        assert_eq!(eye.effective_gap(), EYE_STACK_MIN_GAP);
        let spaced = EyeModel { pupil_to_lens_gap: 1.25, ..test_eye() };
        assert_eq!(spaced.effective_gap(), 1.25);
        assert!((spaced.stack().retina.frame.origin.z - 18.25).abs() <= 1e-12);
    }

    #[test]
    fn retina_does_not_follow_the_pupil() {
        let eye = test_eye();
        let shifted = eye.with_pupil_offset((3.0, -1.0));
        assert_eq!(eye.stack().retina, shifted.stack().retina);
        assert_eq!(shifted.stack().pupil.center_offset, (3.0, -1.0));
        assert!((shifted.stack().lens.frame.origin - Vec3::new(3.0, -1.0, EYE_STACK_MIN_GAP)).norm() <= 1e-15);
    }

    #[test]
    fn focused_eye_converges_each_point_to_one_retina_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let s = 160.0;
        let mut eye = test_eye();
        eye.lens_focal_length = eye.focus_for_distance(s);
        let m = -eye.retina_distance / s;
        for _ in 0..50 {
            let p = Vec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), -s);
            let expect = (m * p.x, m * p.y);
            for _ in 0..50 {
                let r = 1.9 * rng.gen::<f64>().sqrt();
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                let aim = Vec3::new(r * phi.cos(), r * phi.sin(), 0.0);
                let ray = Ray::new(p, (aim - p).normalized(), 1.0);
                match eye_trace(&ray, &eye) {
                    EyeTrace::Hit { u, v, .. } => {
                        assert!((u - expect.0).abs() <= 1e-9 && (v - expect.1).abs() <= 1e-9);
                    }
                    other => panic!("expected retina hit, got {other:?}"),
                }
            }
        }
    }

    #[test]
    fn pupil_translation_is_equivariant_not_invariant() {
        // trace_c(ray) equals trace_0(ray shifted by -c) shifted back by +c.
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let base = EyeModel { retina_half_width: (60.0, 60.0), ..test_eye() };
        for _ in 0..500 {
            let c = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let eye_c = base.with_pupil_offset(c);
            let origin = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), -rng.gen_range(50.0..200.0));
            let aim = Vec3::new(c.0 + rng.gen_range(-1.9..1.9), c.1 + rng.gen_range(-1.9..1.9), 0.0);
            let ray = Ray::new(origin, (aim - origin).normalized(), 1.0);
            let shifted = Ray { origin: origin - Vec3::new(c.0, c.1, 0.0), ..ray };
            match (eye_trace(&ray, &eye_c), eye_trace(&shifted, &base)) {
                (EyeTrace::Hit { u, v, .. }, EyeTrace::Hit { u: u0, v: v0, .. }) => {
                    assert!((u - (u0 + c.0)).abs() <= 1e-9, "u {u} vs {}", u0 + c.0);
                    assert!((v - (v0 + c.1)).abs() <= 1e-9);
                }
                (a, b) => {
                    // Status must agree even when the ray is blocked.
                    assert_eq!(
                        std::mem::discriminant(&a),
                        std::mem::discriminant(&b),
                        "{a:?} vs {b:?} at c={c:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn decentered_eye_shifts_a_focused_point_by_the_prism_term() {
        // On-axis source at s, pupil offset c: the image lands at
        // c * (1 + retina_distance / s), not at the centered image point.
        let s = 160.0;
        let mut eye = test_eye().with_pupil_offset((1.0, 0.0));
        eye.lens_focal_length = eye.focus_for_distance(s);
        let expect_u = 1.0 * (1.0 + eye.retina_distance / s);
        let src = Vec3::new(0.0, 0.0, -s);
        for aim_u in [-0.8, 0.0, 0.9] {
            let aim = Vec3::new(1.0 + aim_u, 0.0, 0.0);
            let ray = Ray::new(src, (aim - src).normalized(), 1.0);
            match eye_trace(&ray, &eye) {
                EyeTrace::Hit { u, v, .. } => {
                    assert!((u - expect_u).abs() <= 1e-9, "u={u} expect={expect_u}");
                    assert!(v.abs() <= 1e-9);
                }
                other => panic!("expected hit, got {other:?}"),
            }
        }
    }

    #[test]
    fn pupil_blocks_rays_outside_its_disk() {
        let eye = test_eye();
        let through = Ray::new(Vec3::new(1.9, 0.0, -10.0), Vec3::Z, 1.0);
        assert!(matches!(eye_trace(&through, &eye), EyeTrace::Hit { .. }));
        let blocked = Ray::new(Vec3::new(2.5, 0.0, -10.0), Vec3::Z, 1.0);
        assert_eq!(eye_trace(&blocked, &eye), EyeTrace::BlockedAtPupil);
        // The lens rim clips what the pupil admits only beyond the lens
        // semi-diameter; a 2 mm pupil inside a 6 mm lens never does.
        let rim = Ray::new(Vec3::new(0.0, 1.99, -10.0), Vec3::Z, 1.0);
        assert!(matches!(eye_trace(&rim, &eye), EyeTrace::Hit { .. }));
    }

    #[test]
    fn retina_bounds_reject_far_hits() {
        let mut eye = test_eye();
        eye.retina_half_width = (0.5, 0.5);
        // Steep ray through the pupil center lands past the half-width.
        let ray = Ray::new(Vec3::new(0.0, -10.0, -10.0), Vec3::new(0.0, 1.0, 1.0).normalized(), 1.0);
        assert_eq!(eye_trace(&ray, &eye), EyeTrace::MissedRetina);
    }
}

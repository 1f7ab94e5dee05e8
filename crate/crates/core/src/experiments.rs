//! Scripted measurements over scenes: spot size, field coverage, eyebox
//! scans, focus sweeps, ghost ratios, and the viewing-angle probe.
//!
//! Every measurement that needs "the intended image light" uses the scene's
//! image-class convention: ImageOnly on scenes with a transfer plate, All on
//! plateless direct-view scenes (where every path is DirectPath and a literal
//! ImageOnly filter would measure nothing). Scans are deterministic given
//! (scene, seed, parameter list) and stamp their results with an FNV-1a hash
//! of the canonical scene text so a CSV can be traced back to its input.

use crate::scene_file::print_scene;
use crate::tracer::{
    collect_retina_hits, render_retina, ClassFilter, RayClass, RenderError, RetinaHit, Scene, Surface,
};
use crate::geometry::Ray;
use thiserror::Error;

/// The direct-view comparison distance: the same projector grid watched on a
/// screen at arm-ish length, with no relay optics.
pub const BASELINE_VIEWING_DISTANCE_MM: f64 = 250.0;

/// Coverage level that counts as "the full field is visible" in eyebox
/// extent measurements.
pub const EYEBOX_COVERAGE_LEVEL: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("no retina hits to measure")]
    EmptySpot,
    #[error("scene has no transfer plate")]
    PlateRequired,
    #[error("ghost ratio undefined: no image-class light reached the retina")]
    DivisionUndefined,
    #[error("invariant: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// One measured series: strictly increasing parameter values with one metric
/// value each, stamped with the seed and a hash of the scene it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub points: Vec<(f64, f64)>,
    pub scene_hash: u64,
    pub seed: u64,
}

impl ScanResult {
    pub fn new(points: Vec<(f64, f64)>, scene_hash: u64, seed: u64) -> Result<ScanResult, ExperimentError> {
        if !strictly_increasing(points.iter().map(|p| p.0)) {
            return Err(ExperimentError::Invalid("scan parameter values strictly increasing"));
        }
        Ok(ScanResult { points, scene_hash, seed })
    }
}

fn strictly_increasing(values: impl Iterator<Item = f64>) -> bool {
    let mut prev = f64::NEG_INFINITY;
    for v in values {
        if !(v > prev) {
            return false;
        }
        prev = v;
    }
    true
}

/// 64-bit FNV-1a over bytes; used to fingerprint canonical scene text.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn scene_hash(scene: &Scene) -> u64 {
    fnv1a64(print_scene(scene).as_bytes())
}

/// Weighted RMS distance of retina hits from their weighted centroid.
pub fn rms_spot(hits: &[RetinaHit]) -> Result<f64, ExperimentError> {
    let total: f64 = hits.iter().map(|h| h.weight).sum();
    if !(total > 0.0) {
        return Err(ExperimentError::EmptySpot);
    }
    let cu: f64 = hits.iter().map(|h| h.weight * h.u).sum::<f64>() / total;
    let cv: f64 = hits.iter().map(|h| h.weight * h.v).sum::<f64>() / total;
    let var: f64 = hits
        .iter()
        .map(|h| {
            let (du, dv) = (h.u - cu, h.v - cv);
            h.weight * (du * du + dv * dv)
        })
        .sum::<f64>()
        / total;
    Ok(var.sqrt())
}

/// Fraction of source pixels whose image-class delivered weight exceeds
/// tau_cov times their emitted weight (strict, so zero delivery never counts
/// even at a zero threshold).
pub fn field_coverage(scene: &Scene, seed: u64) -> Result<f64, ExperimentError> {
    let out = render_retina(scene, seed, scene.image_class_filter())?;
    Ok(coverage_of(&out.per_pixel_delivered, &out.per_pixel_emitted, scene.params.tau_cov))
}

fn coverage_of(delivered: &[f64], emitted: &[f64], tau: f64) -> f64 {
    let covered = delivered
        .iter()
        .zip(emitted)
        .filter(|(d, e)| **d > tau * **e)
        .count();
    covered as f64 / delivered.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EyeboxScan {
    /// Coverage vs pupil offset along u, in mm.
    pub coverage: ScanResult,
    /// Mean delivered weight per pixel vs the same offsets.
    pub intensity: ScanResult,
    /// Width of the widest contiguous offset interval with coverage at or
    /// above EYEBOX_COVERAGE_LEVEL.
    pub extent_mm: f64,
}

/// Renders the scene at each pupil offset (iris and eye lens translated
/// rigidly along u) and reports coverage, mean intensity, and the eyebox
/// extent those curves imply.
pub fn eyebox_scan(scene: &Scene, offsets: &[f64], seed: u64) -> Result<EyeboxScan, ExperimentError> {
    if offsets.is_empty() {
        return Err(ExperimentError::Invalid("eyebox scan needs at least one offset"));
    }
    if !strictly_increasing(offsets.iter().copied()) {
        return Err(ExperimentError::Invalid("scan parameter values strictly increasing"));
    }
    let hash = scene_hash(scene);
    let filter = scene.image_class_filter();
    let mut coverage = Vec::with_capacity(offsets.len());
    let mut intensity = Vec::with_capacity(offsets.len());
    for &t in offsets {
        let shifted = scene.with_pupil_offset((t, 0.0));
        let out = render_retina(&shifted, seed, filter)?;
        coverage.push((t, coverage_of(&out.per_pixel_delivered, &out.per_pixel_emitted, scene.params.tau_cov)));
        intensity.push((t, out.retina_total / scene.source.pixel_count() as f64));
    }
    let extent_mm = widest_covered_interval(&coverage, EYEBOX_COVERAGE_LEVEL);
    Ok(EyeboxScan {
        coverage: ScanResult::new(coverage, hash, seed)?,
        intensity: ScanResult::new(intensity, hash, seed)?,
        extent_mm,
    })
}

fn widest_covered_interval(points: &[(f64, f64)], level: f64) -> f64 {
    let mut widest = 0.0f64;
    let mut run_start: Option<f64> = None;
    for &(t, c) in points {
        match (c >= level, run_start) {
            (true, None) => run_start = Some(t),
            (true, Some(start)) => widest = widest.max(t - start),
            (false, _) => run_start = None,
        }
    }
    widest
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocusSweep {
    pub proposed: ScanResult,
    pub baseline: ScanResult,
}

/// Mean image-class RMS spot versus eye focal length, on the given scene and
/// on its direct-view baseline. Pixels that deliver nothing at some focal
/// length are skipped rather than failing the sweep.
pub fn focus_sweep(scene: &Scene, f_values: &[f64], seed: u64) -> Result<FocusSweep, ExperimentError> {
    let proposed = focus_response(scene, f_values, seed)?;
    let baseline = focus_response(&baseline_scene(scene), f_values, seed)?;
    Ok(FocusSweep { proposed, baseline })
}

/// Mean image-class RMS spot versus eye focal length on one scene.
pub fn focus_response(
    scene: &Scene,
    f_values: &[f64],
    seed: u64,
) -> Result<ScanResult, ExperimentError> {
    if f_values.is_empty() || f_values.iter().any(|f| !(*f > 0.0)) {
        return Err(ExperimentError::Invalid("focal lengths positive and nonempty"));
    }
    if !strictly_increasing(f_values.iter().copied()) {
        return Err(ExperimentError::Invalid("scan parameter values strictly increasing"));
    }
    let hash = scene_hash(scene);
    let filter = scene.image_class_filter();
    let mut points = Vec::with_capacity(f_values.len());
    for &f in f_values {
        let focused = scene.with_eye_focal_length(f);
        let per_pixel = collect_retina_hits(&focused, seed, filter)?;
        let spots: Vec<f64> = per_pixel.iter().filter_map(|h| rms_spot(h).ok()).collect();
        if spots.is_empty() {
            return Err(ExperimentError::EmptySpot);
        }
        points.push((f, spots.iter().sum::<f64>() / spots.len() as f64));
    }
    ScanResult::new(points, hash, seed)
}

/// The direct-view comparison: the same pixel grid, watched with the same
/// eye from BASELINE_VIEWING_DISTANCE_MM away, no optics in between.
pub fn baseline_scene(scene: &Scene) -> Scene {
    let eye = &scene.eye.frame;
    let origin = eye.origin - eye.n * BASELINE_VIEWING_DISTANCE_MM;
    Scene {
        source: crate::elements::SourceGrid {
            frame: crate::geometry::PlaneFrame { origin, u: eye.u, v: eye.v, n: eye.n },
            ..scene.source.clone()
        },
        elements: Vec::new(),
        eye: scene.eye.clone(),
        params: scene.params.clone(),
    }
}

/// Retina ghost-to-image weight ratio. Direct transmission counts in
/// neither total.
pub fn ghost_ratio(scene: &Scene, seed: u64) -> Result<f64, ExperimentError> {
    if !scene.has_plates() {
        return Err(ExperimentError::PlateRequired);
    }
    let per_pixel = collect_retina_hits(scene, seed, ClassFilter::All)?;
    let mut image = 0.0;
    let mut ghost = 0.0;
    for hit in per_pixel.iter().flatten() {
        match hit.class {
            RayClass::ImagePath => image += hit.weight,
            RayClass::GhostPath => ghost += hit.weight,
            RayClass::DirectPath => {}
        }
    }
    if !(image > 0.0) {
        return Err(ExperimentError::DivisionUndefined);
    }
    Ok(ghost / image)
}

/// Largest field half-angle whose Image branch still reaches the retina,
/// probed with single chief rays through the first lens center, reported as
/// the full angle (2x). The probe is deterministic; `_seed` is accepted for
/// interface uniformity with the other experiments.
pub fn fov_limit(scene: &Scene, angle_step_deg: f64, _seed: u64) -> Result<f64, ExperimentError> {
    if !(angle_step_deg > 0.0) {
        return Err(ExperimentError::Invalid("angle_step > 0"));
    }
    let aim = probe_aim(scene);
    let src = &scene.source.frame;
    let axial_distance = (aim - src.origin).dot(src.n);
    if axial_distance <= 0.0 {
        return Err(ExperimentError::Invalid("probe aim ahead of the source plane"));
    }
    let surfaces = scene.trace_surfaces();
    let mut best: f64 = 0.0;
    let mut k = 1usize;
    loop {
        let alpha = angle_step_deg * k as f64;
        if alpha >= 90.0 {
            break;
        }
        let probe_point = src.point_at(-axial_distance * alpha.to_radians().tan(), 0.0);
        let ray = Ray::new(probe_point, (aim - probe_point).normalized(), 1.0);
        let mut admitted = false;
        crate::tracer::trace_branches(&surfaces, ray, &scene.params, &mut |hit| {
            admitted |= hit.class == RayClass::ImagePath;
        });
        if admitted {
            best = alpha;
        }
        k += 1;
    }
    Ok(2.0 * best)
}

fn probe_aim(scene: &Scene) -> crate::geometry::Vec3 {
    for e in &scene.elements {
        if let Surface::Lens(lens) = &e.surface {
            return lens.frame.origin;
        }
    }
    scene.eye.stack().lens.frame.origin
}

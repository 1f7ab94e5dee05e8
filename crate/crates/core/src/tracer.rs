//! Non-sequential nearest-hit propagation with deterministic branching at
//! transfer plates, and the retina renderer built on top of it.
//!
//! Each emitted ray walks the scene by repeatedly intersecting every surface
//! plane and taking the nearest forward hit, so element order never has to be
//! declared. A plate replaces the ray with up to four weighted branches; the
//! branch tree is bounded by the weight cutoff and the event cap. A branch
//! terminates by absorption (retina), blocking (aperture or lens rim),
//! escaping past every surface, or hitting one of the two safety bounds.
//!
//! Rendering is deterministic for a fixed (scene, seed) pair regardless of
//! worker count: pixels are independent jobs whose results are merged in
//! pixel order, so the parallel and sequential paths produce bit-identical
//! maps.

use crate::elements::{
    aperture_pass, lens_refract, plate_transfer, sample_pixel_rays, screen_contains, CircularAperture,
    PlateMode, Screen, SourceGrid, TargetDisk, ThinLens, TransferPlate,
};
use crate::eye::EyeModel;
use crate::geometry::{intersect_plane, PlaneFrame, Ray, Vec3};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    Lens(ThinLens),
    Aperture(CircularAperture),
    Plate(TransferPlate),
    Screen(Screen),
}

impl Surface {
    pub fn frame(&self) -> &PlaneFrame {
        match self {
            Surface::Lens(l) => &l.frame,
            Surface::Aperture(a) => &a.frame,
            Surface::Plate(p) => &p.frame,
            Surface::Screen(s) => &s.frame,
        }
    }
}

/// A scene element as declared in a scene file: lens, aperture, or plate.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneElement {
    pub id: String,
    pub surface: Surface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSurface {
    pub id: String,
    pub surface: Surface,
}

/// Knobs that bound a render: coverage threshold, branch-tree safety caps.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderParams {
    /// A source pixel counts as covered when its delivered weight exceeds
    /// this fraction of its emitted weight.
    pub tau_cov: f64,
    pub max_events: usize,
    pub weight_cutoff: f64,
}

impl Default for RenderParams {
    fn default() -> RenderParams {
        RenderParams { tau_cov: 1e-4, max_events: 16, weight_cutoff: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub source: SourceGrid,
    pub elements: Vec<SceneElement>,
    pub eye: EyeModel,
    pub params: RenderParams,
}

impl Scene {
    /// The disk source pixels aim at: the first lens aperture in the scene,
    /// or the eye lens when the scene has no other lens.
    pub fn target_disk(&self) -> TargetDisk {
        for e in &self.elements {
            if let Surface::Lens(lens) = &e.surface {
                return TargetDisk { frame: lens.frame, radius: lens.diameter / 2.0 };
            }
        }
        let lens = self.eye.stack().lens;
        TargetDisk { frame: lens.frame, radius: lens.diameter / 2.0 }
    }

    pub fn has_plates(&self) -> bool {
        self.elements.iter().any(|e| matches!(e.surface, Surface::Plate(_)))
    }

    /// The class filter metrics use to isolate the intended image light:
    /// ImageOnly when a plate forms the image, All for a plateless direct
    /// view (where everything is DirectPath and ImageOnly would be empty).
    pub fn image_class_filter(&self) -> ClassFilter {
        if self.has_plates() {
            ClassFilter::ImageOnly
        } else {
            ClassFilter::All
        }
    }

    /// Every surface a ray can meet: declared elements plus the eye stack.
    pub fn trace_surfaces(&self) -> Vec<TraceSurface> {
        let mut out: Vec<TraceSurface> = self
            .elements
            .iter()
            .map(|e| TraceSurface { id: e.id.clone(), surface: e.surface.clone() })
            .collect();
        let stack = self.eye.stack();
        out.push(TraceSurface { id: "eye:pupil".into(), surface: Surface::Aperture(stack.pupil) });
        out.push(TraceSurface { id: "eye:lens".into(), surface: Surface::Lens(stack.lens) });
        out.push(TraceSurface { id: "eye:retina".into(), surface: Surface::Screen(stack.retina) });
        out
    }

    pub fn with_pupil_offset(&self, offset: (f64, f64)) -> Scene {
        Scene { eye: self.eye.with_pupil_offset(offset), ..self.clone() }
    }

    pub fn with_eye_focal_length(&self, f: f64) -> Scene {
        Scene { eye: self.eye.with_focal_length(f), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayClass {
    ImagePath,
    GhostPath,
    DirectPath,
}

fn classify(took_image: bool, took_ghost: bool) -> RayClass {
    if took_ghost {
        RayClass::GhostPath
    } else if took_image {
        RayClass::ImagePath
    } else {
        RayClass::DirectPath
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassFilter {
    All,
    ImageOnly,
    GhostOnly,
}

impl ClassFilter {
    pub fn admits(self, class: RayClass) -> bool {
        match self {
            ClassFilter::All => true,
            ClassFilter::ImageOnly => class == RayClass::ImagePath,
            ClassFilter::GhostOnly => class == RayClass::GhostPath,
        }
    }
}

/// One weighted arrival on the retina screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetinaHit {
    pub u: f64,
    pub v: f64,
    pub weight: f64,
    pub class: RayClass,
}

#[derive(Debug, Clone, Copy)]
struct BranchState {
    ray: Ray,
    took_image: bool,
    took_ghost: bool,
    events: usize,
}

/// Finds the nearest forward surface hit. Screens only intercept inside
/// their bounded region; a ray crossing a screen plane outside the bounds
/// keeps going. Ties cannot arise between distinct planes because every
/// surface pair is separated by more than the advance epsilon.
fn nearest_hit(surfaces: &[TraceSurface], ray: &Ray) -> Option<(usize, Vec3)> {
    let mut best: Option<(f64, usize, Vec3)> = None;
    for (i, s) in surfaces.iter().enumerate() {
        let Some(hit) = intersect_plane(ray, s.surface.frame()) else { continue };
        if let Surface::Screen(sc) = &s.surface {
            if screen_contains(sc, hit.point).is_none() {
                continue;
            }
        }
        if best.is_none_or(|(t, _, _)| hit.t < t) {
            best = Some((hit.t, i, hit.point));
        }
    }
    best.map(|(_, i, p)| (i, p))
}

/// Fast traversal: walks the branch tree and feeds retina arrivals to the
/// sink in a deterministic order (depth-first, Image branch first).
pub fn trace_branches<F: FnMut(RetinaHit)>(
    surfaces: &[TraceSurface],
    ray: Ray,
    params: &RenderParams,
    sink: &mut F,
) {
    let mut stack = vec![BranchState { ray, took_image: false, took_ghost: false, events: 0 }];
    while let Some(b) = stack.pop() {
        if b.ray.weight < params.weight_cutoff || b.events >= params.max_events {
            continue;
        }
        let Some((idx, point)) = nearest_hit(surfaces, &b.ray) else { continue };
        let events = b.events + 1;
        match &surfaces[idx].surface {
            Surface::Lens(lens) => {
                if let Some(out) = lens_refract(&b.ray, lens, point) {
                    stack.push(BranchState { ray: out, events, ..b });
                }
            }
            Surface::Aperture(ap) => {
                if aperture_pass(point, ap) {
                    stack.push(BranchState { ray: Ray { origin: point, ..b.ray }, events, ..b });
                }
            }
            Surface::Plate(plate) => {
                // Reverse push order so Image pops first.
                for mode in PlateMode::ALL.iter().rev() {
                    let Some(out) = plate_transfer(&b.ray, plate, point, *mode) else { continue };
                    stack.push(BranchState {
                        ray: out,
                        took_image: b.took_image || *mode == PlateMode::Image,
                        took_ghost: b.took_ghost || mode.is_ghost(),
                        events,
                    });
                }
            }
            Surface::Screen(sc) => {
                let (u, v) = screen_contains(sc, point).expect("nearest_hit checked bounds");
                sink(RetinaHit { u, v, weight: b.ray.weight, class: classify(b.took_image, b.took_ghost) });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAction {
    Refract,
    Pass,
    Transfer(PlateMode),
    Absorb,
    Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub surface_id: String,
    pub point: Vec3,
    pub action: TraceAction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchEnd {
    Retina { u: f64, v: f64 },
    Blocked,
    Escaped,
    ExhaustedEvents,
    BelowCutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    pub end: BranchEnd,
    pub weight: f64,
    pub class: RayClass,
    pub events: Vec<TraceEvent>,
    pub path_length: f64,
}

/// Diagnostic traversal: identical branching to `trace_branches`, but every
/// branch returns its full event log and terminal state. Meant for oracle
/// tests and debugging single rays, not bulk rendering.
pub fn trace_ray(surfaces: &[TraceSurface], ray: Ray, params: &RenderParams) -> Vec<BranchOutcome> {
    struct DiagBranch {
        state: BranchState,
        events: Vec<TraceEvent>,
        path_length: f64,
    }
    let mut outcomes = Vec::new();
    let mut stack = vec![DiagBranch {
        state: BranchState { ray, took_image: false, took_ghost: false, events: 0 },
        events: Vec::new(),
        path_length: 0.0,
    }];
    while let Some(mut b) = stack.pop() {
        let finish = |end, b: DiagBranch, outcomes: &mut Vec<BranchOutcome>| {
            outcomes.push(BranchOutcome {
                end,
                weight: b.state.ray.weight,
                class: classify(b.state.took_image, b.state.took_ghost),
                events: b.events,
                path_length: b.path_length,
            });
        };
        if b.state.ray.weight < params.weight_cutoff {
            finish(BranchEnd::BelowCutoff, b, &mut outcomes);
            continue;
        }
        if b.state.events >= params.max_events {
            finish(BranchEnd::ExhaustedEvents, b, &mut outcomes);
            continue;
        }
        let Some((idx, point)) = nearest_hit(surfaces, &b.state.ray) else {
            finish(BranchEnd::Escaped, b, &mut outcomes);
            continue;
        };
        b.path_length += (point - b.state.ray.origin).norm();
        let id = surfaces[idx].id.clone();
        let events = b.state.events + 1;
        match &surfaces[idx].surface {
            Surface::Lens(lens) => match lens_refract(&b.state.ray, lens, point) {
                Some(out) => {
                    b.events.push(TraceEvent { surface_id: id, point, action: TraceAction::Refract });
                    b.state = BranchState { ray: out, events, ..b.state };
                    stack.push(b);
                }
                None => {
                    b.events.push(TraceEvent { surface_id: id, point, action: TraceAction::Block });
                    finish(BranchEnd::Blocked, b, &mut outcomes);
                }
            },
            Surface::Aperture(ap) => {
                if aperture_pass(point, ap) {
                    b.events.push(TraceEvent { surface_id: id, point, action: TraceAction::Pass });
                    b.state = BranchState { ray: Ray { origin: point, ..b.state.ray }, events, ..b.state };
                    stack.push(b);
                } else {
                    b.events.push(TraceEvent { surface_id: id, point, action: TraceAction::Block });
                    finish(BranchEnd::Blocked, b, &mut outcomes);
                }
            }
            Surface::Plate(plate) => {
                for mode in PlateMode::ALL.iter().rev() {
                    let Some(out) = plate_transfer(&b.state.ray, plate, point, *mode) else { continue };
                    let mut events_log = b.events.clone();
                    events_log.push(TraceEvent {
                        surface_id: id.clone(),
                        point,
                        action: TraceAction::Transfer(*mode),
                    });
                    stack.push(DiagBranch {
                        state: BranchState {
                            ray: out,
                            took_image: b.state.took_image || *mode == PlateMode::Image,
                            took_ghost: b.state.took_ghost || mode.is_ghost(),
                            events,
                        },
                        events: events_log,
                        path_length: b.path_length,
                    });
                }
            }
            Surface::Screen(sc) => {
                let (u, v) = screen_contains(sc, point).expect("nearest_hit checked bounds");
                b.events.push(TraceEvent { surface_id: id, point, action: TraceAction::Absorb });
                finish(BranchEnd::Retina { u, v }, b, &mut outcomes);
            }
        }
    }
    outcomes
}

/// Binned retina irradiance. `data` is stored row-major with the top row
/// first (row 0 holds the +v edge), matching the order the PGM writer emits.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceMap {
    pub bins_u: usize,
    pub bins_v: usize,
    pub half_width_u: f64,
    pub half_width_v: f64,
    pub data: Vec<f64>,
}

impl IrradianceMap {
    pub fn empty(screen: &Screen) -> IrradianceMap {
        IrradianceMap {
            bins_u: screen.bins_u,
            bins_v: screen.bins_v,
            half_width_u: screen.half_width_u,
            half_width_v: screen.half_width_v,
            data: vec![0.0; screen.bins_u * screen.bins_v],
        }
    }

    /// Flat index of the bin containing (u, v). Hits exactly on the +edge
    /// fold into the last bin so the closed screen bounds lose nothing.
    pub fn bin_index(&self, u: f64, v: f64) -> usize {
        let col = bin_of(u, self.half_width_u, self.bins_u);
        let row_up = bin_of(v, self.half_width_v, self.bins_v);
        (self.bins_v - 1 - row_up) * self.bins_u + col
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_bin(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

fn bin_of(x: f64, half_width: f64, bins: usize) -> usize {
    let t = (x + half_width) / (2.0 * half_width);
    ((t * bins as f64) as usize).min(bins - 1)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("render needs at least one pixel and one sample per pixel")]
    ZeroRays,
}

/// A finished render: the binned map plus per-source-pixel tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub map: IrradianceMap,
    /// Weight delivered to the retina per source pixel, admitted classes only.
    pub per_pixel_delivered: Vec<f64>,
    pub per_pixel_emitted: Vec<f64>,
    pub emitted_total: f64,
    pub retina_total: f64,
}

struct PixelContrib {
    emitted: f64,
    delivered: f64,
    bins: Vec<(usize, f64)>,
}

fn pixel_contrib(
    scene: &Scene,
    surfaces: &[TraceSurface],
    target: &TargetDisk,
    map: &IrradianceMap,
    seed: u64,
    pixel: usize,
    filter: ClassFilter,
) -> PixelContrib {
    let mut contrib = PixelContrib { emitted: 0.0, delivered: 0.0, bins: Vec::new() };
    for ray in sample_pixel_rays(&scene.source, target, seed, pixel) {
        contrib.emitted += ray.weight;
        trace_branches(surfaces, ray, &scene.params, &mut |hit| {
            if filter.admits(hit.class) {
                contrib.delivered += hit.weight;
                contrib.bins.push((map.bin_index(hit.u, hit.v), hit.weight));
            }
        });
    }
    contrib
}

fn assemble(scene: &Scene, contribs: Vec<PixelContrib>) -> RenderOutput {
    let mut map = IrradianceMap::empty(&scene.eye.stack().retina);
    let mut per_pixel_delivered = Vec::with_capacity(contribs.len());
    let mut per_pixel_emitted = Vec::with_capacity(contribs.len());
    let mut emitted_total = 0.0;
    let mut retina_total = 0.0;
    for c in contribs {
        for (bin, w) in &c.bins {
            map.data[*bin] += w;
        }
        per_pixel_delivered.push(c.delivered);
        per_pixel_emitted.push(c.emitted);
        emitted_total += c.emitted;
        retina_total += c.delivered;
    }
    RenderOutput { map, per_pixel_delivered, per_pixel_emitted, emitted_total, retina_total }
}

fn check_nonempty(scene: &Scene) -> Result<(), RenderError> {
    if scene.source.pixel_count() == 0 || scene.source.samples_per_pixel == 0 {
        return Err(RenderError::ZeroRays);
    }
    Ok(())
}

/// Sequential render; always available and bit-identical to the parallel path.
pub fn render_retina_seq(scene: &Scene, seed: u64, filter: ClassFilter) -> Result<RenderOutput, RenderError> {
    check_nonempty(scene)?;
    let surfaces = scene.trace_surfaces();
    let target = scene.target_disk();
    let map = IrradianceMap::empty(&scene.eye.stack().retina);
    let contribs = (0..scene.source.pixel_count())
        .map(|p| pixel_contrib(scene, &surfaces, &target, &map, seed, p, filter))
        .collect();
    Ok(assemble(scene, contribs))
}

/// Parallel render: pixels fan out across the rayon pool and results are
/// merged in pixel order, so the output is bit-identical to the sequential
/// path for any worker count.
#[cfg(feature = "parallel")]
pub fn render_retina_par(scene: &Scene, seed: u64, filter: ClassFilter) -> Result<RenderOutput, RenderError> {
    use rayon::prelude::*;
    check_nonempty(scene)?;
    let surfaces = scene.trace_surfaces();
    let target = scene.target_disk();
    let map = IrradianceMap::empty(&scene.eye.stack().retina);
    let contribs = (0..scene.source.pixel_count())
        .into_par_iter()
        .map(|p| pixel_contrib(scene, &surfaces, &target, &map, seed, p, filter))
        .collect();
    Ok(assemble(scene, contribs))
}

/// Renders with the parallel path when the `parallel` feature is enabled,
/// the sequential path otherwise. Results are identical either way.
pub fn render_retina(scene: &Scene, seed: u64, filter: ClassFilter) -> Result<RenderOutput, RenderError> {
    #[cfg(feature = "parallel")]
    {
        render_retina_par(scene, seed, filter)
    }
    #[cfg(not(feature = "parallel"))]
    {
        render_retina_seq(scene, seed, filter)
    }
}

/// Per-pixel retina arrivals for spot metrics, filtered by class. Same
/// deterministic pixel decomposition as the renderer.
pub fn collect_retina_hits(scene: &Scene, seed: u64, filter: ClassFilter) -> Result<Vec<Vec<RetinaHit>>, RenderError> {
    check_nonempty(scene)?;
    let surfaces = scene.trace_surfaces();
    let target = scene.target_disk();
    let run = |p: usize| {
        let mut hits = Vec::new();
        for ray in sample_pixel_rays(&scene.source, &target, seed, p) {
            trace_branches(&surfaces, ray, &scene.params, &mut |hit| {
                if filter.admits(hit.class) {
                    hits.push(hit);
                }
            });
        }
        hits
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok((0..scene.source.pixel_count()).into_par_iter().map(run).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..scene.source.pixel_count()).map(run).collect())
    }
}

//! Line-oriented scene description format.
//!
//! A scene is a sequence of sections. A section opens with `[kind z=...]`
//! (`[render]` takes no position) and continues with `key = value` lines;
//! `#` starts a comment anywhere, blank lines are ignored. Kinds: projector,
//! lens, aperture, plate, eye, render. Exactly one projector and one eye;
//! unknown kinds and keys are errors, never silently skipped. All lengths
//! are millimeters and all angles degrees.
//!
//! `print_scene` is the canonical inverse: every key explicit, elements in
//! axial order, floats in shortest round-trip form, so
//! `parse_scene(print_scene(s)) == s` bit-for-bit for any representable
//! scene (axial frames plus plate tilt; arbitrary rotations have no file
//! syntax).

use crate::elements::{CircularAperture, SourceGrid, ThinLens, TransferPlate};
use crate::eye::EyeModel;
use crate::geometry::PlaneFrame;
use crate::tracer::{RenderParams, Scene, SceneElement, Surface};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line the problem was found on.
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn load(path: &std::path::Path) -> Result<Scene, LoadError> {
    Ok(parse_scene(&std::fs::read_to_string(path)?)?)
}

fn err<T>(line: usize, reason: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, reason: reason.into() })
}

const KINDS: [&str; 6] = ["projector", "lens", "aperture", "plate", "eye", "render"];

struct RawSection {
    kind: String,
    header_line: usize,
    z: Option<f64>,
    values: Vec<(String, f64, usize)>,
}

#[derive(Clone, Copy)]
enum Check {
    Positive,
    NonNegative,
    IntAtLeast1,
    ThetaWindow,
    Tilt,
    Any,
}

impl Check {
    fn run(self, name: &str, v: f64) -> Option<String> {
        match self {
            Check::Positive if !(v > 0.0) => Some(format!("invariant: {name} > 0")),
            Check::NonNegative if !(v >= 0.0) => Some(format!("invariant: {name} >= 0")),
            Check::IntAtLeast1 if !(v >= 1.0 && v.fract() == 0.0) => {
                Some(format!("invariant: {name} is a positive integer"))
            }
            Check::ThetaWindow if !(v > 0.0 && v <= 90.0) => {
                Some("invariant: 0 < theta_max <= 90".to_string())
            }
            Check::Tilt if !(v.abs() < 90.0) => Some("invariant: |tilt_deg| < 90".to_string()),
            _ => None,
        }
    }
}

struct KeySpec {
    name: &'static str,
    default: Option<f64>,
    check: Check,
}

const fn key(name: &'static str, default: Option<f64>, check: Check) -> KeySpec {
    KeySpec { name, default, check }
}

const PROJECTOR_KEYS: &[KeySpec] = &[
    key("pixels_u", None, Check::IntAtLeast1),
    key("pixels_v", None, Check::IntAtLeast1),
    key("pitch", None, Check::Positive),
    key("samples_per_pixel", None, Check::IntAtLeast1),
    key("center_u", Some(0.0), Check::Any),
    key("center_v", Some(0.0), Check::Any),
];

const LENS_KEYS: &[KeySpec] = &[
    key("focal_length", None, Check::Positive),
    key("diameter", None, Check::Positive),
];

const APERTURE_KEYS: &[KeySpec] = &[
    key("radius", None, Check::Positive),
    key("offset_u", Some(0.0), Check::Any),
    key("offset_v", Some(0.0), Check::Any),
];

const PLATE_KEYS: &[KeySpec] = &[
    key("eff_image", Some(0.5), Check::NonNegative),
    key("eff_ghost_u", Some(0.15), Check::NonNegative),
    key("eff_ghost_v", Some(0.15), Check::NonNegative),
    key("eff_direct", Some(0.1), Check::NonNegative),
    key("theta_max", Some(45.0), Check::ThetaWindow),
    key("tilt_deg", Some(0.0), Check::Tilt),
];

const EYE_KEYS: &[KeySpec] = &[
    key("focal_length", None, Check::Positive),
    key("pupil_radius", Some(2.0), Check::Positive),
    key("pupil_offset_u", Some(0.0), Check::Any),
    key("pupil_offset_v", Some(0.0), Check::Any),
    key("pupil_to_lens_gap", Some(0.0), Check::NonNegative),
    key("lens_diameter", Some(6.0), Check::Positive),
    key("retina_distance", Some(17.0), Check::Positive),
    key("retina_half_width_u", Some(10.0), Check::Positive),
    key("retina_half_width_v", Some(10.0), Check::Positive),
    key("retina_bins_u", Some(128.0), Check::IntAtLeast1),
    key("retina_bins_v", Some(128.0), Check::IntAtLeast1),
];

const RENDER_KEYS: &[KeySpec] = &[
    key("tau_cov", Some(1e-4), Check::NonNegative),
    key("max_events", Some(16.0), Check::IntAtLeast1),
    key("weight_cutoff", Some(0.000001), Check::NonNegative),
];

fn keys_for(kind: &str) -> &'static [KeySpec] {
    match kind {
        "projector" => PROJECTOR_KEYS,
        "lens" => LENS_KEYS,
        "aperture" => APERTURE_KEYS,
        "plate" => PLATE_KEYS,
        "eye" => EYE_KEYS,
        "render" => RENDER_KEYS,
        _ => unreachable!("kind validated at header parse"),
    }
}

fn parse_number(text: &str, name: &str, line: usize) -> Result<f64, ParseError> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(line, format!("invalid number for `{name}`")),
    }
}

fn split_sections(text: &str) -> Result<Vec<RawSection>, ParseError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(inner) = inner.strip_suffix(']') else {
                return err(line_no, "malformed section header");
            };
            let mut parts = inner.split_whitespace();
            let Some(kind) = parts.next() else {
                return err(line_no, "malformed section header");
            };
            if !KINDS.contains(&kind) {
                return err(line_no, format!("unknown section kind `{kind}`"));
            }
            let mut z = None;
            for attr in parts {
                let Some((k, v)) = attr.split_once('=') else {
                    return err(line_no, "malformed section header");
                };
                if k != "z" || kind == "render" {
                    return err(line_no, format!("unknown header key `{k}` in [{kind}]"));
                }
                if z.is_some() {
                    return err(line_no, "duplicate key `z`");
                }
                z = Some(parse_number(v, "z", line_no)?);
            }
            if kind != "render" && z.is_none() {
                return err(line_no, format!("missing z in [{kind}] header"));
            }
            sections.push(RawSection { kind: kind.to_string(), header_line: line_no, z, values: Vec::new() });
        } else if let Some((k, v)) = line.split_once('=') {
            let name = k.trim();
            if name.is_empty() {
                return err(line_no, "malformed line (expected `key = value`)");
            }
            let Some(section) = sections.last_mut() else {
                return err(line_no, format!("key `{name}` outside any section"));
            };
            if section.values.iter().any(|(existing, _, _)| existing == name) {
                return err(line_no, format!("duplicate key `{name}`"));
            }
            let value = parse_number(v.trim(), name, line_no)?;
            section.values.push((name.to_string(), value, line_no));
        } else {
            return err(line_no, "malformed line (expected `key = value` or `[section]`)");
        }
    }
    Ok(sections)
}

/// Resolved key set for one section: every declared key validated, defaults
/// filled, required keys enforced.
fn resolve(section: &RawSection) -> Result<Vec<(&'static str, f64)>, ParseError> {
    let specs = keys_for(&section.kind);
    for (name, value, line) in &section.values {
        let Some(spec) = specs.iter().find(|s| s.name == name) else {
            return err(*line, format!("unknown key `{name}` in [{}]", section.kind));
        };
        if let Some(reason) = spec.check.run(name, *value) {
            return err(*line, reason);
        }
    }
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        match section.values.iter().find(|(n, _, _)| n == spec.name) {
            Some((_, v, _)) => out.push((spec.name, *v)),
            None => match spec.default {
                Some(d) => out.push((spec.name, d)),
                None => {
                    return err(
                        section.header_line,
                        format!("missing key `{}` in [{}]", spec.name, section.kind),
                    )
                }
            },
        }
    }
    Ok(out)
}

fn get(values: &[(&'static str, f64)], name: &str) -> f64 {
    values.iter().find(|(n, _)| *n == name).expect("resolved key").1
}

pub fn parse_scene(text: &str) -> Result<Scene, ParseError> {
    let sections = split_sections(text)?;
    let last_line = text.lines().count().max(1);

    let mut projector: Option<SourceGrid> = None;
    let mut eye: Option<EyeModel> = None;
    let mut params: Option<RenderParams> = None;
    // (z, declaration order, surface)
    let mut elements: Vec<(f64, usize, Surface)> = Vec::new();

    for (order, section) in sections.iter().enumerate() {
        let v = resolve(section)?;
        let z = section.z.unwrap_or(0.0);
        match section.kind.as_str() {
            "projector" => {
                if projector.is_some() {
                    return err(section.header_line, "duplicate projector");
                }
                projector = Some(SourceGrid {
                    frame: PlaneFrame::axial(z),
                    pixels_u: get(&v, "pixels_u") as usize,
                    pixels_v: get(&v, "pixels_v") as usize,
                    pitch: get(&v, "pitch"),
                    center: (get(&v, "center_u"), get(&v, "center_v")),
                    samples_per_pixel: get(&v, "samples_per_pixel") as usize,
                });
            }
            "lens" => elements.push((
                z,
                order,
                Surface::Lens(ThinLens {
                    frame: PlaneFrame::axial(z),
                    focal_length: get(&v, "focal_length"),
                    diameter: get(&v, "diameter"),
                }),
            )),
            "aperture" => elements.push((
                z,
                order,
                Surface::Aperture(CircularAperture {
                    frame: PlaneFrame::axial(z),
                    radius: get(&v, "radius"),
                    center_offset: (get(&v, "offset_u"), get(&v, "offset_v")),
                }),
            )),
            "plate" => {
                let sum = get(&v, "eff_image")
                    + get(&v, "eff_ghost_u")
                    + get(&v, "eff_ghost_v")
                    + get(&v, "eff_direct");
                if sum > 1.0 + 1e-12 {
                    return err(section.header_line, "invariant: efficiencies sum <= 1");
                }
                let tilt_deg = get(&v, "tilt_deg");
                elements.push((
                    z,
                    order,
                    Surface::Plate(TransferPlate {
                        frame: PlaneFrame::axial_tilted(z, tilt_deg),
                        eff_image: get(&v, "eff_image"),
                        eff_ghost_u: get(&v, "eff_ghost_u"),
                        eff_ghost_v: get(&v, "eff_ghost_v"),
                        eff_direct: get(&v, "eff_direct"),
                        theta_max_deg: get(&v, "theta_max"),
                        tilt_deg,
                    }),
                ));
            }
            "eye" => {
                if eye.is_some() {
                    return err(section.header_line, "duplicate eye");
                }
                eye = Some(EyeModel {
                    frame: PlaneFrame::axial(z),
                    pupil_radius: get(&v, "pupil_radius"),
                    pupil_offset: (get(&v, "pupil_offset_u"), get(&v, "pupil_offset_v")),
                    pupil_to_lens_gap: get(&v, "pupil_to_lens_gap"),
                    lens_focal_length: get(&v, "focal_length"),
                    lens_diameter: get(&v, "lens_diameter"),
                    retina_distance: get(&v, "retina_distance"),
                    retina_half_width: (get(&v, "retina_half_width_u"), get(&v, "retina_half_width_v")),
                    retina_bins: (get(&v, "retina_bins_u") as usize, get(&v, "retina_bins_v") as usize),
                });
            }
            "render" => {
                if params.is_some() {
                    return err(section.header_line, "duplicate render");
                }
                params = Some(RenderParams {
                    tau_cov: get(&v, "tau_cov"),
                    max_events: get(&v, "max_events") as usize,
                    weight_cutoff: get(&v, "weight_cutoff"),
                });
            }
            _ => unreachable!(),
        }
    }

    let Some(source) = projector else {
        return err(last_line, "missing [projector] section");
    };
    let Some(eye) = eye else {
        return err(last_line, "missing [eye] section");
    };

    elements.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut counts = [0usize; 3];
    let elements = elements
        .into_iter()
        .map(|(_, _, surface)| {
            let (slot, kind) = match &surface {
                Surface::Lens(_) => (0, "lens"),
                Surface::Aperture(_) => (1, "aperture"),
                Surface::Plate(_) => (2, "plate"),
                Surface::Screen(_) => unreachable!("screens only exist inside the eye"),
            };
            counts[slot] += 1;
            SceneElement { id: format!("{kind}{}", counts[slot]), surface }
        })
        .collect();

    Ok(Scene { source, elements, eye, params: params.unwrap_or_default() })
}

/// Canonical serialization: every key explicit, one blank line between
/// sections, floats in shortest round-trip form.
pub fn print_scene(scene: &Scene) -> String {
    let mut out = String::new();
    let push = |out: &mut String, name: &str, value: f64| {
        out.push_str(&format!("{name} = {value}\n"));
    };
    let s = &scene.source;
    out.push_str(&format!("[projector z={}]\n", s.frame.origin.z));
    push(&mut out, "pixels_u", s.pixels_u as f64);
    push(&mut out, "pixels_v", s.pixels_v as f64);
    push(&mut out, "pitch", s.pitch);
    push(&mut out, "samples_per_pixel", s.samples_per_pixel as f64);
    push(&mut out, "center_u", s.center.0);
    push(&mut out, "center_v", s.center.1);

    for e in &scene.elements {
        out.push('\n');
        match &e.surface {
            Surface::Lens(l) => {
                out.push_str(&format!("[lens z={}]\n", l.frame.origin.z));
                push(&mut out, "focal_length", l.focal_length);
                push(&mut out, "diameter", l.diameter);
            }
            Surface::Aperture(a) => {
                out.push_str(&format!("[aperture z={}]\n", a.frame.origin.z));
                push(&mut out, "radius", a.radius);
                push(&mut out, "offset_u", a.center_offset.0);
                push(&mut out, "offset_v", a.center_offset.1);
            }
            Surface::Plate(p) => {
                out.push_str(&format!("[plate z={}]\n", p.frame.origin.z));
                push(&mut out, "eff_image", p.eff_image);
                push(&mut out, "eff_ghost_u", p.eff_ghost_u);
                push(&mut out, "eff_ghost_v", p.eff_ghost_v);
                push(&mut out, "eff_direct", p.eff_direct);
                push(&mut out, "theta_max", p.theta_max_deg);
                push(&mut out, "tilt_deg", p.tilt_deg);
            }
            Surface::Screen(_) => unreachable!("screens only exist inside the eye"),
        }
    }

    let e = &scene.eye;
    out.push_str(&format!("\n[eye z={}]\n", e.frame.origin.z));
    push(&mut out, "focal_length", e.lens_focal_length);
    push(&mut out, "pupil_radius", e.pupil_radius);
    push(&mut out, "pupil_offset_u", e.pupil_offset.0);
    push(&mut out, "pupil_offset_v", e.pupil_offset.1);
    push(&mut out, "pupil_to_lens_gap", e.pupil_to_lens_gap);
    push(&mut out, "lens_diameter", e.lens_diameter);
    push(&mut out, "retina_distance", e.retina_distance);
    push(&mut out, "retina_half_width_u", e.retina_half_width.0);
    push(&mut out, "retina_half_width_v", e.retina_half_width.1);
    push(&mut out, "retina_bins_u", e.retina_bins.0 as f64);
    push(&mut out, "retina_bins_v", e.retina_bins.1 as f64);

    let p = &scene.params;
    out.push_str("\n[render]\n");
    push(&mut out, "tau_cov", p.tau_cov);
    push(&mut out, "max_events", p.max_events as f64);
    push(&mut out, "weight_cutoff", p.weight_cutoff);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[projector z=0]
pixels_u = 2
pixels_v = 2
pitch = 0.5
samples_per_pixel = 16

[lens z=40]
focal_length = 32
diameter = 10

[eye z=380]
focal_length = 15
";

    #[test]
    fn minimal_scene_parses_with_defaults() {
        let scene = parse_scene(MINIMAL).unwrap();
        assert_eq!(scene.elements.len(), 1);
        assert_eq!(scene.elements[0].id, "lens1");
        assert_eq!(scene.eye.pupil_radius, 2.0);
        assert_eq!(scene.eye.retina_distance, 17.0);
        assert_eq!(scene.eye.retina_bins, (128, 128));
        assert_eq!(scene.params, RenderParams::default());
        assert_eq!(scene.source.center, (0.0, 0.0));
    }

    #[test]
    fn negative_radius_reports_invariant_at_its_line() {
        let text = "\
[projector z=0]
pixels_u = 1
pixels_v = 1
pitch = 1
samples_per_pixel = 1

[aperture z=10]
radius = -1

[eye z=380]
focal_length = 15
";
        let e = parse_scene(text).unwrap_err();
        assert_eq!(e.line, 8);
        assert_eq!(e.reason, "invariant: radius > 0");
    }

    #[test]
    fn duplicate_eye_is_rejected() {
        let text = format!("{MINIMAL}\n[eye z=400]\nfocal_length = 16\n");
        let e = parse_scene(&text).unwrap_err();
        assert_eq!(e.reason, "duplicate eye");
    }

    #[test]
    fn unknown_kind_and_key_are_rejected() {
        let e = parse_scene("[mirror z=1]\n").unwrap_err();
        assert_eq!((e.line, e.reason.as_str()), (1, "unknown section kind `mirror`"));
        let text = MINIMAL.replace("diameter = 10", "diametre = 10");
        let e = parse_scene(&text).unwrap_err();
        assert_eq!(e.reason, "unknown key `diametre` in [lens]");
    }

    #[test]
    fn malformed_input_reports_precise_lines() {
        let e = parse_scene("pitch = 1\n").unwrap_err();
        assert_eq!((e.line, e.reason.as_str()), (1, "key `pitch` outside any section"));
        let text = MINIMAL.replace("pitch = 0.5", "pitch = abc");
        assert_eq!(parse_scene(&text).unwrap_err().reason, "invalid number for `pitch`");
        let text = MINIMAL.replace("pitch = 0.5", "pitch = inf");
        assert_eq!(parse_scene(&text).unwrap_err().reason, "invalid number for `pitch`");
        let text = format!("{MINIMAL}[lens]\nfocal_length = 10\ndiameter = 5\n");
        assert_eq!(parse_scene(&text).unwrap_err().reason, "missing z in [lens] header");
        let text = MINIMAL.replace("[lens z=40]", "[lens z=40]\nfocal_length = 9");
        assert_eq!(parse_scene(&text).unwrap_err().reason, "duplicate key `focal_length`");
        let e = parse_scene("[render z=4]\n").unwrap_err();
        assert_eq!(e.reason, "unknown header key `z` in [render]");
    }

    #[test]
    fn missing_required_key_points_at_the_section_header() {
        let text = MINIMAL.replace("focal_length = 32\n", "");
        let e = parse_scene(&text).unwrap_err();
        assert_eq!(e.reason, "missing key `focal_length` in [lens]");
        assert_eq!(e.line, 7);
    }

    #[test]
    fn missing_sections_are_reported() {
        let e = parse_scene("[eye z=10]\nfocal_length = 15\n").unwrap_err();
        assert_eq!(e.reason, "missing [projector] section");
        let text: String = MINIMAL.lines().take(5).map(|l| format!("{l}\n")).collect();
        let e = parse_scene(&text).unwrap_err();
        assert_eq!(e.reason, "missing [eye] section");
    }

    #[test]
    fn plate_efficiency_budget_is_enforced() {
        let text = format!(
            "{MINIMAL}\n[plate z=100]\neff_image = 0.9\neff_direct = 0.3\n"
        );
        let e = parse_scene(&text).unwrap_err();
        assert_eq!(e.reason, "invariant: efficiencies sum <= 1");
    }

    #[test]
    fn elements_sort_by_axial_position_with_kind_counters() {
        let text = "\
[projector z=0]
pixels_u = 1
pixels_v = 1
pitch = 1
samples_per_pixel = 1

[plate z=210]

[lens z=40]
focal_length = 32
diameter = 10

[aperture z=100]
radius = 3

[eye z=380]
focal_length = 15
";
        let scene = parse_scene(text).unwrap();
        let ids: Vec<&str> = scene.elements.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["lens1", "aperture1", "plate1"]);
        let zs: Vec<f64> = scene
            .elements
            .iter()
            .map(|e| e.surface.frame().origin.z)
            .collect();
        assert_eq!(zs, [40.0, 100.0, 210.0]);
    }

    #[test]
    fn comments_and_spacing_are_ignored() {
        let text = "\
# reference layout
[projector z=0]   # the display grid
pixels_u = 1
pixels_v = 1
pitch = 1          # mm
samples_per_pixel = 1

[eye z=100]
focal_length = 15
";
        let scene = parse_scene(text).unwrap();
        assert_eq!(scene.source.pitch, 1.0);
    }

    #[test]
    fn canonical_form_round_trips() {
        let text = "\
[projector z=0]
pixels_u = 3
pixels_v = 2
pitch = 0.25
samples_per_pixel = 49
center_u = 2.5

[lens z=40]
focal_length = 32
diameter = 10

[aperture z=60]
radius = 4.5
offset_v = -0.125

[plate z=210]
eff_image = 0.6
eff_direct = 0.05
theta_max = 30
tilt_deg = 12.5

[eye z=380]
focal_length = 15.367231638418079
pupil_offset_u = 1.5

[render]
tau_cov = 0.035
";
        let scene = parse_scene(text).unwrap();
        let printed = print_scene(&scene);
        let reparsed = parse_scene(&printed).unwrap();
        assert_eq!(scene, reparsed);
        assert_eq!(printed, print_scene(&reparsed));
    }
}

//! Property tests for the scene format: canonical serialization is a
//! fixpoint of parsing, and unknown keys or section kinds never pass
//! silently.

use proptest::prelude::*;
use pupilray::elements::{CircularAperture, SourceGrid, ThinLens, TransferPlate};
use pupilray::eye::EyeModel;
use pupilray::geometry::PlaneFrame;
use pupilray::scene_file::{parse_scene, print_scene};
use pupilray::tracer::{RenderParams, Scene, SceneElement, Surface};

fn source_strategy() -> impl Strategy<Value = SourceGrid> {
    (
        -20.0..20.0f64,
        1usize..8,
        1usize..8,
        0.05..2.0f64,
        1usize..64,
        (-3.0..3.0f64, -3.0..3.0f64),
    )
        .prop_map(|(z, pu, pv, pitch, k, center)| SourceGrid {
            frame: PlaneFrame::axial(z),
            pixels_u: pu,
            pixels_v: pv,
            pitch,
            center,
            samples_per_pixel: k,
        })
}

fn surface_strategy() -> impl Strategy<Value = Surface> {
    let lens = (30.0..300.0f64, 5.0..100.0f64, 1.0..50.0f64).prop_map(|(z, f, d)| {
        Surface::Lens(ThinLens { frame: PlaneFrame::axial(z), focal_length: f, diameter: d })
    });
    let aperture = (30.0..300.0f64, 0.5..25.0f64, (-5.0..5.0f64, -5.0..5.0f64)).prop_map(
        |(z, r, off)| {
            Surface::Aperture(CircularAperture {
                frame: PlaneFrame::axial(z),
                radius: r,
                center_offset: off,
            })
        },
    );
    let plate = (
        30.0..300.0f64,
        [0.0..0.24f64, 0.0..0.24f64, 0.0..0.24f64, 0.0..0.24f64],
        10.0..90.0f64,
        -45.0..45.0f64,
    )
        .prop_map(|(z, e, theta, tilt)| {
            Surface::Plate(TransferPlate {
                frame: PlaneFrame::axial_tilted(z, tilt),
                eff_image: e[0],
                eff_ghost_u: e[1],
                eff_ghost_v: e[2],
                eff_direct: e[3],
                theta_max_deg: theta,
                tilt_deg: tilt,
            })
        });
    prop_oneof![lens, aperture, plate]
}

fn eye_strategy() -> impl Strategy<Value = EyeModel> {
    (
        320.0..500.0f64,
        5.0..30.0f64,
        0.5..5.0f64,
        (-3.0..3.0f64, -3.0..3.0f64),
        0.0..2.0f64,
        2.0..12.0f64,
        5.0..30.0f64,
        (2.0..25.0f64, 2.0..25.0f64),
        (1usize..256, 1usize..256),
    )
        .prop_map(|(z, f, pr, off, gap, ld, rd, hw, bins)| EyeModel {
            frame: PlaneFrame::axial(z),
            pupil_radius: pr,
            pupil_offset: off,
            pupil_to_lens_gap: gap,
            lens_focal_length: f,
            lens_diameter: ld,
            retina_distance: rd,
            retina_half_width: hw,
            retina_bins: bins,
        })
}

fn scene_strategy() -> impl Strategy<Value = Scene> {
    (
        source_strategy(),
        prop::collection::vec(surface_strategy(), 0..4),
        eye_strategy(),
        (0.0..0.1f64, 1usize..32, 0.0..1e-3f64),
    )
        .prop_map(|(source, surfaces, eye, (tau, events, cutoff))| Scene {
            source,
            elements: surfaces
                .into_iter()
                .map(|surface| SceneElement { id: "raw".to_string(), surface })
                .collect(),
            eye,
            params: RenderParams { tau_cov: tau, max_events: events, weight_cutoff: cutoff },
        })
}

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

// (header line index, keys the section accepts)
const SECTIONS: [(usize, &[&str]); 3] = [
    (0, &["pixels_u", "pixels_v", "pitch", "samples_per_pixel", "center_u", "center_v"]),
    (6, &["focal_length", "diameter"]),
    (
        10,
        &[
            "focal_length",
            "pupil_radius",
            "pupil_offset_u",
            "pupil_offset_v",
            "pupil_to_lens_gap",
            "lens_diameter",
            "retina_distance",
            "retina_half_width_u",
            "retina_half_width_v",
            "retina_bins_u",
            "retina_bins_v",
        ],
    ),
];

fn splice_after_line(text: &str, line_idx: usize, inserted: &str) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        out.push_str(line);
        out.push('\n');
        if i == line_idx {
            out.push_str(inserted);
            out.push('\n');
        }
    }
    out
}

proptest! {
    #[test]
    fn canonical_serialization_is_a_parse_fixpoint(scene in scene_strategy()) {
        // First pass normalizes element order and ids; after that the
        // round trip must be exact.
        let normalized = parse_scene(&print_scene(&scene)).expect("generated scenes are valid");
        let printed = print_scene(&normalized);
        let reparsed = parse_scene(&printed).expect("canonical text parses");
        prop_assert_eq!(&reparsed, &normalized);
        prop_assert_eq!(print_scene(&reparsed), printed);
    }

    #[test]
    fn unknown_keys_never_pass_silently(
        key in "[a-z][a-z0-9_]{0,11}",
        value in -1e3..1e3f64,
        section in 0usize..3,
    ) {
        let (line, known) = SECTIONS[section];
        prop_assume!(!known.contains(&key.as_str()));
        let text = splice_after_line(MINIMAL, line, &format!("{key} = {value}"));
        prop_assert!(parse_scene(&text).is_err());
    }

    #[test]
    fn unknown_section_kinds_never_pass_silently(kind in "[a-z]{3,10}") {
        prop_assume!(!["projector", "lens", "aperture", "plate", "eye", "render"]
            .contains(&kind.as_str()));
        let text = format!("{MINIMAL}\n[{kind} z=50]\n");
        prop_assert!(parse_scene(&text).is_err());
    }
}

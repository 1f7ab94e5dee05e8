//! Geometric-optics simulator for a pupil-plane retinal projection layout:
//! a projector grid relays through a lens and a plane-symmetric transfer
//! plate, forms an aerial image mid-air, and lands on the retina of a
//! reduced eye model. Rays split deterministically at the plate into the
//! mirrored image branch, two single-axis ghost branches, and the
//! unredirected direct branch, each carrying an efficiency-weighted share
//! of the parent's power.
//!
//! The crate's experiments quantify what the layout is supposed to buy:
//! field coverage that survives pupil translation, an eyebox as wide as the
//! final lens aperture, ghost branches that miss a realistic iris, reduced
//! sensitivity to eye focus error, and a viewing-angle ceiling set by the
//! plate's acceptance window.
//!
//! Rendering is deterministic for a given scene and seed, independent of
//! worker count: per-pixel sample streams are seeded individually and
//! partial results merge in pixel order. The `parallel` feature (default)
//! distributes pixels over a rayon pool; without it the same code path runs
//! sequentially and produces bit-identical output.

// `!(v > 0.0)` guards reject NaN along with nonpositive values; the
// un-negated forms clippy suggests would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elements;
pub mod experiments;
pub mod eye;
pub mod geometry;
pub mod output;
pub mod scene_file;
pub mod tracer;

pub use experiments::{
    eyebox_scan, field_coverage, focus_response, focus_sweep, fov_limit, ghost_ratio, rms_spot,
    EyeboxScan, ExperimentError, FocusSweep, ScanResult,
};
pub use geometry::{PlaneFrame, Ray, Vec3};
pub use scene_file::{load, parse_scene, print_scene, LoadError, ParseError};
pub use tracer::{
    render_retina, trace_branches, trace_ray, ClassFilter, IrradianceMap, RayClass, RenderError,
    RenderOutput, RenderParams, Scene,
};

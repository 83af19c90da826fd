//! Scripted synthetic activities for desk-scale experiments.
//!
//! A class script is a list of keyframes in body coordinates (torso at the
//! origin, y down, pixels for a unit-scale subject). Each keyframe moves some
//! joints and objects to new positions; anything not mentioned keeps its
//! previous position. Positions ramp linearly into a keyframe and are then
//! held. Subjects add a scale, a pixel offset and Gaussian jitter.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FrameSnapshot, Joint, Point2D, Rect};

/// Image position of the torso for an unshifted subject.
pub const ORIGIN: Point2D = Point2D::new(320.0, 240.0);

/// Standing pose in body coordinates: hip width 40, neck to torso 60.
pub fn rest_pose() -> BTreeMap<Joint, [f64; 2]> {
    use Joint::*;
    BTreeMap::from([
        (Head, [0.0, -90.0]),
        (Neck, [0.0, -60.0]),
        (Torso, [0.0, 0.0]),
        (LeftShoulder, [-25.0, -55.0]),
        (RightShoulder, [25.0, -55.0]),
        (LeftElbow, [-30.0, -25.0]),
        (RightElbow, [30.0, -25.0]),
        (LeftHand, [-32.0, 5.0]),
        (RightHand, [32.0, 5.0]),
        (LeftHip, [-20.0, 30.0]),
        (RightHip, [20.0, 30.0]),
        (LeftKnee, [-20.0, 80.0]),
        (RightKnee, [20.0, 80.0]),
        (LeftFoot, [-20.0, 130.0]),
        (RightFoot, [20.0, 130.0]),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    /// Frames spent moving from the previous keyframe; ignored for the first.
    #[serde(default)]
    pub ramp: usize,
    /// Frames the pose is held once reached.
    pub hold: usize,
    #[serde(default)]
    pub joints: BTreeMap<Joint, [f64; 2]>,
    /// Object centers.
    #[serde(default)]
    pub objects: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScript {
    pub name: String,
    /// Initial object boxes as `[cx, cy, w, h]` in body coordinates.
    #[serde(default)]
    pub objects: BTreeMap<String, [f64; 4]>,
    pub keyframes: Vec<Keyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectStyle {
    pub id: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: [f64; 2],
    /// Standard deviation of per-frame positional noise, pixels.
    #[serde(default)]
    pub jitter: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<ClassScript>,
    pub subjects: Vec<SubjectStyle>,
    #[serde(default = "one_usize")]
    pub repetitions: usize,
    /// Each ramp and hold is stretched by a factor drawn from
    /// `[1 - time_warp, 1 + time_warp]`.
    #[serde(default)]
    pub time_warp: f64,
}

fn one_usize() -> usize {
    1
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Synth("need at least two activity classes".into()));
        }
        if self.subjects.is_empty() || self.repetitions == 0 {
            return Err(Error::Synth("need at least one subject and one repetition".into()));
        }
        if !(0.0..1.0).contains(&self.time_warp) {
            return Err(Error::Synth("time_warp must lie in [0, 1)".into()));
        }
        let mut names: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.classes.len() {
            return Err(Error::Synth("duplicate class name".into()));
        }
        let mut ids: Vec<&str> = self.subjects.iter().map(|s| s.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.subjects.len() {
            return Err(Error::Synth("duplicate subject id".into()));
        }
        for s in &self.subjects {
            if !(s.scale > 0.0 && s.scale.is_finite()) || !(s.jitter >= 0.0 && s.jitter.is_finite()) {
                return Err(Error::Synth(format!("subject {}: bad scale or jitter", s.id)));
            }
        }
        for c in &self.classes {
            let frames: usize = c
                .keyframes
                .iter()
                .enumerate()
                .map(|(i, k)| k.hold + if i > 0 { k.ramp } else { 0 })
                .sum();
            if frames < 2 {
                return Err(Error::Synth(format!("class {} scripts fewer than 2 frames", c.name)));
            }
            for (id, b) in &c.objects {
                if !(b[2] > 0.0 && b[3] > 0.0) {
                    return Err(Error::Synth(format!("class {}: object {id} needs a positive size", c.name)));
                }
            }
            for k in &c.keyframes {
                if let Some(j) = k.joints.keys().find(|j| j.is_derived()) {
                    return Err(Error::Synth(format!("class {}: {j} is derived, move the hips", c.name)));
                }
                if let Some(o) = k.objects.keys().find(|o| !c.objects.contains_key(*o)) {
                    return Err(Error::Synth(format!("class {}: undeclared object {o}", c.name)));
                }
            }
        }
        Ok(())
    }

    /// Four-class benchmark with a shared cup and box.
    pub fn benchmark() -> Self {
        serde_json::from_str(BENCHMARK_SPEC).expect("built-in spec parses")
    }
}

const BENCHMARK_SPEC: &str = include_str!("benchmark_spec.json");

/// Script positions of one frame in body coordinates, before subject styling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptFrame {
    pub joints: BTreeMap<Joint, [f64; 2]>,
    pub objects: BTreeMap<String, [f64; 4]>,
}

/// Keyframe durations after time warping: `(ramp, hold)` per keyframe.
fn warp_durations(class: &ClassScript, warp: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut stretch = |n: usize, min: usize| -> usize {
        if warp == 0.0 || n == 0 {
            return n;
        }
        let f: f64 = rng.random_range(1.0 - warp..=1.0 + warp);
        ((n as f64 * f).round() as usize).max(min)
    };
    class
        .keyframes
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let ramp = if i == 0 { 0 } else { stretch(k.ramp, 1) };
            (ramp, stretch(k.hold, 1))
        })
        .collect()
}

/// Noise-free script frames for one class with the given durations.
fn script_frames(class: &ClassScript, durations: &[(usize, usize)]) -> Vec<ScriptFrame> {
    let mut joints = rest_pose();
    let mut objects = class.objects.clone();
    let mut out = Vec::new();
    for (k, &(ramp, hold)) in class.keyframes.iter().zip(durations) {
        let mut target_j = joints.clone();
        target_j.extend(k.joints.iter().map(|(j, p)| (*j, *p)));
        let mut target_o = objects.clone();
        for (id, c) in &k.objects {
            let b = target_o.get_mut(id).expect("validated");
            b[0] = c[0];
            b[1] = c[1];
        }
        for step in 1..=ramp {
            let t = step as f64 / (ramp + 1) as f64;
            let lerp = |a: f64, b: f64| a + (b - a) * t;
            out.push(ScriptFrame {
                joints: joints
                    .iter()
                    .map(|(j, a)| {
                        let b = target_j[j];
                        (*j, [lerp(a[0], b[0]), lerp(a[1], b[1])])
                    })
                    .collect(),
                objects: objects
                    .iter()
                    .map(|(id, a)| {
                        let b = target_o[id];
                        (id.clone(), [lerp(a[0], b[0]), lerp(a[1], b[1]), a[2], a[3]])
                    })
                    .collect(),
            });
        }
        joints = target_j;
        objects = target_o;
        for _ in 0..hold {
            out.push(ScriptFrame {
                joints: joints.clone(),
                objects: objects.clone(),
            });
        }
    }
    out
}

/// Noise-free script of a class with unwarped durations.
pub fn class_script_frames(class: &ClassScript) -> Vec<ScriptFrame> {
    let durations: Vec<(usize, usize)> = class
        .keyframes
        .iter()
        .enumerate()
        .map(|(i, k)| (if i == 0 { 0 } else { k.ramp }, k.hold))
        .collect();
    script_frames(class, &durations)
}

/// Maps a script frame to image coordinates for a subject.
pub fn render_frame(
    frame: &ScriptFrame,
    index: usize,
    subject: &SubjectStyle,
    noise: &mut dyn FnMut() -> f64,
) -> Result<FrameSnapshot> {
    let place = |p: [f64; 2], dx: f64, dy: f64| {
        Point2D::new(
            ORIGIN.x + subject.offset[0] + subject.scale * p[0] + dx,
            ORIGIN.y + subject.offset[1] + subject.scale * p[1] + dy,
        )
    };
    let mut joints = BTreeMap::new();
    for (j, p) in &frame.joints {
        let (dx, dy) = (noise(), noise());
        joints.insert(*j, place(*p, dx, dy));
    }
    let mut objects = BTreeMap::new();
    for (id, b) in &frame.objects {
        let (dx, dy) = (noise(), noise());
        let r = Rect::new(place([b[0], b[1]], dx, dy), subject.scale * b[2], subject.scale * b[3])?;
        objects.insert(id.clone(), r);
    }
    Ok(FrameSnapshot {
        frame_index: index,
        joints,
        objects,
    })
}

/// Renders every class for every subject and repetition.
///
/// Video ids are `<class>_<subject>_r<repetition>`. The output depends only
/// on `(spec, seed)`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut videos = Vec::new();
    for class in &spec.classes {
        for subject in &spec.subjects {
            let normal = Normal::new(0.0, subject.jitter).map_err(|e| Error::Synth(e.to_string()))?;
            for rep in 0..spec.repetitions {
                let durations = warp_durations(class, spec.time_warp, &mut rng);
                let script = script_frames(class, &durations);
                let mut noise = || if subject.jitter > 0.0 { rng.sample(normal) } else { 0.0 };
                let frames = script
                    .iter()
                    .enumerate()
                    .map(|(i, f)| render_frame(f, i, subject, &mut noise))
                    .collect::<Result<Vec<_>>>()?;
                videos.push((
                    format!("{}_{}_r{rep}", class.name, subject.id),
                    subject.id.clone(),
                    class.name.clone(),
                    frames,
                ));
            }
        }
    }
    Dataset::from_named(videos)
}

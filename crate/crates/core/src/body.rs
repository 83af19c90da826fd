//! Body metrics, per-entity rectangles and the hierarchical body decomposition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EntityRef, FrameSnapshot, Joint, Rect, TrackedVideo};

/// Basic rectangle length (`l_b`, hip-to-hip horizontal distance) and width
/// (`w_b`, neck-to-torso vertical distance) in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyMetrics {
    pub l_b: f64,
    pub w_b: f64,
}

impl BodyMetrics {
    pub fn new(l_b: f64, w_b: f64) -> Result<Self> {
        if !(l_b.is_finite() && l_b > 0.0) {
            return Err(Error::DegeneratePose(format!("basic length l_b = {l_b}")));
        }
        if !(w_b.is_finite() && w_b > 0.0) {
            return Err(Error::DegeneratePose(format!("basic width w_b = {w_b}")));
        }
        Ok(Self { l_b, w_b })
    }
}

fn joint(frame: &FrameSnapshot, j: Joint) -> Result<crate::model::Point2D> {
    frame
        .joints
        .get(&j)
        .copied()
        .ok_or_else(|| Error::DegeneratePose(format!("frame {} lacks {j}", frame.frame_index)))
}

/// Per-frame body metrics. Fails on frames where either extent is zero.
pub fn body_metrics(frame: &FrameSnapshot) -> Result<BodyMetrics> {
    let l_b = (joint(frame, Joint::LeftHip)?.x - joint(frame, Joint::RightHip)?.x).abs();
    let w_b = (joint(frame, Joint::Neck)?.y - joint(frame, Joint::Torso)?.y).abs();
    BodyMetrics::new(l_b, w_b).map_err(|e| match e {
        Error::DegeneratePose(m) => {
            Error::DegeneratePose(format!("untrackable frame {}: {m}", frame.frame_index))
        }
        other => other,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median of the per-frame metrics over a whole video. Degenerate frames
/// are skipped; a video with no usable frame is an error.
pub fn video_body_metrics(video: &TrackedVideo) -> Result<BodyMetrics> {
    let per_frame: Vec<BodyMetrics> = video
        .frames
        .iter()
        .filter_map(|f| body_metrics(f).ok())
        .collect();
    if per_frame.is_empty() {
        return Err(Error::DegeneratePose(format!(
            "video {} has no frame with measurable body metrics",
            video.video_id
        )));
    }
    let mut ls: Vec<f64> = per_frame.iter().map(|m| m.l_b).collect();
    let mut ws: Vec<f64> = per_frame.iter().map(|m| m.w_b).collect();
    BodyMetrics::new(median(&mut ls), median(&mut ws))
}

/// Multipliers of `(l_b, w_b)` giving each joint's rectangle.
/// `(length, width)` multiples of `(l_b, w_b)` per joint. Deserialized
/// entries override the defaults; unlisted joints keep them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PartScales(pub BTreeMap<Joint, [f64; 2]>);

impl<'de> Deserialize<'de> for PartScales {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let overrides = BTreeMap::<Joint, [f64; 2]>::deserialize(d)?;
        let mut s = PartScales::default();
        s.0.extend(overrides);
        Ok(s)
    }
}

impl Default for PartScales {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for j in Joint::TRACKED.iter().chain(std::iter::once(&Joint::Hip)) {
            let s = match j {
                Joint::Head | Joint::Torso | Joint::Hip => 1.0,
                Joint::LeftHand | Joint::RightHand | Joint::LeftFoot | Joint::RightFoot => 0.5,
                _ => 0.75,
            };
            m.insert(*j, [s, s]);
        }
        PartScales(m)
    }
}

impl PartScales {
    pub fn get(&self, j: Joint) -> Result<[f64; 2]> {
        self.0
            .get(&j)
            .copied()
            .ok_or_else(|| Error::MissingScale(j.name().to_string()))
    }
}

/// Rectangle of a single entity; resolves the derived hip.
pub fn entity_rect(
    frame: &FrameSnapshot,
    entity: &EntityRef,
    scales: &PartScales,
    metrics: &BodyMetrics,
) -> Result<Rect> {
    match entity {
        EntityRef::Object(id) => frame.objects.get(id).copied().ok_or_else(|| {
            Error::Geometry(format!("frame {} has no box for object {id}", frame.frame_index))
        }),
        EntityRef::Joint(j) => {
            let center = frame.position(entity).ok_or_else(|| {
                Error::Geometry(format!("frame {} lacks joint {j}", frame.frame_index))
            })?;
            let [lm, wm] = scales.get(*j)?;
            Rect::new(center, lm * metrics.l_b, wm * metrics.w_b)
        }
    }
}

/// Rectangles for every tracked joint present in the frame plus every
/// object box. Object boxes pass through unchanged.
pub fn entity_rectangles(
    frame: &FrameSnapshot,
    scales: &PartScales,
    metrics: &BodyMetrics,
) -> Result<BTreeMap<EntityRef, Rect>> {
    let mut out = BTreeMap::new();
    for (j, p) in &frame.joints {
        let [lm, wm] = scales.get(*j)?;
        out.insert(EntityRef::Joint(*j), Rect::new(*p, lm * metrics.l_b, wm * metrics.w_b)?);
    }
    for (id, r) in &frame.objects {
        out.insert(EntityRef::Object(id.clone()), *r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Whole,
    Upper,
    Lower,
}

impl Scope {
    pub fn name(&self) -> &'static str {
        match self {
            Scope::Whole => "whole",
            Scope::Upper => "upper",
            Scope::Lower => "lower",
        }
    }
}

/// A named group of joints that forms one graph scope.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPartSet {
    pub name: Scope,
    pub members: Vec<Joint>,
}

impl BodyPartSet {
    pub fn whole() -> Self {
        Self {
            name: Scope::Whole,
            members: Joint::TRACKED.to_vec(),
        }
    }

    pub fn upper() -> Self {
        Self {
            name: Scope::Upper,
            members: vec![Joint::Head, Joint::Neck, Joint::LeftHand, Joint::RightHand],
        }
    }

    /// The lower part uses the single hip midpoint rather than both hips.
    pub fn lower() -> Self {
        Self {
            name: Scope::Lower,
            members: vec![Joint::Hip, Joint::Torso, Joint::LeftFoot, Joint::RightFoot],
        }
    }

    pub fn for_scope(scope: Scope) -> Self {
        match scope {
            Scope::Whole => Self::whole(),
            Scope::Upper => Self::upper(),
            Scope::Lower => Self::lower(),
        }
    }

    /// Scope joints plus every object of the video, in canonical entity order.
    pub fn entities(&self, object_ids: &[String]) -> Vec<EntityRef> {
        let mut out: Vec<EntityRef> = self.members.iter().map(|j| EntityRef::Joint(*j)).collect();
        out.extend(object_ids.iter().map(|id| EntityRef::Object(id.clone())));
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point2D;

    fn frame_with(joints: &[(Joint, f64, f64)]) -> FrameSnapshot {
        FrameSnapshot {
            frame_index: 0,
            joints: joints
                .iter()
                .map(|(j, x, y)| (*j, Point2D::new(*x, *y)))
                .collect(),
            objects: BTreeMap::new(),
        }
    }

    fn standard_frame() -> FrameSnapshot {
        frame_with(&[
            (Joint::LeftHip, 100.0, 200.0),
            (Joint::RightHip, 140.0, 200.0),
            (Joint::Neck, 120.0, 100.0),
            (Joint::Torso, 120.0, 160.0),
            (Joint::Head, 120.0, 70.0),
            (Joint::LeftHand, 90.0, 190.0),
        ])
    }

    #[test]
    fn metrics_from_hips_and_neck() {
        let m = body_metrics(&standard_frame()).unwrap();
        assert_eq!(m.l_b, 40.0);
        assert_eq!(m.w_b, 60.0);
    }

    #[test]
    fn coincident_hips_are_degenerate() {
        let f = frame_with(&[
            (Joint::LeftHip, 120.0, 200.0),
            (Joint::RightHip, 120.0, 200.0),
            (Joint::Neck, 120.0, 100.0),
            (Joint::Torso, 120.0, 160.0),
        ]);
        assert!(matches!(body_metrics(&f), Err(Error::DegeneratePose(_))));
    }

    #[test]
    fn rectangles_scale_with_metrics() {
        let mut f = standard_frame();
        f.objects.insert(
            "cup".into(),
            Rect::new(Point2D::new(300.0, 250.0), 80.0, 50.0).unwrap(),
        );
        let m = BodyMetrics::new(40.0, 60.0).unwrap();
        let rects = entity_rectangles(&f, &PartScales::default(), &m).unwrap();
        let head = rects[&EntityRef::Joint(Joint::Head)];
        assert_eq!((head.width, head.height), (40.0, 60.0));
        assert_eq!(head.center, Point2D::new(120.0, 70.0));
        let hand = rects[&EntityRef::Joint(Joint::LeftHand)];
        assert_eq!((hand.width, hand.height), (20.0, 30.0));
        assert_eq!(rects[&EntityRef::object("cup")].to_array(), [300.0, 250.0, 80.0, 50.0]);
        assert_eq!(rects.len(), f.joints.len() + f.objects.len());
    }

    #[test]
    fn missing_scale_is_reported() {
        let mut scales = PartScales::default();
        scales.0.remove(&Joint::LeftHand);
        let m = BodyMetrics::new(40.0, 60.0).unwrap();
        assert!(matches!(
            entity_rectangles(&standard_frame(), &scales, &m),
            Err(Error::MissingScale(_))
        ));
    }

    #[test]
    fn hip_rect_uses_unit_scale() {
        let m = BodyMetrics::new(40.0, 60.0).unwrap();
        let r = entity_rect(
            &standard_frame(),
            &EntityRef::Joint(Joint::Hip),
            &PartScales::default(),
            &m,
        )
        .unwrap();
        assert_eq!(r.center, Point2D::new(120.0, 200.0));
        assert_eq!((r.width, r.height), (40.0, 60.0));
    }

    #[test]
    fn part_sets_match_decomposition() {
        let whole = BodyPartSet::whole();
        assert_eq!(whole.members.len(), 15);
        for j in BodyPartSet::upper().members {
            assert!(whole.members.contains(&j));
        }
        // The hip midpoint stands in for both tracked hips.
        for j in BodyPartSet::lower().members {
            assert!(whole.members.contains(&j) || j == Joint::Hip);
        }
    }

    proptest::proptest! {
        #[test]
        fn metrics_translation_invariant_and_scale_equivariant(
            dx in -500.0f64..500.0, dy in -500.0f64..500.0, c in 0.1f64..10.0,
        ) {
            let f = standard_frame();
            let base = body_metrics(&f).unwrap();
            let moved = FrameSnapshot {
                joints: f.joints.iter().map(|(j, p)| (*j, Point2D::new(p.x + dx, p.y + dy))).collect(),
                ..f.clone()
            };
            let m = body_metrics(&moved).unwrap();
            proptest::prop_assert!((m.l_b - base.l_b).abs() < 1e-9);
            proptest::prop_assert!((m.w_b - base.w_b).abs() < 1e-9);
            let scaled = FrameSnapshot {
                joints: f.joints.iter().map(|(j, p)| (*j, Point2D::new(p.x * c, p.y * c))).collect(),
                ..f.clone()
            };
            let s = body_metrics(&scaled).unwrap();
            proptest::prop_assert!((s.l_b - c * base.l_b).abs() < 1e-9);
            proptest::prop_assert!((s.w_b - c * base.w_b).abs() < 1e-9);
        }
    }
}

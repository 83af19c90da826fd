//! Canonical data model: points, rectangles, entities, frames and videos.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D image location in pixels. `y` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn midpoint(&self, other: &Point2D) -> Point2D {
        Point2D::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }
}

/// Axis-aligned rectangle given by its center and extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point2D,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(center: Point2D, width: f64, height: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::Geometry(format!("non-finite rectangle center {center:?}")));
        }
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(Error::Geometry(format!(
                "rectangle extent must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            center,
            width,
            height,
        })
    }

    /// Builds a rectangle from its corner coordinates.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Rect::new(
            Point2D::new((x1 + x2) / 2.0, (y1 + y2) / 2.0),
            (x2 - x1).abs(),
            (y2 - y1).abs(),
        )
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn left(&self) -> f64 {
        self.center.x - self.width / 2.0
    }

    pub fn right(&self) -> f64 {
        self.center.x + self.width / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center.y - self.height / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.center.y + self.height / 2.0
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.right().min(other.right()) - self.left().max(other.left());
        let h = self.bottom().min(other.bottom()) - self.top().max(other.top());
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// `[cx, cy, w, h]`, the on-disk layout.
    pub fn to_array(&self) -> [f64; 4] {
        [self.center.x, self.center.y, self.width, self.height]
    }
}

/// Skeletal joints. The first fifteen are tracked; [`Joint::Hip`] is the
/// midpoint of the two hips and is derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Head,
    Neck,
    Torso,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftHand,
    RightHand,
    LeftFoot,
    RightFoot,
    Hip,
}

impl Joint {
    /// The fifteen joints every valid frame must carry.
    pub const TRACKED: [Joint; 15] = [
        Joint::Head,
        Joint::Neck,
        Joint::Torso,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftHand,
        Joint::RightHand,
        Joint::LeftFoot,
        Joint::RightFoot,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Joint::Head => "head",
            Joint::Neck => "neck",
            Joint::Torso => "torso",
            Joint::LeftShoulder => "left_shoulder",
            Joint::RightShoulder => "right_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::RightElbow => "right_elbow",
            Joint::LeftHip => "left_hip",
            Joint::RightHip => "right_hip",
            Joint::LeftKnee => "left_knee",
            Joint::RightKnee => "right_knee",
            Joint::LeftHand => "left_hand",
            Joint::RightHand => "right_hand",
            Joint::LeftFoot => "left_foot",
            Joint::RightFoot => "right_foot",
            Joint::Hip => "hip",
        }
    }

    pub fn is_derived(&self) -> bool {
        matches!(self, Joint::Hip)
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Joint::TRACKED
            .iter()
            .chain(std::iter::once(&Joint::Hip))
            .find(|j| j.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown joint name {s:?}")))
    }
}

/// A tracked participant: a body joint or a scene object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum EntityRef {
    Joint(Joint),
    Object(String),
}

impl EntityRef {
    pub fn object(id: impl Into<String>) -> Self {
        EntityRef::Object(id.into())
    }

    pub fn name(&self) -> &str {
        match self {
            EntityRef::Joint(j) => j.name(),
            EntityRef::Object(id) => id,
        }
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::Joint(j) => write!(f, "{j}"),
            EntityRef::Object(id) => write!(f, "object:{id}"),
        }
    }
}

// Joints sort before objects; within a kind, names compare lexically.
impl Ord for EntityRef {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (EntityRef::Joint(a), EntityRef::Joint(b)) => a.name().cmp(b.name()),
            (EntityRef::Object(a), EntityRef::Object(b)) => a.cmp(b),
            (EntityRef::Joint(_), EntityRef::Object(_)) => Ordering::Less,
            (EntityRef::Object(_), EntityRef::Joint(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for EntityRef {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One frame of joint positions and object boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot {
    pub frame_index: usize,
    pub joints: BTreeMap<Joint, Point2D>,
    pub objects: BTreeMap<String, Rect>,
}

impl FrameSnapshot {
    /// Position of any entity, deriving the hip midpoint when asked for.
    pub fn position(&self, entity: &EntityRef) -> Option<Point2D> {
        match entity {
            EntityRef::Joint(Joint::Hip) => {
                let l = self.joints.get(&Joint::LeftHip)?;
                let r = self.joints.get(&Joint::RightHip)?;
                Some(l.midpoint(r))
            }
            EntityRef::Joint(j) => self.joints.get(j).copied(),
            EntityRef::Object(id) => self.objects.get(id).map(|r| r.center),
        }
    }

    pub fn has_all_joints(&self) -> bool {
        Joint::TRACKED.iter().all(|j| self.joints.contains_key(j))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityLabel {
    pub class_index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedVideo {
    pub video_id: String,
    pub subject_id: String,
    pub label: ActivityLabel,
    pub frames: Vec<FrameSnapshot>,
}

impl TrackedVideo {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Object ids present in the video, sorted.
    pub fn object_ids(&self) -> Vec<String> {
        self.frames
            .first()
            .map(|f| f.objects.keys().cloned().collect())
            .unwrap_or_default()
    }
}

/// A validated collection of videos with a label table.
///
/// `labels[i]` is the name of class `i`; every video's label index points
/// into this table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub labels: Vec<String>,
    pub videos: Vec<TrackedVideo>,
}

impl Dataset {
    /// Builds a dataset, assigning class indices by sorted label name.
    pub fn from_named(videos: Vec<(String, String, String, Vec<FrameSnapshot>)>) -> Result<Self> {
        if videos.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut labels: Vec<String> = videos.iter().map(|v| v.2.clone()).collect();
        labels.sort();
        labels.dedup();
        let videos = videos
            .into_iter()
            .map(|(video_id, subject_id, label, frames)| {
                let class_index = labels.binary_search(&label).expect("label collected above");
                TrackedVideo {
                    video_id,
                    subject_id,
                    label: ActivityLabel {
                        class_index,
                        name: label,
                    },
                    frames,
                }
            })
            .collect();
        Ok(Dataset { labels, videos })
    }

    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, class_index: usize) -> ActivityLabel {
        ActivityLabel {
            class_index,
            name: self.labels[class_index].clone(),
        }
    }

    /// Videos grouped by subject id, subjects in sorted order.
    pub fn by_subject(&self) -> BTreeMap<&str, Vec<&TrackedVideo>> {
        let mut out: BTreeMap<&str, Vec<&TrackedVideo>> = BTreeMap::new();
        for v in &self.videos {
            out.entry(v.subject_id.as_str()).or_default().push(v);
        }
        out
    }

    pub fn subjects(&self) -> Vec<String> {
        self.by_subject().keys().map(|s| s.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_order_puts_joints_first() {
        let mut v = vec![
            EntityRef::object("2"),
            EntityRef::Joint(Joint::Torso),
            EntityRef::object("10"),
            EntityRef::Joint(Joint::Head),
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                EntityRef::Joint(Joint::Head),
                EntityRef::Joint(Joint::Torso),
                EntityRef::object("10"),
                EntityRef::object("2"),
            ]
        );
    }

    #[test]
    fn rect_rejects_degenerate_extent() {
        assert!(Rect::new(Point2D::new(0.0, 0.0), 0.0, 1.0).is_err());
        assert!(Rect::new(Point2D::new(0.0, 0.0), 1.0, -2.0).is_err());
        assert!(Rect::new(Point2D::new(f64::NAN, 0.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn hip_is_midpoint_of_hips() {
        let mut joints = BTreeMap::new();
        joints.insert(Joint::LeftHip, Point2D::new(100.0, 200.0));
        joints.insert(Joint::RightHip, Point2D::new(140.0, 210.0));
        let f = FrameSnapshot {
            frame_index: 0,
            joints,
            objects: BTreeMap::new(),
        };
        assert_eq!(
            f.position(&EntityRef::Joint(Joint::Hip)),
            Some(Point2D::new(120.0, 205.0))
        );
    }

    #[test]
    fn joint_names_round_trip() {
        for j in Joint::TRACKED {
            assert_eq!(j.name().parse::<Joint>().unwrap(), j);
        }
    }
}

//! Converter from CAD-120-style annotation text files to canonical records.
//!
//! Expected layout of a source directory:
//!
//! * `activityLabel.txt`: one line per video, `video_id,activity,subject[,...]`.
//! * `<video_id>.txt`: skeleton file, one comma-separated line per frame, ending
//!   with a line `END`. Each line is `frame, J1..J11, J12..J15` where joints
//!   1 to 11 carry an orientation block (9 values + confidence) followed by a
//!   position block (x, y, z in millimetres + confidence), and joints 12 to 15
//!   carry only the position block.
//! * `<video_id>_obj<k>.txt`: one line per frame, `frame, object_id, x1, y1, x2, y2, ...`
//!   with the 2D box corners in pixels; any trailing columns are ignored.
//!
//! Joint order in the skeleton file: head, neck, torso, left shoulder, left
//! elbow, right shoulder, right elbow, left hip, left knee, right hip, right
//! knee, left hand, right hand, left foot, right foot. World positions are
//! projected to pixels with a pinhole camera ([`Projection`]). Joints with
//! zero position confidence or non-positive depth are left out, so the
//! validator drops their frames. Boxes whose corners are all zero count as
//! missing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::dataset::{FrameRecord, VideoRecord};
use crate::error::{Error, Result};
use crate::model::Joint;

const SKELETON_ORDER: [Joint; 15] = [
    Joint::Head,
    Joint::Neck,
    Joint::Torso,
    Joint::LeftShoulder,
    Joint::LeftElbow,
    Joint::RightShoulder,
    Joint::RightElbow,
    Joint::LeftHip,
    Joint::LeftKnee,
    Joint::RightHip,
    Joint::RightKnee,
    Joint::LeftHand,
    Joint::RightHand,
    Joint::LeftFoot,
    Joint::RightFoot,
];

const ORIENTED_JOINTS: usize = 11;
const ORIENTED_BLOCK: usize = 14;
const POSITION_BLOCK: usize = 4;
const SKELETON_FIELDS: usize = 1 + ORIENTED_JOINTS * ORIENTED_BLOCK + 4 * POSITION_BLOCK;

/// Pinhole intrinsics used to project world millimetres to image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for Projection {
    fn default() -> Self {
        // Nominal Kinect v1 depth camera.
        Self {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
        }
    }
}

impl Projection {
    /// World y points up, image y points down.
    pub fn project(&self, x: f64, y: f64, z: f64) -> Option<[f64; 2]> {
        (z > 0.0).then(|| [self.cx + self.fx * x / z, self.cy - self.fy * y / z])
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Cad120Options {
    pub projection: Projection,
}

fn parse_fields(line: &str, ctx: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| Error::Schema {
                video_id: ctx.to_string(),
                frame: None,
                message: format!("line {line_no}: cannot parse {s:?} as a number"),
            })
        })
        .collect()
}

/// Parses a skeleton file into per-frame projected joint positions.
pub fn parse_skeleton(
    text: &str,
    video_id: &str,
    projection: &Projection,
) -> Result<BTreeMap<usize, BTreeMap<String, [f64; 2]>>> {
    let mut frames = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "END" {
            break;
        }
        let v = parse_fields(line, video_id, no + 1)?;
        if v.len() < SKELETON_FIELDS {
            return Err(Error::schema(
                video_id,
                None,
                format!("skeleton line {} has {} fields, expected {SKELETON_FIELDS}", no + 1, v.len()),
            ));
        }
        let frame = v[0] as usize;
        let mut joints = BTreeMap::new();
        for (k, j) in SKELETON_ORDER.iter().enumerate() {
            let base = if k < ORIENTED_JOINTS {
                1 + k * ORIENTED_BLOCK + 10
            } else {
                1 + ORIENTED_JOINTS * ORIENTED_BLOCK + (k - ORIENTED_JOINTS) * POSITION_BLOCK
            };
            let (x, y, z, conf) = (v[base], v[base + 1], v[base + 2], v[base + 3]);
            if conf <= 0.0 {
                continue;
            }
            if let Some(p) = projection.project(x, y, z) {
                joints.insert(j.name().to_string(), p);
            }
        }
        frames.insert(frame, joints);
    }
    Ok(frames)
}

/// Parses an object annotation file into per-frame `[cx, cy, w, h]` boxes.
pub fn parse_objects(text: &str, ctx: &str) -> Result<BTreeMap<usize, [f64; 4]>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line == "END" {
            continue;
        }
        let v = parse_fields(line, ctx, no + 1)?;
        if v.len() < 6 {
            return Err(Error::schema(ctx, None, format!("object line {} is too short", no + 1)));
        }
        let (x1, y1, x2, y2) = (v[2], v[3], v[4], v[5]);
        if x1 == 0.0 && y1 == 0.0 && x2 == 0.0 && y2 == 0.0 {
            continue;
        }
        let (w, h) = ((x2 - x1).abs(), (y2 - y1).abs());
        if w > 0.0 && h > 0.0 {
            out.insert(v[0] as usize, [(x1 + x2) / 2.0, (y1 + y2) / 2.0, w, h]);
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Converts every video listed in `activityLabel.txt` under `dir`.
pub fn convert_directory(dir: &Path, options: &Cad120Options) -> Result<Vec<VideoRecord>> {
    let labels = read(&dir.join("activityLabel.txt"))?;
    let mut out = Vec::new();
    for line in labels.lines() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0].is_empty() {
            continue;
        }
        let (video_id, label, subject) = (cols[0], cols[1], cols[2]);
        out.push(convert_video(dir, video_id, label, subject, options)?);
    }
    Ok(out)
}

pub fn convert_video(
    dir: &Path,
    video_id: &str,
    label: &str,
    subject: &str,
    options: &Cad120Options,
) -> Result<VideoRecord> {
    let skeleton = parse_skeleton(&read(&dir.join(format!("{video_id}.txt")))?, video_id, &options.projection)?;
    let mut objects: BTreeMap<String, BTreeMap<usize, [f64; 4]>> = BTreeMap::new();
    for k in 1.. {
        let path = dir.join(format!("{video_id}_obj{k}.txt"));
        if !path.exists() {
            break;
        }
        objects.insert(format!("obj{k}"), parse_objects(&read(&path)?, video_id)?);
    }
    let frames = skeleton
        .into_iter()
        .map(|(frame, joints)| FrameRecord {
            frame,
            joints,
            objects: objects
                .iter()
                .filter_map(|(id, per_frame)| per_frame.get(&frame).map(|b| (id.clone(), *b)))
                .collect(),
        })
        .collect();
    Ok(VideoRecord {
        video_id: video_id.to_string(),
        subject_id: subject.to_string(),
        label: label.to_string(),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skeleton_line(frame: usize, z: f64) -> String {
        let mut v = vec![frame as f64];
        for k in 0..15 {
            if k < ORIENTED_JOINTS {
                v.extend([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
            }
            v.extend([100.0 * k as f64, -50.0 * k as f64, z, 1.0]);
        }
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",") + ","
    }

    #[test]
    fn projects_skeleton_joints() {
        let text = format!("{}\n{}\nEND\n", skeleton_line(1, 2000.0), skeleton_line(2, 2000.0));
        let frames = parse_skeleton(&text, "v", &Projection::default()).unwrap();
        assert_eq!(frames.len(), 2);
        let f = &frames[&1];
        assert_eq!(f.len(), 15);
        assert_eq!(f["head"], [319.5, 239.5]);
        // Neck is the second joint: x = 100 mm, y = -50 mm at 2 m.
        assert_eq!(f["neck"], [319.5 + 525.0 * 100.0 / 2000.0, 239.5 + 525.0 * 50.0 / 2000.0]);
        // Right foot is the last position-only joint.
        assert_eq!(f["right_foot"][0], 319.5 + 525.0 * 1400.0 / 2000.0);
    }

    #[test]
    fn zero_depth_joints_are_omitted() {
        let frames = parse_skeleton(&skeleton_line(1, 0.0), "v", &Projection::default()).unwrap();
        assert!(frames[&1].is_empty());
    }

    #[test]
    fn converts_directory() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(p.join("activityLabel.txt"), "0510,making_cereal,Subject1,box,bowl,\n").unwrap();
        let sk: String = (1..=3).map(|f| skeleton_line(f, 2000.0) + "\n").collect::<String>() + "END\n";
        fs::write(p.join("0510.txt"), sk).unwrap();
        fs::write(p.join("0510_obj1.txt"), "1,1,10,20,50,60,0,0\n2,1,0,0,0,0\n3,1,12,20,52,60\n").unwrap();
        let recs = convert_directory(p, &Cad120Options::default()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!((r.label.as_str(), r.subject_id.as_str()), ("making_cereal", "Subject1"));
        assert_eq!(r.frames.len(), 3);
        assert_eq!(r.frames[0].objects["obj1"], [30.0, 40.0, 40.0, 40.0]);
        assert!(r.frames[1].objects.is_empty());
        let loaded = crate::dataset::validate_records(recs).unwrap();
        let v = &loaded.dataset.videos[0];
        assert_eq!(v.frames.len(), 3);
        assert_eq!(v.frames[1].objects["obj1"].center.x, 31.0);
    }

    #[test]
    fn missing_label_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            convert_directory(dir.path(), &Cad120Options::default()),
            Err(Error::MissingFile(_))
        ));
    }
}

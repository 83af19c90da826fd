//! Dataset ingestion, validation and the canonical on-disk format.
//!
//! A canonical dataset is a directory of UTF-8 JSON files, one per video:
//!
//! ```json
//! {"video_id": "v1", "subject_id": "s1", "label": "drinking",
//!  "frames": [{"frame": 0,
//!              "joints": {"head": [120.0, 70.0], "...": [0.0, 0.0]},
//!              "objects": {"cup": [300.0, 250.0, 40.0, 30.0]}}]}
//! ```
//!
//! Joint positions are `[x, y]` pixels; object boxes are `[cx, cy, w, h]`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, FrameSnapshot, Joint, Point2D, Rect, TrackedVideo};

/// Longest run of missing object boxes that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// Directory of canonical JSON video files (or a single such file).
    Canonical,
    /// Directory of CAD-120-style skeleton/object text files, converted on load.
    Cad120,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub joints: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub objects: BTreeMap<String, [f64; 4]>,
}

/// One video exactly as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub subject_id: String,
    pub label: String,
    pub frames: Vec<FrameRecord>,
}

/// A recoverable problem found while validating input.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadWarning {
    pub video_id: String,
    pub frame: Option<usize>,
    pub message: String,
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(fr) => write!(f, "video {} frame {}: {}", self.video_id, fr, self.message),
            None => write!(f, "video {}: {}", self.video_id, self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub warnings: Vec<LoadWarning>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LoadedDataset> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let records = match format {
        DatasetFormat::Canonical => read_canonical(path)?,
        DatasetFormat::Cad120 => crate::cad120::convert_directory(path, &Default::default())?,
    };
    validate_records(records)
}

fn read_canonical(path: &Path) -> Result<Vec<VideoRecord>> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            if p.extension().is_some_and(|e| e == "json") {
                files.push(p);
            }
        }
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<VideoRecord>(&text).map_err(|e| Error::Schema {
                video_id: p.display().to_string(),
                frame: None,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Validates raw records into a dataset, collecting warnings for dropped
/// frames and videos.
pub fn validate_records(records: Vec<VideoRecord>) -> Result<LoadedDataset> {
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut videos = Vec::new();
    for rec in records {
        if !seen.insert(rec.video_id.clone()) {
            return Err(Error::schema(&rec.video_id, None, "duplicate video id"));
        }
        let id = rec.video_id.clone();
        let frames = validate_frames(&rec, &mut warnings)?;
        if frames.len() < 2 {
            warnings.push(LoadWarning {
                video_id: id,
                frame: None,
                message: format!("only {} valid frames; video dropped", frames.len()),
            });
            continue;
        }
        videos.push((rec.video_id, rec.subject_id, rec.label, frames));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    if videos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(LoadedDataset {
        dataset: Dataset::from_named(videos)?,
        warnings,
    })
}

fn parse_frame(rec: &VideoRecord, fr: &FrameRecord) -> Result<FrameSnapshot> {
    let mut joints = BTreeMap::new();
    for (name, [x, y]) in &fr.joints {
        let j: Joint = name
            .parse()
            .map_err(|_| Error::schema(&rec.video_id, Some(fr.frame), format!("unknown joint {name:?}")))?;
        if j.is_derived() {
            return Err(Error::schema(
                &rec.video_id,
                Some(fr.frame),
                format!("joint {name:?} is derived and cannot be supplied"),
            ));
        }
        let p = Point2D::new(*x, *y);
        if !p.is_finite() {
            return Err(Error::schema(&rec.video_id, Some(fr.frame), format!("non-finite {name}")));
        }
        joints.insert(j, p);
    }
    let mut objects = BTreeMap::new();
    for (id, [cx, cy, w, h]) in &fr.objects {
        let r = Rect::new(Point2D::new(*cx, *cy), *w, *h).map_err(|e| {
            Error::schema(&rec.video_id, Some(fr.frame), format!("object {id}: {e}"))
        })?;
        objects.insert(id.clone(), r);
    }
    Ok(FrameSnapshot {
        frame_index: fr.frame,
        joints,
        objects,
    })
}

fn lerp_rect(a: &Rect, b: &Rect, t: f64) -> Rect {
    let l = |u: f64, v: f64| u + (v - u) * t;
    Rect {
        center: Point2D::new(l(a.center.x, b.center.x), l(a.center.y, b.center.y)),
        width: l(a.width, b.width),
        height: l(a.height, b.height),
    }
}

fn validate_frames(rec: &VideoRecord, warnings: &mut Vec<LoadWarning>) -> Result<Vec<FrameSnapshot>> {
    let warn = |warnings: &mut Vec<LoadWarning>, frame: usize, message: String| {
        warnings.push(LoadWarning {
            video_id: rec.video_id.clone(),
            frame: Some(frame),
            message,
        })
    };

    let mut frames = Vec::with_capacity(rec.frames.len());
    let mut last: Option<usize> = None;
    for fr in &rec.frames {
        if last.is_some_and(|l| fr.frame <= l) {
            return Err(Error::schema(
                &rec.video_id,
                Some(fr.frame),
                "frame numbers must be strictly increasing",
            ));
        }
        last = Some(fr.frame);
        let snap = parse_frame(rec, fr)?;
        if snap.has_all_joints() {
            frames.push(snap);
        } else {
            let missing: Vec<&str> = Joint::TRACKED
                .iter()
                .filter(|j| !snap.joints.contains_key(j))
                .map(|j| j.name())
                .collect();
            warn(warnings, fr.frame, format!("missing joints {missing:?}; frame dropped"));
        }
    }

    // Fill short object dropouts; frames inside longer gaps are dropped.
    let ids: BTreeSet<String> = frames.iter().flat_map(|f| f.objects.keys().cloned()).collect();
    let mut drop = vec![false; frames.len()];
    for id in &ids {
        let mut i = 0;
        while i < frames.len() {
            if frames[i].objects.contains_key(id) {
                i += 1;
                continue;
            }
            let start = i;
            while i < frames.len() && !frames[i].objects.contains_key(id) {
                i += 1;
            }
            let gap = i - start;
            let bounded = start > 0 && i < frames.len();
            if bounded && gap <= MAX_INTERPOLATED_GAP {
                let (f0, r0) = (frames[start - 1].frame_index, frames[start - 1].objects[id]);
                let (f1, r1) = (frames[i].frame_index, frames[i].objects[id]);
                for f in &mut frames[start..i] {
                    let t = (f.frame_index - f0) as f64 / (f1 - f0) as f64;
                    f.objects.insert(id.clone(), lerp_rect(&r0, &r1, t));
                }
            } else {
                for (k, d) in drop.iter_mut().enumerate().take(i).skip(start) {
                    *d = true;
                    warn(
                        warnings,
                        frames[k].frame_index,
                        format!("object {id} missing in a gap of {gap} frames; frame dropped"),
                    );
                }
            }
        }
    }

    let mut out: Vec<FrameSnapshot> = frames
        .into_iter()
        .zip(drop)
        .filter_map(|(f, d)| (!d).then_some(f))
        .collect();
    for (i, f) in out.iter_mut().enumerate() {
        f.frame_index = i;
    }
    Ok(out)
}

pub fn video_to_record(video: &TrackedVideo) -> VideoRecord {
    VideoRecord {
        video_id: video.video_id.clone(),
        subject_id: video.subject_id.clone(),
        label: video.label.name.clone(),
        frames: video
            .frames
            .iter()
            .map(|f| FrameRecord {
                frame: f.frame_index,
                joints: f
                    .joints
                    .iter()
                    .map(|(j, p)| (j.name().to_string(), [p.x, p.y]))
                    .collect(),
                objects: f.objects.iter().map(|(id, r)| (id.clone(), r.to_array())).collect(),
            })
            .collect(),
    }
}

/// File name used for a video in a canonical dataset directory.
pub fn video_file_name(video_id: &str) -> String {
    let safe: String = video_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

pub fn write_record(record: &VideoRecord, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(video_file_name(&record.video_id));
    let mut bytes = serde_json::to_vec_pretty(record)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes every video of the dataset as a canonical JSON file under `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    for v in &dataset.videos {
        write_record(&video_to_record(v), dir)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn full_frame(frame: usize) -> FrameRecord {
        let joints = Joint::TRACKED
            .iter()
            .enumerate()
            .map(|(i, j)| (j.name().to_string(), [100.0 + 10.0 * i as f64, 50.0 + 7.0 * i as f64]))
            .collect();
        let mut objects = BTreeMap::new();
        objects.insert("cup".to_string(), [300.0 + frame as f64, 250.0, 40.0, 30.0]);
        FrameRecord {
            frame,
            joints,
            objects,
        }
    }

    fn record(frames: Vec<FrameRecord>) -> VideoRecord {
        VideoRecord {
            video_id: "v1".into(),
            subject_id: "s1".into(),
            label: "drinking".into(),
            frames,
        }
    }

    #[test]
    fn complete_video_survives() {
        let loaded = validate_records(vec![record((0..10).map(full_frame).collect())]).unwrap();
        assert_eq!(loaded.dataset.videos.len(), 1);
        assert_eq!(loaded.dataset.videos[0].frames.len(), 10);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn frame_missing_a_joint_is_dropped_with_warning() {
        let mut frames: Vec<FrameRecord> = (0..10).map(full_frame).collect();
        frames[5].joints.remove("left_knee");
        let loaded = validate_records(vec![record(frames)]).unwrap();
        let v = &loaded.dataset.videos[0];
        assert_eq!(v.frames.len(), 9);
        assert_eq!(loaded.warnings.len(), 1);
        assert_eq!(loaded.warnings[0].frame, Some(5));
        let idx: Vec<usize> = v.frames.iter().map(|f| f.frame_index).collect();
        assert_eq!(idx, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn short_object_gap_is_interpolated() {
        let mut frames: Vec<FrameRecord> = (0..10).map(full_frame).collect();
        for f in &mut frames[3..6] {
            f.objects.clear();
        }
        let loaded = validate_records(vec![record(frames)]).unwrap();
        let v = &loaded.dataset.videos[0];
        assert_eq!(v.frames.len(), 10);
        assert!(loaded.warnings.is_empty());
        let cx = v.frames[4].objects["cup"].center.x;
        assert!((cx - 304.0).abs() < 1e-12);
    }

    #[test]
    fn long_or_leading_object_gap_drops_frames() {
        let mut frames: Vec<FrameRecord> = (0..20).map(full_frame).collect();
        for f in &mut frames[5..11] {
            f.objects.clear();
        }
        frames[0].objects.clear();
        let loaded = validate_records(vec![record(frames)]).unwrap();
        assert_eq!(loaded.dataset.videos[0].frames.len(), 13);
        assert_eq!(loaded.warnings.len(), 7);
    }

    #[test]
    fn non_monotone_frames_are_a_schema_error() {
        let mut frames: Vec<FrameRecord> = (0..4).map(full_frame).collect();
        frames[2].frame = 1;
        let err = validate_records(vec![record(frames)]).unwrap_err();
        assert!(matches!(err, Error::Schema { frame: Some(1), .. }), "{err}");
        assert!(err.to_string().contains("v1"));
    }

    #[test]
    fn empty_directory_is_an_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path(), DatasetFormat::Canonical).unwrap_err();
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn missing_path_is_reported() {
        let err = load_dataset(Path::new("/nonexistent/qstg"), DatasetFormat::Canonical).unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn load_save_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let mut frames: Vec<FrameRecord> = (0..12).map(full_frame).collect();
        frames[2].joints.remove("head");
        frames[7].objects.clear();
        write_record(&record(frames), dir.path()).unwrap();
        let first = load_dataset(dir.path(), DatasetFormat::Canonical).unwrap().dataset;
        let out = tempfile::tempdir().unwrap();
        save_dataset(&first, out.path()).unwrap();
        let second = load_dataset(out.path(), DatasetFormat::Canonical).unwrap();
        assert_eq!(first, second.dataset);
        assert!(second.warnings.is_empty());
    }
}

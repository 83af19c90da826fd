//! Per-frame qualitative spatial relations between entity pairs, jitter
//! suppression and run-length compression into episodes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::body::{entity_rect, BodyMetrics, BodyPartSet, PartScales};
use crate::error::{Error, Result};
use crate::model::{EntityRef, Point2D, Rect, TrackedVideo};
use crate::temporal::Interval;

/// Thresholds for the qualitative relation layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualConfig {
    /// Overlap ratios at or below this are disjoint (`D`).
    pub tau_d: f64,
    /// Overlap ratios at or above this are part/containment (`P`).
    pub tau_p: f64,
    /// Minimum dwell, in frames, for a relation run to survive filtering.
    pub d_min: usize,
    /// Image coordinates: "up" is decreasing y.
    pub up_is_negative_y: bool,
}

impl Default for QualConfig {
    fn default() -> Self {
        Self {
            tau_d: 0.0,
            tau_p: 0.9,
            d_min: 3,
            up_is_negative_y: true,
        }
    }
}

impl QualConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.tau_d && self.tau_d < self.tau_p && self.tau_p <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= tau_d < tau_p <= 1, got tau_d = {}, tau_p = {}",
                self.tau_d, self.tau_p
            )));
        }
        if self.d_min < 1 {
            return Err(Error::Config("d_min must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceRelation {
    D,
    PO,
    P,
}

/// Inclination bin from the zenith: 1 is straight above, 5 straight below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectionBin(u8);

impl DirectionBin {
    pub fn new(bin: u8) -> Option<Self> {
        (1..=5).contains(&bin).then_some(Self(bin))
    }

    pub fn get(&self) -> u8 {
        self.0
    }

    /// The bin seen from the other entity of the pair.
    pub fn mirrored(&self) -> Self {
        Self(6 - self.0)
    }
}

/// Combined distance/direction relation.
///
/// `D1`..`D5` are the directional disjoint relations. The bare `D` only
/// appears when direction relations are disabled. Variants are declared in
/// lexical order of their names so the derived `Ord` sorts labels by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialRelation {
    D,
    D1,
    D2,
    D3,
    D4,
    D5,
    P,
    PO,
}

impl SpatialRelation {
    /// The seven relations used when direction is on.
    pub const DIRECTIONAL: [SpatialRelation; 7] = [
        SpatialRelation::D1,
        SpatialRelation::D2,
        SpatialRelation::D3,
        SpatialRelation::D4,
        SpatialRelation::D5,
        SpatialRelation::P,
        SpatialRelation::PO,
    ];

    /// The three relations used when direction is ignored.
    pub const UNDIRECTED: [SpatialRelation; 3] =
        [SpatialRelation::D, SpatialRelation::P, SpatialRelation::PO];

    pub fn name(&self) -> &'static str {
        match self {
            SpatialRelation::D => "D",
            SpatialRelation::D1 => "D1",
            SpatialRelation::D2 => "D2",
            SpatialRelation::D3 => "D3",
            SpatialRelation::D4 => "D4",
            SpatialRelation::D5 => "D5",
            SpatialRelation::P => "P",
            SpatialRelation::PO => "PO",
        }
    }

    pub fn is_disjoint(&self) -> bool {
        !matches!(self, SpatialRelation::P | SpatialRelation::PO)
    }

    /// Collapses every directional `Di` to the bare `D`.
    pub fn undirected(self) -> Self {
        if self.is_disjoint() {
            SpatialRelation::D
        } else {
            self
        }
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpatialRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SpatialRelation::DIRECTIONAL
            .iter()
            .chain(std::iter::once(&SpatialRelation::D))
            .find(|r| r.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown spatial relation {s:?}")))
    }
}

/// Unordered entity pair stored in canonical order (`a < b`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub a: EntityRef,
    pub b: EntityRef,
}

impl PairKey {
    pub fn new(x: EntityRef, y: EntityRef) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(Self { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(Self { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationSeries {
    pub pair: PairKey,
    pub relations: Vec<SpatialRelation>,
}

/// A maximal frame interval over which one pair holds one relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Episode {
    pub pair: PairKey,
    pub relation: SpatialRelation,
    pub span: Interval,
}

/// Intersection area over the smaller rectangle's area.
pub fn overlap_ratio(a: &Rect, b: &Rect) -> f64 {
    let r = a.intersection_area(b) / a.area().min(b.area());
    r.clamp(0.0, 1.0)
}

pub fn distance_relation(ratio: f64, cfg: &QualConfig) -> DistanceRelation {
    if ratio <= cfg.tau_d {
        DistanceRelation::D
    } else if ratio >= cfg.tau_p {
        DistanceRelation::P
    } else {
        DistanceRelation::PO
    }
}

// tan(22.5°) and tan(67.5°).
const TAN_22_5: f64 = std::f64::consts::SQRT_2 - 1.0;
const TAN_67_5: f64 = std::f64::consts::SQRT_2 + 1.0;

/// Direction bin of `to` as seen from `from`.
///
/// The inclination from the zenith is folded over the vertical axis, so
/// upper-left and upper-right land in the same bin. Bin edges sit at
/// 22.5°, 67.5°, 112.5° and 157.5°; an angle exactly on an edge goes to
/// the lower bin. Edges are tested as slopes against the vertical rather
/// than through `atan2`, which keeps the mirror law exact away from edges.
pub fn direction_relation(from: Point2D, to: Point2D, cfg: &QualConfig) -> Result<DirectionBin> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let up = if cfg.up_is_negative_y { -dy } else { dy };
    let side = dx.abs();
    let bin = if up > 0.0 {
        if side <= TAN_22_5 * up {
            1
        } else if side <= TAN_67_5 * up {
            2
        } else {
            3
        }
    } else if up < 0.0 {
        let down = -up;
        if side < TAN_22_5 * down {
            5
        } else if side < TAN_67_5 * down {
            4
        } else {
            3
        }
    } else {
        3
    };
    Ok(DirectionBin(bin))
}

/// Direction is dropped when the pair overlaps.
pub fn spatial_relation(dist: DistanceRelation, dir: DirectionBin) -> SpatialRelation {
    match dist {
        DistanceRelation::PO => SpatialRelation::PO,
        DistanceRelation::P => SpatialRelation::P,
        DistanceRelation::D => match dir.0 {
            1 => SpatialRelation::D1,
            2 => SpatialRelation::D2,
            3 => SpatialRelation::D3,
            4 => SpatialRelation::D4,
            _ => SpatialRelation::D5,
        },
    }
}

/// Per-frame relations for every pair of scope joints and video objects.
///
/// Direction is only evaluated for disjoint pairs. When a disjoint pair's
/// centers coincide the previous frame's bin is reused; a coincidence with
/// no earlier bin is an error.
pub fn relation_series(
    video: &TrackedVideo,
    scope: &BodyPartSet,
    cfg: &QualConfig,
    scales: &PartScales,
    metrics: &BodyMetrics,
) -> Result<Vec<RelationSeries>> {
    let entities = scope.entities(&video.object_ids());
    let mut pairs = Vec::new();
    for i in 0..entities.len() {
        for j in i + 1..entities.len() {
            pairs.push(PairKey {
                a: entities[i].clone(),
                b: entities[j].clone(),
            });
        }
    }
    let mut series: Vec<RelationSeries> = pairs
        .into_iter()
        .map(|pair| RelationSeries {
            pair,
            relations: Vec::with_capacity(video.frames.len()),
        })
        .collect();
    let mut last_bin: Vec<Option<DirectionBin>> = vec![None; series.len()];

    for frame in &video.frames {
        let rects = entities
            .iter()
            .map(|e| entity_rect(frame, e, scales, metrics))
            .collect::<Result<Vec<Rect>>>()?;
        let mut k = 0;
        for i in 0..entities.len() {
            for j in i + 1..entities.len() {
                let dist = distance_relation(overlap_ratio(&rects[i], &rects[j]), cfg);
                let bin = if dist == DistanceRelation::D {
                    match direction_relation(rects[i].center, rects[j].center, cfg) {
                        Ok(b) => b,
                        Err(_) => last_bin[k].ok_or_else(|| Error::DirectionUnavailable {
                            pair: series[k].pair.to_string(),
                        })?,
                    }
                } else {
                    // Unused for overlapping pairs.
                    last_bin[k].unwrap_or(DirectionBin(3))
                };
                if dist == DistanceRelation::D {
                    last_bin[k] = Some(bin);
                }
                series[k].relations.push(spatial_relation(dist, bin));
                k += 1;
            }
        }
    }
    Ok(series)
}

fn runs(relations: &[SpatialRelation]) -> Vec<(SpatialRelation, usize)> {
    let mut out: Vec<(SpatialRelation, usize)> = Vec::new();
    for r in relations {
        match out.last_mut() {
            Some((last, n)) if last == r => *n += 1,
            _ => out.push((*r, 1)),
        }
    }
    out
}

/// Absorbs every run shorter than `d_min` into its predecessor (or its
/// successor at the start of the series) until no short run remains.
pub fn dwell_filter(series: &RelationSeries, cfg: &QualConfig) -> RelationSeries {
    let mut rs = runs(&series.relations);
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < rs.len() && rs.len() > 1 {
            if rs[i].1 >= cfg.d_min {
                i += 1;
                continue;
            }
            changed = true;
            if i == 0 {
                rs[1].1 += rs[0].1;
                rs.remove(0);
            } else {
                rs[i - 1].1 += rs[i].1;
                rs.remove(i);
                if i < rs.len() && rs[i].0 == rs[i - 1].0 {
                    rs[i - 1].1 += rs[i].1;
                    rs.remove(i);
                }
            }
        }
        if !changed {
            break;
        }
    }
    RelationSeries {
        pair: series.pair.clone(),
        relations: rs
            .into_iter()
            .flat_map(|(r, n)| std::iter::repeat_n(r, n))
            .collect(),
    }
}

/// Run-length encodes a relation series into episodes.
pub fn compress_episodes(series: &RelationSeries) -> Result<Vec<Episode>> {
    if series.relations.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut start = 0;
    Ok(runs(&series.relations)
        .into_iter()
        .map(|(relation, n)| {
            let ep = Episode {
                pair: series.pair.clone(),
                relation,
                span: Interval::new(start, start + n - 1).expect("run length >= 1"),
            };
            start += n;
            ep
        })
        .collect())
}

/// Inverse of [`compress_episodes`].
pub fn expand_episodes(episodes: &[Episode]) -> Vec<SpatialRelation> {
    episodes
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.relation, e.span.len()))
        .collect()
}

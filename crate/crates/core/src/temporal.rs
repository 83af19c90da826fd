//! Discrete interval relations with Allen's starts/during/finishes merged.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qualrel::{Episode, SpatialRelation};

/// Closed frame interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

#[allow(clippy::len_without_is_empty)]
impl Interval {
    pub fn new(start: usize, end: usize) -> Option<Self> {
        (start <= end).then_some(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn clip(&self, to: &Interval) -> Option<Interval> {
        Interval::new(self.start.max(to.start), self.end.min(to.end))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Forward interval relations after canonical ordering. `Sdf` merges
/// starts, during and finishes (in either direction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemporalRelation {
    Before,
    Meets,
    Overlaps,
    Sdf,
    Equals,
}

impl TemporalRelation {
    pub const ALL: [TemporalRelation; 5] = [
        TemporalRelation::Before,
        TemporalRelation::Meets,
        TemporalRelation::Overlaps,
        TemporalRelation::Sdf,
        TemporalRelation::Equals,
    ];

    pub fn is_symmetric(&self) -> bool {
        matches!(self, TemporalRelation::Equals)
    }

    pub fn name(&self) -> &'static str {
        match self {
            TemporalRelation::Before => "before",
            TemporalRelation::Meets => "meets",
            TemporalRelation::Overlaps => "overlaps",
            TemporalRelation::Sdf => "sdf",
            TemporalRelation::Equals => "equals",
        }
    }
}

impl fmt::Display for TemporalRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Relation of `x` to `y`; requires `(x.start, x.end) <= (y.start, y.end)`.
///
/// Frames are discrete: `x` meets `y` when `y` starts on the frame right
/// after `x` ends.
pub fn interval_relation(x: &Interval, y: &Interval) -> Result<TemporalRelation> {
    if (x.start, x.end) > (y.start, y.end) {
        return Err(Error::NonCanonical(format!("{x} after {y}")));
    }
    Ok(if x == y {
        TemporalRelation::Equals
    } else if x.end + 1 < y.start {
        TemporalRelation::Before
    } else if x.end + 1 == y.start {
        TemporalRelation::Meets
    } else if x.start < y.start && y.start <= x.end && x.end < y.end {
        TemporalRelation::Overlaps
    } else {
        TemporalRelation::Sdf
    })
}

/// Orders two distinct episodes by `(start, end, pair)` and relates them.
///
/// For `Equals` the two labels are additionally sorted so that the
/// unordered pair has a single form. Returns `(first, second, relation)`.
pub fn canonical_pair<'a>(
    p: &'a Episode,
    q: &'a Episode,
) -> (SpatialRelation, SpatialRelation, TemporalRelation) {
    let key = |e: &'a Episode| (e.span.start, e.span.end, &e.pair);
    let (first, second) = if key(p) <= key(q) { (p, q) } else { (q, p) };
    let rel = interval_relation(&first.span, &second.span).expect("ordered above");
    let (mut a, mut b) = (first.relation, second.relation);
    if rel.is_symmetric() && b < a {
        std::mem::swap(&mut a, &mut b);
    }
    (a, b, rel)
}

//! Qualitative spatio-temporal graphs over sliding windows of fragments,
//! the cell-graph dictionary and bag-of-cell-graphs features.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::body::{video_body_metrics, BodyPartSet, PartScales, Scope};
use crate::error::{Error, Result};
use crate::model::TrackedVideo;
use crate::qualrel::{
    compress_episodes, dwell_filter, relation_series, Episode, QualConfig, SpatialRelation,
};
use crate::temporal::{canonical_pair, Interval, TemporalRelation};

/// Maximal frame range over which no pair changes relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fragment {
    pub index: usize,
    pub frames: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub first_fragment: usize,
    pub last_fragment: usize,
    pub frames: Interval,
}

impl Window {
    pub fn fragment_count(&self) -> usize {
        self.last_fragment - self.first_fragment + 1
    }
}

/// Two spatial-relation labels joined by a temporal relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellGraph {
    pub first: SpatialRelation,
    pub second: SpatialRelation,
    pub temporal: TemporalRelation,
}

impl fmt::Display for CellGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.first, self.second, self.temporal)
    }
}

/// The multiset of cell graphs of one window and one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct QstGraph {
    pub window: Window,
    pub scope: Scope,
    pub cells: Vec<CellGraph>,
}

/// Ordered list of every canonical cell graph over a spatial alphabet.
#[derive(Debug, Clone)]
pub struct CellGraphDictionary {
    alphabet: Vec<SpatialRelation>,
    entries: Vec<CellGraph>,
    index: HashMap<CellGraph, usize>,
}

impl CellGraphDictionary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CellGraph] {
        &self.entries
    }

    pub fn alphabet(&self) -> &[SpatialRelation] {
        &self.alphabet
    }

    pub fn position(&self, cell: &CellGraph) -> Option<usize> {
        self.index.get(cell).copied()
    }
}

/// Enumerates all canonical cell graphs, temporal-major then by labels.
///
/// Asymmetric relations take every ordered label pair; `Equals` takes each
/// unordered pair once.
pub fn build_dictionary(alphabet: &[SpatialRelation]) -> CellGraphDictionary {
    let mut labels = alphabet.to_vec();
    labels.sort();
    labels.dedup();
    let mut entries = Vec::new();
    for temporal in TemporalRelation::ALL {
        for (i, &first) in labels.iter().enumerate() {
            let seconds = if temporal.is_symmetric() { &labels[i..] } else { &labels[..] };
            for &second in seconds {
                entries.push(CellGraph {
                    first,
                    second,
                    temporal,
                });
            }
        }
    }
    let index = entries.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    CellGraphDictionary {
        alphabet: labels,
        entries,
        index,
    }
}

/// Closed-form count with one cell per label for each symmetric relation:
/// `n_s² · n_at + n_s · n_st`. This undercounts the unordered label pairs
/// of symmetric relations and is kept only as a reference figure.
pub fn nominal_cell_graph_count(n_s: usize, n_at: usize, n_st: usize) -> usize {
    n_s * n_s * n_at + n_s * n_st
}

/// Size of the enumerated dictionary: `n_s² · n_at + n_s(n_s+1)/2 · n_st`.
pub fn enumerated_cell_graph_count(n_s: usize, n_at: usize, n_st: usize) -> usize {
    n_s * n_s * n_at + n_s * (n_s + 1) / 2 * n_st
}

/// Splits the frame range at every episode start.
pub fn segment_fragments(episodes: &[Episode]) -> Result<Vec<Fragment>> {
    let last = episodes
        .iter()
        .map(|e| e.span.end)
        .max()
        .ok_or_else(|| Error::Segmentation("no episodes to segment".into()))?;
    let mut bounds: BTreeSet<usize> = episodes.iter().map(|e| e.span.start).collect();
    bounds.insert(0);
    let starts: Vec<usize> = bounds.into_iter().collect();
    Ok(starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let e = starts.get(i + 1).map_or(last, |n| n - 1);
            Fragment {
                index: i,
                frames: Interval { start: s, end: e },
            }
        })
        .collect())
}

/// Windows of `l_w` fragments stepped by `l_s` fragments.
///
/// Fewer than `l_w` fragments give a single window over all of them. If
/// the last full window stops short of the final fragment, the next
/// stepped start yields one trailing partial window, kept only when it
/// spans at least two fragments.
pub fn sliding_windows(fragments: &[Fragment], l_w: usize, l_s: usize) -> Result<Vec<Window>> {
    if fragments.is_empty() {
        return Err(Error::Segmentation("zero fragments".into()));
    }
    if l_w < 2 || l_s < 1 {
        return Err(Error::Config(format!("need l_w >= 2 and l_s >= 1, got {l_w}, {l_s}")));
    }
    let f = fragments.len();
    let window = |a: usize, b: usize| Window {
        first_fragment: a,
        last_fragment: b,
        frames: Interval {
            start: fragments[a].frames.start,
            end: fragments[b].frames.end,
        },
    };
    if f < l_w {
        return Ok(vec![window(0, f - 1)]);
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + l_w <= f {
        out.push(window(start, start + l_w - 1));
        start += l_s;
    }
    let covered = out.last().map_or(0, |w| w.last_fragment + 1);
    if covered < f && start < f && f - start >= 2 {
        out.push(window(start, f - 1));
    }
    Ok(out)
}

/// The single window spanning every fragment.
pub fn whole_video_window(fragments: &[Fragment]) -> Result<Window> {
    let last = fragments
        .last()
        .ok_or_else(|| Error::Segmentation("zero fragments".into()))?;
    Ok(Window {
        first_fragment: 0,
        last_fragment: last.index,
        frames: Interval {
            start: fragments[0].frames.start,
            end: last.frames.end,
        },
    })
}

/// Relates every unordered pair of episodes clipped to the window.
pub fn build_qst_graph(window: &Window, scope: Scope, episodes: &[Episode]) -> QstGraph {
    let clipped: Vec<Episode> = episodes
        .iter()
        .filter_map(|e| {
            e.span.clip(&window.frames).map(|span| Episode {
                pair: e.pair.clone(),
                relation: e.relation,
                span,
            })
        })
        .collect();
    let mut cells = Vec::with_capacity(clipped.len() * clipped.len().saturating_sub(1) / 2);
    for i in 0..clipped.len() {
        for j in i + 1..clipped.len() {
            let (first, second, temporal) = canonical_pair(&clipped[i], &clipped[j]);
            cells.push(CellGraph {
                first,
                second,
                temporal,
            });
        }
    }
    QstGraph {
        window: *window,
        scope,
        cells,
    }
}

/// Histogram of a graph's cells over the dictionary.
pub fn featurize(graph: &QstGraph, dict: &CellGraphDictionary) -> Result<Vec<u32>> {
    let mut counts = vec![0u32; dict.len()];
    for c in &graph.cells {
        let j = dict
            .position(c)
            .ok_or_else(|| Error::UnknownCellGraph(c.to_string()))?;
        counts[j] += 1;
    }
    Ok(counts)
}

/// Concatenated per-scope cell-graph histograms of one window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector {
    pub counts: Vec<u32>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Linear bag-of-cell-graphs kernel.
pub fn bocg_kernel(u: &FeatureVector, v: &FeatureVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(u.counts
        .iter()
        .zip(&v.counts)
        .map(|(&a, &b)| a as f64 * b as f64)
        .sum())
}

/// Which body scopes contribute feature blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// Whole body, upper body and lower body blocks.
    Full,
    WholeOnly,
    UpperOnly,
    LowerOnly,
}

impl Decomposition {
    pub fn scopes(&self) -> &'static [Scope] {
        match self {
            Decomposition::Full => &[Scope::Whole, Scope::Upper, Scope::Lower],
            Decomposition::WholeOnly => &[Scope::Whole],
            Decomposition::UpperOnly => &[Scope::Upper],
            Decomposition::LowerOnly => &[Scope::Lower],
        }
    }
}

/// Everything that shapes the graph features of a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub qual: QualConfig,
    pub scales: PartScales,
    pub use_direction: bool,
    pub decomposition: Decomposition,
    pub l_w: usize,
    pub l_s: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            qual: QualConfig::default(),
            scales: PartScales::default(),
            use_direction: true,
            decomposition: Decomposition::Full,
            l_w: 4,
            l_s: 1,
        }
    }
}

impl GraphConfig {
    pub fn alphabet(&self) -> &'static [SpatialRelation] {
        if self.use_direction {
            &SpatialRelation::DIRECTIONAL
        } else {
            &SpatialRelation::UNDIRECTED
        }
    }

    pub fn dictionary(&self) -> CellGraphDictionary {
        build_dictionary(self.alphabet())
    }

    pub fn feature_length(&self) -> usize {
        self.dictionary().len() * self.decomposition.scopes().len()
    }
}

/// Filtered episodes of one scope.
#[derive(Debug, Clone)]
pub struct ScopedEpisodes {
    pub scope: Scope,
    pub episodes: Vec<Episode>,
}

/// Episodes, fragments and windows extracted from one video.
#[derive(Debug, Clone)]
pub struct VideoEpisodes {
    pub frame_count: usize,
    pub scopes: Vec<ScopedEpisodes>,
    pub fragments: Vec<Fragment>,
}

impl VideoEpisodes {
    /// Relations, jitter filtering and compression for every configured scope.
    /// Fragments are cut wherever any pair of any scope changes relation.
    pub fn extract(video: &TrackedVideo, cfg: &GraphConfig) -> Result<Self> {
        let metrics = video_body_metrics(video)?;
        let mut scopes = Vec::new();
        for &scope in cfg.decomposition.scopes() {
            let parts = BodyPartSet::for_scope(scope);
            let mut episodes = Vec::new();
            for mut s in relation_series(video, &parts, &cfg.qual, &cfg.scales, &metrics)? {
                if !cfg.use_direction {
                    s.relations.iter_mut().for_each(|r| *r = r.undirected());
                }
                episodes.extend(compress_episodes(&dwell_filter(&s, &cfg.qual))?);
            }
            scopes.push(ScopedEpisodes { scope, episodes });
        }
        let all: Vec<Episode> = scopes.iter().flat_map(|s| s.episodes.iter().cloned()).collect();
        let fragments = segment_fragments(&all).map_err(|e| match e {
            Error::Segmentation(m) => {
                Error::Segmentation(format!("video {}: {m} (no entity pairs)", video.video_id))
            }
            other => other,
        })?;
        Ok(Self {
            frame_count: video.frame_count(),
            scopes,
            fragments,
        })
    }

    pub fn windows(&self, cfg: &GraphConfig) -> Result<Vec<Window>> {
        sliding_windows(&self.fragments, cfg.l_w, cfg.l_s)
    }

    pub fn whole_window(&self) -> Result<Window> {
        whole_video_window(&self.fragments)
    }
}

/// Per-scope histograms of one window, concatenated in scope order.
pub fn hierarchical_features(
    episodes: &VideoEpisodes,
    window: &Window,
    dict: &CellGraphDictionary,
) -> Result<FeatureVector> {
    let mut counts = Vec::with_capacity(dict.len() * episodes.scopes.len());
    for s in &episodes.scopes {
        let g = build_qst_graph(window, s.scope, &s.episodes);
        counts.extend(featurize(&g, dict)?);
    }
    Ok(FeatureVector { counts })
}

/// Column names of a feature vector, `<scope>:<cell graph>`.
pub fn feature_columns(cfg: &GraphConfig) -> Vec<String> {
    let dict = cfg.dictionary();
    cfg.decomposition
        .scopes()
        .iter()
        .flat_map(|s| dict.entries().iter().map(move |c| format!("{}:{c}", s.name())))
        .collect()
}

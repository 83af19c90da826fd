use rayon::prelude::*;

use crate::error::Result;
use crate::graph::{hierarchical_features, CellGraphDictionary, FeatureVector, GraphConfig, VideoEpisodes, Window};
use crate::model::{Dataset, TrackedVideo};

/// Window features of one video plus its whole-video feature.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub video_id: String,
    pub subject_id: String,
    pub class_index: usize,
    pub windows: Vec<Window>,
    pub features: Vec<FeatureVector>,
    pub whole: FeatureVector,
}

pub fn video_features(
    video: &TrackedVideo,
    cfg: &GraphConfig,
    dict: &CellGraphDictionary,
) -> Result<VideoFeatures> {
    let episodes = VideoEpisodes::extract(video, cfg)?;
    let windows = episodes.windows(cfg)?;
    let features = windows
        .iter()
        .map(|w| hierarchical_features(&episodes, w, dict))
        .collect::<Result<Vec<_>>>()?;
    let whole = hierarchical_features(&episodes, &episodes.whole_window()?, dict)?;
    Ok(VideoFeatures {
        video_id: video.video_id.clone(),
        subject_id: video.subject_id.clone(),
        class_index: video.label.class_index,
        windows,
        features,
        whole,
    })
}

/// Features of every video, in dataset order. Videos are processed in parallel.
pub fn dataset_features(dataset: &Dataset, cfg: &GraphConfig) -> Result<Vec<VideoFeatures>> {
    let dict = cfg.dictionary();
    dataset
        .videos
        .par_iter()
        .map(|v| video_features(v, cfg, &dict))
        .collect()
}

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use super::features::{video_features, VideoFeatures};
use crate::body::Scope;
use crate::error::{Error, Result};
use crate::graph::{bocg_kernel, FeatureVector};
use crate::hmm::{baum_welch_fit, classify, ClassModels, LabeledHmm, ObservationSequence};
use crate::model::{ActivityLabel, TrackedVideo};
use crate::qualrel::SpatialRelation;
use crate::vocab::{collect_distinct, kmeans_fit, Codebook};

pub const BUNDLE_VERSION: u32 = 1;

/// Shape of the feature space a bundle was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub alphabet: Vec<SpatialRelation>,
    pub cells: usize,
    pub scopes: Vec<Scope>,
    pub feature_length: usize,
}

impl DictionaryMeta {
    fn of(cfg: &PipelineConfig) -> Self {
        let dict = cfg.graph.dictionary();
        let scopes = cfg.graph.decomposition.scopes().to_vec();
        Self {
            alphabet: dict.alphabet().to_vec(),
            cells: dict.len(),
            feature_length: dict.len() * scopes.len(),
            scopes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub video_id: String,
    pub class_index: usize,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    /// Codebook words scored by one HMM per class.
    Hmm {
        codebook: Codebook,
        /// SHA-256 of the codebook's JSON encoding.
        codebook_ref: String,
        models: ClassModels,
    },
    /// Whole-video features compared by kernel-induced distance.
    NearestNeighbor { exemplars: Vec<Exemplar> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub config: PipelineConfig,
    pub labels: Vec<String>,
    pub dictionary: DictionaryMeta,
    pub classifier: Classifier,
}

pub fn codebook_ref(codebook: &Codebook) -> Result<String> {
    let bytes = serde_json::to_vec(codebook)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl ModelBundle {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Serialization(m));
        if self.version != BUNDLE_VERSION {
            return bad(format!("bundle version {} is not {BUNDLE_VERSION}", self.version));
        }
        if self.dictionary != DictionaryMeta::of(&self.config) {
            return bad("dictionary metadata disagrees with the configuration".into());
        }
        let n = self.dictionary.feature_length;
        match &self.classifier {
            Classifier::Hmm {
                codebook,
                codebook_ref: r,
                models,
            } => {
                if codebook.feature_length != n {
                    return bad(format!("codebook expects {} features, dictionary {n}", codebook.feature_length));
                }
                if *r != codebook_ref(codebook)? {
                    return bad("codebook_ref does not match the codebook".into());
                }
                if models.models.len() != self.labels.len() {
                    return bad("one model per label expected".into());
                }
                for m in &models.models {
                    m.hmm.validate()?;
                    if m.hmm.n_symbols != codebook.k {
                        return bad(format!("model {} has {} symbols, K = {}", m.label.name, m.hmm.n_symbols, codebook.k));
                    }
                }
            }
            Classifier::NearestNeighbor { exemplars } => {
                if exemplars.iter().any(|e| e.features.len() != n || e.class_index >= self.labels.len()) {
                    return bad("exemplar does not fit the dictionary or label table".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn label(&self, class_index: usize) -> ActivityLabel {
        ActivityLabel {
            class_index,
            name: self.labels[class_index].clone(),
        }
    }
}

fn class_seed(seed: u64, class_index: usize) -> u64 {
    seed ^ (class_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits the codebook and class models on precomputed features.
///
/// `labels[i]` names class `i`; every class needs at least one video.
pub fn train_from_features(
    cfg: &PipelineConfig,
    labels: &[String],
    videos: &[&VideoFeatures],
    seed: u64,
) -> Result<ModelBundle> {
    cfg.validate()?;
    for (c, name) in labels.iter().enumerate() {
        if !videos.iter().any(|v| v.class_index == c) {
            return Err(Error::Training(format!("class {name} has no training videos")));
        }
    }
    if let Some(v) = videos.iter().find(|v| v.class_index >= labels.len()) {
        return Err(Error::Training(format!("video {} has an unknown class", v.video_id)));
    }
    let classifier = if cfg.use_dynamics {
        let all: Vec<FeatureVector> = videos.iter().flat_map(|v| v.features.iter().cloned()).collect();
        let distinct = collect_distinct(&all)?;
        log::debug!("{} windows, {} distinct", all.len(), distinct.len());
        let codebook = kmeans_fit(&distinct, &cfg.kmeans, seed)?.codebook;
        let models = (0..labels.len())
            .into_par_iter()
            .map(|c| {
                let seqs = videos
                    .iter()
                    .filter(|v| v.class_index == c)
                    .map(|v| {
                        let words = codebook.encode(&v.features)?;
                        ObservationSequence::new(words.into_iter().map(|w| w.0).collect())
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Training(format!("class {}: {e}", labels[c])))?;
                let fit = baum_welch_fit(&seqs, codebook.k, &cfg.hmm, class_seed(seed, c))?;
                Ok(LabeledHmm {
                    label: ActivityLabel {
                        class_index: c,
                        name: labels[c].clone(),
                    },
                    hmm: fit.model,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Classifier::Hmm {
            codebook_ref: codebook_ref(&codebook)?,
            codebook,
            models: ClassModels { models },
        }
    } else {
        Classifier::NearestNeighbor {
            exemplars: videos
                .iter()
                .map(|v| Exemplar {
                    video_id: v.video_id.clone(),
                    class_index: v.class_index,
                    features: v.whole.clone(),
                })
                .collect(),
        }
    };
    Ok(ModelBundle {
        version: BUNDLE_VERSION,
        config: cfg.clone(),
        labels: labels.to_vec(),
        dictionary: DictionaryMeta::of(cfg),
        classifier,
    })
}

/// Trains on every video of the dataset with the configured seed.
pub fn train_pipeline(cfg: &PipelineConfig, dataset: &crate::model::Dataset) -> Result<ModelBundle> {
    cfg.validate()?;
    let feats = super::features::dataset_features(dataset, &cfg.graph)?;
    let refs: Vec<&VideoFeatures> = feats.iter().collect();
    train_from_features(cfg, &dataset.labels, &refs, cfg.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ActivityLabel,
    /// Per-class log-likelihoods, or negated nearest distances without dynamics.
    pub scores: Vec<f64>,
    /// Codebook words of the video's windows; empty without dynamics.
    pub words: Vec<usize>,
}

fn kernel_distance(u: &FeatureVector, v: &FeatureVector) -> Result<f64> {
    Ok(bocg_kernel(u, u)? + bocg_kernel(v, v)? - 2.0 * bocg_kernel(u, v)?)
}

pub fn predict_features(bundle: &ModelBundle, video: &VideoFeatures) -> Result<Prediction> {
    match &bundle.classifier {
        Classifier::Hmm { codebook, models, .. } => {
            if video.features.is_empty() {
                return Err(Error::Segmentation(format!("video {} produced no windows", video.video_id)));
            }
            let words: Vec<usize> = codebook.encode(&video.features)?.into_iter().map(|w| w.0).collect();
            let c = classify(models, &ObservationSequence::new(words.clone())?)?;
            Ok(Prediction {
                label: c.label,
                scores: c.scores,
                words,
            })
        }
        Classifier::NearestNeighbor { exemplars } => {
            let mut scores = vec![f64::NEG_INFINITY; bundle.labels.len()];
            for e in exemplars {
                let s = -kernel_distance(&e.features, &video.whole)?;
                if s > scores[e.class_index] {
                    scores[e.class_index] = s;
                }
            }
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            Ok(Prediction {
                label: bundle.label(best),
                scores,
                words: Vec::new(),
            })
        }
    }
}

/// Featurizes the video exactly as in training and classifies it.
pub fn predict(bundle: &ModelBundle, video: &TrackedVideo) -> Result<Prediction> {
    let dict = bundle.config.graph.dictionary();
    let f = video_features(video, &bundle.config.graph, &dict)?;
    predict_features(bundle, &f)
}

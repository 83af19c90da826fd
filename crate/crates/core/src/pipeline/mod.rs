//! End-to-end training, prediction and leave-one-subject-out evaluation.

mod config;
mod evaluate;
mod features;
mod train;

pub use config::{PipelineConfig, Variant};
pub use evaluate::{
    compute_metrics, evaluate_loso, evaluate_loso_features, shuffle_labels, EvaluationReport, FoldResult,
    Metrics, RepeatResult, VideoOutcome,
};
pub use features::{dataset_features, video_features, VideoFeatures};
pub use train::{
    codebook_ref, predict, predict_features, train_from_features, train_pipeline, Classifier,
    DictionaryMeta, Exemplar, ModelBundle, Prediction, BUNDLE_VERSION,
};

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use super::features::{dataset_features, VideoFeatures};
use super::train::{predict_features, train_from_features};
use crate::error::{Error, Result};
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Unweighted mean over classes; a class never predicted counts as 0.
    pub precision: f64,
    /// Unweighted mean over classes that occur in the truth.
    pub recall: f64,
}

/// Accuracy and macro precision/recall of a confusion matrix (rows = truth).
pub fn compute_metrics(confusion: &[Vec<u64>]) -> Result<Metrics> {
    let c = confusion.len();
    if c == 0 || confusion.iter().any(|r| r.len() != c) {
        return Err(Error::Evaluation("confusion matrix must be square and non-empty".into()));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::Evaluation("confusion matrix is all zero".into()));
    }
    let diag: u64 = (0..c).map(|i| confusion[i][i]).sum();
    let mut precision = 0.0;
    let mut recall = 0.0;
    let mut present = 0usize;
    for i in 0..c {
        let col: u64 = confusion.iter().map(|r| r[i]).sum();
        let row: u64 = confusion[i].iter().sum();
        if col > 0 {
            precision += confusion[i][i] as f64 / col as f64;
        }
        if row > 0 {
            recall += confusion[i][i] as f64 / row as f64;
            present += 1;
        }
    }
    Ok(Metrics {
        accuracy: diag as f64 / total as f64,
        precision: precision / c as f64,
        recall: recall / present as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoOutcome {
    pub video_id: String,
    pub truth: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub seed: u64,
    pub test_subject: String,
    pub accuracy: f64,
    pub outcomes: Vec<VideoOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub confusion: Vec<Vec<u64>>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: PipelineConfig,
    pub labels: Vec<String>,
    pub subjects: Vec<String>,
    pub mean: Metrics,
    /// Sample standard deviation over repeats; zero for a single repeat.
    pub std: Metrics,
    /// Sum of the per-repeat matrices.
    pub confusion: Vec<Vec<u64>>,
    pub repeats: Vec<RepeatResult>,
    pub folds: Vec<FoldResult>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Summary lines followed by the pooled confusion matrix, rows = truth.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "repeats: {}  folds per repeat: {}",
            self.repeats.len(),
            self.subjects.len()
        );
        for (name, m, s) in [
            ("accuracy", self.mean.accuracy, self.std.accuracy),
            ("precision", self.mean.precision, self.std.precision),
            ("recall", self.mean.recall, self.std.recall),
        ] {
            let _ = writeln!(out, "{name:<10} {m:.4} ± {s:.4}");
        }
        out.push('\n');
        let corner = "truth\\pred";
        let first = self
            .labels
            .iter()
            .map(|l| l.chars().count())
            .chain([corner.len()])
            .max()
            .unwrap_or(0);
        let width = self
            .labels
            .iter()
            .map(|l| l.chars().count())
            .chain(self.confusion.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(1);
        let _ = write!(out, "{corner:<first$}");
        for l in &self.labels {
            let _ = write!(out, "  {l:>width$}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            let _ = write!(out, "{l:<first$}");
            for v in row {
                let _ = write!(out, "  {v:>width$}");
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<path>` as JSON and `<path>.txt` with the text rendering.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))?;
        let mut txt = path.as_os_str().to_owned();
        txt.push(".txt");
        let txt = Path::new(&txt);
        std::fs::write(txt, self.to_text()).map_err(|e| Error::io(txt, e))
    }
}

/// The dataset with its video labels permuted by a seeded shuffle.
pub fn shuffle_labels(dataset: &Dataset, seed: u64) -> Dataset {
    let mut labels: Vec<_> = dataset.videos.iter().map(|v| v.label.clone()).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = dataset.clone();
    for (v, l) in out.videos.iter_mut().zip(labels) {
        v.label = l;
    }
    out
}

/// Leave-one-subject-out evaluation over `repeats` seeds.
pub fn evaluate_loso(cfg: &PipelineConfig, dataset: &Dataset, repeats: usize) -> Result<EvaluationReport> {
    cfg.validate()?;
    let feats = dataset_features(dataset, &cfg.graph)?;
    evaluate_loso_features(cfg, dataset, &feats, repeats)
}

/// As [`evaluate_loso`] with features computed by the caller under
/// `cfg.graph`. Labels are taken from `dataset`, so relabeled copies of a
/// dataset can share one feature set.
///
/// Repeat `r` uses seed `cfg.seed + r`. Folds run in parallel; results are
/// ordered by repeat, then subject.
pub fn evaluate_loso_features(
    cfg: &PipelineConfig,
    dataset: &Dataset,
    feats: &[VideoFeatures],
    repeats: usize,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    if repeats == 0 {
        return Err(Error::Evaluation("repeats must be positive".into()));
    }
    if feats.len() != dataset.videos.len()
        || feats.iter().zip(&dataset.videos).any(|(f, v)| f.video_id != v.video_id)
    {
        return Err(Error::Evaluation("features do not match the dataset videos".into()));
    }
    let subjects = dataset.subjects();
    if subjects.len() < 2 {
        return Err(Error::Evaluation(format!(
            "leave-one-subject-out needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    let feats: Vec<VideoFeatures> = feats
        .iter()
        .zip(&dataset.videos)
        .map(|(f, v)| VideoFeatures {
            class_index: v.label.class_index,
            ..f.clone()
        })
        .collect();
    let tasks: Vec<(usize, &String)> = (0..repeats).flat_map(|r| subjects.iter().map(move |s| (r, s))).collect();
    let folds = tasks
        .par_iter()
        .map(|&(repeat, subject)| {
            let seed = cfg.seed.wrapping_add(repeat as u64);
            let (test, train): (Vec<&VideoFeatures>, Vec<&VideoFeatures>) =
                feats.iter().partition(|f| &f.subject_id == subject);
            let bundle = train_from_features(cfg, &dataset.labels, &train, seed).map_err(|e| {
                Error::Evaluation(format!("repeat {repeat}, held-out subject {subject}: {e}"))
            })?;
            let outcomes = test
                .iter()
                .map(|f| {
                    Ok(VideoOutcome {
                        video_id: f.video_id.clone(),
                        truth: f.class_index,
                        predicted: predict_features(&bundle, f)?.label.class_index,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let correct = outcomes.iter().filter(|o| o.truth == o.predicted).count();
            Ok(FoldResult {
                repeat,
                seed,
                test_subject: subject.clone(),
                accuracy: correct as f64 / outcomes.len() as f64,
                outcomes,
            })
        })
        .collect::<Result<Vec<FoldResult>>>()?;

    let c = dataset.class_count();
    let mut pooled = vec![vec![0u64; c]; c];
    let mut per_repeat = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut m = vec![vec![0u64; c]; c];
        for o in folds.iter().filter(|f| f.repeat == repeat).flat_map(|f| &f.outcomes) {
            m[o.truth][o.predicted] += 1;
            pooled[o.truth][o.predicted] += 1;
        }
        per_repeat.push(RepeatResult {
            repeat,
            seed: cfg.seed.wrapping_add(repeat as u64),
            metrics: compute_metrics(&m)?,
            confusion: m,
        });
    }
    let stat = |f: fn(&Metrics) -> f64| mean_std(&per_repeat.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
    let (acc, acc_sd) = stat(|m| m.accuracy);
    let (prec, prec_sd) = stat(|m| m.precision);
    let (rec, rec_sd) = stat(|m| m.recall);
    Ok(EvaluationReport {
        config: cfg.clone(),
        labels: dataset.labels.clone(),
        subjects,
        mean: Metrics {
            accuracy: acc,
            precision: prec,
            recall: rec,
        },
        std: Metrics {
            accuracy: acc_sd,
            precision: prec_sd,
            recall: rec_sd,
        },
        confusion: pooled,
        repeats: per_repeat,
        folds,
    })
}

//! K-means codebook over window feature vectors.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeatureVector;

pub const CODEBOOK_VERSION: u32 = 1;

/// How feature counts are turned into points before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    #[default]
    Counts,
    L1,
}

impl NormMode {
    pub fn apply(&self, v: &FeatureVector) -> Vec<f64> {
        let x: Vec<f64> = v.counts.iter().map(|&c| c as f64).collect();
        match self {
            NormMode::Counts => x,
            NormMode::L1 => {
                let s: f64 = x.iter().sum();
                if s > 0.0 {
                    x.into_iter().map(|c| c / s).collect()
                } else {
                    x
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub norm_mode: NormMode,
    pub feature_length: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl Codebook {
    /// Nearest centroid by Euclidean distance; ties go to the lowest index.
    pub fn assign(&self, v: &FeatureVector) -> Result<WordId> {
        self.encode(std::slice::from_ref(v)).map(|w| w[0])
    }

    pub fn encode(&self, vectors: &[FeatureVector]) -> Result<Vec<WordId>> {
        let c_norms = norms(&self.centroids);
        vectors
            .iter()
            .map(|v| {
                if v.len() != self.feature_length {
                    return Err(Error::LengthMismatch {
                        expected: self.feature_length,
                        actual: v.len(),
                    });
                }
                let x = Sparse::new(&self.norm_mode.apply(v));
                Ok(WordId(nearest(&self.centroids, &c_norms, &x).0))
            })
            .collect()
    }
}

/// Tuning for [`kmeans_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    pub norm_mode: NormMode,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 38,
            max_iter: 100,
            tol: 1e-6,
            norm_mode: NormMode::Counts,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Cluster of each fitted point.
    pub labels: Vec<usize>,
    /// Inertia after every assignment step.
    pub inertia: Vec<f64>,
}

/// Removes exact duplicates, keeping first occurrences in order.
pub fn collect_distinct(vectors: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
    if vectors.is_empty() {
        return Err(Error::Quantization("no feature vectors to collect".into()));
    }
    let mut seen = HashSet::new();
    Ok(vectors
        .iter()
        .filter(|v| seen.insert(*v))
        .cloned()
        .collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Non-zero coordinates of a point with its squared norm.
struct Sparse {
    idx: Vec<usize>,
    val: Vec<f64>,
    norm2: f64,
}

impl Sparse {
    fn new(x: &[f64]) -> Self {
        let (idx, val): (Vec<usize>, Vec<f64>) =
            x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).unzip();
        let norm2 = val.iter().map(|v| v * v).sum();
        Self { idx, val, norm2 }
    }

    /// `|x - c|^2` expanded as `|x|^2 + |c|^2 - 2 x.c`, clamped at zero.
    fn sq_dist(&self, c: &[f64], c_norm2: f64) -> f64 {
        let dot: f64 = self.idx.iter().zip(&self.val).map(|(&i, v)| v * c[i]).sum();
        (self.norm2 + c_norm2 - 2.0 * dot).max(0.0)
    }
}

fn norms(centroids: &[Vec<f64>]) -> Vec<f64> {
    centroids.iter().map(|c| c.iter().map(|v| v * v).sum()).collect()
}

fn nearest(centroids: &[Vec<f64>], c_norms: &[f64], x: &Sparse) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, (c, n)) in centroids.iter().zip(c_norms).enumerate() {
        let d = x.sq_dist(c, *n);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_init(points: &[Vec<f64>], sparse: &[Sparse], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = sparse.iter().map(|p| p.sq_dist(&points[first], sparse[first].norm2)).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..points.len())
        };
        for (p, d) in sparse.iter().zip(d2.iter_mut()) {
            *d = d.min(p.sq_dist(&points[pick], sparse[pick].norm2));
        }
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Seeded k-means++ followed by Lloyd iterations.
///
/// Callers pass the deduplicated vectors. An emptied cluster is reseeded at
/// the point farthest from its current centroid.
pub fn kmeans_fit(vectors: &[FeatureVector], cfg: &KMeansConfig, seed: u64) -> Result<KMeansFit> {
    if vectors.is_empty() {
        return Err(Error::Quantization("no feature vectors to cluster".into()));
    }
    let feature_length = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != feature_length) {
        return Err(Error::LengthMismatch {
            expected: feature_length,
            actual: v.len(),
        });
    }
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| cfg.norm_mode.apply(v)).collect();
    let distinct = {
        let mut seen = HashSet::new();
        points
            .iter()
            .filter(|p| seen.insert(p.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
            .count()
    };
    if cfg.k == 0 || cfg.k > distinct {
        return Err(Error::Quantization(format!(
            "K = {} but only {distinct} distinct feature vectors are available; lower K or add training data",
            cfg.k
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sparse: Vec<Sparse> = points.iter().map(|p| Sparse::new(p)).collect();
    let mut centroids = plus_plus_init(&points, &sparse, cfg.k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut inertia = Vec::new();
    let dim = feature_length;

    for _ in 0..cfg.max_iter.max(1) {
        let c_norms = norms(&centroids);
        let mut total = 0.0;
        for (p, l) in sparse.iter().zip(labels.iter_mut()) {
            let (c, d) = nearest(&centroids, &c_norms, p);
            *l = c;
            total += d;
        }
        inertia.push(total);

        let mut sums = vec![vec![0.0; dim]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (p, &l) in sparse.iter().zip(&labels) {
            counts[l] += 1;
            for (&i, x) in p.idx.iter().zip(&p.val) {
                sums[l][i] += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in (0..cfg.k).filter(|&c| counts[c] > 0) {
            let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&mean, &centroids[c]).sqrt());
            centroids[c] = mean;
        }
        let empty: Vec<usize> = (0..cfg.k).filter(|&c| counts[c] == 0).collect();
        for &c in &empty {
            // Farthest point from its own centroid.
            let c_norms = norms(&centroids);
            let far = sparse
                .iter()
                .zip(&labels)
                .enumerate()
                .map(|(i, (p, &l))| (i, p.sq_dist(&centroids[l], c_norms[l])))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                .0;
            centroids[c] = points[far].clone();
            labels[far] = c;
        }
        if empty.is_empty() && shift < cfg.tol {
            break;
        }
    }
    // Final labels agree with `assign` on the returned centroids.
    let c_norms = norms(&centroids);
    let mut total = 0.0;
    for (p, l) in sparse.iter().zip(labels.iter_mut()) {
        let (c, d) = nearest(&centroids, &c_norms, p);
        *l = c;
        total += d;
    }
    inertia.push(total);

    Ok(KMeansFit {
        codebook: Codebook {
            version: CODEBOOK_VERSION,
            k: cfg.k,
            seed,
            norm_mode: cfg.norm_mode,
            feature_length,
            centroids,
        },
        labels,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[u32]) -> FeatureVector {
        FeatureVector { counts: v.to_vec() }
    }

    fn cfg(k: usize) -> KMeansConfig {
        KMeansConfig {
            k,
            ..Default::default()
        }
    }

    fn sample() -> Vec<FeatureVector> {
        vec![
            fv(&[0, 0, 1]),
            fv(&[1, 0, 0]),
            fv(&[5, 5, 0]),
            fv(&[6, 5, 1]),
            fv(&[0, 9, 9]),
            fv(&[1, 8, 9]),
        ]
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let (v, w) = (fv(&[1, 2]), fv(&[3, 4]));
        assert_eq!(collect_distinct(&[v.clone(), v.clone(), w.clone()]).unwrap(), vec![v, w]);
        assert_eq!(collect_distinct(&sample()).unwrap(), sample());
        assert!(collect_distinct(&[]).is_err());
    }

    #[test]
    fn saturated_k_has_zero_inertia() {
        let fit = kmeans_fit(&sample(), &cfg(6), 7).unwrap();
        assert_eq!(*fit.inertia.last().unwrap(), 0.0);
        let mut labels = fit.labels.clone();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 6);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let fit = kmeans_fit(&sample(), &cfg(1), 3).unwrap();
        let c = &fit.codebook.centroids[0];
        let expect = [13.0 / 6.0, 27.0 / 6.0, 20.0 / 6.0];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let a = kmeans_fit(&sample(), &cfg(3), 11).unwrap();
        let b = kmeans_fit(&sample(), &cfg(3), 11).unwrap();
        assert_eq!(a.codebook, b.codebook);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let err = kmeans_fit(&[fv(&[1]), fv(&[1]), fv(&[2])], &cfg(3), 0).unwrap_err();
        assert!(err.to_string().contains("lower K"), "{err}");
    }

    #[test]
    fn assign_exact_and_tie() {
        let cb = Codebook {
            version: CODEBOOK_VERSION,
            k: 5,
            seed: 0,
            norm_mode: NormMode::Counts,
            feature_length: 1,
            centroids: vec![vec![100.0], vec![0.0], vec![50.0], vec![7.0], vec![4.0]],
        };
        assert_eq!(cb.assign(&fv(&[7])).unwrap(), WordId(3));
        assert_eq!(cb.assign(&fv(&[2])).unwrap(), WordId(1));
        assert!(cb.assign(&fv(&[1, 2])).is_err());
    }

    #[test]
    fn training_points_reassign_to_fit_labels() {
        let fit = kmeans_fit(&sample(), &cfg(3), 5).unwrap();
        for (v, &l) in sample().iter().zip(&fit.labels) {
            assert_eq!(fit.codebook.assign(v).unwrap(), WordId(l));
        }
    }

    #[test]
    fn l1_mode_normalizes() {
        assert_eq!(NormMode::L1.apply(&fv(&[1, 3])), vec![0.25, 0.75]);
        assert_eq!(NormMode::L1.apply(&fv(&[0, 0])), vec![0.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn inertia_never_increases(
            pts in proptest::collection::vec(proptest::collection::vec(0u32..20, 4), 8..40),
            k in 1usize..6,
            seed in 0u64..1000,
        ) {
            let vs: Vec<FeatureVector> = pts.into_iter().map(|counts| FeatureVector { counts }).collect();
            let vs = collect_distinct(&vs).unwrap();
            proptest::prop_assume!(vs.len() >= k);
            let fit = kmeans_fit(&vs, &cfg(k), seed).unwrap();
            for w in fit.inertia.windows(2) {
                proptest::prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
            }
        }
    }
}

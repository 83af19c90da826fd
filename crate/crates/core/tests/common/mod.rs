//! Reference implementations written independently of the library.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qstg::temporal::TemporalRelation;

/// `log P(O)` by summing over every hidden path.
pub fn brute_force_loglik(pi: &[f64], a: &[Vec<f64>], b: &[Vec<f64>], o: &[usize]) -> f64 {
    let n = pi.len();
    let t_len = o.len();
    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    loop {
        let mut p = pi[path[0]] * b[path[0]][o[0]];
        for t in 1..t_len {
            p *= a[path[t - 1]][path[t]] * b[path[t]][o[t]];
        }
        total += p;
        let mut k = 0;
        while k < t_len {
            path[k] += 1;
            if path[k] < n {
                break;
            }
            path[k] = 0;
            k += 1;
        }
        if k == t_len {
            break;
        }
    }
    total.ln()
}

/// The thirteen Allen relations of `x` to `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allen {
    Before,
    Meets,
    Overlaps,
    Starts,
    During,
    Finishes,
    Equals,
    FinishedBy,
    Contains,
    StartedBy,
    OverlappedBy,
    MetBy,
    After,
}

/// Allen relation of the half-open spans `[xs, xe)` and `[ys, ye)`.
pub fn allen(xs: i64, xe: i64, ys: i64, ye: i64) -> Allen {
    use Allen::*;
    if xe < ys {
        Before
    } else if xe == ys {
        Meets
    } else if ye < xs {
        After
    } else if ye == xs {
        MetBy
    } else if xs == ys && xe == ye {
        Equals
    } else if xs == ys {
        if xe < ye {
            Starts
        } else {
            StartedBy
        }
    } else if xe == ye {
        if xs > ys {
            Finishes
        } else {
            FinishedBy
        }
    } else if xs < ys {
        if xe > ye {
            Contains
        } else {
            Overlaps
        }
    } else if xe < ye {
        During
    } else {
        OverlappedBy
    }
}

/// Merged relation of frame intervals `[s, e]`, each frame covering
/// `[f, f + 1)`. `None` for relations that a canonical pair cannot have.
pub fn merged_oracle(x: (usize, usize), y: (usize, usize)) -> Option<TemporalRelation> {
    let r = allen(x.0 as i64, x.1 as i64 + 1, y.0 as i64, y.1 as i64 + 1);
    Some(match r {
        Allen::Before => TemporalRelation::Before,
        Allen::Meets => TemporalRelation::Meets,
        Allen::Overlaps => TemporalRelation::Overlaps,
        Allen::Equals => TemporalRelation::Equals,
        Allen::Starts | Allen::During | Allen::Finishes => TemporalRelation::Sdf,
        Allen::StartedBy | Allen::Contains | Allen::FinishedBy => TemporalRelation::Sdf,
        Allen::OverlappedBy | Allen::MetBy | Allen::After => return None,
    })
}

pub fn min_eigenvalue(gram: &[Vec<f64>]) -> f64 {
    let n = gram.len();
    let m = DMatrix::from_fn(n, n, |i, j| gram[i][j]);
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Two-sided 95% normal-approximation interval of a binomial proportion.
pub fn binomial_ci95(p: f64, n: usize) -> (f64, f64) {
    let h = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
    (p - h, p + h)
}

use qstg::hmm::{DiscreteHmm, ObservationSequence};
use rand::Rng;

pub fn random_row(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_hmm(rng: &mut impl Rng, n: usize, m: usize) -> DiscreteHmm {
    DiscreteHmm::new(
        random_row(rng, n),
        (0..n).map(|_| random_row(rng, n)).collect(),
        (0..n).map(|_| random_row(rng, m)).collect(),
    )
    .unwrap()
}

fn draw(rng: &mut impl Rng, p: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, &x) in p.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    p.len() - 1
}

/// Samples a symbol sequence from a model.
pub fn sample(h: &DiscreteHmm, t_len: usize, rng: &mut impl Rng) -> ObservationSequence {
    let mut s = draw(rng, &h.pi);
    let mut out = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        out.push(draw(rng, &h.emission[s]));
        s = draw(rng, &h.transition[s]);
    }
    ObservationSequence::new(out).unwrap()
}

//! Discrete hidden Markov models: scaled forward likelihood, multi-sequence
//! Baum-Welch and maximum-likelihood classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ActivityLabel;

/// `{A, B, pi}` over `N` hidden states and `M` symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteHmm {
    #[serde(rename = "N")]
    pub n_states: usize,
    #[serde(rename = "M")]
    pub n_symbols: usize,
    pub pi: Vec<f64>,
    /// `A[i][j] = P(s_{t+1} = j | s_t = i)`.
    #[serde(rename = "A")]
    pub transition: Vec<Vec<f64>>,
    /// `B[i][k] = P(o_t = k | s_t = i)`.
    #[serde(rename = "B")]
    pub emission: Vec<Vec<f64>>,
}

/// Non-empty symbol sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationSequence(Vec<usize>);

impl ObservationSequence {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Hmm("observation sequence must not be empty".into()));
        }
        Ok(Self(symbols))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn is_stochastic(row: &[f64]) -> bool {
    row.iter().all(|&p| p >= 0.0 && p.is_finite()) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

impl DiscreteHmm {
    /// Checks shapes and that every distribution sums to one.
    pub fn new(pi: Vec<f64>, transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>) -> Result<Self> {
        let n = pi.len();
        let m = emission.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::Hmm("model needs at least one state and one symbol".into()));
        }
        if transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return Err(Error::Hmm(format!("transition matrix must be {n}x{n}")));
        }
        if emission.len() != n || emission.iter().any(|r| r.len() != m) {
            return Err(Error::Hmm(format!("emission matrix must be {n}x{m}")));
        }
        let h = Self {
            n_states: n,
            n_symbols: m,
            pi,
            transition,
            emission,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = is_stochastic(&self.pi)
            && self.transition.iter().all(|r| is_stochastic(r))
            && self.emission.iter().all(|r| is_stochastic(r));
        if ok {
            Ok(())
        } else {
            Err(Error::Hmm("pi and every row of A and B must be distributions".into()))
        }
    }

    fn check(&self, o: &ObservationSequence) -> Result<()> {
        match o.symbols().iter().find(|&&s| s >= self.n_symbols) {
            Some(&symbol) => Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: self.n_symbols,
            }),
            None => Ok(()),
        }
    }

    /// Scaled forward pass. Returns the normalized alphas, row-major
    /// `[t * N + i]`, and the per-step scale factors.
    fn forward(&self, o: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_states;
        let mut alphas = vec![0.0; o.len() * n];
        let mut scales = Vec::with_capacity(o.len());
        for (t, &sym) in o.iter().enumerate() {
            let (done, rest) = alphas.split_at_mut(t * n);
            let a = &mut rest[..n];
            if t == 0 {
                for ((x, &p), row) in a.iter_mut().zip(&self.pi).zip(&self.emission) {
                    *x = p * row[sym];
                }
            } else {
                let prev = &done[(t - 1) * n..];
                for (i, &p) in prev.iter().enumerate() {
                    for (x, &tr) in a.iter_mut().zip(&self.transition[i]) {
                        *x += p * tr;
                    }
                }
                for (j, x) in a.iter_mut().enumerate() {
                    *x *= self.emission[j][sym];
                }
            }
            let c: f64 = a.iter().sum();
            if c > 0.0 {
                a.iter_mut().for_each(|x| *x /= c);
            }
            scales.push(c);
        }
        (alphas, scales)
    }

    /// `log P(O | model)`; `-inf` when the sequence is impossible.
    pub fn forward_loglik(&self, o: &ObservationSequence) -> Result<f64> {
        self.check(o)?;
        let (_, scales) = self.forward(o.symbols());
        Ok(scales.iter().map(|c| c.ln()).sum())
    }
}

/// Training settings for [`baum_welch_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmmConfig {
    pub n_states: usize,
    pub max_iter: usize,
    /// Relative log-likelihood improvement below which training stops.
    pub tol: f64,
    /// Floor applied to every emission probability.
    pub epsilon: f64,
    /// Independent initializations; the best final likelihood wins.
    pub restarts: usize,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self {
            n_states: 7,
            max_iter: 100,
            tol: 1e-4,
            epsilon: 1e-6,
            restarts: 3,
        }
    }
}

/// Log-likelihoods recorded for one EM iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    /// Total log-likelihood of the model entering the iteration.
    pub loglik: f64,
    /// Total log-likelihood of the re-estimated model before flooring.
    pub loglik_updated: f64,
}

#[derive(Debug, Clone)]
pub struct HmmFit {
    pub model: DiscreteHmm,
    pub loglik: f64,
    /// Iterations of the restart that was kept.
    pub trace: Vec<IterationStats>,
    /// Iterations of every restart, in restart order.
    pub restart_traces: Vec<Vec<IterationStats>>,
}

fn dirichlet_row(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Raises entries below `eps` to `eps` and rescales the rest so the row
/// still sums to one; every entry ends at least `eps`.
fn floor_row(row: &mut [f64], eps: f64) {
    let m = row.len();
    let mut fixed = vec![false; m];
    loop {
        for (p, f) in row.iter().zip(fixed.iter_mut()) {
            if *p < eps {
                *f = true;
            }
        }
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free: f64 = row.iter().zip(&fixed).filter(|(_, f)| !**f).map(|(p, _)| *p).sum();
        if n_fixed == m || free <= 0.0 {
            row.iter_mut().for_each(|p| *p = 1.0 / m as f64);
            return;
        }
        let scale = (1.0 - n_fixed as f64 * eps) / free;
        for (p, f) in row.iter_mut().zip(&fixed) {
            *p = if *f { eps } else { *p * scale };
        }
        if row.iter().zip(&fixed).all(|(p, f)| *f || *p >= eps) {
            return;
        }
    }
}

struct Accumulators {
    pi: Vec<f64>,
    trans_num: Vec<Vec<f64>>,
    trans_den: Vec<f64>,
    emit_num: Vec<Vec<f64>>,
    emit_den: Vec<f64>,
}

impl Accumulators {
    fn new(n: usize, m: usize) -> Self {
        Self {
            pi: vec![0.0; n],
            trans_num: vec![vec![0.0; n]; n],
            trans_den: vec![0.0; n],
            emit_num: vec![vec![0.0; m]; n],
            emit_den: vec![0.0; n],
        }
    }
}

/// One E-step over all sequences; returns the total log-likelihood.
fn expectation(h: &DiscreteHmm, seqs: &[ObservationSequence], acc: &mut Accumulators) -> f64 {
    let n = h.n_states;
    let mut total = 0.0;
    let mut w = vec![0.0; n];
    for seq in seqs {
        let o = seq.symbols();
        let t_len = o.len();
        let (alphas, scales) = h.forward(o);
        total += scales.iter().map(|c| c.ln()).sum::<f64>();
        if scales.iter().any(|&c| c <= 0.0) {
            continue;
        }
        let mut beta = vec![1.0; n];
        let mut prev_beta = vec![0.0; n];
        for t in (0..t_len).rev() {
            let alpha = &alphas[t * n..(t + 1) * n];
            for i in 0..n {
                let g = alpha[i] * beta[i];
                if t == 0 {
                    acc.pi[i] += g;
                }
                acc.emit_num[i][o[t]] += g;
                acc.emit_den[i] += g;
            }
            if t == 0 {
                break;
            }
            // Step from t to t-1: w_j = b_j(o_t) beta_t(j) / c_t.
            for j in 0..n {
                w[j] = h.emission[j][o[t]] * beta[j] / scales[t];
            }
            let alpha_prev = &alphas[(t - 1) * n..t * n];
            for i in 0..n {
                let row = &h.transition[i];
                let mut b = 0.0;
                for j in 0..n {
                    let x = row[j] * w[j];
                    b += x;
                    acc.trans_num[i][j] += alpha_prev[i] * x;
                }
                prev_beta[i] = b;
                acc.trans_den[i] += alpha_prev[i] * b;
            }
            std::mem::swap(&mut beta, &mut prev_beta);
        }
    }
    total
}

fn maximization(h: &DiscreteHmm, acc: &Accumulators, n_seqs: usize) -> DiscreteHmm {
    let mut next = h.clone();
    let pi_sum: f64 = acc.pi.iter().sum();
    if pi_sum > 0.0 {
        next.pi = acc.pi.iter().map(|p| p / pi_sum).collect();
    }
    debug_assert!(n_seqs > 0);
    for i in 0..h.n_states {
        if acc.trans_den[i] > 0.0 {
            let s: f64 = acc.trans_num[i].iter().sum();
            next.transition[i] = acc.trans_num[i].iter().map(|x| x / s).collect();
        }
        if acc.emit_den[i] > 0.0 {
            let s: f64 = acc.emit_num[i].iter().sum();
            next.emission[i] = acc.emit_num[i].iter().map(|x| x / s).collect();
        }
    }
    next
}

fn total_loglik(h: &DiscreteHmm, seqs: &[ObservationSequence]) -> f64 {
    seqs.iter()
        .map(|s| {
            let (_, scales) = h.forward(s.symbols());
            scales.iter().map(|c| c.ln()).sum::<f64>()
        })
        .sum()
}

/// Multi-sequence Baum-Welch with seeded Dirichlet initialization.
///
/// `pi` starts uniform; rows of `A` and `B` are drawn from a flat Dirichlet.
/// After every re-estimation the emission rows are floored at `epsilon`.
/// Training stops when the relative gain in total log-likelihood falls
/// below `tol` or after `max_iter` iterations.
pub fn baum_welch_fit(
    sequences: &[ObservationSequence],
    n_symbols: usize,
    cfg: &HmmConfig,
    seed: u64,
) -> Result<HmmFit> {
    if sequences.is_empty() {
        return Err(Error::Hmm("no training sequences".into()));
    }
    if cfg.n_states == 0 || n_symbols == 0 {
        return Err(Error::Hmm("need at least one state and one symbol".into()));
    }
    if cfg.epsilon < 0.0 || cfg.epsilon * n_symbols as f64 > 1.0 {
        return Err(Error::Hmm(format!(
            "emission floor {} is infeasible for {n_symbols} symbols",
            cfg.epsilon
        )));
    }
    for s in sequences {
        if let Some(&symbol) = s.symbols().iter().find(|&&x| x >= n_symbols) {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: n_symbols,
            });
        }
    }
    let n = cfg.n_states;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<HmmFit> = None;
    let mut restart_traces = Vec::new();

    for _ in 0..cfg.restarts.max(1) {
        let mut emission: Vec<Vec<f64>> = (0..n).map(|_| dirichlet_row(n_symbols, &mut rng)).collect();
        emission.iter_mut().for_each(|r| floor_row(r, cfg.epsilon));
        let mut h = DiscreteHmm {
            n_states: n,
            n_symbols,
            pi: vec![1.0 / n as f64; n],
            transition: (0..n).map(|_| dirichlet_row(n, &mut rng)).collect(),
            emission,
        };
        let mut trace = Vec::new();
        let mut prev: Option<f64> = None;
        let mut ll = f64::NEG_INFINITY;
        for _ in 0..cfg.max_iter.max(1) {
            let mut acc = Accumulators::new(n, n_symbols);
            ll = expectation(&h, sequences, &mut acc);
            if let Some(p) = prev {
                if ll - p < cfg.tol * p.abs() {
                    break;
                }
            }
            let mut next = maximization(&h, &acc, sequences.len());
            let updated = total_loglik(&next, sequences);
            next.emission.iter_mut().for_each(|r| floor_row(r, cfg.epsilon));
            trace.push(IterationStats {
                loglik: ll,
                loglik_updated: updated,
            });
            prev = Some(ll);
            h = next;
            ll = f64::NAN;
        }
        if ll.is_nan() {
            ll = total_loglik(&h, sequences);
        }
        restart_traces.push(trace.clone());
        if best.as_ref().is_none_or(|b| ll > b.loglik) {
            best = Some(HmmFit {
                model: h,
                loglik: ll,
                trace,
                restart_traces: Vec::new(),
            });
        }
    }
    let mut fit = best.expect("at least one restart");
    fit.restart_traces = restart_traces;
    Ok(fit)
}

/// One trained model per activity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledHmm {
    pub label: ActivityLabel,
    #[serde(flatten)]
    pub hmm: DiscreteHmm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassModels {
    pub models: Vec<LabeledHmm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: ActivityLabel,
    pub scores: Vec<f64>,
}

/// Highest-likelihood class; ties go to the earliest model.
pub fn classify(models: &ClassModels, o: &ObservationSequence) -> Result<Classification> {
    let first = models
        .models
        .first()
        .ok_or_else(|| Error::Hmm("no class models to score against".into()))?;
    let m = first.hmm.n_symbols;
    if models.models.iter().any(|c| c.hmm.n_symbols != m) {
        return Err(Error::Hmm("class models disagree on the symbol count".into()));
    }
    let scores = models
        .models
        .iter()
        .map(|c| c.hmm.forward_loglik(o))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(Classification {
        label: models.models[best].label.clone(),
        scores,
    })
}

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Decomposition, GraphConfig};
use crate::hmm::HmmConfig;
use crate::vocab::KMeansConfig;

/// Every knob of a run. Serialized as TOML; missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Seed of the first repeat; repeat `r` uses `seed + r`.
    pub seed: u64,
    pub repeats: usize,
    /// Window sequences and HMMs when true; whole-video nearest neighbor when false.
    pub use_dynamics: bool,
    pub graph: GraphConfig,
    pub kmeans: KMeansConfig,
    pub hmm: HmmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            repeats: 1,
            use_dynamics: true,
            graph: GraphConfig::default(),
            kmeans: KMeansConfig::default(),
            hmm: HmmConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.qual.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.graph.l_w < 2 || self.graph.l_s == 0 {
            return bad("need l_w >= 2 and l_s >= 1");
        }
        if self.kmeans.k == 0 || self.kmeans.max_iter == 0 {
            return bad("kmeans.k and kmeans.max_iter must be positive");
        }
        if self.hmm.n_states == 0 || self.hmm.max_iter == 0 {
            return bad("hmm.n_states and hmm.max_iter must be positive");
        }
        if !(self.hmm.epsilon >= 0.0 && self.hmm.tol >= 0.0 && self.kmeans.tol >= 0.0) {
            return bad("tolerances and the emission floor must be non-negative");
        }
        if self.repeats == 0 {
            return bad("repeats must be positive");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// The configuration with one ablation applied.
    pub fn variant(&self, v: Variant) -> Self {
        let mut c = self.clone();
        match v {
            Variant::Full => {}
            Variant::Ndt => c.use_dynamics = false,
            Variant::Ndr => c.graph.use_direction = false,
            Variant::Nhd => c.graph.decomposition = Decomposition::WholeOnly,
            Variant::Ub => c.graph.decomposition = Decomposition::UpperOnly,
            Variant::Lb => c.graph.decomposition = Decomposition::LowerOnly,
        }
        c
    }
}

/// Ablations of the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    /// No dynamic transitions: one whole-video graph, nearest neighbor.
    Ndt,
    /// No direction relations.
    Ndr,
    /// No hierarchical decomposition: whole-body block only.
    Nhd,
    /// Upper body only.
    Ub,
    /// Lower body only.
    Lb,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::Ndt,
        Variant::Ndr,
        Variant::Nhd,
        Variant::Ub,
        Variant::Lb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Ndt => "ndt",
            Variant::Ndr => "ndr",
            Variant::Nhd => "nhd",
            Variant::Ub => "ub",
            Variant::Lb => "lb",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

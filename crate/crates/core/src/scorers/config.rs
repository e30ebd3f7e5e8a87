use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default neighbor count for the kNN scorer. Use 100 for ID sets with few,
/// broad classes; 5 suits fine-grained keyword-style sets.
pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_LOF_K: usize = 20;
pub const DEFAULT_PCA_COMPONENTS: usize = 128;
pub const DEFAULT_IFOREST_ESTIMATORS: usize = 100;
pub const DEFAULT_IFOREST_SUBSAMPLE: usize = 256;
pub const DEFAULT_LODA_BINS: usize = 10;
pub const DEFAULT_LODA_PROJECTIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Knn,
    Msp,
    Lof,
    Pca,
    Iforest,
    Loda,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Knn,
        Method::Msp,
        Method::Lof,
        Method::Pca,
        Method::Iforest,
        Method::Loda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::Msp => "msp",
            Method::Lof => "lof",
            Method::Pca => "pca",
            Method::Iforest => "iforest",
            Method::Loda => "loda",
        }
    }

    /// Whether the method consumes logits rather than embeddings.
    pub fn uses_logits(self) -> bool {
        self == Method::Msp
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Method choice plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ScorerConfig {
    Knn { k: usize },
    Msp,
    Lof { k: usize },
    Pca { n_components: usize },
    Iforest { n_estimators: usize, subsample: usize, seed: u64 },
    Loda { n_bins: usize, n_projections: usize, seed: u64 },
}

impl ScorerConfig {
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::Knn => ScorerConfig::Knn { k: DEFAULT_KNN_K },
            Method::Msp => ScorerConfig::Msp,
            Method::Lof => ScorerConfig::Lof { k: DEFAULT_LOF_K },
            Method::Pca => ScorerConfig::Pca {
                n_components: DEFAULT_PCA_COMPONENTS,
            },
            Method::Iforest => ScorerConfig::Iforest {
                n_estimators: DEFAULT_IFOREST_ESTIMATORS,
                subsample: DEFAULT_IFOREST_SUBSAMPLE,
                seed: 0,
            },
            Method::Loda => ScorerConfig::Loda {
                n_bins: DEFAULT_LODA_BINS,
                n_projections: DEFAULT_LODA_PROJECTIONS,
                seed: 0,
            },
        }
    }

    pub fn method(&self) -> Method {
        match self {
            ScorerConfig::Knn { .. } => Method::Knn,
            ScorerConfig::Msp => Method::Msp,
            ScorerConfig::Lof { .. } => Method::Lof,
            ScorerConfig::Pca { .. } => Method::Pca,
            ScorerConfig::Iforest { .. } => Method::Iforest,
            ScorerConfig::Loda { .. } => Method::Loda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts: &[(&str, usize)] = match self {
            ScorerConfig::Knn { k } | ScorerConfig::Lof { k } => &[("k", *k)],
            ScorerConfig::Msp => &[],
            ScorerConfig::Pca { n_components } => &[("n_components", *n_components)],
            ScorerConfig::Iforest {
                n_estimators,
                subsample,
                ..
            } => &[("n_estimators", *n_estimators), ("subsample", *subsample)],
            ScorerConfig::Loda {
                n_bins,
                n_projections,
                ..
            } => &[("n_bins", *n_bins), ("n_projections", *n_projections)],
        };
        for (name, v) in counts {
            if *v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("method", self.method().to_string())];
        match self {
            ScorerConfig::Knn { k } | ScorerConfig::Lof { k } => out.push(("k", k.to_string())),
            ScorerConfig::Msp => {}
            ScorerConfig::Pca { n_components } => out.push(("n_components", n_components.to_string())),
            ScorerConfig::Iforest {
                n_estimators,
                subsample,
                seed,
            } => {
                out.push(("n_estimators", n_estimators.to_string()));
                out.push(("subsample", subsample.to_string()));
                out.push(("seed", seed.to_string()));
            }
            ScorerConfig::Loda {
                n_bins,
                n_projections,
                seed,
            } => {
                out.push(("n_bins", n_bins.to_string()));
                out.push(("n_projections", n_projections.to_string()));
                out.push(("seed", seed.to_string()));
            }
        }
        out
    }

    /// Flat `key=value` lines, one per field, `method` first.
    pub fn to_kv(&self) -> String {
        self.pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Inverse of [`to_kv`](Self::to_kv). Missing fields take their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut method = None;
        let mut fields = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
            if k == "method" {
                method = Some(v.parse::<Method>()?);
            } else {
                fields.push((k.to_string(), v.to_string()));
            }
        }
        let mut cfg = ScorerConfig::default_for(
            method.ok_or_else(|| Error::Config("config has no method= line".into()))?,
        );
        for (k, v) in fields {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one hyperparameter by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("invalid value {value:?} for {key}"));
        let unknown = || Error::Config(format!("{key} does not apply to this method"));
        let count = || value.parse::<usize>().map_err(|_| bad());
        match (self, key) {
            (ScorerConfig::Knn { k } | ScorerConfig::Lof { k }, "k") => *k = count()?,
            (ScorerConfig::Pca { n_components }, "n_components") => *n_components = count()?,
            (ScorerConfig::Iforest { n_estimators, .. }, "n_estimators") => *n_estimators = count()?,
            (ScorerConfig::Iforest { subsample, .. }, "subsample") => *subsample = count()?,
            (ScorerConfig::Loda { n_bins, .. }, "n_bins") => *n_bins = count()?,
            (ScorerConfig::Loda { n_projections, .. }, "n_projections") => *n_projections = count()?,
            (ScorerConfig::Iforest { seed, .. } | ScorerConfig::Loda { seed, .. }, "seed") => {
                *seed = value.parse().map_err(|_| bad())?
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Fixed construction choices that are not hyperparameters but shape the
    /// fitted state, for run metadata.
    pub fn construction_notes(&self) -> Vec<(&'static str, &'static str)> {
        let mut notes = vec![(
            "input",
            if self.method().uses_logits() {
                "logits"
            } else {
                "l2-normalized embeddings"
            },
        )];
        match self {
            ScorerConfig::Iforest { .. } => {
                notes.push(("tree_height_limit", "ceil(log2(subsample))"));
                notes.push(("rng", "chacha8, stream per tree"));
            }
            ScorerConfig::Loda { .. } => {
                notes.push(("projection_nonzeros", "ceil(sqrt(dim)) gaussian"));
                notes.push(("histogram_range", "train min..max, equal width, clamp to edge bins"));
                notes.push(("smoothing", "laplace +1 per bin, density = p / bin_width"));
                notes.push(("rng", "chacha8, stream per projection"));
            }
            ScorerConfig::Lof { .. } => notes.push(("lrd_floor", "1e-12")),
            ScorerConfig::Pca { .. } => notes.push(("decomposition", "exact symmetric eigen of covariance")),
            _ => {}
        }
        notes
    }
}

impl fmt::Display for ScorerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self
            .pairs()
            .into_iter()
            .skip(1)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if params.is_empty() {
            write!(f, "{}", self.method())
        } else {
            write!(f, "{}({})", self.method(), params.join(","))
        }
    }
}

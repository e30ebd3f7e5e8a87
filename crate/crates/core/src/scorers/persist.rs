//! Fitted-state directories.
//!
//! `scorer.conf` always holds the config echo. Neighbor-based methods
//! (knn, lof) store their normalized reference set as `reference.oode`;
//! LOF's densities are recomputed on load since fitting is deterministic.
//! Parametric states (pca, iforest, loda) are written to `state.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::iforest::IsolationForest;
use super::loda::LodaModel;
use super::pca::PcaModel;
use super::{FittedScorer, Model, ScorerConfig};
use crate::error::{Error, Result};
use crate::knn::KnnIndex;
use crate::scorers::lof::LofModel;
use crate::store::{read_embeddings, write_matrix};

pub const CONFIG_FILE: &str = "scorer.conf";
pub const REFERENCE_FILE: &str = "reference.oode";
pub const STATE_FILE: &str = "state.json";

#[derive(Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
enum PersistedState {
    Pca(PcaModel),
    Iforest(IsolationForest),
    Loda(LodaModel),
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the scorer's state into `dir` (created if missing) and returns
/// the files written.
pub fn save_state(scorer: &FittedScorer, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let conf = dir.join(CONFIG_FILE);
    write_text(&conf, &scorer.config().to_kv())?;
    written.push(conf);

    let persisted = match scorer.model() {
        Model::Knn { index, .. } => {
            let path = dir.join(REFERENCE_FILE);
            write_matrix(index.reference(), &path)?;
            written.push(path);
            None
        }
        Model::Lof(m) => {
            let path = dir.join(REFERENCE_FILE);
            write_matrix(m.reference(), &path)?;
            written.push(path);
            None
        }
        Model::Msp => None,
        Model::Pca(m) => Some(PersistedState::Pca(m.clone())),
        Model::Iforest(m) => Some(PersistedState::Iforest(m.clone())),
        Model::Loda(m) => Some(PersistedState::Loda(m.clone())),
    };
    if let Some(state) = persisted {
        let path = dir.join(STATE_FILE);
        let json = serde_json::to_string(&state)
            .map_err(|e| Error::Format(format!("serializing state: {e}")))?;
        write_text(&path, &json)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_state(dir: impl AsRef<Path>) -> Result<FittedScorer> {
    let dir = dir.as_ref();
    let conf_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&conf_path).map_err(|e| Error::io(&conf_path, e))?;
    let config = ScorerConfig::from_kv(&text)?;

    let reference = || read_embeddings(dir.join(REFERENCE_FILE))?.into_normalized_checked();
    let state = || -> Result<PersistedState> {
        let path = dir.join(STATE_FILE);
        let json = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&json).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    };
    let mismatch = || Error::Format(format!("{} does not match {}", STATE_FILE, CONFIG_FILE));

    let model = match &config {
        ScorerConfig::Knn { k } => Model::Knn {
            index: KnnIndex::build(reference()?, *k)?,
            k: *k,
        },
        ScorerConfig::Lof { k } => Model::Lof(LofModel::fit(reference()?, *k)?),
        ScorerConfig::Msp => Model::Msp,
        ScorerConfig::Pca { .. } => match state()? {
            PersistedState::Pca(m) => Model::Pca(m),
            _ => return Err(mismatch()),
        },
        ScorerConfig::Iforest { .. } => match state()? {
            PersistedState::Iforest(m) => Model::Iforest(m),
            _ => return Err(mismatch()),
        },
        ScorerConfig::Loda { .. } => match state()? {
            PersistedState::Loda(m) => Model::Loda(m),
            _ => return Err(mismatch()),
        },
    };
    Ok(FittedScorer::from_parts(config, model))
}

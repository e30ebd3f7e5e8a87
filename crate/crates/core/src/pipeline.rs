//! Manifest-driven fit/score/evaluate flow shared by the service and tests.

use crate::error::{Error, Result};
use crate::eval::{auroc, calibrate, acceptance_rate};
use crate::report::{EvalReport, EvalSummary};
use crate::scorers::{FittedScorer, ScoreInput, ScoreVector, ScorerConfig};
use crate::store::{read_embeddings, read_logits, DatasetEntry, DatasetManifest, EmbeddingMatrix, StoredMatrix};

/// Reads an embedding file and L2-normalizes its rows.
pub fn load_normalized(entry_path: &std::path::Path) -> Result<EmbeddingMatrix> {
    read_embeddings(entry_path)?.l2_normalize()
}

/// Fits `config` on the manifest's single `id-train` entry.
pub fn fit_manifest(manifest: &DatasetManifest, config: ScorerConfig) -> Result<FittedScorer> {
    config.validate()?;
    let train = manifest.id_train()?;
    FittedScorer::fit(config, &load_normalized(&train.embedding_path)?)
}

/// Scores one dataset entry, reading logits for MSP and normalized
/// embeddings otherwise.
pub fn score_entry(scorer: &FittedScorer, entry: &DatasetEntry) -> Result<ScoreVector> {
    if scorer.method().uses_logits() {
        let path = entry.logit_path.as_ref().ok_or_else(|| {
            Error::Config(format!("dataset {} has no logit file for msp", entry.name))
        })?;
        let logits = read_logits(path)?;
        scorer.score_batch(ScoreInput::Logits(&logits), &entry.name)
    } else {
        let data = load_normalized(&entry.embedding_path)?;
        if let Some(d) = scorer.dim() {
            if d != data.cols() {
                return Err(Error::Shape(format!(
                    "dataset {} has {} dimensions, scorer was fitted on {d}",
                    entry.name,
                    data.cols()
                )));
            }
        }
        scorer.score_batch(ScoreInput::Embeddings(&data), &entry.name)
    }
}

/// Everything one evaluation run produces.
#[derive(Debug, Clone)]
pub struct EvalRun {
    pub summary: EvalSummary,
    pub id_scores: ScoreVector,
    pub ood_scores: Vec<ScoreVector>,
}

/// Compares ID-test scores against each OOD-test set under a scorer that
/// is already fitted. Gamma is calibrated on the ID-test scores only.
pub fn evaluate_with(scorer: &FittedScorer, manifest: &DatasetManifest, tpr_level: f64) -> Result<EvalRun> {
    let id_entry = manifest.id_test()?;
    let ood_entries = manifest.ood_tests()?;
    let id_scores = score_entry(scorer, id_entry)?;
    let threshold = calibrate(&id_scores.scores, tpr_level)?;

    let mut reports = Vec::with_capacity(ood_entries.len());
    let mut ood_scores = Vec::with_capacity(ood_entries.len());
    for entry in ood_entries {
        let ood = score_entry(scorer, entry)?;
        reports.push(EvalReport {
            id_dataset: id_entry.name.clone(),
            ood_dataset: entry.name.clone(),
            method: scorer.config().clone(),
            fpr_at_tpr95: acceptance_rate(&ood.scores, &threshold),
            auroc: auroc(&id_scores.scores, &ood.scores)?,
            n_id: id_scores.len(),
            n_ood: ood.len(),
            gamma: threshold.gamma,
        });
        ood_scores.push(ood);
    }
    Ok(EvalRun {
        summary: EvalSummary::new(tpr_level, scorer.config().clone(), reports)?,
        id_scores,
        ood_scores,
    })
}

/// Fits on `id-train`, then evaluates every `ood-test` entry against
/// `id-test`.
pub fn evaluate_manifest(manifest: &DatasetManifest, config: ScorerConfig, tpr_level: f64) -> Result<(FittedScorer, EvalRun)> {
    // Validate roles before any expensive fitting.
    manifest.id_train()?;
    manifest.id_test()?;
    manifest.ood_tests()?;
    let scorer = fit_manifest(manifest, config)?;
    let run = evaluate_with(&scorer, manifest, tpr_level)?;
    Ok((scorer, run))
}

/// One score per line, shortest round-trip decimal.
pub fn scores_to_text(scores: &[f64]) -> String {
    scores.iter().map(|s| format!("{s}\n")).collect()
}

/// Parses one score per line; blank lines and `#` comments are skipped.
pub fn scores_from_text(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let v: f64 = l
                .parse()
                .map_err(|_| Error::Format(format!("score line {}: {l:?} is not a number", i + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Format(format!("score line {} is not finite", i + 1)))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_text_round_trip() {
        let v = vec![-0.123456789012345, 1e-300, 3.0, -2.5e10];
        assert_eq!(scores_from_text(&scores_to_text(&v)).unwrap(), v);
        assert!(scores_from_text("1\nabc\n").is_err());
        assert!(scores_from_text("inf\n").is_err());
        assert_eq!(scores_from_text("# header\n\n2\n").unwrap(), vec![2.0]);
    }
}

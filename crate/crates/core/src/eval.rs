//! Threshold calibration, the ID/OOD decision rule, and detection metrics.
//!
//! All functions take scores oriented higher-is-ID. Calibration sees only
//! ID scores.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TPR: f64 = 0.95;

/// Calibrated cutoff: scores `>= gamma` are accepted as in-distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionThreshold {
    pub gamma: f64,
    pub tpr_level: f64,
    pub n_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Id,
    Ood,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Id => "ID",
            Verdict::Ood => "OOD",
        })
    }
}

fn check_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Input(format!("{what} scores are empty")));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Input(format!("{what} score {i} is NaN")));
    }
    Ok(())
}

fn check_tpr(tpr_level: f64) -> Result<()> {
    if !(tpr_level > 0.0 && tpr_level <= 1.0) {
        return Err(Error::Config(format!(
            "tpr level must be in (0, 1], got {tpr_level}"
        )));
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// Zero-based index into the ascending ID scores that becomes gamma:
/// `floor((1 − tpr) · n)`, guarded against the decimal-to-binary rounding of
/// `tpr` so that `0.9` over ten scores gives index 1, not 0.
pub fn calibration_index(n: usize, tpr_level: f64) -> usize {
    const SLACK: f64 = 1e-9;
    let nf = n as f64;
    let mut idx = (((1.0 - tpr_level) * nf + SLACK).floor() as usize).min(n.saturating_sub(1));
    while idx > 0 && ((n - idx) as f64) < tpr_level * nf - SLACK {
        idx -= 1;
    }
    idx
}

/// Picks gamma from in-distribution scores alone so that at least
/// `tpr_level` of them are accepted.
pub fn calibrate(id_scores: &[f64], tpr_level: f64) -> Result<DetectionThreshold> {
    check_scores(id_scores, "ID")?;
    check_tpr(tpr_level)?;
    let s = sorted(id_scores);
    Ok(DetectionThreshold {
        gamma: s[calibration_index(s.len(), tpr_level)],
        tpr_level,
        n_id: s.len(),
    })
}

pub fn decide(score: f64, threshold: &DetectionThreshold) -> Verdict {
    if score >= threshold.gamma {
        Verdict::Id
    } else {
        Verdict::Ood
    }
}

/// Fraction of `scores` accepted as in-distribution.
pub fn acceptance_rate(scores: &[f64], threshold: &DetectionThreshold) -> f64 {
    let accepted = scores
        .iter()
        .filter(|&&s| decide(s, threshold) == Verdict::Id)
        .count();
    accepted as f64 / scores.len() as f64
}

/// False-positive rate on OOD scores at the threshold that keeps
/// `tpr_level` of the ID scores.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr_level: f64) -> Result<f64> {
    check_scores(ood_scores, "OOD")?;
    let threshold = calibrate(id_scores, tpr_level)?;
    Ok(acceptance_rate(ood_scores, &threshold))
}

/// Probability that a random ID score exceeds a random OOD score, ties
/// counting one half, via the midrank rank-sum statistic.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    check_scores(id_scores, "ID")?;
    check_scores(ood_scores, "OOD")?;
    let mut all: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    let mut id_rank_sum = 0.0f64;
    let mut start = 0;
    while start < all.len() {
        let mut end = start + 1;
        while end < all.len() && all[end].0 == all[start].0 {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let midrank = (start + 1 + end) as f64 / 2.0;
        let ids = all[start..end].iter().filter(|(_, is_id)| *is_id).count();
        id_rank_sum += midrank * ids as f64;
        start = end;
    }
    let n_id = id_scores.len() as f64;
    let n_ood = ood_scores.len() as f64;
    Ok((id_rank_sum - n_id * (n_id + 1.0) / 2.0) / (n_id * n_ood))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges, ascending.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Two-column text, `bin_left<TAB>count`, one line per bin.
    pub fn to_text(&self) -> String {
        self.edges
            .iter()
            .zip(&self.counts)
            .map(|(l, c)| format!("{l}\t{c}\n"))
            .collect()
    }
}

/// Equal-width histogram over `[min, max]` of the scores. The maximum lands
/// in the last bin; a constant input gives one bin holding everything.
pub fn score_histogram(scores: &[f64], n_bins: usize) -> Result<Histogram> {
    check_scores(scores, "histogram")?;
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if scores.iter().any(|s| s.is_infinite()) {
        return Err(Error::Input("histogram scores must be finite".into()));
    }
    let (min, max) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if min == max {
        return Ok(Histogram {
            edges: vec![min, max],
            counts: vec![scores.len()],
        });
    }
    let width = (max - min) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    let mut counts = vec![0usize; n_bins];
    for &s in scores {
        let b = (((s - min) / width).floor() as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorers::ScorerConfig;

/// Detection metrics for one (ID, OOD, method) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub id_dataset: String,
    pub ood_dataset: String,
    pub method: ScorerConfig,
    pub fpr_at_tpr95: f64,
    pub auroc: f64,
    pub n_id: usize,
    pub n_ood: usize,
    pub gamma: f64,
}

impl EvalReport {
    /// One tab-separated `key=value` line.
    pub fn to_line(&self) -> String {
        format!(
            "id={}\tood={}\tmethod={}\tfpr_at_tpr95={}\tauroc={}\tn_id={}\tn_ood={}\tgamma={}",
            self.id_dataset,
            self.ood_dataset,
            self.method,
            self.fpr_at_tpr95,
            self.auroc,
            self.n_id,
            self.n_ood,
            self.gamma
        )
    }
}

/// Plain mean over OOD datasets; every dataset counts once regardless of
/// its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnweightedMean {
    pub weighting: String,
    pub n_reports: usize,
    pub fpr_at_tpr95: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub tpr_level: f64,
    pub method: ScorerConfig,
    pub reports: Vec<EvalReport>,
    pub average: UnweightedMean,
}

impl EvalSummary {
    pub fn new(tpr_level: f64, method: ScorerConfig, reports: Vec<EvalReport>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::Input("no reports to summarize".into()));
        }
        let n = reports.len() as f64;
        let average = UnweightedMean {
            weighting: "unweighted".into(),
            n_reports: reports.len(),
            fpr_at_tpr95: reports.iter().map(|r| r.fpr_at_tpr95).sum::<f64>() / n,
            auroc: reports.iter().map(|r| r.auroc).sum::<f64>() / n,
        };
        Ok(Self {
            tpr_level,
            method,
            reports,
            average,
        })
    }

    /// Line-oriented text: the scorer config block, then one line per
    /// report, then the unweighted average line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[scorer]\n");
        out.push_str(&self.method.to_kv());
        for (k, v) in self.method.construction_notes() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("tpr_level={}\n", self.tpr_level));
        out.push_str("[reports]\n");
        for r in &self.reports {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out.push_str(&format!(
            "average({})\tn_reports={}\tfpr_at_tpr95={}\tauroc={}\n",
            self.average.weighting,
            self.average.n_reports,
            self.average.fpr_at_tpr95,
            self.average.auroc
        ));
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report json: {e}")))
    }
}

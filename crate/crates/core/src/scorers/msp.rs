use crate::error::{Error, Result};

/// Softmax in `f64` with the row maximum subtracted first, so large logits
/// cannot overflow `exp`.
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits
        .iter()
        .map(|&v| f64::from(v))
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (f64::from(v) - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Maximum softmax probability of one logit row.
pub fn score_msp(logits: &[f32]) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::Config(format!(
            "MSP needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("logits must be finite".into()));
    }
    // The max-subtracted numerator of the arg-max class is exp(0) = 1.
    let max = logits
        .iter()
        .map(|&v| f64::from(v))
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|&v| (f64::from(v) - max).exp()).sum();
    Ok(1.0 / total)
}

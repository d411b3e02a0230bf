use crate::error::{Error, Result};

/// Mean squared error between probabilistic forecasts and binary outcomes.
/// Returned on the raw [0,1] scale; multiply by 100 for report tables.
pub fn brier_score(predictions: &[f64], truths: &[u8]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument(
            "brier score of an empty set".into(),
        ));
    }
    let mut total = 0.0;
    for (&p, &t) in predictions.iter().zip(truths) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Range(format!("prediction {p} not in [0,1]")));
        }
        if t > 1 {
            return Err(Error::Range(format!("truth {t} not binary")));
        }
        let diff = p - f64::from(t);
        total += diff * diff;
    }
    Ok(total / predictions.len() as f64)
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

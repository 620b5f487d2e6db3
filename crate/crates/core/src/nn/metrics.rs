use crate::error::{Error, Result};

/// Error tolerances reported in the accuracy tables.
pub const TOLERANCES: [f64; 4] = [0.05, 0.10, 0.15, 0.20];

const EPS: f64 = 1e-9;

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check(predictions, targets)?;
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (t - p) * (t - p))
        .sum::<f64>()
        / predictions.len() as f64)
}

/// Fraction of predictions within `tol` relative error of their target.
pub fn accuracy_at_tolerance(predictions: &[f64], targets: &[f64], tol: f64) -> Result<f64> {
    check(predictions, targets)?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let hits = predictions
        .iter()
        .zip(targets)
        .filter(|(p, t)| within(**p, **t, tol))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

pub(crate) fn within(pred: f64, target: f64, tol: f64) -> bool {
    (pred - target).abs() <= tol * target.abs().max(EPS)
}

/// Accuracy at each of [`TOLERANCES`].
pub fn accuracy_table(predictions: &[f64], targets: &[f64]) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (o, &tol) in out.iter_mut().zip(&TOLERANCES) {
        *o = accuracy_at_tolerance(predictions, targets, tol)?;
    }
    Ok(out)
}

fn check(predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::Dimension {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    Ok(())
}

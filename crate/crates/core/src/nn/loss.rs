use super::NnError;

/// Sum of squared errors, accumulated in `f64`. An empty pair of slices sums
/// to 0 so that per-client losses compose by addition.
pub fn sse_loss(predictions: &[f32], targets: &[f32]) -> Result<f64, NnError> {
    if predictions.len() != targets.len() {
        return Err(NnError::LengthMismatch {
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    Ok(predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let r = *p as f64 - *t as f64;
            r * r
        })
        .sum())
}

/// Root mean squared error. Errors on empty input (the mean is undefined).
pub fn rmse(predictions: &[f32], targets: &[f32]) -> Result<f64, NnError> {
    if predictions.is_empty() {
        return Err(NnError::EmptyInput);
    }
    let sse = sse_loss(predictions, targets)?;
    Ok((sse / predictions.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sse_examples() {
        assert_eq!(sse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sse_loss(&[3.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(sse_loss(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 14.0);
        assert_eq!(sse_loss(&[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), 0.0);
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(rmse(&[], &[]), Err(NnError::EmptyInput)));
    }

    #[test]
    fn rmse_is_sqrt_of_mean_sse() {
        let preds: Vec<f32> = (0..40).map(|i| (i as f32 * 0.37).sin() * 20.0).collect();
        let targets: Vec<f32> = (0..40).map(|i| (i as f32 * 0.11).cos() * 15.0).collect();
        let direct = rmse(&preds, &targets).unwrap();
        let via_sse = (sse_loss(&preds, &targets).unwrap() / 40.0).sqrt();
        assert!((direct - via_sse).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(sse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }
}

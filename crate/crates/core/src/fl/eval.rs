//! Model evaluation against validation windows and whole flights.

use super::RuntimeError;
use crate::data::{window_extract, FlightSeries, WindowSample};
use crate::nn::{self, Batch, NetworkSpec, NnError, ParameterVector};

/// Loss reported by an evaluation: RMSE for evaluation scores, SSE for the
/// decentralized global validation sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rmse,
    Sse,
}

/// Windows are scored in chunks of this many samples.
const EVAL_CHUNK: usize = 256;

/// Builds an inference batch from window samples (targets are the windows'
/// RUL labels). All samples must share the window geometry.
pub fn batch_from_windows(windows: &[WindowSample]) -> Result<Batch, NnError> {
    let first = windows.first().ok_or(NnError::EmptyInput)?;
    let mut batch = Batch::new(first.window, first.channels);
    for w in windows {
        batch.push(&w.values, w.rul_label as f32)?;
    }
    Ok(batch)
}

/// Forward pass in eval mode (dropout disabled) over all windows, reduced to
/// the requested metric. Loss accumulation is 64-bit; chunking does not
/// change the result beyond f64 addition grouping.
pub fn evaluate_model_on_validation(
    spec: &NetworkSpec,
    params: &ParameterVector,
    windows: &[WindowSample],
    metric: Metric,
) -> Result<f64, RuntimeError> {
    if windows.is_empty() {
        return Err(NnError::EmptyInput.into());
    }
    let mut sse = 0.0f64;
    for chunk in windows.chunks(EVAL_CHUNK) {
        let batch = batch_from_windows(chunk)?;
        let preds = nn::forward(spec, params, &batch, false, 0)?;
        sse += nn::sse_loss(&preds, batch.targets())?;
    }
    Ok(match metric {
        Metric::Sse => sse,
        Metric::Rmse => (sse / windows.len() as f64).sqrt(),
    })
}

/// Flight-level RUL prognosis: windows are cut with the standard length and
/// stride, each is predicted, and the median prediction is returned (even
/// counts take the mean of the two middle values).
pub fn predict_flight_rul(
    spec: &NetworkSpec,
    params: &ParameterVector,
    flight: &FlightSeries,
    window_len: usize,
    stride: usize,
) -> Result<f64, RuntimeError> {
    let windows = window_extract(flight, window_len, stride)?;
    if windows.is_empty() {
        return Err(RuntimeError::FlightTooShort {
            engine: flight.engine_id().to_string(),
            flight: flight.flight_index(),
        });
    }
    let mut predictions = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(EVAL_CHUNK) {
        let batch = batch_from_windows(chunk)?;
        let preds = nn::forward(spec, params, &batch, false, 0)?;
        predictions.extend(preds.into_iter().map(|p| p as f64));
    }
    predictions.sort_by(|a, b| a.partial_cmp(b).expect("finite predictions"));
    let mid = predictions.len() / 2;
    Ok(if predictions.len() % 2 == 1 {
        predictions[mid]
    } else {
        (predictions[mid - 1] + predictions[mid]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerSpec, NetworkSpec, ParameterVector};

    fn window(values: Vec<f32>, rul: u32) -> WindowSample {
        WindowSample {
            engine_id: "e".into(),
            flight_index: 1,
            start_step: 1,
            window: values.len(),
            channels: 1,
            values,
            rul_label: rul,
        }
    }

    /// yhat = bias, ignoring the input.
    fn constant_model(window_len: usize, bias: f32) -> (NetworkSpec, ParameterVector) {
        let spec = NetworkSpec::new(vec![LayerSpec::Output], window_len, 1, 0).unwrap();
        let layout = spec.parameter_layout().unwrap();
        let mut values = vec![0.0f32; layout.total_len()];
        *values.last_mut().unwrap() = bias;
        (spec, ParameterVector::from_values(layout, values).unwrap())
    }

    #[test]
    fn zero_model_on_zero_targets_scores_zero() {
        let (spec, params) = constant_model(4, 0.0);
        let windows = vec![window(vec![0.3, -0.2, 0.5, 0.9], 0)];
        let rmse = evaluate_model_on_validation(&spec, &params, &windows, Metric::Rmse).unwrap();
        let sse = evaluate_model_on_validation(&spec, &params, &windows, Metric::Sse).unwrap();
        assert_eq!((rmse, sse), (0.0, 0.0));
    }

    #[test]
    fn single_window_metrics() {
        let (spec, params) = constant_model(4, 1.0);
        let windows = vec![window(vec![0.0; 4], 3)];
        let rmse = evaluate_model_on_validation(&spec, &params, &windows, Metric::Rmse).unwrap();
        let sse = evaluate_model_on_validation(&spec, &params, &windows, Metric::Sse).unwrap();
        assert!((rmse - 2.0).abs() < 1e-9);
        assert!((sse - 4.0).abs() < 1e-9);
    }

    #[test]
    fn sse_is_count_times_squared_rmse() {
        let (spec, params) = constant_model(4, 2.5);
        let windows: Vec<WindowSample> = (0..700)
            .map(|i| window(vec![i as f32 * 0.01; 4], (i % 9) as u32))
            .collect();
        let rmse = evaluate_model_on_validation(&spec, &params, &windows, Metric::Rmse).unwrap();
        let sse = evaluate_model_on_validation(&spec, &params, &windows, Metric::Sse).unwrap();
        let expected = windows.len() as f64 * rmse * rmse;
        assert!((sse - expected).abs() <= 1e-6 * expected.max(1.0));
    }

    #[test]
    fn empty_validation_is_an_error() {
        let (spec, params) = constant_model(4, 0.0);
        assert!(evaluate_model_on_validation(&spec, &params, &[], Metric::Rmse).is_err());
    }

    #[test]
    fn flight_prediction_is_the_window_median() {
        // Flight of 25 steps, windows of 10 with stride 5: starts 1, 6, 11, 16.
        // Model: yhat = sum of the window / 10, i.e. mean of the values.
        let spec = NetworkSpec::new(vec![LayerSpec::Output], 10, 1, 0).unwrap();
        let layout = spec.parameter_layout().unwrap();
        let mut values = vec![0.1f32; layout.total_len()];
        *values.last_mut().unwrap() = 0.0;
        let params = ParameterVector::from_values(layout, values).unwrap();

        let steps: Vec<f32> = (0..25).map(|t| t as f32).collect();
        let flight = FlightSeries::new("e", 1, 4, 1, steps).unwrap();
        // window means: 4.5, 9.5, 14.5, 19.5 -> even median 12.0
        let got = predict_flight_rul(&spec, &params, &flight, 10, 5).unwrap();
        assert!((got - 12.0).abs() < 1e-5);

        // 30 steps: starts 1, 6, 11, 16, 21 -> odd median of means = 14.5
        let steps: Vec<f32> = (0..30).map(|t| t as f32).collect();
        let flight = FlightSeries::new("e", 1, 4, 1, steps).unwrap();
        let got = predict_flight_rul(&spec, &params, &flight, 10, 5).unwrap();
        assert!((got - 14.5).abs() < 1e-5);
    }

    #[test]
    fn constant_model_predicts_its_constant() {
        let (spec, params) = constant_model(10, 42.5);
        let steps: Vec<f32> = (0..40).map(|t| (t as f32 * 0.3).sin()).collect();
        let flight = FlightSeries::new("e", 1, 0, 1, steps).unwrap();
        let got = predict_flight_rul(&spec, &params, &flight, 10, 10).unwrap();
        assert!((got - 42.5).abs() < 1e-6);
    }

    #[test]
    fn too_short_flight_is_an_error() {
        let (spec, params) = constant_model(10, 0.0);
        let flight = FlightSeries::new("e", 2, 0, 1, vec![0.0; 9]).unwrap();
        assert!(matches!(
            predict_flight_rul(&spec, &params, &flight, 10, 10),
            Err(RuntimeError::FlightTooShort { .. })
        ));
    }
}

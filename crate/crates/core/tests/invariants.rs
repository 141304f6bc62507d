//! Property tests over the crate's structural invariants.

use fedrul_core::agg::{self, EvaluationScore};
use fedrul_core::data::{minmax_apply, minmax_fit, FlightSeries};
use fedrul_core::fl::{decode_message, encode_message, Message};
use fedrul_core::nn::{self, LayerSpec, NetworkSpec, ParameterVector};
use fedrul_core::ClientId;
use proptest::prelude::*;

fn message_strategy() -> impl Strategy<Value = Message> {
    let params = proptest::collection::vec(-1e6f32..1e6, 0..64);
    let loss = 0.0f64..1e12;
    prop_oneof![
        (any::<u32>(), any::<u16>(), params.clone())
            .prop_map(|(epoch, sender, params)| Message::GlobalModel { epoch, sender, params }),
        (any::<u32>(), any::<u16>(), params.clone())
            .prop_map(|(epoch, sender, params)| Message::LocalModel { epoch, sender, params }),
        (any::<u32>(), any::<u16>(), params)
            .prop_map(|(epoch, sender, params)| Message::EvalAssignment { epoch, sender, params }),
        (any::<u32>(), any::<u16>(), loss.clone())
            .prop_map(|(epoch, sender, loss)| Message::EvalLoss { epoch, sender, loss }),
        (any::<u32>(), any::<u16>(), loss)
            .prop_map(|(epoch, sender, loss)| Message::ValSumLoss { epoch, sender, loss }),
        (any::<u32>(), any::<u16>())
            .prop_map(|(epoch, sender)| Message::EpochEnd { epoch, sender }),
        (any::<u32>(), any::<u16>())
            .prop_map(|(epoch, sender)| Message::Shutdown { epoch, sender }),
    ]
}

fn flat_params(values: Vec<f32>) -> ParameterVector {
    let spec = NetworkSpec::new(vec![LayerSpec::Output], values.len() - 1, 1, 0).unwrap();
    ParameterVector::from_values(spec.parameter_layout().unwrap(), values).unwrap()
}

proptest! {
    #[test]
    fn wire_frames_round_trip(msg in message_strategy()) {
        let decoded = decode_message(&encode_message(&msg)).unwrap();
        prop_assert_eq!(decoded, msg);
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_message(&bytes);
    }

    #[test]
    fn normalization_round_trips_within_range_tolerance(
        raw in proptest::collection::vec(-1e4f32..1e4, 2..120),
    ) {
        let flight = FlightSeries::new("e", 1, 0, 1, raw.clone()).unwrap();
        let stats = minmax_fit(std::slice::from_ref(&flight)).unwrap();
        let normalized = minmax_apply(&flight, &stats).unwrap();
        let (lo, hi) = (stats.min()[0] as f64, stats.max()[0] as f64);
        let range = hi - lo;
        for (orig, norm) in raw.iter().zip(normalized.values()) {
            prop_assert!((-1.0..=1.0).contains(norm));
            let back = (*norm as f64 + 1.0) / 2.0 * range + lo;
            prop_assert!((back - *orig as f64).abs() <= 1e-5 * range.max(1.0));
        }
    }

    #[test]
    fn rmse_is_sqrt_of_mean_sse(
        pairs in proptest::collection::vec((-1e3f32..1e3, -1e3f32..1e3), 1..64),
    ) {
        let (preds, targets): (Vec<f32>, Vec<f32>) = pairs.into_iter().unzip();
        let rmse = nn::rmse(&preds, &targets).unwrap();
        let sse = nn::sse_loss(&preds, &targets).unwrap();
        let expected = (sse / preds.len() as f64).sqrt();
        prop_assert!((rmse - expected).abs() <= 1e-9 * expected.max(1.0));
    }

    #[test]
    fn fedavg_stays_in_the_coordinate_hull(
        vectors in proptest::collection::vec(
            proptest::collection::vec(-1e3f32..1e3, 6),
            1..7,
        ),
        sizes in proptest::collection::vec(1usize..1000, 7),
    ) {
        let models: Vec<(ParameterVector, usize)> = vectors
            .iter()
            .zip(&sizes)
            .map(|(v, &n)| (flat_params(v.clone()), n))
            .collect();
        let combined = agg::fedavg(&models).unwrap();
        for coord in 0..6 {
            let lo = vectors.iter().map(|v| v[coord]).fold(f32::INFINITY, f32::min);
            let hi = vectors.iter().map(|v| v[coord]).fold(f32::NEG_INFINITY, f32::max);
            let got = combined.values()[coord];
            prop_assert!(got >= lo - 1e-3 && got <= hi + 1e-3);
        }
    }

    #[test]
    fn softmax_weights_form_a_distribution(
        scores in proptest::collection::vec(0.01f64..1e4, 2..12),
    ) {
        let entries: Vec<EvaluationScore> = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| EvaluationScore { client_id: ClientId(i as u16 + 1), score })
            .collect();
        let weights = agg::softmax_weights(&entries).unwrap();
        let sum: f64 = weights.entries().iter().map(|(_, w)| w).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        for &(_, w) in weights.entries() {
            prop_assert!((0.0..=1.0).contains(&w));
        }
    }
}

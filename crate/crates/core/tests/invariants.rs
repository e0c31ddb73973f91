use std::collections::BTreeSet;

use hdnn::data::{
    one_hot_encode, resample_segment, split_dataset, Depth, InstanceKey, MixedDataset, Normalizer,
    Segment, CURVE_CHANNELS,
};
use proptest::prelude::*;

fn segment(depth_steps: Vec<f64>, values: Vec<[f64; CURVE_CHANNELS]>) -> Segment {
    let mut depths = Vec::with_capacity(depth_steps.len());
    let mut d = 1500.0;
    for step in depth_steps {
        depths.push(d);
        d += step;
    }
    Segment {
        depths,
        samples: values,
    }
}

fn segment_strategy() -> impl Strategy<Value = Segment> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..5.0, n),
            prop::collection::vec(prop::array::uniform7(-1e3f64..1e3), n),
        )
            .prop_map(|(steps, values)| segment(steps, values))
    })
}

fn dataset(rows: &[(Vec<f64>, Vec<f64>, f64)], len: usize) -> MixedDataset {
    let width = rows[0].0.len();
    MixedDataset::new(
        (0..rows.len())
            .map(|i| InstanceKey {
                well_id: format!("W{i:03}"),
                formation_id: "F1".into(),
            })
            .collect(),
        (0..width).map(|i| format!("f{i}")).collect(),
        rows.iter().flat_map(|r| r.0.clone()).collect(),
        len,
        rows.iter().flat_map(|r| r.1.clone()).collect(),
        Some(rows.iter().map(|r| r.2).collect()),
    )
    .unwrap()
}

fn dataset_strategy() -> impl Strategy<Value = MixedDataset> {
    (2usize..30, 1usize..5, 1usize..6).prop_flat_map(|(m, width, len)| {
        prop::collection::vec(
            (
                prop::collection::vec(-100.0f64..100.0, width),
                prop::collection::vec(-50.0f64..50.0, CURVE_CHANNELS * len),
                0.0f64..500.0,
            ),
            m,
        )
        .prop_map(move |rows| dataset(&rows, len))
    })
}

fn column_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

proptest! {
    #[test]
    fn resample_keeps_endpoints(seg in segment_strategy(), length in 2usize..100) {
        let r = resample_segment(&seg, length).unwrap();
        let last = seg.samples.len() - 1;
        for c in 0..CURVE_CHANNELS {
            prop_assert_eq!(r.data()[c * length], seg.samples[0][c]);
            prop_assert_eq!(r.data()[c * length + length - 1], seg.samples[last][c]);
        }
    }

    #[test]
    fn uniform_resample_to_same_length_is_identity(
        values in prop::collection::vec(prop::array::uniform7(-1e3f64..1e3), 2..50),
        step in 0.1f64..2.0,
    ) {
        let n = values.len();
        let seg = segment(vec![step; n], values.clone());
        let r = resample_segment(&seg, n).unwrap();
        for (i, sample) in values.iter().enumerate() {
            for c in 0..CURVE_CHANNELS {
                prop_assert!((r.data()[c * n + i] - sample[c]).abs() <= 1e-12 * sample[c].abs().max(1.0));
            }
        }
    }

    #[test]
    fn resample_does_not_overshoot_monotone_input(
        increments in prop::collection::vec(0.0f64..10.0, 2..30),
        length in 2usize..80,
    ) {
        let mut level = 0.0;
        let values: Vec<[f64; CURVE_CHANNELS]> = increments.iter().map(|d| { level += d; [level; CURVE_CHANNELS] }).collect();
        let seg = segment(vec![1.0; values.len()], values);
        let r = resample_segment(&seg, length).unwrap();
        let row = &r.data()[..length];
        prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn one_hot_has_a_single_one(size in 1usize..12, pick in 0usize..12) {
        let vocabulary: Vec<String> = (0..size).map(|i| format!("t{i}")).collect();
        let v = one_hot_encode(&vocabulary[pick % size], &vocabulary).unwrap();
        prop_assert_eq!(v.sum_all(), 1.0);
        prop_assert_eq!(v.data().iter().filter(|&&x| x == 1.0).count(), 1);
    }

    #[test]
    fn normalized_training_data_is_standard(data in dataset_strategy()) {
        let norm = Normalizer::fit(&data).unwrap();
        let z = norm.apply(&data).unwrap();
        for f in 0..data.numeric_width() {
            let raw: Vec<f64> = (0..data.len()).map(|i| data.numeric_row(i)[f]).collect();
            let col: Vec<f64> = (0..z.len()).map(|i| z.numeric_row(i)[f]).collect();
            let (mean, std) = column_stats(&col);
            prop_assert!(mean.abs() < 1e-10);
            if column_stats(&raw).1 > 1e-6 {
                prop_assert!((std - 1.0).abs() < 1e-10);
            }
        }
        let len = data.curve_length();
        for c in 0..CURVE_CHANNELS {
            let pooled: Vec<f64> = (0..z.len()).flat_map(|i| z.curve_row(i)[c * len..(c + 1) * len].to_vec()).collect();
            let (mean, std) = column_stats(&pooled);
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!(std < 1e-10 || (std - 1.0).abs() < 1e-10);
        }
        for (&y, &zy) in data.labels().unwrap().iter().zip(z.labels().unwrap()) {
            prop_assert!((norm.denormalize_label(zy) - y).abs() < 1e-10 * y.abs().max(1.0));
            prop_assert_eq!(norm.normalize_label(y), zy);
        }
    }

    #[test]
    fn split_is_a_partition_independent_of_row_order(
        data in dataset_strategy(),
        fraction in 0.05f64..=1.0,
        seed in any::<u64>(),
        rotate in 0usize..30,
    ) {
        let keys = |d: &MixedDataset| d.keys().iter().cloned().collect::<BTreeSet<_>>();
        let (train, test) = split_dataset(&data, fraction, seed).unwrap();
        prop_assert_eq!(train.len(), (fraction * data.len() as f64).round() as usize);
        prop_assert!(keys(&train).is_disjoint(&keys(&test)));
        prop_assert_eq!(train.len() + test.len(), data.len());
        prop_assert_eq!(keys(&train).union(&keys(&test)).count(), data.len());

        let mut order: Vec<usize> = (0..data.len()).collect();
        order.rotate_left(rotate % data.len());
        let shuffled = data.subset(&order).unwrap();
        let (train2, _) = split_dataset(&shuffled, fraction, seed).unwrap();
        prop_assert_eq!(keys(&train), keys(&train2));
    }

    #[test]
    fn depth_text_round_trips(micrometres in -10_000_000_000i64..10_000_000_000) {
        let d = Depth::from_micrometres(micrometres);
        prop_assert_eq!(d.to_string().parse::<Depth>().unwrap(), d);
    }
}

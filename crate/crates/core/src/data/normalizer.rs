use super::{MixedDataset, CURVE_CHANNELS};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Lower bound applied to every fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Z-score statistics for numeric features, curve channels and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub numeric_mean: Vec<f64>,
    pub numeric_std: Vec<f64>,
    pub curve_mean: Vec<f64>,
    pub curve_std: Vec<f64>,
    pub label_mean: f64,
    pub label_std: f64,
    pub std_floor: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(STD_FLOOR))
}

impl Normalizer {
    /// Fits population statistics. Curve statistics are pooled over
    /// instances and length. Labels are scaled when present.
    pub fn fit(train: &MixedDataset) -> Result<Self> {
        let m = train.len();
        if m == 0 {
            return Err(Error::Data(
                "cannot fit a normalizer on an empty dataset".into(),
            ));
        }
        let (numeric_mean, numeric_std) = (0..train.numeric_width())
            .map(|j| mean_std((0..m).map(move |i| train.numeric_row(i)[j])))
            .unzip();
        let len = train.curve_length();
        let (curve_mean, curve_std) =
            (0..CURVE_CHANNELS)
                .map(|c| {
                    mean_std((0..m).flat_map(move |i| {
                        train.curve_row(i)[c * len..(c + 1) * len].iter().copied()
                    }))
                })
                .unzip();
        let (label_mean, label_std) = match train.labels() {
            Some(l) => mean_std(l.iter().copied()),
            None => (0.0, 1.0),
        };
        Ok(Self {
            numeric_mean,
            numeric_std,
            curve_mean,
            curve_std,
            label_mean,
            label_std,
            std_floor: STD_FLOOR,
        })
    }

    /// Leaves labels untouched (class indices for classification).
    pub fn without_label_scaling(mut self) -> Self {
        self.label_mean = 0.0;
        self.label_std = 1.0;
        self
    }

    /// Normalized copy of `dataset`; labels are normalized when present.
    pub fn apply(&self, dataset: &MixedDataset) -> Result<MixedDataset> {
        if dataset.numeric_width() != self.numeric_mean.len() {
            return Err(Error::Shape(format!(
                "normalizer fitted on {} numeric features, dataset has {}",
                self.numeric_mean.len(),
                dataset.numeric_width()
            )));
        }
        let mut out = dataset.clone();
        let d = self.numeric_mean.len();
        for (k, v) in out.numeric_mut().iter_mut().enumerate() {
            *v = (*v - self.numeric_mean[k % d]) / self.numeric_std[k % d];
        }
        let len = dataset.curve_length();
        for (k, v) in out.curves_mut().iter_mut().enumerate() {
            let c = (k / len) % CURVE_CHANNELS;
            *v = (*v - self.curve_mean[c]) / self.curve_std[c];
        }
        if let Some(labels) = out.labels_mut() {
            for v in labels {
                *v = self.normalize_label(*v);
            }
        }
        Ok(out)
    }

    pub fn normalize_label(&self, y: f64) -> f64 {
        (y - self.label_mean) / self.label_std
    }

    /// Maps a normalized prediction back to label units.
    pub fn denormalize_label(&self, z: f64) -> f64 {
        z * self.label_std + self.label_mean
    }

    pub(crate) fn to_records(&self) -> Vec<(String, Tensor)> {
        let v = |x: &[f64]| Tensor::vector(x.to_vec()).expect("non-empty statistics");
        vec![
            ("normalizer.numeric_mean".into(), v(&self.numeric_mean)),
            ("normalizer.numeric_std".into(), v(&self.numeric_std)),
            ("normalizer.curve_mean".into(), v(&self.curve_mean)),
            ("normalizer.curve_std".into(), v(&self.curve_std)),
            (
                "normalizer.label".into(),
                v(&[self.label_mean, self.label_std, self.std_floor]),
            ),
        ]
    }

    pub(crate) fn from_records(
        mut get: impl FnMut(&str) -> Option<Tensor>,
    ) -> Result<Option<Self>> {
        let Some(label) = get("normalizer.label") else {
            return Ok(None);
        };
        let mut take = |name: &str| {
            get(name)
                .map(Tensor::into_data)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing record `{name}`")))
        };
        let [label_mean, label_std, std_floor] = label.data() else {
            return Err(Error::CorruptCheckpoint(
                "normalizer.label must hold 3 values".into(),
            ));
        };
        Ok(Some(Self {
            numeric_mean: take("normalizer.numeric_mean")?,
            numeric_std: take("normalizer.numeric_std")?,
            curve_mean: take("normalizer.curve_mean")?,
            curve_std: take("normalizer.curve_std")?,
            label_mean: *label_mean,
            label_std: *label_std,
            std_floor: *std_floor,
        }))
    }
}

use serde::{Deserialize, Serialize};

use super::{
    curve_averages, extract_formation_curves, one_hot_encode, resample_segment, RawWellData,
    CURVE_CHANNELS, CURVE_NAMES,
};
use crate::error::{Error, Result};
use crate::network::FeatureSpec;
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Identifies one formation instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub well_id: String,
    pub formation_id: String,
}

/// Model-ready instances: a numeric matrix `[M×d]`, a curve tensor
/// `[M×7×L]` and optional labels, aligned on the first axis.
///
/// `M` may be zero (an empty test split), so the parts are kept as flat
/// buffers and turned into tensors per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    keys: Vec<InstanceKey>,
    feature_names: Vec<String>,
    numeric: Vec<f64>,
    curve_length: usize,
    curves: Vec<f64>,
    labels: Option<Vec<f64>>,
}

impl MixedDataset {
    pub fn new(
        keys: Vec<InstanceKey>,
        feature_names: Vec<String>,
        numeric: Vec<f64>,
        curve_length: usize,
        curves: Vec<f64>,
        labels: Option<Vec<f64>>,
    ) -> Result<Self> {
        let m = keys.len();
        let aligned = numeric.len() == m * feature_names.len()
            && curves.len() == m * CURVE_CHANNELS * curve_length
            && labels.as_ref().map_or(true, |l| l.len() == m);
        if !aligned {
            return Err(Error::Shape(format!(
                "dataset parts disagree for {m} instances: {} numeric, {} curve, {:?} label values",
                numeric.len(),
                curves.len(),
                labels.as_ref().map(Vec::len)
            )));
        }
        Ok(Self {
            keys,
            feature_names,
            numeric,
            curve_length,
            curves,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[InstanceKey] {
        &self.keys
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn numeric_width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn curve_length(&self) -> usize {
        self.curve_length
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn numeric_row(&self, i: usize) -> &[f64] {
        let d = self.numeric_width();
        &self.numeric[i * d..(i + 1) * d]
    }

    /// Curves of instance `i`, channel-major.
    pub fn curve_row(&self, i: usize) -> &[f64] {
        let w = CURVE_CHANNELS * self.curve_length;
        &self.curves[i * w..(i + 1) * w]
    }

    pub(crate) fn numeric_mut(&mut self) -> &mut [f64] {
        &mut self.numeric
    }

    pub(crate) fn curves_mut(&mut self) -> &mut [f64] {
        &mut self.curves
    }

    pub(crate) fn labels_mut(&mut self) -> Option<&mut [f64]> {
        self.labels.as_deref_mut()
    }

    /// `[B×d]` numeric batch for the given instances.
    pub fn numeric_batch(&self, indices: &[usize]) -> Result<Tensor> {
        let d = self.numeric_width();
        let data = self.gather(indices, |i| self.numeric_row(i))?;
        Tensor::new(vec![indices.len(), d], data)
    }

    /// `[B×7×L]` curve batch for the given instances.
    pub fn curve_batch(&self, indices: &[usize]) -> Result<Tensor> {
        let data = self.gather(indices, |i| self.curve_row(i))?;
        Tensor::new(vec![indices.len(), CURVE_CHANNELS, self.curve_length], data)
    }

    pub fn label_batch(&self, indices: &[usize]) -> Result<Tensor> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Data("dataset has no labels".into()))?;
        let data = self.gather(indices, |i| std::slice::from_ref(&labels[i]))?;
        Tensor::new(vec![indices.len(), 1], data)
    }

    fn gather<'a>(
        &'a self,
        indices: &[usize],
        row: impl Fn(usize) -> &'a [f64],
    ) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "instance {i} out of range for {}",
                    self.len()
                )));
            }
            out.extend_from_slice(row(i));
        }
        Ok(out)
    }

    /// The instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<MixedDataset> {
        let numeric = self.gather(indices, |i| self.numeric_row(i))?;
        let curves = self.gather(indices, |i| self.curve_row(i))?;
        MixedDataset::new(
            indices.iter().map(|&i| self.keys[i].clone()).collect(),
            self.feature_names.clone(),
            numeric,
            self.curve_length,
            curves,
            self.labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        )
    }

    /// Drops the labels (for prediction inputs).
    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }
}

/// Turns raw well data into model inputs, one instance per attribute row,
/// in file order.
///
/// Numeric features are formation thickness, formation median depth,
/// perforation thickness and perforation count, then one one-hot block per
/// entry of `features.categorical`, then (if enabled) the seven curve means.
/// Labels are present only when every row has a production value.
pub fn build_dataset(raw: &RawWellData, features: &FeatureSpec) -> Result<MixedDataset> {
    let length = features.resample_length;
    let columns: Vec<usize> = features
        .categorical
        .iter()
        .map(|f| {
            raw.categorical_columns
                .iter()
                .position(|c| *c == f.column)
                .ok_or_else(|| {
                    Error::Data(format!(
                        "attributes have no categorical column `cat:{}`",
                        f.column
                    ))
                })
        })
        .collect::<Result<_>>()?;

    let mut names: Vec<String> = [
        "formation_thickness_m",
        "formation_median_depth_m",
        "perforation_thickness_m",
        "perforation_count",
    ]
    .map(String::from)
    .to_vec();
    for f in &features.categorical {
        names.extend(f.vocabulary.iter().map(|t| format!("cat:{}={t}", f.column)));
    }
    if features.curve_averages {
        names.extend(CURVE_NAMES.iter().map(|c| format!("mean_{c}")));
    }

    let labelled = raw
        .attributes
        .iter()
        .filter(|r| r.production.is_some())
        .count();
    if labelled != 0 && labelled != raw.attributes.len() {
        return Err(Error::Data(format!(
            "{labelled} of {} formations have a production value; provide all or none",
            raw.attributes.len()
        )));
    }

    let (mut keys, mut numeric, mut curves, mut labels) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for row in &raw.attributes {
        let well = raw
            .well_curves(&row.well_id)
            .ok_or_else(|| Error::Data(format!("no curves for well {}", row.well_id)))?;
        let segment =
            extract_formation_curves(well, row.top.metres(), row.base.metres()).map_err(|e| {
                Error::Data(format!(
                    "formation {}/{}: {e}",
                    row.well_id, row.formation_id
                ))
            })?;
        let resampled = resample_segment(&segment, length)?;

        numeric.extend([
            row.formation_thickness(),
            row.median_depth(),
            row.perforation_thickness,
            row.perforation_count as f64,
        ]);
        for (f, &col) in features.categorical.iter().zip(&columns) {
            numeric.extend_from_slice(one_hot_encode(&row.categorical[col], &f.vocabulary)?.data());
        }
        if features.curve_averages {
            numeric.extend_from_slice(curve_averages(&resampled)?.data());
        }
        curves.extend_from_slice(resampled.data());
        labels.extend(row.production);
        keys.push(InstanceKey {
            well_id: row.well_id.clone(),
            formation_id: row.formation_id.clone(),
        });
    }
    let labels = (labelled > 0).then_some(labels);
    MixedDataset::new(keys, names, numeric, length, curves, labels)
}

/// Seeded split into `(train, test)`.
///
/// Instances are ordered by key, shuffled with `seed`, and the first
/// `round(train_fraction·M)` go to `train`. The result does not depend on
/// the input row order.
pub fn split_dataset(
    dataset: &MixedDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(MixedDataset, MixedDataset)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1], got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| dataset.keys[a].cmp(&dataset.keys[b]));
    RngStream::new(seed).shuffle(&mut order);
    let cut = (train_fraction * dataset.len() as f64).round() as usize;
    let (train, test) = order.split_at(cut.min(order.len()));
    Ok((dataset.subset(train)?, dataset.subset(test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(m: usize) -> MixedDataset {
        let keys = (0..m)
            .map(|i| InstanceKey {
                well_id: format!("W{}", i / 2),
                formation_id: format!("F{}", i % 2),
            })
            .collect();
        let numeric = (0..m).map(|i| i as f64).collect();
        let curves = (0..m * CURVE_CHANNELS * 2).map(|i| i as f64).collect();
        let labels = Some((0..m).map(|i| 10.0 * i as f64).collect());
        MixedDataset::new(keys, vec!["x".into()], numeric, 2, curves, labels).unwrap()
    }

    #[test]
    fn split_sizes() {
        let (train, test) = split_dataset(&toy(10), 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (all, none) = split_dataset(&toy(10), 1.0, 3).unwrap();
        assert_eq!((all.len(), none.len()), (10, 0));
        assert!(split_dataset(&toy(10), 0.0, 3).is_err());
        assert!(split_dataset(&toy(10), 1.5, 3).is_err());
    }

    #[test]
    fn subset_keeps_rows_aligned() {
        let d = toy(4);
        let s = d.subset(&[3, 1]).unwrap();
        assert_eq!(s.numeric_row(0), &[3.0]);
        assert_eq!(s.labels().unwrap(), &[30.0, 10.0]);
        assert_eq!(s.curve_row(1), d.curve_row(1));
        assert_eq!(s.keys()[0], d.keys()[3]);
    }

    #[test]
    fn misaligned_parts_rejected() {
        assert!(MixedDataset::new(vec![], vec!["x".into()], vec![1.0], 2, vec![], None).is_err());
    }
}

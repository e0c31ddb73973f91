use super::{WellCurves, CURVE_CHANNELS};
use crate::error::{Error, Result};
use crate::layers::global_avg_pool;
use crate::tensor::Tensor;

/// The curve samples of one formation, depth ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub depths: Vec<f64>,
    pub samples: Vec<[f64; CURVE_CHANNELS]>,
}

/// All samples with `top ≤ depth ≤ base`.
pub fn extract_formation_curves(curves: &WellCurves, top: f64, base: f64) -> Result<Segment> {
    let start = curves.depths.partition_point(|&d| d < top);
    let end = curves.depths.partition_point(|&d| d <= base);
    if end < start + 2 {
        return Err(Error::Data(format!(
            "well {}: {} curve samples in [{top}, {base}], need at least 2",
            curves.well_id,
            end.saturating_sub(start)
        )));
    }
    Ok(Segment {
        depths: curves.depths[start..end].to_vec(),
        samples: curves.samples[start..end].to_vec(),
    })
}

/// Linear interpolation of every channel at `length` equally spaced depths
/// from the first to the last sample, endpoints included. Returns `[7×length]`.
pub fn resample_segment(segment: &Segment, length: usize) -> Result<Tensor> {
    if length < 2 {
        return Err(Error::InvalidArgument(format!(
            "resample length must be at least 2, got {length}"
        )));
    }
    let n = segment.depths.len();
    if n < 2 || segment.samples.len() != n {
        return Err(Error::Data(format!(
            "segment needs at least 2 aligned samples, has {n}"
        )));
    }
    let (first, last) = (segment.depths[0], segment.depths[n - 1]);
    let mut out = vec![0.0; CURVE_CHANNELS * length];
    let mut j = 0;
    for i in 0..length {
        let column: [f64; CURVE_CHANNELS] = if i == 0 {
            segment.samples[0]
        } else if i == length - 1 {
            segment.samples[n - 1]
        } else {
            let z = first + (last - first) * i as f64 / (length - 1) as f64;
            while j + 2 < n && segment.depths[j + 1] < z {
                j += 1;
            }
            let (z0, z1) = (segment.depths[j], segment.depths[j + 1]);
            let t = ((z - z0) / (z1 - z0)).clamp(0.0, 1.0);
            let (a, b) = (&segment.samples[j], &segment.samples[j + 1]);
            std::array::from_fn(|c| a[c] + (b[c] - a[c]) * t)
        };
        for (c, v) in column.into_iter().enumerate() {
            out[c * length + i] = v;
        }
    }
    Tensor::new(vec![CURVE_CHANNELS, length], out)
}

/// Unit vector selecting `value` in `vocabulary`.
pub fn one_hot_encode(value: &str, vocabulary: &[String]) -> Result<Tensor> {
    if vocabulary.is_empty() {
        return Err(Error::InvalidArgument("empty vocabulary".into()));
    }
    for (i, token) in vocabulary.iter().enumerate() {
        if vocabulary[..i].contains(token) {
            return Err(Error::InvalidArgument(format!(
                "duplicate vocabulary token `{token}`"
            )));
        }
    }
    let index = vocabulary
        .iter()
        .position(|t| t == value)
        .ok_or_else(|| Error::Data(format!("`{value}` is not one of {vocabulary:?}")))?;
    let mut v = vec![0.0; vocabulary.len()];
    v[index] = 1.0;
    Tensor::vector(v)
}

/// Per-channel mean of a `[C×L]` curve tensor, computed by the same routine
/// as global average pooling.
pub fn curve_averages(curves: &Tensor) -> Result<Tensor> {
    let &[c, l] = curves.shape() else {
        return Err(Error::Shape(format!(
            "curve_averages expects [C×L], got {:?}",
            curves.shape()
        )));
    };
    global_avg_pool(&curves.reshape(vec![1, c, l])?)?.reshape(vec![c])
}

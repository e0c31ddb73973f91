use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Feature-wise concatenation of `[B×d_i]` parts into `[B×Σd_i]`, in list order.
pub fn concat_features(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat_features needs at least one part".into()))?;
    let batch = first.shape()[0];
    for p in parts {
        if p.rank() != 2 || p.shape()[0] != batch {
            return Err(Error::Shape(format!(
                "concat_features parts must be [{batch}×d], got {:?}",
                p.shape()
            )));
        }
    }
    let width: usize = parts.iter().map(|p| p.shape()[1]).sum();
    let mut data = Vec::with_capacity(batch * width);
    for b in 0..batch {
        for p in parts {
            let d = p.shape()[1];
            data.extend_from_slice(&p.data()[b * d..(b + 1) * d]);
        }
    }
    Ok(Tensor::from_parts(vec![batch, width], data))
}

/// Inverse of [`concat_features`] for gradients: splits `[B×Σd_i]` back into
/// parts of the given widths.
pub fn split_features(dy: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = widths.iter().sum();
    if dy.rank() != 2 || dy.shape()[1] != total || widths.contains(&0) {
        return Err(Error::Shape(format!(
            "cannot split {:?} into widths {widths:?}",
            dy.shape()
        )));
    }
    let batch = dy.shape()[0];
    let mut out: Vec<Vec<f64>> = widths
        .iter()
        .map(|w| Vec::with_capacity(batch * w))
        .collect();
    for row in dy.data().chunks(total) {
        let mut offset = 0;
        for (part, &w) in out.iter_mut().zip(widths) {
            part.extend_from_slice(&row[offset..offset + w]);
            offset += w;
        }
    }
    Ok(out
        .into_iter()
        .zip(widths)
        .map(|(d, &w)| Tensor::from_parts(vec![batch, w], d))
        .collect())
}

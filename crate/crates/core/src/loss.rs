//! Training losses. Both return the loss value and its gradient with respect
//! to the model output.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean squared error `(1/M)·Σ (pred − target)²` and its gradient
/// `2(pred − target)/M`. `target` may have any shape with the same number of
/// elements as `pred`; the gradient takes the shape of `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "mse_loss: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    let m = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let r = p - t;
        loss += r * r;
        grad.push(2.0 * r / m);
    }
    Ok((loss / m, Tensor::new(pred.shape().to_vec(), grad)?))
}

/// Row-wise softmax of `[M×C]` logits, shifted by the row maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 2 {
        return Err(Error::Shape(format!(
            "softmax expects [M×C], got {:?}",
            logits.shape()
        )));
    }
    let c = logits.shape()[1];
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    Tensor::new(logits.shape().to_vec(), out)
}

fn check_labels(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::Shape(format!(
            "cross_entropy: logits {:?} for {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let classes = logits.shape()[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok((labels.len(), classes))
}

/// Per-row `−log p_label` using a max-shifted log-sum-exp.
fn negative_log_likelihoods(logits: &Tensor, labels: &[usize], classes: usize) -> Vec<f64> {
    logits
        .data()
        .chunks(classes)
        .zip(labels)
        .map(|(row, &label)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - (row[label] - max)
        })
        .collect()
}

/// Mean cross-entropy over the batch and its gradient `(softmax − onehot)/M`.
///
/// The loss is the sum-form cross-entropy divided by `M`; see
/// [`cross_entropy_sum`] for the undivided total.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (m, classes) = check_labels(logits, labels)?;
    let total: f64 = negative_log_likelihoods(logits, labels, classes)
        .iter()
        .sum();
    let mut grad = softmax(logits)?;
    for (row, &label) in grad.data_mut().chunks_mut(classes).zip(labels) {
        row[label] -= 1.0;
        row.iter_mut().for_each(|g| *g /= m as f64);
    }
    Ok((total / m as f64, grad))
}

/// `−Σ_j log p_{j,label_j}` over the whole batch.
pub fn cross_entropy_sum(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let (_, classes) = check_labels(logits, labels)?;
    Ok(negative_log_likelihoods(logits, labels, classes)
        .iter()
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> Tensor {
        Tensor::vector(values.to_vec()).unwrap()
    }

    #[test]
    fn mse_examples() {
        let (loss, grad) = mse_loss(&v(&[1.0, 2.0]), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(loss, 2.5);
        assert_eq!(grad.data(), &[1.0, 2.0]);
        let (loss, grad) = mse_loss(&v(&[3.0, -1.0]), &v(&[3.0, -1.0])).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
        assert!(mse_loss(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn mse_gradient_matches_central_differences() {
        let pred = v(&[0.3, -1.2, 2.5, 0.0]);
        let target = v(&[1.0, 0.5, -0.5, 0.25]);
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let h = 1e-5;
        for i in 0..pred.len() {
            let mut up = pred.clone();
            up.data_mut()[i] += h;
            let mut down = pred.clone();
            down.data_mut()[i] -= h;
            let numeric = (mse_loss(&up, &target).unwrap().0 - mse_loss(&down, &target).unwrap().0)
                / (2.0 * h);
            let rel = (numeric - grad.data()[i]).abs() / grad.data()[i].abs().max(1e-12);
            assert!(rel < 1e-6, "element {i}: {rel}");
        }
    }

    #[test]
    fn cross_entropy_equal_logits() {
        let logits = Tensor::new(vec![1, 2], vec![0.7, 0.7]).unwrap();
        let (loss, grad) = cross_entropy_loss(&logits, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(grad.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_confident_limit() {
        let logits = Tensor::new(vec![1, 2], vec![30.0, -30.0]).unwrap();
        let (loss, _) = cross_entropy_loss(&logits, &[0]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn cross_entropy_rows_sum_to_zero_and_shift_invariant() {
        let logits = Tensor::new(vec![2, 3], vec![0.2, -1.0, 3.0, 5.0, 5.5, -2.0]).unwrap();
        let (loss, grad) = cross_entropy_loss(&logits, &[2, 0]).unwrap();
        for row in grad.data().chunks(3) {
            assert!(row.iter().sum::<f64>().abs() < 1e-16);
        }
        let (shifted, _) = cross_entropy_loss(&logits.add_scalar(100.0), &[2, 0]).unwrap();
        assert!((loss - shifted).abs() < 1e-10);
        assert_eq!(cross_entropy_sum(&logits, &[2, 0]).unwrap(), 2.0 * loss);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let logits = Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            cross_entropy_loss(&logits, &[2]),
            Err(Error::InvalidArgument(_))
        ));
    }
}

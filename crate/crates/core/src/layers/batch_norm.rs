//! Batch normalization over `[B×F]` (per feature) or `[B×C×L]` (per channel,
//! pooling statistics over batch and length).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Values saved by the forward pass for [`batch_norm_backward`].
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
    /// Batch mean and biased variance per channel; `None` when the forward
    /// pass used running statistics.
    batch_stats: Option<(Vec<f64>, Vec<f64>)>,
}

impl BatchNormCache {
    pub fn batch_stats(&self) -> Option<(&[f64], &[f64])> {
        self.batch_stats
            .as_ref()
            .map(|(m, v)| (m.as_slice(), v.as_slice()))
    }
}

/// (channels, inner extent) for a supported input shape.
fn layout(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(usize, usize)> {
    if !(x.rank() == 2 || x.rank() == 3) {
        return Err(Error::Shape(format!(
            "batch_norm expects [B×F] or [B×C×L], got {:?}",
            x.shape()
        )));
    }
    let channels = x.shape()[1];
    if gamma.shape() != [channels] || beta.shape() != [channels] {
        return Err(Error::Shape(format!(
            "batch_norm γ {:?} / β {:?} for {channels} channels",
            gamma.shape(),
            beta.shape()
        )));
    }
    let inner = if x.rank() == 3 { x.shape()[2] } else { 1 };
    Ok((channels, inner))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "batch_norm ε must be positive, got {eps}"
        )))
    }
}

#[inline]
fn channel_of(i: usize, channels: usize, inner: usize) -> usize {
    (i / inner) % channels
}

fn normalize(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &[f64],
    inv_std: &[f64],
    channels: usize,
    inner: usize,
) -> (Tensor, Tensor) {
    let mut x_hat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for (i, &v) in x.data().iter().enumerate() {
        let c = channel_of(i, channels, inner);
        let h = (v - mean[c]) * inv_std[c];
        x_hat.push(h);
        y.push(gamma.data()[c] * h + beta.data()[c]);
    }
    (
        Tensor::from_parts(x.shape().to_vec(), y),
        Tensor::from_parts(x.shape().to_vec(), x_hat),
    )
}

/// Train-mode batch normalization using batch mean and biased variance.
pub fn batch_norm_train(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> Result<(Tensor, BatchNormCache)> {
    let (channels, inner) = layout(x, gamma, beta)?;
    check_eps(eps)?;
    let count = x.shape()[0] * inner;
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "train-mode batch_norm needs at least 2 values per channel, got {count}"
        )));
    }
    let mut mean = vec![0.0; channels];
    for (i, &v) in x.data().iter().enumerate() {
        mean[channel_of(i, channels, inner)] += v;
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; channels];
    for (i, &v) in x.data().iter().enumerate() {
        let c = channel_of(i, channels, inner);
        var[c] += (v - mean[c]) * (v - mean[c]);
    }
    var.iter_mut().for_each(|s| *s /= count as f64);
    let inv_std: Vec<f64> = var.iter().map(|s| 1.0 / (s + eps).sqrt()).collect();
    let (y, x_hat) = normalize(x, gamma, beta, &mean, &inv_std, channels, inner);
    Ok((
        y,
        BatchNormCache {
            x_hat,
            inv_std,
            batch_stats: Some((mean, var)),
        },
    ))
}

/// Infer-mode batch normalization using running statistics.
pub fn batch_norm_infer(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
    eps: f64,
) -> Result<(Tensor, BatchNormCache)> {
    let (channels, inner) = layout(x, gamma, beta)?;
    check_eps(eps)?;
    if running_mean.shape() != [channels] || running_var.shape() != [channels] {
        return Err(Error::Shape("batch_norm running statistics shape".into()));
    }
    let inv_std: Vec<f64> = running_var
        .data()
        .iter()
        .map(|s| 1.0 / (s + eps).sqrt())
        .collect();
    let (y, x_hat) = normalize(
        x,
        gamma,
        beta,
        running_mean.data(),
        &inv_std,
        channels,
        inner,
    );
    Ok((
        y,
        BatchNormCache {
            x_hat,
            inv_std,
            batch_stats: None,
        },
    ))
}

/// Gradients `(dx, dγ, dβ)`.
pub fn batch_norm_backward(
    cache: BatchNormCache,
    gamma: &Tensor,
    dy: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let BatchNormCache {
        x_hat,
        inv_std,
        batch_stats,
    } = cache;
    if dy.shape() != x_hat.shape() {
        return Err(Error::Shape(format!(
            "batch_norm backward: dy {:?}, x {:?}",
            dy.shape(),
            x_hat.shape()
        )));
    }
    let channels = x_hat.shape()[1];
    let inner = if x_hat.rank() == 3 {
        x_hat.shape()[2]
    } else {
        1
    };
    let count = (x_hat.shape()[0] * inner) as f64;

    let mut dgamma = vec![0.0; channels];
    let mut dbeta = vec![0.0; channels];
    for (i, (&g, &h)) in dy.data().iter().zip(x_hat.data()).enumerate() {
        let c = channel_of(i, channels, inner);
        dgamma[c] += g * h;
        dbeta[c] += g;
    }

    let dx: Vec<f64> = if batch_stats.is_some() {
        // dx = γ/σ · (dy − mean(dy) − x̂·mean(dy·x̂))
        dy.data()
            .iter()
            .zip(x_hat.data())
            .enumerate()
            .map(|(i, (&g, &h))| {
                let c = channel_of(i, channels, inner);
                gamma.data()[c] * inv_std[c] * (g - dbeta[c] / count - h * dgamma[c] / count)
            })
            .collect()
    } else {
        dy.data()
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let c = channel_of(i, channels, inner);
                g * gamma.data()[c] * inv_std[c]
            })
            .collect()
    };
    Ok((
        Tensor::from_parts(x_hat.shape().to_vec(), dx),
        Tensor::from_parts(vec![channels], dgamma),
        Tensor::from_parts(vec![channels], dbeta),
    ))
}

/// `running ← (1 − momentum)·running + momentum·batch`.
pub fn update_running_stats(
    running_mean: &mut Tensor,
    running_var: &mut Tensor,
    cache: &BatchNormCache,
    momentum: f64,
) {
    if let Some((mean, var)) = cache.batch_stats() {
        for (r, &m) in running_mean.data_mut().iter_mut().zip(mean) {
            *r = (1.0 - momentum) * *r + momentum * m;
        }
        for (r, &v) in running_var.data_mut().iter_mut().zip(var) {
            *r = (1.0 - momentum) * *r + momentum * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> Tensor {
        Tensor::full(vec![n], 1.0).unwrap()
    }

    fn zeros(n: usize) -> Tensor {
        Tensor::zeros(vec![n]).unwrap()
    }

    #[test]
    fn two_point_column() {
        let x = Tensor::new(vec![2, 1], vec![1.0, 3.0]).unwrap();
        let (y, _) = batch_norm_train(&x, &ones(1), &zeros(1), 1e-5).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-4);
        assert!((y.data()[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn constant_column_maps_to_beta() {
        let x = Tensor::new(vec![3, 1], vec![4.2; 3]).unwrap();
        let (y, _) = batch_norm_train(&x, &ones(1), &zeros(1), 1e-5).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn infer_with_identity_statistics() {
        let x = Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 7.0, 0.0, -3.0]).unwrap();
        let (y, _) = batch_norm_infer(&x, &ones(3), &zeros(3), &zeros(3), &ones(3), 1e-5).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
        }
    }

    #[test]
    fn channel_form_pools_over_length() {
        // one channel, batch 1, length 4: stats over the 4 values
        let x = Tensor::new(vec![1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, cache) = batch_norm_train(&x, &ones(1), &zeros(1), 1e-5).unwrap();
        let (mean, var) = cache.batch_stats().unwrap();
        assert_eq!(mean, &[2.5]);
        assert_eq!(var, &[1.25]);
        assert!(y.sum_all().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let single = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        assert!(batch_norm_train(&single, &ones(2), &zeros(2), 1e-5).is_err());
        let x = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        assert!(batch_norm_train(&x, &ones(1), &zeros(1), 0.0).is_err());
    }

    #[test]
    fn running_stats_momentum() {
        let x = Tensor::new(vec![2, 1], vec![1.0, 3.0]).unwrap();
        let (_, cache) = batch_norm_train(&x, &ones(1), &zeros(1), 1e-5).unwrap();
        let (mut rm, mut rv) = (zeros(1), ones(1));
        update_running_stats(&mut rm, &mut rv, &cache, 0.1);
        assert!((rm.data()[0] - 0.2).abs() < 1e-15);
        assert!((rv.data()[0] - 1.0).abs() < 1e-15);
    }
}

use crate::error::{Error, Result};
use crate::layers::LayerMode;
use crate::rng::RngStream;
use crate::tensor::Tensor;

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )))
    }
}

/// Inverted dropout. In `Train` mode each element survives with probability
/// `1 − rate` and is scaled by `1/(1 − rate)`; the returned mask holds that
/// per-element factor (0 or the scale). `Infer` mode and `rate == 0` are the
/// identity and draw nothing from `stream`.
pub fn dropout(
    x: &Tensor,
    rate: f64,
    stream: &mut RngStream,
    mode: LayerMode,
) -> Result<(Tensor, Option<Tensor>)> {
    check_rate(rate)?;
    if mode == LayerMode::Infer || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let scale = 1.0 / (1.0 - rate);
    let mut mask = x.map(|_| 0.0);
    for m in mask.data_mut() {
        *m = if stream.bernoulli(1.0 - rate) {
            scale
        } else {
            0.0
        };
    }
    Ok((x.mul(&mask)?, Some(mask)))
}

/// Applies the forward mask to `dy`.
pub fn dropout_backward(mask: Option<&Tensor>, dy: &Tensor) -> Result<Tensor> {
    match mask {
        Some(m) => dy.mul(m),
        None => Ok(dy.clone()),
    }
}

use crate::error::{Error, Result};
use crate::layers::conv::output_length;
use crate::tensor::{argmax, Tensor};

fn expect_sequence(x: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    if x.rank() != 3 {
        return Err(Error::Shape(format!(
            "{what} expects [B×C×L], got {:?}",
            x.shape()
        )));
    }
    Ok((x.shape()[0], x.shape()[1], x.shape()[2]))
}

/// Windowed maximum along the length axis. Also returns, for every output
/// element, the flat input index it was taken from (lowest index on ties).
pub fn max_pool1d(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (batch, channels, len) = expect_sequence(x, "max_pool1d")?;
    let out_len = output_length(len, window, stride, 0)?;
    let mut out = Vec::with_capacity(batch * channels * out_len);
    let mut source = Vec::with_capacity(out.capacity());
    for row in 0..batch * channels {
        let base = row * len;
        for t in 0..out_len {
            let start = base + t * stride;
            let pick = start + argmax(&x.data()[start..start + window]);
            out.push(x.data()[pick]);
            source.push(pick);
        }
    }
    Ok((
        Tensor::from_parts(vec![batch, channels, out_len], out),
        source,
    ))
}

/// Routes each output gradient back to the input position that won its window.
pub fn max_pool1d_backward(input_shape: &[usize], source: &[usize], dy: &Tensor) -> Result<Tensor> {
    if dy.len() != source.len() {
        return Err(Error::Shape(format!(
            "max_pool1d backward: dy has {} values for {} windows",
            dy.len(),
            source.len()
        )));
    }
    let mut dx = Tensor::zeros(input_shape.to_vec())?;
    for (&i, &g) in source.iter().zip(dy.data()) {
        dx.data_mut()[i] += g;
    }
    Ok(dx)
}

/// Per-channel mean over the length axis: `[B×C×L] → [B×C]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    expect_sequence(x, "global_avg_pool")?;
    x.mean_axis(2)
}

/// Spreads `dy / L` uniformly over each channel.
pub fn global_avg_pool_backward(input_shape: &[usize], dy: &Tensor) -> Result<Tensor> {
    let [batch, channels, len] = input_shape else {
        return Err(Error::Shape(format!(
            "global_avg_pool backward for {input_shape:?}"
        )));
    };
    if dy.shape() != [*batch, *channels] {
        return Err(Error::Shape(format!(
            "global_avg_pool backward: dy {:?}",
            dy.shape()
        )));
    }
    let mut data = Vec::with_capacity(batch * channels * len);
    for &g in dy.data() {
        data.extend(std::iter::repeat(g / *len as f64).take(*len));
    }
    Ok(Tensor::from_parts(input_shape.to_vec(), data))
}

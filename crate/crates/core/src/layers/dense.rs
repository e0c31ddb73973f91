use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A contiguous run of input features that is accumulated as one block.
///
/// The head's first layer consumes the concatenation of branch outputs. Its
/// product is computed block by block and the block results are summed in
/// ascending `rank`, so reordering branches (together with the matching
/// weight rows) does not change a single bit of the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputSegment {
    pub offset: usize,
    pub width: usize,
    pub rank: usize,
}

fn check_dense(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    if x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 {
        return Err(Error::Shape(format!(
            "fully_connected expects x[B×in], W[in×out], b[out]; got {:?}, {:?}, {:?}",
            x.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let (b, d_in) = (x.shape()[0], x.shape()[1]);
    let (w_in, d_out) = (weight.shape()[0], weight.shape()[1]);
    if d_in != w_in || bias.shape()[0] != d_out {
        return Err(Error::Shape(format!(
            "fully_connected: x {:?}, W {:?}, b {:?} do not compose",
            x.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    Ok((b, d_in, d_out))
}

fn add_bias(mut y: Tensor, bias: &Tensor) -> Tensor {
    let n = bias.len();
    for row in y.data_mut().chunks_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    y
}

/// `y = x·W + b` with the bias broadcast over the batch.
pub fn fully_connected(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    check_dense(x, weight, bias)?;
    Ok(add_bias(x.matmul(weight)?, bias))
}

/// [`fully_connected`] with the inner product split into `segments`, which
/// must tile the input width exactly.
pub fn fully_connected_segmented(
    x: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    segments: &[InputSegment],
) -> Result<Tensor> {
    let (batch, d_in, d_out) = check_dense(x, weight, bias)?;
    let covered: usize = segments.iter().map(|s| s.width).sum();
    if covered != d_in || segments.iter().any(|s| s.offset + s.width > d_in) {
        return Err(Error::Shape(format!(
            "segments cover {covered} of {d_in} input features"
        )));
    }
    let mut order: Vec<&InputSegment> = segments.iter().collect();
    order.sort_by_key(|s| s.rank);

    let mut acc = vec![0.0; batch * d_out];
    let mut partial = vec![0.0; d_out];
    for seg in order {
        for i in 0..batch {
            partial.iter_mut().for_each(|p| *p = 0.0);
            for t in seg.offset..seg.offset + seg.width {
                let a = x.data()[i * d_in + t];
                let w_row = &weight.data()[t * d_out..(t + 1) * d_out];
                for (p, &w) in partial.iter_mut().zip(w_row) {
                    *p += a * w;
                }
            }
            for (c, p) in acc[i * d_out..(i + 1) * d_out].iter_mut().zip(&partial) {
                *c += p;
            }
        }
    }
    Ok(add_bias(Tensor::from_parts(vec![batch, d_out], acc), bias))
}

/// Gradients of `y = x·W + b`: returns `(dx, dW, db)` with
/// `dx = dy·Wᵀ`, `dW = xᵀ·dy`, `db = Σ_batch dy`.
pub fn fully_connected_backward(
    x: &Tensor,
    weight: &Tensor,
    dy: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let batch = x.shape()[0];
    if dy.rank() != 2 || dy.shape()[0] != batch || dy.shape()[1] != weight.shape()[1] {
        return Err(Error::Shape(format!(
            "fully_connected backward: dy {:?} for x {:?}, W {:?}",
            dy.shape(),
            x.shape(),
            weight.shape()
        )));
    }
    let dx = dy.matmul(&weight.transpose()?)?;
    let dw = x.transpose()?.matmul(dy)?;
    let db = dy.sum_axis(0)?;
    Ok((dx, dw, db))
}

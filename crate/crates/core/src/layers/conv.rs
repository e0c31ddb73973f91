use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output length of a 1-D convolution or pooling window sweep.
pub fn output_length(length: usize, window: usize, stride: usize, padding: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let padded = length + 2 * padding;
    if window == 0 || window > padded {
        return Err(Error::InvalidArgument(format!(
            "window {window} does not fit input of length {length} with padding {padding}"
        )));
    }
    Ok((padded - window) / stride + 1)
}

struct Dims {
    batch: usize,
    c_in: usize,
    len: usize,
    c_out: usize,
    k: usize,
    out_len: usize,
}

fn dims(x: &Tensor, kernel: &Tensor, stride: usize, padding: usize) -> Result<Dims> {
    if x.rank() != 3 || kernel.rank() != 3 {
        return Err(Error::Shape(format!(
            "conv1d expects x[B×C_in×L] and K[C_out×C_in×k]; got {:?} and {:?}",
            x.shape(),
            kernel.shape()
        )));
    }
    let (batch, c_in, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, kc, k) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    if kc != c_in {
        return Err(Error::Shape(format!(
            "conv1d kernel expects {kc} input channels, input has {c_in}"
        )));
    }
    let out_len = output_length(len, k, stride, padding)?;
    Ok(Dims {
        batch,
        c_in,
        len,
        c_out,
        k,
        out_len,
    })
}

/// 1-D cross-correlation with zero padding:
/// `out[b][o][t] = Σ_c Σ_j x[b][c][t·stride + j − padding]·K[o][c][j] + bias[o]`.
///
/// The sum runs over input channels in the outer loop and kernel taps in the
/// inner loop, accumulating into one running total that starts at zero; the
/// bias is added last. Taps that land in the padding are skipped.
pub fn conv1d(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let d = dims(x, kernel, stride, padding)?;
    if bias.shape() != [d.c_out] {
        return Err(Error::Shape(format!(
            "conv1d bias {:?} for {} output channels",
            bias.shape(),
            d.c_out
        )));
    }
    let (xs, ks) = (x.data(), kernel.data());
    let mut out = vec![0.0; d.batch * d.c_out * d.out_len];
    for b in 0..d.batch {
        for o in 0..d.c_out {
            for t in 0..d.out_len {
                let mut acc = 0.0;
                for c in 0..d.c_in {
                    let x_row = &xs[(b * d.c_in + c) * d.len..(b * d.c_in + c + 1) * d.len];
                    let k_row = &ks[(o * d.c_in + c) * d.k..(o * d.c_in + c + 1) * d.k];
                    for (j, &w) in k_row.iter().enumerate() {
                        let pos = (t * stride + j) as isize - padding as isize;
                        if pos >= 0 && (pos as usize) < d.len {
                            acc += x_row[pos as usize] * w;
                        }
                    }
                }
                out[(b * d.c_out + o) * d.out_len + t] = acc + bias.data()[o];
            }
        }
    }
    Ok(Tensor::from_parts(vec![d.batch, d.c_out, d.out_len], out))
}

/// Gradients of [`conv1d`]: returns `(dx, dK, db)`.
pub fn conv1d_backward(
    x: &Tensor,
    kernel: &Tensor,
    dy: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = dims(x, kernel, stride, padding)?;
    if dy.shape() != [d.batch, d.c_out, d.out_len] {
        return Err(Error::Shape(format!(
            "conv1d backward: dy {:?}, expected {:?}",
            dy.shape(),
            [d.batch, d.c_out, d.out_len]
        )));
    }
    let (xs, ks, g) = (x.data(), kernel.data(), dy.data());
    let mut dx = vec![0.0; xs.len()];
    let mut dk = vec![0.0; ks.len()];
    let mut db = vec![0.0; d.c_out];
    for b in 0..d.batch {
        for o in 0..d.c_out {
            for t in 0..d.out_len {
                let grad = g[(b * d.c_out + o) * d.out_len + t];
                db[o] += grad;
                for c in 0..d.c_in {
                    let x_base = (b * d.c_in + c) * d.len;
                    let k_base = (o * d.c_in + c) * d.k;
                    for j in 0..d.k {
                        let pos = (t * stride + j) as isize - padding as isize;
                        if pos >= 0 && (pos as usize) < d.len {
                            let p = x_base + pos as usize;
                            dx[p] += grad * ks[k_base + j];
                            dk[k_base + j] += grad * xs[p];
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_parts(x.shape().to_vec(), dx),
        Tensor::from_parts(kernel.shape().to_vec(), dk),
        Tensor::from_parts(vec![d.c_out], db),
    ))
}

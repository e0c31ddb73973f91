//! Dense row-major `f64` tensors.
//!
//! A [`Tensor`] is a value: every operation returns a fresh tensor and leaves
//! its inputs untouched. Shapes are checked at construction and at every
//! binary operation. There is no implicit broadcasting; the only mixed
//! tensor/scalar operations are [`Tensor::scale`] and [`Tensor::add_scalar`].

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?}{:?}", self.shape, self.data)
        } else {
            write!(
                f,
                "Tensor{:?}[{}, {}, .. {} values]",
                self.shape,
                self.data[0],
                self.data[1],
                self.data.len()
            )
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::Shape("tensor needs at least one dimension".into()));
    }
    if let Some(axis) = shape.iter().position(|&d| d == 0) {
        return Err(Error::Shape(format!(
            "dimension {axis} of {shape:?} is zero"
        )));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    /// Builds a tensor from a shape and flat row-major data.
    ///
    /// Fails when the element count disagrees with the shape or a dimension
    /// is zero. Builds with debug assertions also reject NaN and infinities.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let len = check_shape(&shape)?;
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {len} values but {} were given",
                data.len()
            )));
        }
        if cfg!(debug_assertions) {
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for callers that have already established the
    /// length invariant.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        debug_assert!(shape.iter().all(|&d| d > 0));
        Self { shape, data }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Result<Self> {
        let shape = shape.into();
        let len = check_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![value; len],
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    /// A 1-D tensor over `values`.
    pub fn vector(values: Vec<f64>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }

    /// A 2-D tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    /// The `n×n` identity matrix.
    pub fn eye(n: usize) -> Result<Self> {
        let mut t = Self::zeros(vec![n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false: zero-sized tensors cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Element at a full multi-index.
    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.shape.len() {
            return None;
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return None;
            }
            flat = flat * d + i;
        }
        Some(self.data[flat])
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        let len = check_shape(&shape)?;
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self {
            shape,
            data: self.data.clone(),
        })
    }

    fn expect_rank(&self, rank: usize, what: &str) -> Result<()> {
        if self.rank() != rank {
            return Err(Error::Shape(format!(
                "{what} expects a rank-{rank} tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    fn same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Matrix product of `[m×k]` and `[k×n]`.
    ///
    /// Each output element accumulates its `k` products in ascending order of
    /// the inner index, starting from zero.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        self.expect_rank(2, "matmul")?;
        other.expect_rank(2, "matmul")?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions differ: {:?} · {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for t in 0..k {
                let a = self.data[i * k + t];
                let b_row = &other.data[t * n..(t + 1) * n];
                for (c, &b) in row.iter_mut().zip(b_row) {
                    *c += a * b;
                }
            }
        }
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    /// Transpose of a 2-D tensor.
    pub fn transpose(&self) -> Result<Tensor> {
        self.expect_rank(2, "transpose")?;
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    fn zip_with(&self, other: &Tensor, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(other, what)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor::from_parts(self.shape.clone(), data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn add_scalar(&self, value: f64) -> Tensor {
        self.map(|v| v + value)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum_all(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean_all(&self) -> f64 {
        self.sum_all() / self.data.len() as f64
    }

    pub fn max_all(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Flat index of the largest element; ties go to the lowest index.
    pub fn argmax_all(&self) -> usize {
        argmax(&self.data)
    }

    /// Splits the shape around `axis` into (outer, len, inner) extents.
    fn axis_extents(&self, axis: usize) -> Result<(usize, usize, usize)> {
        if axis >= self.rank() {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let outer = self.shape[..axis].iter().product();
        let inner = self.shape[axis + 1..].iter().product();
        Ok((outer, self.shape[axis], inner))
    }

    fn reduced_shape(&self, axis: usize) -> Vec<usize> {
        let mut shape = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        shape
    }

    fn reduce_axis(
        &self,
        axis: usize,
        f: impl Fn(&mut dyn Iterator<Item = f64>) -> f64,
    ) -> Result<Tensor> {
        let (outer, len, inner) = self.axis_extents(axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut it = (0..len).map(|t| self.data[base + t * inner]);
                out.push(f(&mut it));
            }
        }
        Ok(Tensor::from_parts(self.reduced_shape(axis), out))
    }

    /// Sum along `axis`, removing it from the shape.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        self.reduce_axis(axis, |it| it.sum())
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let len = self.axis_extents(axis)?.1 as f64;
        self.reduce_axis(axis, |it| it.sum::<f64>() / len)
    }

    pub fn max_axis(&self, axis: usize) -> Result<Tensor> {
        self.reduce_axis(axis, |it| it.fold(f64::NEG_INFINITY, f64::max))
    }

    /// Position of the maximum along `axis` for every remaining index, in
    /// row-major order of the reduced shape. Ties go to the lowest position.
    pub fn argmax_axis(&self, axis: usize) -> Result<Vec<usize>> {
        let (outer, len, inner) = self.axis_extents(axis)?;
        let mut out = Vec::with_capacity(outer * inner);
        let mut buf = Vec::with_capacity(len);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                buf.clear();
                buf.extend((0..len).map(|t| self.data[base + t * inner]));
                out.push(argmax(&buf));
            }
        }
        Ok(out)
    }

    /// Gathers slices along the first axis, in the order given.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let rows = self.shape[0];
        let stride = self.data.len() / rows;
        if indices.is_empty() {
            return Err(Error::InvalidArgument("select_rows with no indices".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            if i >= rows {
                return Err(Error::InvalidArgument(format!(
                    "row {i} out of range for {rows} rows"
                )));
            }
            data.extend_from_slice(&self.data[i * stride..(i + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Ok(Tensor::from_parts(shape, data))
    }

    /// Slice `i` along the first axis, as a tensor of the remaining shape
    /// (or `[1]` for a 1-D tensor).
    pub fn row(&self, i: usize) -> Result<Tensor> {
        let t = self.select_rows(&[i])?;
        let shape = if self.rank() == 1 {
            vec![1]
        } else {
            self.shape[1..].to_vec()
        };
        t.reshape(shape)
    }

    /// Concatenates tensors along the first axis. Trailing dimensions must
    /// agree.
    pub fn stack_rows(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack_rows of nothing".into()))?;
        let tail = &first.shape[1..];
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            if &p.shape[1..] != tail {
                return Err(Error::Shape(format!(
                    "stack_rows: {:?} vs {:?}",
                    first.shape, p.shape
                )));
            }
            rows += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = rows;
        Ok(Tensor::from_parts(shape, data))
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t2(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn construction_checks_length_and_dimensions() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.get(&[1, 0]), Some(3.0));
        assert!(matches!(
            Tensor::new(vec![3], vec![0.0, 0.0]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            Tensor::new(vec![0, 2], vec![]),
            Err(Error::Shape(_))
        ));
        let thickness = Tensor::new(vec![1], vec![96.1]).unwrap();
        assert_eq!(thickness.data(), &[96.1]);
    }

    #[cfg(debug_assertions)]
    #[test]
    fn non_finite_rejected_in_checked_builds() {
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn matmul_hand_example() {
        let a = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = t2(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(a.matmul(&b).unwrap(), t2(&[&[19.0, 22.0], &[43.0, 50.0]]));
        assert!(a.matmul(&Tensor::zeros(vec![3, 1]).unwrap()).is_err());
    }

    #[test]
    fn matmul_identity_and_zero() {
        let a = t2(&[&[1.5, -2.0, 0.25], &[3.0, 4.0, 9.0]]);
        assert_eq!(Tensor::eye(2).unwrap().matmul(&a).unwrap(), a);
        let z = Tensor::zeros(vec![4, 2]).unwrap().matmul(&a).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn elementwise_ops() {
        let a = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let b = Tensor::vector(vec![3.0, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(a.scale(1.0), a);
        assert!(a.sub(&a).unwrap().data().iter().all(|&v| v == 0.0));
        assert_eq!(a.mul(&b).unwrap().data(), &[3.0, 8.0]);
        assert!(a.add(&Tensor::zeros(vec![3]).unwrap()).is_err());
        // inputs untouched
        assert_eq!(a.data(), &[1.0, 2.0]);
    }

    #[test]
    fn reductions() {
        let v = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.mean_all(), 2.0);
        assert_eq!(Tensor::full(vec![2, 3], 7.5).unwrap().max_all(), 7.5);
        assert_eq!(Tensor::vector(vec![0.0, 5.0, 5.0]).unwrap().argmax_all(), 1);

        let m = t2(&[&[1.0, 9.0, 3.0], &[4.0, 5.0, 9.0]]);
        assert_eq!(m.sum_axis(0).unwrap().data(), &[5.0, 14.0, 12.0]);
        assert_eq!(m.mean_axis(1).unwrap().data(), &[13.0 / 3.0, 6.0]);
        assert_eq!(m.max_axis(0).unwrap().data(), &[4.0, 9.0, 9.0]);
        assert_eq!(m.argmax_axis(1).unwrap(), vec![1, 2]);
        assert_eq!(v.sum_axis(0).unwrap().shape(), &[1]);
        assert!(matches!(m.sum_axis(2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn transpose_reductions_agree() {
        let m = t2(&[&[1.0, 2.0, 3.0], &[2.0, 5.0, 6.0], &[3.0, 6.0, 9.0]]);
        let rows_of_t = m.transpose().unwrap().mean_axis(1).unwrap();
        let cols = m.mean_axis(0).unwrap();
        assert_eq!(rows_of_t, cols);
    }

    #[test]
    fn select_and_stack_rows() {
        let m = t2(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let s = m.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.data(), &[5.0, 6.0, 1.0, 2.0]);
        let back = Tensor::stack_rows(&[
            m.select_rows(&[0]).unwrap(),
            m.select_rows(&[1, 2]).unwrap(),
        ])
        .unwrap();
        assert_eq!(back, m);
        assert_eq!(m.row(1).unwrap().data(), &[3.0, 4.0]);
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
        proptest::collection::vec(-3.0f64..3.0, rows * cols)
            .prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_is_associative(a in small_matrix(3, 4), b in small_matrix(4, 2), c in small_matrix(2, 5)) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-10);
        }

        #[test]
        fn matmul_distributes_over_add(a in small_matrix(3, 4), b in small_matrix(4, 2), c in small_matrix(4, 2)) {
            let left = a.matmul(&b.add(&c).unwrap()).unwrap();
            let right = a.matmul(&b).unwrap().add(&a.matmul(&c).unwrap()).unwrap();
            prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-10);
        }
    }
}

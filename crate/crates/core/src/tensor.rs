// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shapes, flat storage and mode slicing for sequences of order-κ tensors.
//!
//! Public indices (multi-indices, modes, slice numbers, time points) are
//! 1-based; storage is 0-based and row-major, one flattened tensor per time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions `(p_1, ..., p_κ)` of one tensor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::argument("tensor order must be at least 1"));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::argument(format!("dimension {} is zero", pos + 1)));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::argument("element count overflows usize"))?;
        Ok(Self { dims, len })
    }

    pub fn vector(p: usize) -> Result<Self> {
        Self::new(vec![p])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Tensor order κ.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Element count p.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of `mode` (1-based).
    pub fn dim(&self, mode: usize) -> Result<usize> {
        self.check_mode(mode)?;
        Ok(self.dims[mode - 1])
    }

    /// Row-major stride of `mode` (1-based).
    pub fn stride(&self, mode: usize) -> Result<usize> {
        self.check_mode(mode)?;
        Ok(self.dims[mode..].iter().product())
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode == 0 || mode > self.order() {
            return Err(Error::argument(format!(
                "mode {mode} out of range 1..={}",
                self.order()
            )));
        }
        Ok(())
    }

    /// Row-major linear index (0-based) of a 1-based multi-index.
    pub fn flatten_index(&self, multi_index: &[usize]) -> Result<usize> {
        if multi_index.len() != self.order() {
            return Err(Error::Index(format!(
                "multi-index has {} components, shape has order {}",
                multi_index.len(),
                self.order()
            )));
        }
        let mut linear = 0usize;
        for (l, (&idx, &dim)) in multi_index.iter().zip(&self.dims).enumerate() {
            if idx == 0 || idx > dim {
                return Err(Error::Index(format!(
                    "component {} = {idx} outside 1..={dim}",
                    l + 1
                )));
            }
            linear = linear * dim + (idx - 1);
        }
        Ok(linear)
    }

    /// Inverse of [`Shape::flatten_index`].
    pub fn unflatten_index(&self, mut linear: usize) -> Result<Vec<usize>> {
        if linear >= self.len {
            return Err(Error::Index(format!(
                "linear index {linear} outside 0..{}",
                self.len
            )));
        }
        let mut out = vec![0; self.order()];
        for (slot, &dim) in out.iter_mut().zip(&self.dims).rev() {
            *slot = linear % dim + 1;
            linear /= dim;
        }
        Ok(out)
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = Error;

    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        shape.dims
    }
}

/// Row-major linear index of a 1-based multi-index.
pub fn flatten_index(multi_index: &[usize], shape: &Shape) -> Result<usize> {
    shape.flatten_index(multi_index)
}

/// A length-n sequence of tensors sharing one shape. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeq {
    shape: Shape,
    n: usize,
    data: Vec<f64>,
}

impl TensorSeq {
    /// Wraps `n * shape.len()` row-major values; rejects NaN and infinities.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        let p = shape.len();
        if !data.len().is_multiple_of(p) {
            return Err(Error::argument(format!(
                "data length {} is not a multiple of the element count {p}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / p + 1,
                col: pos % p + 1,
            });
        }
        let n = data.len() / p;
        if n == 0 {
            return Err(Error::argument("sequence is empty"));
        }
        Ok(Self { shape, n, data })
    }

    /// A scalar series (order-1, p = 1).
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(Shape::vector(1)?, values)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Number of time points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Elements per tensor.
    pub fn p(&self) -> usize {
        self.shape.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flattened tensor at time `i` (1-based).
    pub fn tensor(&self, i: usize) -> &[f64] {
        assert!(i >= 1 && i <= self.n, "time index {i} outside 1..={}", self.n);
        let p = self.p();
        &self.data[(i - 1) * p..i * p]
    }

    /// Zero-based row access for internal kernels.
    pub(crate) fn row(&self, t: usize) -> &[f64] {
        let p = self.p();
        &self.data[t * p..(t + 1) * p]
    }
}

/// The `l`-th slice along one mode: a view over a subset of columns.
#[derive(Clone, Debug)]
pub struct SliceSeq<'a> {
    parent: &'a TensorSeq,
    mode: usize,
    index: usize,
    dims: Vec<usize>,
    columns: Vec<usize>,
}

impl<'a> SliceSeq<'a> {
    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Slice number `l` (1-based).
    pub fn index(&self) -> usize {
        self.index
    }

    /// Shape of the parent with the sliced mode removed; empty for order-1 parents.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn n(&self) -> usize {
        self.parent.n()
    }

    /// Parent flat column of every slice element, in row-major order of the slice.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    /// Element `k` (0-based within the slice) at time `i` (1-based).
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.parent.tensor(i)[self.columns[k]]
    }

    /// Copies the slice out as a standalone sequence.
    pub fn to_seq(&self) -> TensorSeq {
        let dims = if self.dims.is_empty() {
            vec![1]
        } else {
            self.dims.clone()
        };
        let shape = Shape::new(dims).expect("slice dims are positive");
        let mut data = Vec::with_capacity(self.n() * self.len());
        for t in 0..self.n() {
            let row = self.parent.row(t);
            data.extend(self.columns.iter().map(|&c| row[c]));
        }
        TensorSeq::new(shape, data).expect("parent values are finite")
    }
}

/// Parent columns belonging to slice `l` (1-based) of `mode` (1-based).
pub fn slice_columns(shape: &Shape, mode: usize, l: usize) -> Result<Vec<usize>> {
    let dim = shape.dim(mode)?;
    if l == 0 || l > dim {
        return Err(Error::argument(format!(
            "slice index {l} outside 1..={dim} for mode {mode}"
        )));
    }
    let inner = shape.stride(mode)?;
    let outer = shape.len() / (dim * inner);
    let mut cols = Vec::with_capacity(outer * inner);
    for a in 0..outer {
        let base = a * dim * inner + (l - 1) * inner;
        cols.extend(base..base + inner);
    }
    Ok(cols)
}

/// The sub-sequence of mode-`mode` slices at index `l` (both 1-based).
pub fn slice_mode(seq: &TensorSeq, mode: usize, l: usize) -> Result<SliceSeq<'_>> {
    let columns = slice_columns(seq.shape(), mode, l)?;
    let mut dims = seq.shape().dims().to_vec();
    dims.remove(mode - 1);
    Ok(SliceSeq {
        parent: seq,
        mode,
        index: l,
        dims,
        columns,
    })
}

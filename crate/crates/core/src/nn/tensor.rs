use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape {
                expected: format!("{shape:?} ({n} values)"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Trailing extent for a 2-D view; 1-D tensors are a single row.
    pub fn cols(&self) -> usize {
        if self.shape.len() == 1 {
            self.shape[0]
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// `x [B, I] * w [I, O] + bias [O]`.
pub fn affine(x: &Tensor, w: &Tensor, bias: &Tensor) -> Tensor {
    let (b, i, o) = (x.rows(), x.cols(), w.cols());
    assert_eq!(i, w.rows(), "affine: inner dimensions differ");
    assert_eq!(bias.len(), o, "affine: bias width");
    let mut out = Tensor::zeros(&[b, o]);
    for r in 0..b {
        out.row_mut(r).copy_from_slice(bias.as_slice());
    }
    // SAFETY: the strides describe the row-major [b, i], [i, o] and [b, o]
    // buffers whose lengths were checked above.
    unsafe {
        matrixmultiply::dgemm(
            b, i, o, 1.0,
            x.data.as_ptr(), i as isize, 1,
            w.data.as_ptr(), o as isize, 1,
            1.0,
            out.data.as_mut_ptr(), o as isize, 1,
        );
    }
    out
}

/// `x^T [I, B] * d [B, O]` accumulated into `acc [I, O]`.
pub fn add_outer(acc: &mut Tensor, x: &Tensor, d: &Tensor) {
    let (b, i, o) = (x.rows(), x.cols(), d.cols());
    assert_eq!(d.rows(), b, "add_outer: batch sizes differ");
    assert_eq!(acc.len(), i * o, "add_outer: accumulator shape");
    // SAFETY: x is read transposed through its strides; all buffers match
    // the asserted shapes.
    unsafe {
        matrixmultiply::dgemm(
            i, b, o, 1.0,
            x.data.as_ptr(), 1, i as isize,
            d.data.as_ptr(), o as isize, 1,
            1.0,
            acc.data.as_mut_ptr(), o as isize, 1,
        );
    }
}

/// `d [B, O] * w^T [O, I]`.
pub fn matmul_transposed(d: &Tensor, w: &Tensor) -> Tensor {
    let (b, o, i) = (d.rows(), d.cols(), w.rows());
    assert_eq!(w.cols(), o, "matmul_transposed: inner dimensions differ");
    let mut out = Tensor::zeros(&[b, i]);
    // SAFETY: w is read transposed through its strides; shapes checked above.
    unsafe {
        matrixmultiply::dgemm(
            b, o, i, 1.0,
            d.data.as_ptr(), o as isize, 1,
            w.data.as_ptr(), 1, o as isize,
            0.0,
            out.data.as_mut_ptr(), i as isize, 1,
        );
    }
    out
}

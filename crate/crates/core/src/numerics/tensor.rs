//! Dense row-major tensors.
//!
//! Shapes are explicit extents; an empty shape is a scalar. Elementwise
//! binary operations accept equal shapes or a single-element operand
//! (scalar broadcast); nothing more general is supported.

use super::scalar::Scalar;
use crate::error::{EbmError, EbmResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<T>) -> EbmResult<Self> {
        let shape = shape.into();
        if numel_of(&shape) != data.len() {
            return Err(EbmError::invalid(
                "tensor data",
                format!(
                    "shape {:?} implies {} elements, got {}",
                    shape,
                    numel_of(&shape),
                    data.len()
                ),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(EbmError::invalid(
                "tensor data",
                format!("non-finite element {bad}"),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n = numel_of(&shape);
        Tensor {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n = numel_of(&shape);
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    /// 1-D tensor from a plain vector.
    pub fn vector(data: Vec<T>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// 2-D tensor from rows of equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> EbmResult<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(EbmError::invalid("tensor rows", "ragged row lengths"));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Tensor::from_vec(vec![r, c], data)
    }

    /// Column vector `[n, 1]` from a slice.
    pub fn column(data: &[T]) -> Self {
        Tensor {
            shape: vec![data.len(), 1],
            data: data.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Extract the single element of a one-element tensor.
    pub fn item(&self) -> EbmResult<T> {
        if self.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(EbmError::NonScalarLoss {
                shape: self.shape.clone(),
            })
        }
    }

    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> EbmResult<Self> {
        let shape = shape.into();
        if numel_of(&shape) != self.data.len() {
            return Err(EbmError::ShapeMismatch {
                op: "reshape",
                left: self.shape.clone(),
                right: shape,
            });
        }
        Ok(Tensor {
            shape,
            data: self.data.clone(),
        })
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> EbmResult<Self> {
        if self.shape == other.shape {
            let data = self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect();
            Ok(Tensor {
                shape: self.shape.clone(),
                data,
            })
        } else if other.is_scalar() {
            let b = other.data[0];
            Ok(self.map(|a| f(a, b)))
        } else if self.is_scalar() {
            let a = self.data[0];
            Ok(other.map(|b| f(a, b)))
        } else {
            Err(EbmError::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            })
        }
    }

    pub fn add(&self, other: &Self) -> EbmResult<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> EbmResult<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> EbmResult<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn matmul(&self, other: &Self) -> EbmResult<Self> {
        let ([m, k], [k2, n]) = (dims2(self)?, dims2(other)?);
        if k != k2 {
            return Err(EbmError::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let row = &other.data[p * n..(p + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn transpose(&self) -> EbmResult<Self> {
        let [r, c] = dims2(self)?;
        let mut data = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Tensor {
            shape: vec![c, r],
            data,
        })
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.data.len().max(1))
    }

    pub fn dot(&self, other: &Self) -> EbmResult<T> {
        if self.shape != other.shape {
            return Err(EbmError::ShapeMismatch {
                op: "dot",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn concat(parts: &[&Self], axis: usize) -> EbmResult<Self> {
        let first = parts.first().ok_or(EbmError::Empty { what: "concat" })?;
        let rank = first.shape.len();
        if axis >= rank {
            return Err(EbmError::invalid(
                "concat axis",
                format!("axis {axis} out of range for rank {rank}"),
            ));
        }
        let mut out_shape = first.shape.clone();
        for part in &parts[1..] {
            let mut expect = part.shape.clone();
            if expect.len() != rank {
                return Err(EbmError::ShapeMismatch {
                    op: "concat",
                    left: first.shape.clone(),
                    right: part.shape.clone(),
                });
            }
            expect[axis] = first.shape[axis];
            if expect != first.shape {
                return Err(EbmError::ShapeMismatch {
                    op: "concat",
                    left: first.shape.clone(),
                    right: part.shape.clone(),
                });
            }
            out_shape[axis] += part.shape[axis];
        }
        let inner: usize = first.shape[axis + 1..].iter().product();
        let outer: usize = first.shape[..axis].iter().product();
        let mut data = Vec::with_capacity(numel_of(&out_shape));
        for o in 0..outer {
            for part in parts {
                let mid = part.shape[axis];
                let block = mid * inner;
                data.extend_from_slice(&part.data[o * block..(o + 1) * block]);
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Contiguous slice of `len` extents starting at `start` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> EbmResult<Self> {
        let rank = self.shape.len();
        if axis >= rank || start + len > self.shape[axis] {
            return Err(EbmError::invalid(
                "narrow",
                format!(
                    "axis {axis}, start {start}, len {len} invalid for shape {:?}",
                    self.shape
                ),
            ));
        }
        let inner: usize = self.shape[axis + 1..].iter().product();
        let outer: usize = self.shape[..axis].iter().product();
        let mid = self.shape[axis];
        let mut out_shape = self.shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * mid * inner + start * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Adds `other * factor` into `self` in place (shapes must match).
    pub fn axpy(&mut self, factor: T, other: &Self) -> EbmResult<()> {
        if self.shape != other.shape {
            return Err(EbmError::ShapeMismatch {
                op: "axpy",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (d, &s) in self.data.iter_mut().zip(&other.data) {
            *d += factor * s;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn dims2<T: Scalar>(t: &Tensor<T>) -> EbmResult<[usize; 2]> {
    match t.shape() {
        [r, c] => Ok([*r, *c]),
        other => Err(EbmError::invalid(
            "matrix operand",
            format!("expected rank 2, got shape {other:?}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type T64 = Tensor<f64>;

    #[test]
    fn matmul_identity_preserves_matrix() {
        let a = T64::from_rows(&[
            vec![1.0, -2.0, 0.5],
            vec![3.0, 4.0, -1.0],
            vec![0.0, 7.0, 2.0],
        ])
        .unwrap();
        let eye = T64::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(eye.matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&eye).unwrap(), a);
    }

    #[test]
    fn matmul_hand_expansion() {
        let a = T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = T64::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = T64::zeros([2, 3]);
        let b = T64::zeros([4, 2]);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{msg}");
    }

    #[test]
    fn scalar_broadcast_both_ways() {
        let a = T64::vector(vec![1.0, 2.0, 3.0]);
        let s = T64::scalar(10.0);
        assert_eq!(a.add(&s).unwrap().data(), &[11.0, 12.0, 13.0]);
        assert_eq!(s.sub(&a).unwrap().data(), &[9.0, 8.0, 7.0]);
    }

    #[test]
    fn non_finite_rejected_at_construction() {
        assert!(T64::from_vec(vec![2], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn narrow_and_concat_roundtrip() {
        let t = T64::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let top = t.narrow(0, 0, 1).unwrap();
        let rest = t.narrow(0, 1, 2).unwrap();
        let back = T64::concat(&[&top, &rest], 0).unwrap();
        assert_eq!(back, t);

        let left = t.narrow(1, 0, 1).unwrap();
        assert_eq!(left.data(), &[1.0, 3.0, 5.0]);
        let right = t.narrow(1, 1, 1).unwrap();
        let glued = T64::concat(&[&left, &right], 1).unwrap();
        assert_eq!(glued, t);
    }
}

//! Reverse-mode gradient accumulation on a per-forward-pass tape.
//!
//! Operations are recorded in creation order, which is already a topological
//! order, so the backward sweep is a single reverse pass that visits each
//! node exactly once. A tape lives for one forward/backward cycle and is
//! consumed by [`Tape::backward`].

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{EbmError, EbmResult};

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    /// Differentiable input (parameter or data).
    Leaf,
    /// Non-differentiable input; receives no adjoint.
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Matmul(usize, usize),
    Transpose(usize),
    Sum(usize),
    Mean(usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Square(usize),
    Sqrt(usize),
    Log(usize),
    Exp(usize),
    Neg(usize),
    Scale(usize, T),
    AddScalar(usize),
    Concat { parts: Vec<usize>, axis: usize },
    Narrow { input: usize, axis: usize, start: usize },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Record a differentiable leaf (a parameter or an input we want
    /// gradients for).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Record a constant; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn scalar_const(&mut self, value: T) -> Var {
        self.constant(Tensor::scalar(value))
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn item(&self, v: Var) -> EbmResult<T> {
        self.nodes[v.0].value.item()
    }

    pub fn add(&mut self, a: Var, b: Var) -> EbmResult<Var> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> EbmResult<Var> {
        let value = self.nodes[a.0].value.sub(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Sub(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> EbmResult<Var> {
        let value = self.nodes[a.0].value.mul(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Mul(a.0, b.0)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> EbmResult<Var> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push(value, Op::Matmul(a.0, b.0)))
    }

    pub fn transpose(&mut self, a: Var) -> EbmResult<Var> {
        let value = self.nodes[a.0].value.transpose()?;
        Ok(self.push(value, Op::Transpose(a.0)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.nodes[a.0].value.sum());
        self.push(value, Op::Sum(a.0))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.nodes[a.0].value.mean());
        self.push(value, Op::Mean(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let one = T::one();
        let value = self.nodes[a.0].value.map(|x| one / (one + (-x).exp()));
        self.push(value, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.tanh());
        self.push(value, Op::Tanh(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.max(T::zero()));
        self.push(value, Op::Relu(a.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x * x);
        self.push(value, Op::Square(a.0))
    }

    pub fn sqrt(&mut self, a: Var) -> EbmResult<Var> {
        if self.nodes[a.0].value.data().iter().any(|&x| x < T::zero()) {
            return Err(EbmError::domain("sqrt", "negative input"));
        }
        let value = self.nodes[a.0].value.map(|x| x.sqrt());
        Ok(self.push(value, Op::Sqrt(a.0)))
    }

    pub fn log(&mut self, a: Var) -> EbmResult<Var> {
        if self.nodes[a.0].value.data().iter().any(|&x| x <= T::zero()) {
            return Err(EbmError::domain("log", "non-positive input"));
        }
        let value = self.nodes[a.0].value.map(|x| x.ln());
        Ok(self.push(value, Op::Log(a.0)))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.exp());
        self.push(value, Op::Exp(a.0))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| -x);
        self.push(value, Op::Neg(a.0))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let value = self.nodes[a.0].value.scale(factor);
        self.push(value, Op::Scale(a.0, factor))
    }

    pub fn add_scalar(&mut self, a: Var, shift: T) -> Var {
        let value = self.nodes[a.0].value.map(|x| x + shift);
        self.push(value, Op::AddScalar(a.0))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> EbmResult<Var> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = Tensor::concat(&tensors, axis)?;
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.iter().map(|v| v.0).collect(),
                axis,
            },
        ))
    }

    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> EbmResult<Var> {
        let value = self.nodes[a.0].value.narrow(axis, start, len)?;
        Ok(self.push(
            value,
            Op::Narrow {
                input: a.0,
                axis,
                start,
            },
        ))
    }

    // ── composites (built from primitives, no extra backward rules) ──

    /// `sum((a - b)^2)`
    pub fn sq_dist(&mut self, a: Var, b: Var) -> EbmResult<Var> {
        let d = self.sub(a, b)?;
        let sq = self.square(d);
        Ok(self.sum(sq))
    }

    /// `sum(a^2)`
    pub fn sq_norm(&mut self, a: Var) -> Var {
        let sq = self.square(a);
        self.sum(sq)
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape and returns
    /// adjoints for every leaf; leaves the loss does not depend on get
    /// zero gradients.
    pub fn backward(self, loss: Var) -> EbmResult<Gradients<T>> {
        let node = &self.nodes[loss.0];
        if !node.value.is_scalar() {
            return Err(EbmError::NonScalarLoss {
                shape: node.value.shape().to_vec(),
            });
        }
        let n = self.nodes.len();
        let mut adjoint: Vec<Option<Tensor<T>>> = (0..n).map(|_| None).collect();
        adjoint[loss.0] = Some(Tensor::full(
            self.nodes[loss.0].value.shape().to_vec(),
            T::one(),
        ));

        for idx in (0..n).rev() {
            // Nodes the loss does not depend on never receive an adjoint.
            let Some(up) = adjoint[idx].take() else {
                continue;
            };
            // Cloned so `accumulate` can borrow the adjoint table mutably;
            // the original is re-stashed for leaf collection below.
            let up_for_children = up.clone();
            adjoint[idx] = Some(up);
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf | Op::Constant => {}
                Op::Add(a, b) => {
                    accumulate(&mut adjoint, &self.nodes, *a, &up_for_children)?;
                    accumulate(&mut adjoint, &self.nodes, *b, &up_for_children)?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adjoint, &self.nodes, *a, &up_for_children)?;
                    let neg = up_for_children.map(|v| -v);
                    accumulate(&mut adjoint, &self.nodes, *b, &neg)?;
                }
                Op::Mul(a, b) => {
                    let ga = up_for_children.mul(&self.nodes[*b].value)?;
                    let gb = up_for_children.mul(&self.nodes[*a].value)?;
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                    accumulate(&mut adjoint, &self.nodes, *b, &gb)?;
                }
                Op::Matmul(a, b) => {
                    let at = self.nodes[*a].value.transpose()?;
                    let bt = self.nodes[*b].value.transpose()?;
                    let ga = up_for_children.matmul(&bt)?;
                    let gb = at.matmul(&up_for_children)?;
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                    accumulate(&mut adjoint, &self.nodes, *b, &gb)?;
                }
                Op::Transpose(a) => {
                    let ga = up_for_children.transpose()?;
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Sum(a) => {
                    let g = up_for_children.item()?;
                    let ga = Tensor::full(self.nodes[*a].value.shape().to_vec(), g);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Mean(a) => {
                    let n_in = self.nodes[*a].value.numel().max(1);
                    let g = up_for_children.item()? / T::from_usize(n_in);
                    let ga = Tensor::full(self.nodes[*a].value.shape().to_vec(), g);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Sigmoid(a) => {
                    let one = T::one();
                    let ga = zip_grad(&up_for_children, &node.value, |g, y| g * y * (one - y));
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Tanh(a) => {
                    let one = T::one();
                    let ga = zip_grad(&up_for_children, &node.value, |g, y| g * (one - y * y));
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Relu(a) => {
                    // Subgradient 0 at the kink.
                    let ga = zip_grad(&up_for_children, &self.nodes[*a].value, |g, x| {
                        if x > T::zero() {
                            g
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Square(a) => {
                    let two = T::from_f64(2.0);
                    let ga = zip_grad(&up_for_children, &self.nodes[*a].value, |g, x| {
                        g * two * x
                    });
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Sqrt(a) => {
                    let half = T::from_f64(0.5);
                    let ga = zip_grad(&up_for_children, &node.value, |g, y| g * half / y);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Log(a) => {
                    let ga = zip_grad(&up_for_children, &self.nodes[*a].value, |g, x| g / x);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Exp(a) => {
                    let ga = zip_grad(&up_for_children, &node.value, |g, y| g * y);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Neg(a) => {
                    let ga = up_for_children.map(|v| -v);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::Scale(a, factor) => {
                    let ga = up_for_children.scale(*factor);
                    accumulate(&mut adjoint, &self.nodes, *a, &ga)?;
                }
                Op::AddScalar(a) => {
                    accumulate(&mut adjoint, &self.nodes, *a, &up_for_children)?;
                }
                Op::Concat { parts, axis } => {
                    let mut start = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.shape()[*axis];
                        let gp = up_for_children.narrow(*axis, start, len)?;
                        accumulate(&mut adjoint, &self.nodes, p, &gp)?;
                        start += len;
                    }
                }
                Op::Narrow { input, axis, start } => {
                    let full_shape = self.nodes[*input].value.shape().to_vec();
                    let mut ga = Tensor::zeros(full_shape.clone());
                    scatter_narrow(&mut ga, &up_for_children, *axis, *start);
                    accumulate(&mut adjoint, &self.nodes, *input, &ga)?;
                }
            }
        }

        let mut grads = Vec::with_capacity(n);
        for (idx, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) {
                let g = adjoint[idx]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape().to_vec()));
                grads.push(Some(g));
            } else {
                grads.push(None);
            }
        }
        Ok(Gradients { grads })
    }
}

/// Adjoints per leaf, indexed by the `Var` handles of the consumed tape.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to the leaf `v`.
    ///
    /// Panics when `v` was not recorded with `Tape::leaf`.
    pub fn wrt(&self, v: Var) -> &Tensor<T> {
        self.grads[v.0]
            .as_ref()
            .expect("gradient requested for a non-leaf node")
    }
}

/// Accumulates `g` into the adjoint of node `target`, reducing over the
/// broadcast dimension when the forward op broadcast a one-element operand.
fn accumulate<T: Scalar>(
    adjoint: &mut [Option<Tensor<T>>],
    nodes: &[Node<T>],
    target: usize,
    g: &Tensor<T>,
) -> EbmResult<()> {
    let target_shape = nodes[target].value.shape();
    let reduced = if g.shape() == target_shape {
        g.clone()
    } else if nodes[target].value.is_scalar() {
        Tensor::from_vec(target_shape.to_vec(), vec![g.sum()])
            .unwrap_or_else(|_| Tensor::scalar(g.sum()))
    } else {
        return Err(EbmError::ShapeMismatch {
            op: "backward-accumulate",
            left: target_shape.to_vec(),
            right: g.shape().to_vec(),
        });
    };
    match &mut adjoint[target] {
        Some(existing) => existing.axpy(T::one(), &reduced)?,
        slot @ None => *slot = Some(reduced),
    }
    Ok(())
}

fn zip_grad<T: Scalar>(up: &Tensor<T>, with: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = up
        .data()
        .iter()
        .zip(with.data())
        .map(|(&g, &v)| f(g, v))
        .collect();
    Tensor::from_vec(up.shape().to_vec(), data).expect("zip_grad shape")
}

fn scatter_narrow<T: Scalar>(full: &mut Tensor<T>, part: &Tensor<T>, axis: usize, start: usize) {
    let shape = full.shape().to_vec();
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mid = shape[axis];
    let len = part.shape()[axis];
    let src = part.data();
    let dst = full.data_mut();
    for o in 0..outer {
        let dst_base = o * mid * inner + start * inner;
        let src_base = o * len * inner;
        dst[dst_base..dst_base + len * inner]
            .copy_from_slice(&src[src_base..src_base + len * inner]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three_has_gradient_six() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0));
        let y = tape.square(x);
        let loss = tape.sum(y);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.wrt(x).item().unwrap(), 6.0);
    }

    #[test]
    fn constant_loss_yields_zero_gradients() {
        let mut tape: Tape<f64> = Tape::new();
        let w = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let c = tape.constant(Tensor::scalar(5.0));
        let loss = tape.sum(c);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.wrt(w).data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        let y = tape.square(x);
        assert!(matches!(
            tape.backward(y),
            Err(EbmError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn fan_out_accumulates_adjoints() {
        // loss = x*x + x  =>  d/dx = 2x + 1
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::scalar(4.0));
        let xx = tape.mul(x, x).unwrap();
        let s = tape.add(xx, x).unwrap();
        let loss = tape.sum(s);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.wrt(x).item().unwrap(), 9.0);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0));
        let s = tape.sigmoid(x);
        assert_eq!(tape.item(s).unwrap(), 0.5);
    }

    #[test]
    fn log_of_negative_is_domain_error() {
        let mut tape: Tape<f64> = Tape::new();
        let x = tape.leaf(Tensor::scalar(-1.0));
        assert!(matches!(tape.log(x), Err(EbmError::Domain { .. })));
        assert!(matches!(tape.sqrt(x), Err(EbmError::Domain { .. })));
    }

    #[test]
    fn matmul_backward_shapes() {
        let mut tape: Tape<f64> = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let b = tape.leaf(Tensor::from_rows(&[vec![5.0], vec![6.0]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        let loss = tape.sum(c);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.wrt(a).shape(), &[2, 2]);
        assert_eq!(grads.wrt(b).shape(), &[2, 1]);
        // d(sum(A·b))/dA = 1·bᵀ per row
        assert_eq!(grads.wrt(a).data(), &[5.0, 6.0, 5.0, 6.0]);
        // d/db = Aᵀ·1
        assert_eq!(grads.wrt(b).data(), &[4.0, 6.0]);
    }
}

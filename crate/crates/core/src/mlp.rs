//! Small dense perceptrons evaluated on the gradient tape.
//!
//! Inputs and outputs are row-major batches `[n, d]`; a single sample is a
//! one-row batch. Parameters can be staged on a tape either as leaves (for
//! training) or as constants (for inference-time input gradients).

use crate::error::EbmResult;
use crate::numerics::tape::Var;
use crate::{Gradients, Tape, Tensor};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
    Sigmoid,
}

#[derive(Clone, Debug)]
pub struct Mlp {
    /// `[d_in, h₁, …, d_out]`
    sizes: Vec<usize>,
    /// One per layer.
    activations: Vec<Activation>,
    /// `weights[l]` has shape `[sizes[l+1], sizes[l]]`.
    weights: Vec<Tensor>,
    /// `biases[l]` has shape `[sizes[l+1], 1]`.
    biases: Vec<Tensor>,
}

/// Tape handles for one staging of the parameters.
pub struct MlpVars {
    weights: Vec<Var>,
    biases: Vec<Var>,
}

impl Mlp {
    /// Fresh network with `N(0, 1/√fan_in)` weights and zero biases.
    pub fn new(sizes: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert_eq!(activations.len(), sizes.len() - 1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                .collect();
            weights.push(Tensor::from_vec(vec![fan_out, fan_in], data).expect("mlp init"));
            biases.push(Tensor::zeros([fan_out, 1]));
        }
        Mlp {
            sizes: sizes.to_vec(),
            activations: activations.to_vec(),
            weights,
            biases,
        }
    }

    /// Rebuild from stored parameters.
    pub fn from_parts(
        sizes: Vec<usize>,
        activations: Vec<Activation>,
        weights: Vec<Tensor>,
        biases: Vec<Tensor>,
    ) -> Self {
        assert_eq!(weights.len(), sizes.len() - 1);
        assert_eq!(biases.len(), sizes.len() - 1);
        Mlp {
            sizes,
            activations,
            weights,
            biases,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Stage parameters as differentiable leaves.
    pub fn stage(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            weights: self.weights.iter().map(|w| tape.leaf(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.leaf(b.clone())).collect(),
        }
    }

    /// Stage parameters as constants (no parameter gradients).
    pub fn stage_const(&self, tape: &mut Tape) -> MlpVars {
        MlpVars {
            weights: self
                .weights
                .iter()
                .map(|w| tape.constant(w.clone()))
                .collect(),
            biases: self.biases.iter().map(|b| tape.constant(b.clone())).collect(),
        }
    }

    /// Forward pass of a `[n, d_in]` batch, producing `[n, d_out]`.
    pub fn apply(&self, tape: &mut Tape, vars: &MlpVars, input: Var) -> EbmResult<Var> {
        let n = tape.shape(input)[0];
        let ones = tape.constant(Tensor::full([n, 1], 1.0));
        let mut h = input;
        for l in 0..self.weights.len() {
            let wt = tape.transpose(vars.weights[l])?;
            let prod = tape.matmul(h, wt)?;
            let bt = tape.transpose(vars.biases[l])?;
            let bias_rows = tape.matmul(ones, bt)?;
            let z = tape.add(prod, bias_rows)?;
            h = match self.activations[l] {
                Activation::Linear => z,
                Activation::Tanh => tape.tanh(z),
                Activation::Relu => tape.relu(z),
                Activation::Sigmoid => tape.sigmoid(z),
            };
        }
        Ok(h)
    }

    /// Eager single-row forward without a tape.
    pub fn forward_row(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut h = x.to_vec();
        for l in 0..self.weights.len() {
            let w = &self.weights[l];
            let b = &self.biases[l];
            let (rows, cols) = (w.shape()[0], w.shape()[1]);
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                let mut acc = b.data()[r];
                let row = &w.data()[r * cols..(r + 1) * cols];
                for (wv, xv) in row.iter().zip(&h) {
                    acc += wv * xv;
                }
                z[r] = acc;
            }
            h = match self.activations[l] {
                Activation::Linear => z,
                Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
                Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
                Activation::Sigmoid => z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
            };
        }
        h
    }

    /// Eager input gradient for single-output networks: `d out₀ / d x`.
    /// Hot inference paths (sampler descents) use this instead of a tape.
    pub fn input_grad_row(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.output_dim(), 1, "eager input gradient needs a scalar output");
        // Forward pass caching pre-activations.
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.weights.len());
        for l in 0..self.weights.len() {
            let w = &self.weights[l];
            let b = &self.biases[l];
            let (rows, cols) = (w.shape()[0], w.shape()[1]);
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                let mut acc = b.data()[r];
                let row = &w.data()[r * cols..(r + 1) * cols];
                for (wv, xv) in row.iter().zip(&acts[l]) {
                    acc += wv * xv;
                }
                z[r] = acc;
            }
            let a = match self.activations[l] {
                Activation::Linear => z.clone(),
                Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
                Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
                Activation::Sigmoid => z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
            };
            pre.push(z);
            acts.push(a);
        }
        // Reverse sweep.
        let mut delta = vec![1.0];
        for l in (0..self.weights.len()).rev() {
            for (j, d) in delta.iter_mut().enumerate() {
                *d *= match self.activations[l] {
                    Activation::Linear => 1.0,
                    Activation::Tanh => {
                        let t = pre[l][j].tanh();
                        1.0 - t * t
                    }
                    Activation::Relu => {
                        if pre[l][j] > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Activation::Sigmoid => {
                        let s = 1.0 / (1.0 + (-pre[l][j]).exp());
                        s * (1.0 - s)
                    }
                };
            }
            let w = &self.weights[l];
            let (rows, cols) = (w.shape()[0], w.shape()[1]);
            let mut prev = vec![0.0; cols];
            for r in 0..rows {
                let row = &w.data()[r * cols..(r + 1) * cols];
                for (c, wv) in row.iter().enumerate() {
                    prev[c] += wv * delta[r];
                }
            }
            delta = prev;
        }
        delta
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.numel() + b.numel())
            .sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b.data());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let wn = w.numel();
            w.data_mut().copy_from_slice(&params[at..at + wn]);
            at += wn;
            let bn = b.numel();
            b.data_mut().copy_from_slice(&params[at..at + bn]);
            at += bn;
        }
    }

    /// In-place descent step along a flat gradient.
    pub fn step(&mut self, flat_grad: &[f64], lr: f64) {
        let mut p = self.flat_params();
        for (pi, gi) in p.iter_mut().zip(flat_grad) {
            *pi -= lr * gi;
        }
        self.set_flat_params(&p);
    }
}

impl MlpVars {
    /// Extract the flat parameter gradient from a finished backward pass.
    pub fn flat_grad(&self, grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(grads.wrt(*w).data());
            out.extend_from_slice(grads.wrt(*b).data());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fdiff::{finite_diff_grad, max_rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tiny_mlp(seed: u64) -> Mlp {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Mlp::new(&[3, 5, 1], &[Activation::Tanh, Activation::Linear], &mut rng)
    }

    #[test]
    fn tape_and_eager_forward_agree() {
        let mlp = tiny_mlp(7);
        let x = vec![0.3, -1.2, 0.8];
        let eager = mlp.forward_row(&x);

        let mut tape = Tape::new();
        let vars = mlp.stage_const(&mut tape);
        let input = tape.constant(Tensor::from_vec(vec![1, 3], x).unwrap());
        let out = mlp.apply(&mut tape, &vars, input).unwrap();
        let taped = tape.value(out).data().to_vec();
        assert!((eager[0] - taped[0]).abs() < 1e-14);
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mlp = tiny_mlp(11);
        let x = Tensor::from_vec(vec![1, 3], vec![0.5, -0.25, 1.5]).unwrap();

        let mut tape = Tape::new();
        let vars = mlp.stage(&mut tape);
        let input = tape.constant(x.clone());
        let out = mlp.apply(&mut tape, &vars, input).unwrap();
        let loss = tape.sum(out);
        let grads = tape.backward(loss).unwrap();
        let analytic = Tensor::vector(vars.flat_grad(&grads));

        let theta = Tensor::vector(mlp.flat_params());
        let numeric = finite_diff_grad(
            |p: &Tensor| {
                let mut probe = mlp.clone();
                probe.set_flat_params(p.data());
                Ok(probe.forward_row(x.data())[0])
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < 1e-7, "max rel err {err}");
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let mlp = tiny_mlp(13);
        let x = Tensor::from_vec(vec![1, 3], vec![-0.4, 0.9, 0.1]).unwrap();

        let mut tape = Tape::new();
        let vars = mlp.stage_const(&mut tape);
        let input = tape.leaf(x.clone());
        let out = mlp.apply(&mut tape, &vars, input).unwrap();
        let loss = tape.sum(out);
        let grads = tape.backward(loss).unwrap();
        let analytic = grads.wrt(input).reshape(vec![3]).unwrap();

        let numeric = finite_diff_grad(
            |p: &Tensor| Ok(mlp.forward_row(p.data())[0]),
            &x.reshape(vec![3]).unwrap(),
            1e-5,
        )
        .unwrap();
        assert!(max_rel_error(&analytic, &numeric) < 1e-7);
    }

    #[test]
    fn flat_param_roundtrip() {
        let mut mlp = tiny_mlp(3);
        let p = mlp.flat_params();
        mlp.set_flat_params(&p);
        assert_eq!(mlp.flat_params(), p);
        assert_eq!(p.len(), mlp.param_count());
    }

    #[test]
    fn batch_forward_matches_per_row() {
        let mlp = tiny_mlp(5);
        let rows = [[0.1, 0.2, 0.3], [-1.0, 0.5, 2.0]];
        let batch = Tensor::from_vec(vec![2, 3], rows.concat()).unwrap();
        let mut tape = Tape::new();
        let vars = mlp.stage_const(&mut tape);
        let input = tape.constant(batch);
        let out = mlp.apply(&mut tape, &vars, input).unwrap();
        let v = tape.value(out).data().to_vec();
        for (i, row) in rows.iter().enumerate() {
            assert!((v[i] - mlp.forward_row(row)[0]).abs() < 1e-14);
        }
    }
}

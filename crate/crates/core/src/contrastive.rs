//! Contrastive training: pairwise hinge loss, negative log-likelihood as a
//! contrastive method with Monte-Carlo gradients, and the contrastive
//! sample generators that feed both.

use crate::energy::{EnergyModel, TrainableEnergyModel};
use crate::error::{EbmError, EbmResult};
use crate::grid::GridSpec;
use crate::mlp::{Activation, Mlp};
use crate::numerics::logsumexp::weighted_logsumexp;
use crate::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Margin of the pairwise hinge: a non-zero margin is what rules out the
/// collapsed (flat) energy landscape.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum MarginFn {
    Constant(f64),
    /// `m(y, ŷ) = α·‖y − ŷ‖₂`.
    Scaled(f64),
}

impl MarginFn {
    pub fn margin(&self, y: &Tensor, y_hat: &Tensor) -> EbmResult<f64> {
        let m = match self {
            MarginFn::Constant(m0) => *m0,
            MarginFn::Scaled(alpha) => {
                let d = y.sub(y_hat)?;
                alpha * d.norm_sq().sqrt()
            }
        };
        if m <= 0.0 {
            return Err(EbmError::invalid(
                "margin",
                "margin must be positive for distinct y, ŷ",
            ));
        }
        Ok(m)
    }
}

/// `max(0, F(x,y) − F(x,ŷ) + m(y,ŷ))`, subgradient 0 on the flat branch.
pub fn hinge_loss<M: EnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    y_hat: &Tensor,
    margin: MarginFn,
) -> EbmResult<f64> {
    let m = margin.margin(y, y_hat)?;
    let gap = model.energy(x, y)? - model.energy(x, y_hat)? + m;
    Ok(gap.max(0.0))
}

/// `F(x,y) + (1/β)·log Σᵢ wᵢ·exp(−β·F(x,yᵢ))` over a quadrature grid of
/// the y-domain, in log space.
pub fn nll_loss<M: EnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    beta: f64,
    y_grid: &GridSpec,
) -> EbmResult<f64> {
    if !(beta > 0.0) {
        return Err(EbmError::invalid("beta", "must be > 0"));
    }
    let mut terms = Vec::with_capacity(y_grid.len());
    let mut weights = Vec::with_capacity(y_grid.len());
    for i in 0..y_grid.len() {
        let yp = Tensor::vector(y_grid.point(i));
        terms.push(-beta * model.energy(x, &yp)?);
        weights.push(y_grid.weight(i));
    }
    Ok(model.energy(x, y)? + weighted_logsumexp(&terms, &weights) / beta)
}

/// Analytic gradient of [`nll_loss`] with respect to the parameters:
/// `∂F(x,y)/∂θ − Σᵢ pᵢ·∂F(x,yᵢ)/∂θ` with `pᵢ ∝ wᵢ·exp(−β·F(x,yᵢ))`.
pub fn nll_loss_grad<M: TrainableEnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    beta: f64,
    y_grid: &GridSpec,
) -> EbmResult<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(EbmError::invalid("beta", "must be > 0"));
    }
    let n = y_grid.len();
    let mut logits = Vec::with_capacity(n);
    for i in 0..n {
        let yp = Tensor::vector(y_grid.point(i));
        logits.push(-beta * model.energy(x, &yp)? + y_grid.weight(i).ln());
    }
    let probs = crate::numerics::logsumexp::softmax_from_logits(&logits);
    let mut grad = model.grad_params(x, y)?;
    for i in 0..n {
        let yp = Tensor::vector(y_grid.point(i));
        let gp = model.grad_params(x, &yp)?;
        for (g, v) in grad.iter_mut().zip(&gp) {
            *g -= probs[i] * v;
        }
    }
    Ok(grad)
}

// ── contrastive samplers ─────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum ContrastiveSampler {
    /// Every grid node (the tractable-domain case).
    Exhaustive { grid: GridSpec },
    /// `ŷ = y + σ·ε`; σ must be positive or every sample would equal y.
    Corruption { sigma: f64, count: usize },
    /// Energy descent on `F(x,·)` from a corrupted start: finds the
    /// low-energy off-data points the model is currently most wrong about.
    MostOffending {
        steps: usize,
        lr: f64,
        start_sigma: f64,
        count: usize,
    },
    /// Metropolis random walk targeting the Gibbs distribution of `F(x,·)`.
    Mcmc {
        proposal_sigma: f64,
        burn_in: usize,
        thinning: usize,
        count: usize,
        beta: f64,
    },
}

/// Samples from one MCMC run plus its acceptance diagnostics.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub samples: Vec<Tensor>,
    pub acceptance_rate: Option<f64>,
    /// Acceptance rate outside [0.05, 0.95] — a sign the proposal scale is
    /// badly tuned for this landscape.
    pub acceptance_warning: bool,
}

const DATA_POINT_TOLERANCE: f64 = 1e-9;

fn too_close(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| (x - y).abs() <= DATA_POINT_TOLERANCE)
}

/// Generates a batch of contrastive points; deterministic given `seed`.
pub fn generate<M: EnergyModel + ?Sized>(
    sampler: &ContrastiveSampler,
    model: &M,
    x: &Tensor,
    y: &Tensor,
    seed: u64,
) -> EbmResult<SampleBatch> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match sampler {
        ContrastiveSampler::Exhaustive { grid } => {
            let samples: Vec<Tensor> = grid
                .tensors()
                .filter(|p| !too_close(p, y))
                .collect();
            if samples.is_empty() {
                return Err(EbmError::Empty {
                    what: "exhaustive contrastive grid",
                });
            }
            Ok(SampleBatch {
                samples,
                acceptance_rate: None,
                acceptance_warning: false,
            })
        }
        ContrastiveSampler::Corruption { sigma, count } => {
            if !(*sigma > 0.0) {
                return Err(EbmError::invalid(
                    "corruption sigma",
                    "must be positive; zero would reproduce the data point",
                ));
            }
            let mut samples = Vec::with_capacity(*count);
            while samples.len() < *count {
                let noisy = y.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
                if !too_close(&noisy, y) {
                    samples.push(noisy);
                }
            }
            Ok(SampleBatch {
                samples,
                acceptance_rate: None,
                acceptance_warning: false,
            })
        }
        ContrastiveSampler::MostOffending {
            steps,
            lr,
            start_sigma,
            count,
        } => {
            let mut samples = Vec::with_capacity(*count);
            for _ in 0..*count {
                let mut found = None;
                for _retry in 0..10 {
                    let mut point =
                        y.map(|v| v + start_sigma * rng.sample::<f64, _>(StandardNormal));
                    let mut energy = model.energy(x, &point)?;
                    let mut step = *lr;
                    for _ in 0..*steps {
                        let g = model.grad_y(x, &point)?;
                        let proposal = point.sub(&g.scale(step))?;
                        let e = model.energy(x, &proposal)?;
                        if e <= energy {
                            point = proposal;
                            energy = e;
                            step *= 1.2;
                        } else {
                            step *= 0.5;
                        }
                    }
                    if !too_close(&point, y) {
                        found = Some(point);
                        break;
                    }
                }
                match found {
                    Some(p) => samples.push(p),
                    None => return Err(EbmError::SamplerCollapse { retries: 10 }),
                }
            }
            Ok(SampleBatch {
                samples,
                acceptance_rate: None,
                acceptance_warning: false,
            })
        }
        ContrastiveSampler::Mcmc {
            proposal_sigma,
            burn_in,
            thinning,
            count,
            beta,
        } => {
            let mut state = y.clone();
            let mut f_state = model.energy(x, &state)?;
            let mut accepted = 0usize;
            let mut proposed = 0usize;
            let mut step = |state: &mut Tensor, f_state: &mut f64, rng: &mut ChaCha12Rng| -> EbmResult<()> {
                let proposal =
                    state.map(|v| v + proposal_sigma * rng.sample::<f64, _>(StandardNormal));
                let f_prop = model.energy(x, &proposal)?;
                proposed += 1;
                let accept = if f_prop <= *f_state {
                    true
                } else {
                    rng.random::<f64>() < (-beta * (f_prop - *f_state)).exp()
                };
                if accept {
                    *state = proposal;
                    *f_state = f_prop;
                    accepted += 1;
                }
                Ok(())
            };
            for _ in 0..*burn_in {
                step(&mut state, &mut f_state, &mut rng)?;
            }
            let mut samples = Vec::with_capacity(*count);
            while samples.len() < *count {
                for _ in 0..thinning.max(&1).to_owned() {
                    step(&mut state, &mut f_state, &mut rng)?;
                }
                if too_close(&state, y) {
                    continue;
                }
                samples.push(state.clone());
            }
            let rate = accepted as f64 / proposed.max(1) as f64;
            Ok(SampleBatch {
                samples,
                acceptance_rate: Some(rate),
                acceptance_warning: !(0.05..=0.95).contains(&rate),
            })
        }
    }
}

/// Monte-Carlo gradient of the likelihood loss:
/// `∂F(x,y)/∂θ − mean over samples y' of ∂F(x,y')/∂θ`.
///
/// The exhaustive variant computes the exact grid expectation and is the
/// oracle the sampled estimate converges to.
pub fn nll_grad_mc<M: TrainableEnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    beta: f64,
    sampler: &ContrastiveSampler,
    seed: u64,
) -> EbmResult<(Vec<f64>, SampleBatch)> {
    match sampler {
        ContrastiveSampler::Exhaustive { grid } => {
            // Exact expectation under the grid Gibbs weights.
            let mut logits = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let yp = Tensor::vector(grid.point(i));
                logits.push(-beta * model.energy(x, &yp)? + grid.weight(i).ln());
            }
            let probs = crate::numerics::logsumexp::softmax_from_logits(&logits);
            let mut grad = model.grad_params(x, y)?;
            for i in 0..grid.len() {
                let yp = Tensor::vector(grid.point(i));
                let gp = model.grad_params(x, &yp)?;
                for (g, v) in grad.iter_mut().zip(&gp) {
                    *g -= probs[i] * v;
                }
            }
            let batch = SampleBatch {
                samples: grid.tensors().collect(),
                acceptance_rate: None,
                acceptance_warning: false,
            };
            Ok((grad, batch))
        }
        ContrastiveSampler::Mcmc { .. } => {
            let batch = generate(sampler, model, x, y, seed)?;
            let mut grad = model.grad_params(x, y)?;
            let scale = 1.0 / batch.samples.len() as f64;
            for s in &batch.samples {
                let gp = model.grad_params(x, s)?;
                for (g, v) in grad.iter_mut().zip(&gp) {
                    *g -= scale * v;
                }
            }
            Ok((grad, batch))
        }
        _ => Err(EbmError::invalid(
            "nll sampler",
            "likelihood gradients use the exhaustive or mcmc strategy",
        )),
    }
}

// ── the trainable energy head ────────────────────────────────────────

/// Implicit scalar energy over concatenated `(x, y)`: a genuinely
/// collapsible architecture, which is the point — contrastive training has
/// to hold the landscape open.
#[derive(Clone, Debug)]
pub struct MlpEnergy {
    mlp: Mlp,
    dx: usize,
    dy: usize,
}

impl MlpEnergy {
    pub fn new(dx: usize, dy: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mlp = Mlp::new(
            &[dx + dy, hidden, 1],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        MlpEnergy { mlp, dx, dy }
    }

    pub fn from_mlp(mlp: Mlp, dx: usize, dy: usize) -> Self {
        assert_eq!(mlp.input_dim(), dx + dy);
        MlpEnergy { mlp, dx, dy }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dx, self.dy)
    }

    fn row(&self, x: &Tensor, y: &Tensor) -> EbmResult<Vec<f64>> {
        if x.numel() != self.dx || y.numel() != self.dy {
            return Err(EbmError::ShapeMismatch {
                op: "energy input",
                left: x.shape().to_vec(),
                right: y.shape().to_vec(),
            });
        }
        let mut row = Vec::with_capacity(self.dx + self.dy);
        row.extend_from_slice(x.data());
        row.extend_from_slice(y.data());
        Ok(row)
    }

    /// Energies of the data row and a batch of contrastive rows in one
    /// staged forward pass: `(tape, params, F_data, F_batch)`.
    fn staged_energies(
        &self,
        x: &Tensor,
        y: &Tensor,
        batch: &[Tensor],
    ) -> EbmResult<(Tape, crate::mlp::MlpVars, crate::numerics::Var, crate::numerics::Var)> {
        let mut rows = self.row(x, y)?;
        for s in batch {
            rows.extend(self.row(x, s)?);
        }
        let n = 1 + batch.len();
        let input = Tensor::from_vec(vec![n, self.dx + self.dy], rows)?;
        let mut tape = Tape::new();
        let vars = self.mlp.stage(&mut tape);
        let input = tape.constant(input);
        let out = self.mlp.apply(&mut tape, &vars, input)?;
        let f_data = tape.narrow(out, 0, 0, 1)?;
        let f_batch = tape.narrow(out, 0, 1, batch.len())?;
        Ok((tape, vars, f_data, f_batch))
    }
}

impl EnergyModel for MlpEnergy {
    fn energy(&self, x: &Tensor, y: &Tensor) -> EbmResult<f64> {
        Ok(self.mlp.forward_row(&self.row(x, y)?)[0])
    }

    fn grad_y(&self, x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
        let full = self.mlp.input_grad_row(&self.row(x, y)?);
        Ok(Tensor::vector(full[self.dx..].to_vec()))
    }
}

impl TrainableEnergyModel for MlpEnergy {
    fn param_count(&self) -> usize {
        self.mlp.param_count()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.mlp.flat_params()
    }

    fn set_flat_params(&mut self, params: &[f64]) {
        self.mlp.set_flat_params(params);
    }

    fn grad_params(&self, x: &Tensor, y: &Tensor) -> EbmResult<Vec<f64>> {
        let row = Tensor::from_vec(vec![1, self.dx + self.dy], self.row(x, y)?)?;
        let mut tape = Tape::new();
        let vars = self.mlp.stage(&mut tape);
        let input = tape.constant(row);
        let out = self.mlp.apply(&mut tape, &vars, input)?;
        let loss = tape.sum(out);
        let grads = tape.backward(loss)?;
        Ok(vars.flat_grad(&grads))
    }
}

// ── training loop ────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "loss", rename_all = "snake_case")]
pub enum TrainLoss {
    Hinge { margin: MarginFn },
    Nll { beta: f64, grid: GridSpec },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveEpoch {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_data_energy: f64,
    pub mean_contrastive_energy: f64,
}

#[derive(Clone, Debug)]
pub struct ContrastiveOutcome {
    pub model: MlpEnergy,
    pub history: Vec<ContrastiveEpoch>,
    /// Epoch of the surviving checkpoint when training aborted on NaN.
    pub aborted_at: Option<usize>,
    pub sampler_warnings: usize,
}

pub fn history_to_csv(history: &[ContrastiveEpoch]) -> String {
    let mut out = String::from("epoch,mean_loss,mean_data_energy,mean_contrastive_energy\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch,
            crate::csv::g17(row.mean_loss),
            crate::csv::g17(row.mean_data_energy),
            crate::csv::g17(row.mean_contrastive_energy),
        ));
    }
    out
}

/// Full-batch contrastive training: per epoch, every sample contributes a
/// loss gradient (hinge against freshly generated contrastive points, or
/// the likelihood gradient over the configured grid), and one averaged
/// parameter step is taken.
pub fn train_contrastive(
    mut model: MlpEnergy,
    dataset: &[(Tensor, Tensor)],
    loss: &TrainLoss,
    sampler: &ContrastiveSampler,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> EbmResult<ContrastiveOutcome> {
    if dataset.is_empty() {
        return Err(EbmError::Empty { what: "dataset" });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(epochs + 1);
    let mut sampler_warnings = 0usize;

    let epoch_stats = |model: &MlpEnergy,
                       rng: &mut ChaCha12Rng,
                       warnings: &mut usize|
     -> EbmResult<(f64, f64, f64, Vec<f64>)> {
        let n = dataset.len() as f64;
        let mut mean_loss = 0.0;
        let mut mean_data_e = 0.0;
        let mut mean_contra_e = 0.0;
        let mut grad = vec![0.0; model.param_count()];
        for (x, y) in dataset {
            match loss {
                TrainLoss::Hinge { margin } => {
                    let batch = generate(sampler, model, x, y, rng.random())?;
                    if batch.acceptance_warning {
                        *warnings += 1;
                    }
                    let (tape, vars, f_data, f_batch) = model.staged_energies(x, y, &batch.samples)?;
                    let mut tape = tape;
                    let margins: Vec<f64> = batch
                        .samples
                        .iter()
                        .map(|s| margin.margin(y, s))
                        .collect::<EbmResult<_>>()?;
                    let m_const = tape.constant(Tensor::column(&margins));
                    let gap = {
                        let diff = tape.sub(f_data, f_batch)?; // scalar broadcast over rows
                        tape.add(diff, m_const)?
                    };
                    let hinged = tape.relu(gap);
                    let sample_loss = tape.mean(hinged);
                    mean_loss += tape.item(sample_loss)? / n;
                    mean_data_e += tape.item(f_data)? / n;
                    mean_contra_e += tape.value(f_batch).mean() / n;
                    let grads = tape.backward(sample_loss)?;
                    for (g, v) in grad.iter_mut().zip(vars.flat_grad(&grads)) {
                        *g += v / n;
                    }
                }
                TrainLoss::Nll { beta, grid } => {
                    mean_loss += nll_loss(model, x, y, *beta, grid)? / n;
                    mean_data_e += model.energy(x, y)? / n;
                    // Contrastive energy: expectation of F over the grid
                    // Gibbs distribution is what the loss pushes up.
                    let mut probs_logits = Vec::with_capacity(grid.len());
                    let mut energies = Vec::with_capacity(grid.len());
                    for i in 0..grid.len() {
                        let yp = Tensor::vector(grid.point(i));
                        let e = model.energy(x, &yp)?;
                        energies.push(e);
                        probs_logits.push(-beta * e + grid.weight(i).ln());
                    }
                    let probs = crate::numerics::logsumexp::softmax_from_logits(&probs_logits);
                    mean_contra_e += energies
                        .iter()
                        .zip(&probs)
                        .map(|(e, p)| e * p)
                        .sum::<f64>()
                        / n;
                    let g = nll_loss_grad(model, x, y, *beta, grid)?;
                    for (a, b) in grad.iter_mut().zip(&g) {
                        *a += b / n;
                    }
                }
            }
        }
        Ok((mean_loss, mean_data_e, mean_contra_e, grad))
    };

    let (l0, de0, ce0, mut grad) = epoch_stats(&model, &mut rng, &mut sampler_warnings)?;
    history.push(ContrastiveEpoch {
        epoch: 0,
        mean_loss: l0,
        mean_data_energy: de0,
        mean_contrastive_energy: ce0,
    });
    let mut checkpoint = model.clone();

    for epoch in 1..=epochs {
        let mut params = model.flat_params();
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= lr * g;
        }
        model.set_flat_params(&params);

        let (l, de, ce, g) = epoch_stats(&model, &mut rng, &mut sampler_warnings)?;
        if !l.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Ok(ContrastiveOutcome {
                model: checkpoint,
                history,
                aborted_at: Some(epoch - 1),
                sampler_warnings,
            });
        }
        history.push(ContrastiveEpoch {
            epoch,
            mean_loss: l,
            mean_data_energy: de,
            mean_contrastive_energy: ce,
        });
        grad = g;
        checkpoint = model.clone();
    }
    Ok(ContrastiveOutcome {
        model,
        history,
        aborted_at: None,
        sampler_warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `F(x, y) = curv·(y − slope·x)²` — the 1-D quadratic test model with
    /// analytic parameter gradients and a proper Gibbs distribution.
    pub(crate) struct QuadraticEnergy {
        pub curv: f64,
        pub slope: f64,
    }

    impl EnergyModel for QuadraticEnergy {
        fn energy(&self, x: &Tensor, y: &Tensor) -> EbmResult<f64> {
            let d = y.data()[0] - self.slope * x.data()[0];
            Ok(self.curv * d * d)
        }
        fn grad_y(&self, x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
            let d = y.data()[0] - self.slope * x.data()[0];
            Ok(Tensor::vector(vec![2.0 * self.curv * d]))
        }
    }

    impl TrainableEnergyModel for QuadraticEnergy {
        fn param_count(&self) -> usize {
            2
        }
        fn flat_params(&self) -> Vec<f64> {
            vec![self.curv, self.slope]
        }
        fn set_flat_params(&mut self, p: &[f64]) {
            self.curv = p[0];
            self.slope = p[1];
        }
        fn grad_params(&self, x: &Tensor, y: &Tensor) -> EbmResult<Vec<f64>> {
            let d = y.data()[0] - self.slope * x.data()[0];
            Ok(vec![d * d, -2.0 * self.curv * d * x.data()[0]])
        }
    }

    /// Fixed-table energy for hinge arithmetic checks.
    struct TableEnergy;

    impl EnergyModel for TableEnergy {
        fn energy(&self, _x: &Tensor, y: &Tensor) -> EbmResult<f64> {
            Ok(y.data()[0])
        }
        fn grad_y(&self, _x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
            Ok(Tensor::full(y.shape().to_vec(), 1.0))
        }
    }

    fn t(v: f64) -> Tensor {
        Tensor::vector(vec![v])
    }

    #[test]
    fn hinge_margin_satisfied_is_zero() {
        // F(x,y)=0, F(x,ŷ)=5, m=1 → 0.
        let l = hinge_loss(&TableEnergy, &t(0.0), &t(0.0), &t(5.0), MarginFn::Constant(1.0))
            .unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn hinge_equal_energies_pay_full_margin() {
        let l = hinge_loss(&TableEnergy, &t(0.0), &t(2.0), &t(2.0), MarginFn::Constant(1.0))
            .unwrap();
        assert_eq!(l, 1.0);
    }

    #[test]
    fn hinge_direct_substitution() {
        // F(x,y)=2, F(x,ŷ)=1, m=0.5 → 1.5.
        let l = hinge_loss(&TableEnergy, &t(0.0), &t(2.0), &t(1.0), MarginFn::Constant(0.5))
            .unwrap();
        assert_eq!(l, 1.5);
    }

    #[test]
    fn flat_energy_nll_is_log_volume_over_beta() {
        struct Flat(f64);
        impl EnergyModel for Flat {
            fn energy(&self, _x: &Tensor, _y: &Tensor) -> EbmResult<f64> {
                Ok(self.0)
            }
            fn grad_y(&self, _x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
                Ok(Tensor::zeros(y.shape().to_vec()))
            }
        }
        let grid = GridSpec::line(-2.0, 3.0, 64).unwrap();
        for beta in [0.5, 1.0, 4.0] {
            let l = nll_loss(&Flat(1.4), &t(0.0), &t(0.5), beta, &grid).unwrap();
            let expect = (5.0_f64).ln() / beta;
            assert!((l - expect).abs() < 1e-12, "beta {beta}");
        }
    }

    #[test]
    fn corruption_sampler_rejects_zero_sigma_and_is_deterministic() {
        let sampler = ContrastiveSampler::Corruption {
            sigma: 0.0,
            count: 3,
        };
        assert!(generate(&sampler, &TableEnergy, &t(0.0), &t(1.0), 7).is_err());

        let sampler = ContrastiveSampler::Corruption {
            sigma: 0.3,
            count: 4,
        };
        let a = generate(&sampler, &TableEnergy, &t(0.0), &t(1.0), 7).unwrap();
        let b = generate(&sampler, &TableEnergy, &t(0.0), &t(1.0), 7).unwrap();
        assert_eq!(a.samples, b.samples);
        for s in &a.samples {
            assert!((s.data()[0] - 1.0).abs() > 1e-9);
        }
    }

    #[test]
    fn most_offending_finds_the_second_well() {
        // Double well with data at +1: the sampler should descend into the
        // well near −1 often enough to expose it.
        struct DoubleWell;
        impl EnergyModel for DoubleWell {
            fn energy(&self, _x: &Tensor, y: &Tensor) -> EbmResult<f64> {
                let v = y.data()[0];
                Ok((v * v - 1.0).powi(2))
            }
            fn grad_y(&self, _x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
                let v = y.data()[0];
                Ok(Tensor::vector(vec![4.0 * v * (v * v - 1.0)]))
            }
        }
        let sampler = ContrastiveSampler::MostOffending {
            steps: 100,
            lr: 0.05,
            start_sigma: 1.5,
            count: 32,
        };
        let batch = generate(&sampler, &DoubleWell, &t(0.0), &t(1.0), 41).unwrap();
        let near_minus_one = batch
            .samples
            .iter()
            .filter(|s| (s.data()[0] + 1.0).abs() < 0.05)
            .count();
        assert!(near_minus_one > 0, "no sample found the −1 well");
        for s in &batch.samples {
            let v = s.data()[0];
            assert!((v.abs() - 1.0).abs() < 0.05, "not at a well: {v}");
        }
    }

    #[test]
    fn exhaustive_mc_gradient_matches_analytic_grid_gradient() {
        let model = MlpEnergy::new(1, 1, 8, 3);
        let grid = GridSpec::line(-1.5, 1.5, 41).unwrap();
        let x = t(0.3);
        let y = t(0.09);
        let beta = 2.0;
        let analytic = nll_loss_grad(&model, &x, &y, beta, &grid).unwrap();
        let sampler = ContrastiveSampler::Exhaustive { grid: grid.clone() };
        let (mc, _) = nll_grad_mc(&model, &x, &y, beta, &sampler, 0).unwrap();
        for (a, b) in analytic.iter().zip(&mc) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn analytic_nll_gradient_matches_finite_differences() {
        use crate::numerics::fdiff::{finite_diff_grad, max_rel_error};
        let model = MlpEnergy::new(1, 1, 6, 5);
        let grid = GridSpec::line(-1.0, 1.0, 17).unwrap();
        let x = t(-0.2);
        let y = t(0.04);
        let analytic = Tensor::vector(nll_loss_grad(&model, &x, &y, 1.5, &grid).unwrap());
        let theta = Tensor::vector(model.flat_params());
        let numeric = finite_diff_grad(
            |p: &Tensor| {
                let mut probe = model.clone();
                probe.set_flat_params(p.data());
                nll_loss(&probe, &x, &y, 1.5, &grid)
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn mcmc_gradient_approaches_exhaustive() {
        // Confining 1-D model with a proper Gibbs distribution.
        let model = QuadraticEnergy { curv: 1.0, slope: 1.0 };
        let grid = GridSpec::line(-4.0, 5.0, 901).unwrap();
        let x = t(0.5);
        let y = t(0.4);
        let beta = 2.0;
        let exhaustive = ContrastiveSampler::Exhaustive { grid };
        let (exact, _) = nll_grad_mc(&model, &x, &y, beta, &exhaustive, 0).unwrap();
        let mcmc = ContrastiveSampler::Mcmc {
            proposal_sigma: 0.8,
            burn_in: 1000,
            thinning: 3,
            count: 100_000,
            beta,
        };
        let (approx, batch) = nll_grad_mc(&model, &x, &y, beta, &mcmc, 11).unwrap();
        assert!(!batch.acceptance_warning, "rate {:?}", batch.acceptance_rate);
        for (a, b) in exact.iter().zip(&approx) {
            let denom = a.abs().max(0.05);
            assert!((a - b).abs() / denom < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let model = MlpEnergy::new(1, 1, 16, 21);
        let before = model.flat_params();
        let data = vec![(t(0.0), t(0.0)), (t(0.5), t(0.25))];
        let out = train_contrastive(
            model,
            &data,
            &TrainLoss::Hinge {
                margin: MarginFn::Scaled(1.0),
            },
            &ContrastiveSampler::Corruption {
                sigma: 0.5,
                count: 1,
            },
            0,
            1e-2,
            5,
        )
        .unwrap();
        assert_eq!(out.model.flat_params(), before);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn identical_seeds_reproduce_history_bitwise() {
        let data = vec![(t(0.0), t(0.0)), (t(0.5), t(0.25)), (t(-0.5), t(0.25))];
        let run = || {
            train_contrastive(
                MlpEnergy::new(1, 1, 8, 33),
                &data,
                &TrainLoss::Hinge {
                    margin: MarginFn::Scaled(1.0),
                },
                &ContrastiveSampler::Corruption {
                    sigma: 0.4,
                    count: 2,
                },
                10,
                1e-2,
                77,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.flat_params(), b.model.flat_params());
    }
}

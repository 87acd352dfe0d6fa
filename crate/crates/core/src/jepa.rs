//! Joint embedding predictive architecture: two independent encoders, a
//! latent-conditioned predictor scoring pairs in representation space, and
//! variance/covariance regularization that keeps the embeddings from
//! collapsing. A two-level stack handles two-timescale sequences.

use crate::energy::{free_energy_min, InferenceConfig, LatentDomain, LatentEnergyModel};
use crate::error::{EbmError, EbmResult};
use crate::mlp::{Activation, Mlp, MlpVars};
use crate::numerics::Var;
use crate::{Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

const VAR_EPSILON: f64 = 1e-4;

// ── model ────────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct JepaModel {
    enc_x: Mlp,
    enc_y: Mlp,
    /// Maps `[s_x ‖ z]` to a predicted `s_y`.
    predictor: Mlp,
    latent_lo: Vec<f64>,
    latent_hi: Vec<f64>,
}

impl JepaModel {
    /// Encoders `d_in → hidden → d_s` (independent parameters), predictor
    /// `d_s + d_z → hidden → d_s`, latent box `[−1, 1]^{d_z}`.
    pub fn new(d_in: usize, d_s: usize, d_z: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let enc_x = Mlp::new(
            &[d_in, hidden, d_s],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        let enc_y = Mlp::new(
            &[d_in, hidden, d_s],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        let predictor = Mlp::new(
            &[d_s + d_z, hidden, d_s],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        );
        JepaModel {
            enc_x,
            enc_y,
            predictor,
            latent_lo: vec![-1.0; d_z],
            latent_hi: vec![1.0; d_z],
        }
    }

    pub fn from_parts(enc_x: Mlp, enc_y: Mlp, predictor: Mlp, latent_lo: Vec<f64>, latent_hi: Vec<f64>) -> Self {
        JepaModel {
            enc_x,
            enc_y,
            predictor,
            latent_lo,
            latent_hi,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.enc_x.output_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_lo.len()
    }

    pub fn input_dim(&self) -> usize {
        self.enc_x.input_dim()
    }

    pub fn encoder_x(&self) -> &Mlp {
        &self.enc_x
    }

    pub fn encoder_y(&self) -> &Mlp {
        &self.enc_y
    }

    pub fn predictor(&self) -> &Mlp {
        &self.predictor
    }

    pub fn latent_bounds(&self) -> (&[f64], &[f64]) {
        (&self.latent_lo, &self.latent_hi)
    }

    pub fn embed_x(&self, x: &[f64]) -> Vec<f64> {
        self.enc_x.forward_row(x)
    }

    pub fn embed_y(&self, y: &[f64]) -> Vec<f64> {
        self.enc_y.forward_row(y)
    }

    pub fn predict_embedding(&self, s_x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut row = s_x.to_vec();
        row.extend_from_slice(z);
        self.predictor.forward_row(&row)
    }

    /// `‖Pred(Enc_x(x), z) − Enc_y(y)‖²`.
    pub fn energy(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let pred = self.predict_embedding(&self.embed_x(x), z);
        let s_y = self.embed_y(y);
        pred.iter()
            .zip(&s_y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Latent inference on fixed embeddings: grid scan of the box plus
    /// monotone descent, minimizing `energy + r_weight·‖z‖²`.
    fn infer_z_embedded(
        &self,
        s_x: &[f64],
        s_y: &[f64],
        r_weight: f64,
        cfg: &InferenceConfig,
    ) -> EbmResult<(Vec<f64>, f64)> {
        let objective = |z: &[f64]| -> EbmResult<f64> {
            let pred = self.predict_embedding(s_x, z);
            let e: f64 = pred
                .iter()
                .zip(s_y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(e + r_weight * z.iter().map(|v| v * v).sum::<f64>())
        };
        let grad = |z: &[f64]| -> EbmResult<Vec<f64>> {
            let mut row = s_x.to_vec();
            row.extend_from_slice(z);
            let input = Tensor::from_vec(vec![1, row.len()], row)?;
            let mut tape = Tape::new();
            let vars = self.predictor.stage_const(&mut tape);
            let inp = tape.leaf(input);
            let pred = self.predictor.apply(&mut tape, &vars, inp)?;
            let target = tape.constant(Tensor::from_vec(vec![1, s_y.len()], s_y.to_vec())?);
            let loss = tape.sq_dist(pred, target)?;
            let grads = tape.backward(loss)?;
            let full = grads.wrt(inp);
            let d_s = s_x.len();
            let mut g: Vec<f64> = full.data()[d_s..].to_vec();
            for (gi, zi) in g.iter_mut().zip(z) {
                *gi += 2.0 * r_weight * zi;
            }
            Ok(g)
        };

        // Coarse grid then monotone refinement, mirroring the generic
        // inference machinery at embedding level.
        let res = cfg.grid.first().copied().unwrap_or(9).max(2);
        let dims = self.latent_dim();
        let mut best_z = vec![0.0; dims];
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; dims];
        loop {
            let z: Vec<f64> = (0..dims)
                .map(|d| {
                    self.latent_lo[d]
                        + (self.latent_hi[d] - self.latent_lo[d]) * idx[d] as f64
                            / (res - 1) as f64
                })
                .collect();
            let v = objective(&z)?;
            if v < best {
                best = v;
                best_z = z;
            }
            let mut d = dims;
            loop {
                if d == 0 {
                    break;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
        let mut z = best_z;
        let mut fz = best;
        let mut lr = cfg.gd_lr;
        for _ in 0..cfg.gd_steps {
            let g = grad(&z)?;
            let proposal: Vec<f64> = z
                .iter()
                .zip(&g)
                .enumerate()
                .map(|(d, (zi, gi))| (zi - lr * gi).clamp(self.latent_lo[d], self.latent_hi[d]))
                .collect();
            let fp = objective(&proposal)?;
            if fp <= fz {
                let gain = fz - fp;
                z = proposal;
                fz = fp;
                lr *= 1.5;
                if gain < cfg.gd_tol {
                    break;
                }
            } else {
                lr *= 0.5;
            }
        }
        Ok((z, fz))
    }
}

/// Adapter viewing a JEPA as a latent-variable energy model over raw
/// inputs, for the generic inference machinery.
pub struct JepaEnergy<'a> {
    pub model: &'a JepaModel,
    pub r_weight: f64,
}

impl LatentEnergyModel for JepaEnergy<'_> {
    fn energy(&self, x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<f64> {
        Ok(self.model.energy(x.data(), y.data(), z.data())
            + self.r_weight * z.norm_sq())
    }

    fn grad_z(&self, x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<Tensor> {
        let s_x = self.model.embed_x(x.data());
        let s_y = self.model.embed_y(y.data());
        let mut row = s_x.clone();
        row.extend_from_slice(z.data());
        let input = Tensor::from_vec(vec![1, row.len()], row)?;
        let mut tape = Tape::new();
        let vars = self.model.predictor.stage_const(&mut tape);
        let inp = tape.leaf(input);
        let pred = self.model.predictor.apply(&mut tape, &vars, inp)?;
        let target = tape.constant(Tensor::from_vec(vec![1, s_y.len()], s_y)?);
        let loss = tape.sq_dist(pred, target)?;
        let grads = tape.backward(loss)?;
        let full = grads.wrt(inp);
        let d_s = self.model.embedding_dim();
        let g: Vec<f64> = full.data()[d_s..]
            .iter()
            .zip(z.data())
            .map(|(gi, zi)| gi + 2.0 * self.r_weight * zi)
            .collect();
        Ok(Tensor::vector(g))
    }

    fn latent_domain(&self) -> LatentDomain {
        LatentDomain::Box {
            lo: self.model.latent_lo.clone(),
            hi: self.model.latent_hi.clone(),
        }
    }
}

/// `argmin_z [energy(x,y,z) + r_weight·‖z‖²]` with the regularized energy
/// value at the minimizer.
pub fn infer_latent(
    model: &JepaModel,
    x: &[f64],
    y: &[f64],
    r_weight: f64,
    cfg: &InferenceConfig,
) -> EbmResult<(Tensor, f64)> {
    let adapter = JepaEnergy { model, r_weight };
    let (f, z) = free_energy_min(
        &adapter,
        &Tensor::vector(x.to_vec()),
        &Tensor::vector(y.to_vec()),
        cfg,
    )?;
    Ok((z, f))
}

// ── VICReg ───────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VicregConfig {
    pub lambda_inv: f64,
    pub lambda_var: f64,
    pub lambda_cov: f64,
    /// Variance threshold γ.
    pub gamma: f64,
    /// Hidden width of the two-layer expander head; the head maps
    /// `d_s → 4·d_s` and is discarded after pretraining.
    pub expander_hidden: usize,
}

impl Default for VicregConfig {
    fn default() -> Self {
        VicregConfig {
            lambda_inv: 1.0,
            lambda_var: 1.0,
            lambda_cov: 0.1,
            gamma: 1.0,
            expander_hidden: 16,
        }
    }
}

impl VicregConfig {
    pub fn validate(&self) -> EbmResult<()> {
        if self.lambda_inv < 0.0 || self.lambda_var < 0.0 || self.lambda_cov < 0.0 {
            return Err(EbmError::invalid("vicreg weights", "must be non-negative"));
        }
        if !(self.gamma > 0.0) {
            return Err(EbmError::invalid("vicreg gamma", "must be positive"));
        }
        Ok(())
    }

    pub fn make_expander(&self, d_s: usize, seed: u64) -> Mlp {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Mlp::new(
            &[d_s, self.expander_hidden, 4 * d_s],
            &[Activation::Tanh, Activation::Linear],
            &mut rng,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VicregTerms {
    pub total: f64,
    pub inv: f64,
    pub var: f64,
    pub cov: f64,
}

/// Variance hinge and covariance penalty of one `[n, d]` batch on the
/// tape: `(var term, cov term)` where var = mean over dims of
/// `[γ − √(Var + ε)]⁺` and cov = sum of squared off-diagonal sample
/// covariances divided by the dimension.
pub(crate) fn var_cov_terms(
    tape: &mut Tape,
    batch: Var,
    gamma: f64,
) -> EbmResult<(Var, Var)> {
    let n = tape.shape(batch)[0];
    let d = tape.shape(batch)[1];
    if n < 4 {
        return Err(EbmError::invalid(
            "vicreg batch",
            format!("need at least 4 samples for covariance, got {n}"),
        ));
    }
    let ones_row = tape.constant(Tensor::full([1, n], 1.0));
    let ones_col = tape.constant(Tensor::full([n, 1], 1.0));
    let col_sums = tape.matmul(ones_row, batch)?;
    let mean_row = tape.scale(col_sums, 1.0 / n as f64);
    let mean_rows = tape.matmul(ones_col, mean_row)?;
    let centered = tape.sub(batch, mean_rows)?;

    // Per-dimension unbiased variance: ones·centered² / (n−1).
    let sq = tape.square(centered);
    let var_sums = tape.matmul(ones_row, sq)?;
    let variances = tape.scale(var_sums, 1.0 / (n as f64 - 1.0));
    let var_eps = tape.add_scalar(variances, VAR_EPSILON);
    let stds = tape.sqrt(var_eps)?;
    let neg = tape.neg(stds);
    let short = tape.add_scalar(neg, gamma);
    let hinged = tape.relu(short);
    let var_term = tape.mean(hinged);

    // Sample covariance with the diagonal masked out.
    let ct = tape.transpose(centered)?;
    let cov = tape.matmul(ct, centered)?;
    let cov = tape.scale(cov, 1.0 / (n as f64 - 1.0));
    let mut mask = Tensor::full([d, d], 1.0);
    for i in 0..d {
        mask.data_mut()[i * d + i] = 0.0;
    }
    let mask = tape.constant(mask);
    let offdiag = tape.mul(cov, mask)?;
    let offdiag_sq = tape.square(offdiag);
    let cov_sum = tape.sum(offdiag_sq);
    let cov_term = tape.scale(cov_sum, 1.0 / d as f64);
    Ok((var_term, cov_term))
}

struct VicregVars {
    total: Var,
    inv: Var,
    var: Var,
    cov: Var,
}

/// Builds the full VICReg objective on a tape: invariance between the two
/// batches, variance and covariance terms on (expanded) copies of both,
/// averaged over the two branches.
fn build_vicreg(
    tape: &mut Tape,
    a_batch: Var,
    b_batch: Var,
    expander: Option<(&Mlp, &MlpVars)>,
    cfg: &VicregConfig,
) -> EbmResult<VicregVars> {
    cfg.validate()?;
    let n = tape.shape(a_batch)[0];
    let diff = tape.sub(a_batch, b_batch)?;
    let sq = tape.square(diff);
    let total_sq = tape.sum(sq);
    let inv = tape.scale(total_sq, 1.0 / n as f64);

    let expand = |tape: &mut Tape, batch: Var| -> EbmResult<Var> {
        match expander {
            Some((mlp, vars)) => mlp.apply(tape, vars, batch),
            None => Ok(batch),
        }
    };
    let va = expand(tape, a_batch)?;
    let vb = expand(tape, b_batch)?;
    let (var_a, cov_a) = var_cov_terms(tape, va, cfg.gamma)?;
    let (var_b, cov_b) = var_cov_terms(tape, vb, cfg.gamma)?;
    let var_sum = tape.add(var_a, var_b)?;
    let var = tape.scale(var_sum, 0.5);
    let cov_sum = tape.add(cov_a, cov_b)?;
    let cov = tape.scale(cov_sum, 0.5);

    let wi = tape.scale(inv, cfg.lambda_inv);
    let wv = tape.scale(var, cfg.lambda_var);
    let wc = tape.scale(cov, cfg.lambda_cov);
    let partial = tape.add(wi, wv)?;
    let total = tape.add(partial, wc)?;
    Ok(VicregVars {
        total,
        inv,
        var,
        cov,
    })
}

/// VICReg term values for a batch of embedding pairs. `expander = None`
/// evaluates the variance and covariance terms on the raw embeddings.
pub fn vicreg_loss(
    pred: &[Vec<f64>],
    target: &[Vec<f64>],
    expander: Option<&Mlp>,
    cfg: &VicregConfig,
) -> EbmResult<VicregTerms> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(EbmError::invalid("vicreg batch", "pair count mismatch"));
    }
    let n = pred.len();
    let d = pred[0].len();
    let a = Tensor::from_vec(vec![n, d], pred.iter().flatten().copied().collect())?;
    let b = Tensor::from_vec(vec![n, d], target.iter().flatten().copied().collect())?;
    let mut tape = Tape::new();
    let a = tape.constant(a);
    let b = tape.constant(b);
    let staged = expander.map(|mlp| (mlp, mlp.stage_const(&mut tape)));
    let staged_ref = staged.as_ref().map(|(m, v)| (*m, v));
    let vars = build_vicreg(&mut tape, a, b, staged_ref, cfg)?;
    Ok(VicregTerms {
        total: tape.item(vars.total)?,
        inv: tape.item(vars.inv)?,
        var: tape.item(vars.var)?,
        cov: tape.item(vars.cov)?,
    })
}

// ── collapse metrics and training ────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseMetrics {
    /// Smallest per-dimension standard deviation across the embedding batch.
    pub min_std: f64,
    pub mean_abs_offdiag_cov: f64,
    pub max_abs_offdiag_cov: f64,
}

/// Collapse metrics of a raw embedding batch (rows are samples).
pub fn collapse_metrics(embeddings: &[Vec<f64>]) -> CollapseMetrics {
    let n = embeddings.len();
    let d = embeddings[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for row in embeddings {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / nf;
        }
    }
    let mut cov = vec![0.0; d * d];
    for row in embeddings {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (row[i] - mean[i]) * (row[j] - mean[j]) / (nf - 1.0);
            }
        }
    }
    let min_std = (0..d)
        .map(|i| cov[i * d + i].max(0.0).sqrt())
        .fold(f64::INFINITY, f64::min);
    let mut sum_abs = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                sum_abs += cov[i * d + j].abs();
                max_abs = max_abs.max(cov[i * d + j].abs());
            }
        }
    }
    let pairs = (d * d - d) as f64;
    CollapseMetrics {
        min_std,
        mean_abs_offdiag_cov: if pairs > 0.0 { sum_abs / pairs } else { 0.0 },
        max_abs_offdiag_cov: max_abs,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JepaEpoch {
    pub epoch: usize,
    pub inv: f64,
    pub var: f64,
    pub cov: f64,
    pub min_std: f64,
    pub mean_abs_offdiag_cov: f64,
}

#[derive(Clone, Debug)]
pub struct JepaOutcome {
    pub model: JepaModel,
    pub expander: Mlp,
    pub history: Vec<JepaEpoch>,
    /// Expander-output covariance metrics at the final epoch.
    pub final_expander_metrics: CollapseMetrics,
    pub aborted_at: Option<usize>,
}

pub fn history_to_csv(history: &[JepaEpoch]) -> String {
    let mut out = String::from("epoch,inv,var,cov,min_std,mean_abs_offdiag_cov\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch,
            crate::csv::g17(r.inv),
            crate::csv::g17(r.var),
            crate::csv::g17(r.cov),
            crate::csv::g17(r.min_std),
            crate::csv::g17(r.mean_abs_offdiag_cov),
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct JepaTrainConfig {
    pub vicreg: VicregConfig,
    pub epochs: usize,
    pub lr: f64,
    /// Weight of `‖z‖²` during latent inference.
    pub r_weight: f64,
    /// `false` trains on the invariance term alone — the collapse
    /// demonstration.
    pub regularized: bool,
    /// Latent grid resolution for per-sample inference.
    pub latent_grid: usize,
}

impl Default for JepaTrainConfig {
    fn default() -> Self {
        JepaTrainConfig {
            vicreg: VicregConfig::default(),
            epochs: 200,
            lr: 0.05,
            r_weight: 0.1,
            regularized: true,
            latent_grid: 9,
        }
    }
}

/// Full-batch JEPA training with per-sample latent inference and momentum
/// updates. History rows carry the loss terms and the collapse metrics of
/// the pooled `[s_x; s_y]` batch.
///
/// Training itself is deterministic: all randomness lives in the model and
/// expander initializations, so the seed parameter exists for interface
/// uniformity with the other trainers and reproducibility is trivial.
pub fn train_jepa(
    mut model: JepaModel,
    expander: Mlp,
    pairs: &[(Vec<f64>, Vec<f64>)],
    cfg: &JepaTrainConfig,
    _seed: u64,
) -> EbmResult<JepaOutcome> {
    if pairs.len() < 4 {
        return Err(EbmError::invalid(
            "jepa dataset",
            "need at least 4 pairs for the covariance terms",
        ));
    }
    cfg.vicreg.validate()?;
    let mut expander = expander;
    let n = pairs.len();
    let d_in = model.input_dim();
    let d_z = model.latent_dim();

    let x_rows = Tensor::from_vec(
        vec![n, d_in],
        pairs.iter().flat_map(|(x, _)| x.iter().copied()).collect(),
    )?;
    let y_rows = Tensor::from_vec(
        vec![n, d_in],
        pairs.iter().flat_map(|(_, y)| y.iter().copied()).collect(),
    )?;

    let infer_cfg = InferenceConfig {
        grid: vec![cfg.latent_grid],
        gd_steps: 40,
        gd_lr: 0.1,
        gd_tol: 1e-12,
        restarts: 0,
        ..InferenceConfig::default()
    };

    let mut velocity: Vec<f64> = Vec::new();
    let momentum = 0.9;
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut checkpoint = (model.clone(), expander.clone());

    for epoch in 0..=cfg.epochs {
        // Current embeddings (eager) for latent inference and metrics.
        let s_x: Vec<Vec<f64>> = pairs.iter().map(|(x, _)| model.embed_x(x)).collect();
        let s_y: Vec<Vec<f64>> = pairs.iter().map(|(_, y)| model.embed_y(y)).collect();
        let zs: Vec<Vec<f64>> = s_x
            .iter()
            .zip(&s_y)
            .map(|(sx, sy)| {
                model
                    .infer_z_embedded(sx, sy, cfg.r_weight, &infer_cfg)
                    .map(|(z, _)| z)
            })
            .collect::<EbmResult<_>>()?;

        // Staged batch graph: encoders, predictor on inferred latents,
        // VICReg terms.
        let mut tape = Tape::new();
        let enc_x_vars = model.enc_x.stage(&mut tape);
        let enc_y_vars = model.enc_y.stage(&mut tape);
        let pred_vars = model.predictor.stage(&mut tape);
        let exp_vars = expander.stage(&mut tape);
        let xin = tape.constant(x_rows.clone());
        let yin = tape.constant(y_rows.clone());
        let sx_batch = model.enc_x.apply(&mut tape, &enc_x_vars, xin)?;
        let sy_batch = model.enc_y.apply(&mut tape, &enc_y_vars, yin)?;
        let z_batch = tape.constant(Tensor::from_vec(
            vec![n, d_z],
            zs.iter().flatten().copied().collect(),
        )?);
        let pred_in = tape.concat(&[sx_batch, z_batch], 1)?;
        let pred_batch = model.predictor.apply(&mut tape, &pred_vars, pred_in)?;

        // Invariance pulls the prediction to the target embedding; the
        // variance/covariance pressure acts on the encoder representations
        // (both sides), never on the prediction — with the invariance term
        // off, the predictor receives no gradient at all.
        let vcfg = &cfg.vicreg;
        let diff = tape.sub(pred_batch, sy_batch)?;
        let sq = tape.square(diff);
        let total_sq = tape.sum(sq);
        let inv = tape.scale(total_sq, 1.0 / n as f64);
        let vx = expander.apply(&mut tape, &exp_vars, sx_batch)?;
        let vy = expander.apply(&mut tape, &exp_vars, sy_batch)?;
        let (var_x, cov_x) = var_cov_terms(&mut tape, vx, vcfg.gamma)?;
        let (var_y, cov_y) = var_cov_terms(&mut tape, vy, vcfg.gamma)?;
        let var_sum = tape.add(var_x, var_y)?;
        let var = tape.scale(var_sum, 0.5);
        let cov_sum = tape.add(cov_x, cov_y)?;
        let cov = tape.scale(cov_sum, 0.5);
        let loss = if cfg.regularized {
            let wi = tape.scale(inv, vcfg.lambda_inv);
            let wv = tape.scale(var, vcfg.lambda_var);
            let wc = tape.scale(cov, vcfg.lambda_cov);
            let partial = tape.add(wi, wv)?;
            tape.add(partial, wc)?
        } else {
            tape.scale(inv, vcfg.lambda_inv)
        };

        let pooled: Vec<Vec<f64>> = s_x.iter().chain(&s_y).cloned().collect();
        let metrics = collapse_metrics(&pooled);
        history.push(JepaEpoch {
            epoch,
            inv: tape.item(inv)?,
            var: tape.item(var)?,
            cov: tape.item(cov)?,
            min_std: metrics.min_std,
            mean_abs_offdiag_cov: metrics.mean_abs_offdiag_cov,
        });
        if epoch == cfg.epochs {
            break;
        }

        let loss_value = tape.item(loss)?;
        let grads = tape.backward(loss)?;
        let mut flat = enc_x_vars.flat_grad(&grads);
        flat.extend(enc_y_vars.flat_grad(&grads));
        flat.extend(pred_vars.flat_grad(&grads));
        flat.extend(exp_vars.flat_grad(&grads));
        if velocity.is_empty() {
            velocity = vec![0.0; flat.len()];
        }

        let mut params = model.enc_x.flat_params();
        params.extend(model.enc_y.flat_params());
        params.extend(model.predictor.flat_params());
        params.extend(expander.flat_params());
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&flat) {
            *v = momentum * *v - cfg.lr * g;
            *p += *v;
        }
        if !loss_value.is_finite() || params.iter().any(|p| !p.is_finite()) {
            let (m, e) = checkpoint;
            return Ok(JepaOutcome {
                final_expander_metrics: final_expander_metrics(&m, &e, pairs),
                model: m,
                expander: e,
                history,
                aborted_at: Some(epoch),
            });
        }
        let (a, rest) = params.split_at(model.enc_x.param_count());
        let (b, rest) = rest.split_at(model.enc_y.param_count());
        let (c, d) = rest.split_at(model.predictor.param_count());
        model.enc_x.set_flat_params(a);
        model.enc_y.set_flat_params(b);
        model.predictor.set_flat_params(c);
        expander.set_flat_params(d);
        checkpoint = (model.clone(), expander.clone());
    }

    Ok(JepaOutcome {
        final_expander_metrics: final_expander_metrics(&model, &expander, pairs),
        model,
        expander,
        history,
        aborted_at: None,
    })
}

fn final_expander_metrics(
    model: &JepaModel,
    expander: &Mlp,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> CollapseMetrics {
    let expanded: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(_, y)| expander.forward_row(&model.embed_y(y)))
        .collect();
    collapse_metrics(&expanded)
}

// ── two-level hierarchy ──────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct HJepaModel {
    pub level1: JepaModel,
    pub level2: JepaModel,
    /// Non-overlapping mean-pool window between levels.
    pub pool_window: usize,
}

/// Mean-pools level-1 input embeddings over non-overlapping windows.
pub fn coarsen(level1: &JepaModel, sequence: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let d_s = level1.embedding_dim();
    sequence
        .chunks_exact(window)
        .map(|chunk| {
            let mut pooled = vec![0.0; d_s];
            for obs in chunk {
                let e = level1.embed_x(obs);
                for (p, v) in pooled.iter_mut().zip(&e) {
                    *p += v / window as f64;
                }
            }
            pooled
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct HJepaConfig {
    /// Short horizon (raw steps) for level 1.
    pub h1: usize,
    /// Long horizon (raw steps) for level 2; must be a multiple of
    /// `pool_window`.
    pub h2: usize,
    pub pool_window: usize,
    pub d_s: usize,
    pub hidden: usize,
    pub train: JepaTrainConfig,
    /// Fraction of each sequence used for training; the tail is held out
    /// for the prediction-error report.
    pub train_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct HJepaOutcome {
    pub model: HJepaModel,
    /// Held-out relative prediction error of level 1 at its own horizon.
    pub level1_rel_error: f64,
    /// Held-out relative prediction error of level 2 at the long horizon.
    pub level2_rel_error: f64,
    pub level1_history: Vec<JepaEpoch>,
    pub level2_history: Vec<JepaEpoch>,
}

fn horizon_pairs(seq: &[Vec<f64>], horizon: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..seq.len().saturating_sub(horizon))
        .map(|t| (seq[t].clone(), seq[t + horizon].clone()))
        .collect()
}

/// Relative held-out prediction error in the model's own representation
/// space: MSE of `Pred(Enc_x(x), 0)` against `Enc_y(y)`, normalized by the
/// variance of the targets so levels with different embedding spaces are
/// comparable.
pub fn relative_prediction_error(model: &JepaModel, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let z0 = vec![0.0; model.latent_dim()];
    let targets: Vec<Vec<f64>> = pairs.iter().map(|(_, y)| model.embed_y(y)).collect();
    let d = model.embedding_dim();
    let n = targets.len() as f64;
    let mut mean = vec![0.0; d];
    for t in &targets {
        for (m, v) in mean.iter_mut().zip(t) {
            *m += v / n;
        }
    }
    let mut mse = 0.0;
    let mut baseline = 0.0;
    for ((x, _), t) in pairs.iter().zip(&targets) {
        let pred = model.predict_embedding(&model.embed_x(x), &z0);
        mse += pred.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        baseline += t
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
    }
    if baseline <= 1e-12 {
        return f64::INFINITY;
    }
    mse / baseline
}

/// Trains level 1 on short-horizon raw pairs, freezes it, pools its input
/// embeddings, and trains level 2 on long-horizon pooled pairs.
pub fn train_hjepa(
    sequences: &[Vec<Vec<f64>>],
    cfg: &HJepaConfig,
    seed: u64,
) -> EbmResult<HJepaOutcome> {
    if sequences.is_empty() {
        return Err(EbmError::Empty { what: "sequences" });
    }
    if cfg.h2 % cfg.pool_window != 0 || cfg.h2 == 0 {
        return Err(EbmError::invalid(
            "hjepa horizons",
            "h2 must be a positive multiple of the pool window",
        ));
    }
    let seq_len = sequences[0].len();
    if seq_len <= cfg.h2 {
        return Err(EbmError::invalid(
            "hjepa sequences",
            "sequence length must exceed the long horizon",
        ));
    }
    let d_in = sequences[0][0].len();
    let split = ((seq_len as f64) * cfg.train_fraction) as usize;

    // Level 1: short-horizon pairs from the training prefix.
    let mut train1 = Vec::new();
    let mut eval1 = Vec::new();
    for seq in sequences {
        let pairs = horizon_pairs(seq, cfg.h1.max(0));
        for (t, p) in pairs.into_iter().enumerate() {
            if t < split {
                train1.push(p);
            } else {
                eval1.push(p);
            }
        }
    }
    let level1 = JepaModel::new(d_in, cfg.d_s, 1, cfg.hidden, seed);
    let expander1 = cfg.train.vicreg.make_expander(cfg.d_s, seed ^ 0xe1);
    let out1 = train_jepa(level1, expander1, &train1, &cfg.train, seed)?;
    let level1 = out1.model;

    // Level 2: pooled representations at the long horizon.
    let pooled_h2 = cfg.h2 / cfg.pool_window;
    let mut train2 = Vec::new();
    let mut eval2 = Vec::new();
    let pooled_split = split / cfg.pool_window;
    for seq in sequences {
        let pooled = coarsen(&level1, seq, cfg.pool_window);
        let pairs = horizon_pairs(&pooled, pooled_h2);
        for (u, p) in pairs.into_iter().enumerate() {
            if u < pooled_split {
                train2.push(p);
            } else {
                eval2.push(p);
            }
        }
    }
    let level2 = JepaModel::new(cfg.d_s, cfg.d_s, 1, cfg.hidden, seed ^ 0xe2);
    let expander2 = cfg.train.vicreg.make_expander(cfg.d_s, seed ^ 0xe3);
    let out2 = train_jepa(level2, expander2, &train2, &cfg.train, seed ^ 0xe4)?;
    let level2 = out2.model;

    let level1_rel_error = relative_prediction_error(&level1, &eval1);
    let level2_rel_error = relative_prediction_error(&level2, &eval2);
    Ok(HJepaOutcome {
        model: HJepaModel {
            level1,
            level2,
            pool_window: cfg.pool_window,
        },
        level1_rel_error,
        level2_rel_error,
        level1_history: out1.history,
        level2_history: out2.history,
    })
}

/// The multiscale ablation: a level-1 model forced to predict raw inputs
/// at the long horizon, with the same architecture and seed discipline.
pub fn train_level1_at_long_horizon(
    sequences: &[Vec<Vec<f64>>],
    cfg: &HJepaConfig,
    seed: u64,
) -> EbmResult<f64> {
    let seq_len = sequences[0].len();
    let split = ((seq_len as f64) * cfg.train_fraction) as usize;
    let d_in = sequences[0][0].len();
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for seq in sequences {
        let pairs = horizon_pairs(seq, cfg.h2);
        for (t, p) in pairs.into_iter().enumerate() {
            if t < split {
                train.push(p);
            } else {
                eval.push(p);
            }
        }
    }
    let model = JepaModel::new(d_in, cfg.d_s, 1, cfg.hidden, seed);
    let expander = cfg.train.vicreg.make_expander(cfg.d_s, seed ^ 0xe1);
    let out = train_jepa(model, expander, &train, &cfg.train, seed)?;
    Ok(relative_prediction_error(&out.model, &eval))
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use super::*;

    #[test]
    fn identity_setup_scores_zero() {
        // Identity encoders and predictor that passes s_x through: x = y
        // gives energy exactly 0.
        let eye2 = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let enc = Mlp::from_parts(
            vec![2, 2],
            vec![Activation::Linear],
            vec![eye2.clone()],
            vec![Tensor::zeros([2, 1])],
        );
        // Predictor [s_x ‖ z] → s_x.
        let proj = Tensor::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let pred = Mlp::from_parts(
            vec![3, 2],
            vec![Activation::Linear],
            vec![proj],
            vec![Tensor::zeros([2, 1])],
        );
        let model = JepaModel::from_parts(enc.clone(), enc, pred, vec![-1.0], vec![1.0]);
        let x = [0.3, -0.8];
        assert_eq!(model.energy(&x, &x, &[0.0]), 0.0);
    }

    #[test]
    fn fresh_random_encoders_disagree() {
        let mut nonzero = 0;
        for seed in 0..20 {
            let model = JepaModel::new(2, 3, 1, 8, seed);
            let x = [0.5, -0.5];
            if model.energy(&x, &x, &[0.0]) > 1e-12 {
                nonzero += 1;
            }
        }
        assert_eq!(nonzero, 20);
    }

    #[test]
    fn latent_regularizer_alone_selects_zero() {
        // A predictor that ignores z: the quadratic penalty decides.
        let model = JepaModel::new(2, 3, 1, 8, 3);
        let cfg = InferenceConfig {
            grid: vec![17],
            ..InferenceConfig::default()
        };
        // With a huge r_weight the data term is negligible.
        let (z, _) = infer_latent(&model, &[0.4, 0.1], &[0.2, -0.3], 1e6, &cfg).unwrap();
        assert!(z.data()[0].abs() < 1e-3, "z = {:?}", z.data());
    }

    #[test]
    fn whitened_batch_has_zero_var_and_cov_terms() {
        // Four 2-D points with exactly unit sample variance and zero
        // off-diagonal covariance.
        let s = 3.0_f64.sqrt() / 2.0;
        let batch = vec![
            vec![s, s],
            vec![s, -s],
            vec![-s, s],
            vec![-s, -s],
        ];
        let cfg = VicregConfig::default();
        let terms = vicreg_loss(&batch, &batch, None, &cfg).unwrap();
        assert_eq!(terms.inv, 0.0);
        assert_eq!(terms.var, 0.0);
        assert_eq!(terms.cov, 0.0);
    }

    #[test]
    fn constant_batch_pays_the_full_hinge() {
        let batch = vec![vec![0.7, -0.2]; 8];
        let cfg = VicregConfig::default();
        let terms = vicreg_loss(&batch, &batch, None, &cfg).unwrap();
        // Zero variance: hinge = γ − √ε per dimension.
        let expect = cfg.gamma - VAR_EPSILON.sqrt();
        assert!((terms.var - expect).abs() < 1e-12, "{}", terms.var);
        // Summation dust only; the covariance of a constant batch is zero.
        assert!(terms.cov.abs() < 1e-30, "{}", terms.cov);
    }

    #[test]
    fn vicreg_batch_too_small_rejected() {
        let batch = vec![vec![0.0, 0.0]; 3];
        assert!(vicreg_loss(&batch, &batch, None, &VicregConfig::default()).is_err());
    }

    #[test]
    fn vicreg_gradients_match_finite_differences() {
        use crate::numerics::fdiff::{finite_diff_grad, max_rel_error};
        // Tiny instance: d_s = 3, batch 8, expander staged with leaves.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let expander = VicregConfig {
            expander_hidden: 6,
            ..VicregConfig::default()
        }
        .make_expander(3, 9);
        let batch_a: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let batch_b: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let cfg = VicregConfig {
            lambda_inv: 1.0,
            lambda_var: 1.0,
            lambda_cov: 1.0,
            gamma: 1.0,
            expander_hidden: 6,
        };

        let a = Tensor::from_vec(vec![8, 3], batch_a.iter().flatten().copied().collect()).unwrap();
        let b = Tensor::from_vec(vec![8, 3], batch_b.iter().flatten().copied().collect()).unwrap();
        let mut tape = Tape::new();
        let av = tape.constant(a);
        let bv = tape.constant(b);
        let exp_vars = expander.stage(&mut tape);
        let vars = build_vicreg(&mut tape, av, bv, Some((&expander, &exp_vars)), &cfg).unwrap();
        let grads = tape.backward(vars.total).unwrap();
        let analytic = Tensor::vector(exp_vars.flat_grad(&grads));

        let theta = Tensor::vector(expander.flat_params());
        let numeric = finite_diff_grad(
            |p: &Tensor| {
                let mut probe = expander.clone();
                probe.set_flat_params(p.data());
                Ok(vicreg_loss(&batch_a, &batch_b, Some(&probe), &cfg)
                    .unwrap()
                    .total)
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let err = max_rel_error(&analytic, &numeric);
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn zero_inv_weight_leaves_predictor_untouched() {
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..16)
            .map(|i| {
                let t = i as f64 / 8.0 - 1.0;
                (vec![t, -t], vec![t + 0.05, -t + 0.05])
            })
            .collect();
        let model = JepaModel::new(2, 3, 1, 8, 11);
        let before = model.predictor().flat_params();
        let cfg = JepaTrainConfig {
            vicreg: VicregConfig {
                lambda_inv: 0.0,
                ..VicregConfig::default()
            },
            epochs: 5,
            ..JepaTrainConfig::default()
        };
        let expander = cfg.vicreg.make_expander(3, 13);
        let out = train_jepa(model, expander, &pairs, &cfg, 17).unwrap();
        assert_eq!(out.model.predictor().flat_params(), before);
    }

    #[test]
    fn training_histories_are_bitwise_reproducible() {
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..12)
            .map(|i| {
                let t = i as f64 / 6.0 - 1.0;
                (vec![t, t * t], vec![t + 0.02, t * t - 0.02])
            })
            .collect();
        let cfg = JepaTrainConfig {
            epochs: 8,
            ..JepaTrainConfig::default()
        };
        let run = || {
            let model = JepaModel::new(2, 3, 1, 8, 21);
            let expander = cfg.vicreg.make_expander(3, 23);
            train_jepa(model, expander, &pairs, &cfg, 29).unwrap().history
        };
        assert_eq!(run(), run());
    }
}

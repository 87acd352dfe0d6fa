//! The constrained-fitting family: each member is a reconstruction
//! distance plus a volume-limiting mechanism — a low-rank projector, a
//! narrow code, a discrete codebook, or an L1-sparse code.

use crate::error::{EbmError, EbmResult};
use crate::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

// ── PCA ──────────────────────────────────────────────────────────────

/// `‖y − WᵀWy‖²` with W row-orthonormal: the projector rank is the
/// regularizer.
#[derive(Clone, Debug)]
pub struct PcaModel {
    /// `[k, d]`, rows orthonormal.
    pub w: Tensor,
}

impl PcaModel {
    pub fn new(k: usize, d: usize, seed: u64) -> EbmResult<Self> {
        if k > d {
            return Err(EbmError::invalid(
                "pca rank",
                format!("k = {k} exceeds dimension {d}"),
            ));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..k * d).map(|_| rng.sample(StandardNormal)).collect();
        let mut w = Tensor::from_vec(vec![k, d], data)?;
        gram_schmidt_rows(&mut w);
        Ok(PcaModel { w })
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        let (k, d) = (self.w.shape()[0], self.w.shape()[1]);
        let mut code = vec![0.0; k];
        for r in 0..k {
            code[r] = self.w.data()[r * d..(r + 1) * d]
                .iter()
                .zip(y)
                .map(|(w, v)| w * v)
                .sum();
        }
        let mut err = 0.0;
        for c in 0..d {
            let recon: f64 = (0..k).map(|r| self.w.data()[r * d + c] * code[r]).sum();
            err += (y[c] - recon) * (y[c] - recon);
        }
        err
    }

    pub fn mean_objective(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|y| self.objective(y)).sum::<f64>() / data.len() as f64
    }
}

/// Orthonormalizes rows in place (classical Gram-Schmidt with
/// re-normalization).
pub fn gram_schmidt_rows(w: &mut Tensor) {
    let (k, d) = (w.shape()[0], w.shape()[1]);
    let data = w.data_mut();
    for r in 0..k {
        for prev in 0..r {
            let dot: f64 = (0..d).map(|c| data[r * d + c] * data[prev * d + c]).sum();
            for c in 0..d {
                data[r * d + c] -= dot * data[prev * d + c];
            }
        }
        let norm: f64 = (0..d)
            .map(|c| data[r * d + c] * data[r * d + c])
            .sum::<f64>()
            .sqrt();
        if norm > 1e-12 {
            for c in 0..d {
                data[r * d + c] /= norm;
            }
        }
    }
}

/// Gradient descent on the mean reconstruction error with Gram-Schmidt
/// after every step, so the eigen-oracle comparison is exact.
pub fn fit_pca(
    data: &[Vec<f64>],
    k: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> EbmResult<(PcaModel, Vec<f64>)> {
    let d = data
        .first()
        .ok_or(EbmError::Empty { what: "pca data" })?
        .len();
    let mut model = PcaModel::new(k, d, seed)?;
    let mut history = vec![model.mean_objective(data)];
    let n = data.len() as f64;
    for _ in 0..epochs {
        let mut tape = Tape::new();
        let w = tape.leaf(model.w.clone());
        let wt = tape.transpose(w)?;
        let mut loss_acc: Option<crate::numerics::Var> = None;
        for y in data {
            let yv = tape.constant(Tensor::column(y));
            let code = tape.matmul(w, yv)?;
            let recon = tape.matmul(wt, code)?;
            let err = tape.sq_dist(yv, recon)?;
            loss_acc = Some(match loss_acc {
                Some(acc) => tape.add(acc, err)?,
                None => err,
            });
        }
        let total = loss_acc.expect("non-empty data");
        let loss = tape.scale(total, 1.0 / n);
        let grads = tape.backward(loss)?;
        let g = grads.wrt(w);
        let mut next = model.w.clone();
        next.axpy(-lr, g)?;
        gram_schmidt_rows(&mut next);
        model.w = next;
        history.push(model.mean_objective(data));
    }
    Ok((model, history))
}

// ── linear bottleneck autoencoder ────────────────────────────────────

/// `‖y − Dec(Enc y)‖²` with linear maps; the narrow code is the
/// regularizer.
#[derive(Clone, Debug)]
pub struct BottleneckAe {
    /// `[k, d]`
    pub enc: Tensor,
    /// `[d, k]`
    pub dec: Tensor,
}

impl BottleneckAe {
    pub fn new(width: usize, d: usize, seed: u64) -> EbmResult<Self> {
        if width == 0 || width > d {
            return Err(EbmError::invalid(
                "bottleneck width",
                format!("width {width} invalid for dimension {d}"),
            ));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let scale = 1.0 / (d as f64).sqrt();
        let enc: Vec<f64> = (0..width * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        let dec: Vec<f64> = (0..width * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Ok(BottleneckAe {
            enc: Tensor::from_vec(vec![width, d], enc)?,
            dec: Tensor::from_vec(vec![d, width], dec)?,
        })
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        let (k, d) = (self.enc.shape()[0], self.enc.shape()[1]);
        let mut code = vec![0.0; k];
        for r in 0..k {
            code[r] = self.enc.data()[r * d..(r + 1) * d]
                .iter()
                .zip(y)
                .map(|(w, v)| w * v)
                .sum();
        }
        let mut err = 0.0;
        for c in 0..d {
            let recon: f64 = (0..k).map(|r| self.dec.data()[c * k + r] * code[r]).sum();
            err += (y[c] - recon) * (y[c] - recon);
        }
        err
    }

    pub fn mean_objective(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|y| self.objective(y)).sum::<f64>() / data.len() as f64
    }
}

pub fn fit_bottleneck(
    data: &[Vec<f64>],
    width: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> EbmResult<(BottleneckAe, Vec<f64>)> {
    let d = data
        .first()
        .ok_or(EbmError::Empty { what: "ae data" })?
        .len();
    let mut model = BottleneckAe::new(width, d, seed)?;
    let mut history = vec![model.mean_objective(data)];
    let n = data.len() as f64;
    for _ in 0..epochs {
        let mut tape = Tape::new();
        let enc = tape.leaf(model.enc.clone());
        let dec = tape.leaf(model.dec.clone());
        let mut loss_acc: Option<crate::numerics::Var> = None;
        for y in data {
            let yv = tape.constant(Tensor::column(y));
            let code = tape.matmul(enc, yv)?;
            let recon = tape.matmul(dec, code)?;
            let err = tape.sq_dist(yv, recon)?;
            loss_acc = Some(match loss_acc {
                Some(acc) => tape.add(acc, err)?,
                None => err,
            });
        }
        let total = loss_acc.expect("non-empty data");
        let loss = tape.scale(total, 1.0 / n);
        let grads = tape.backward(loss)?;
        model.enc.axpy(-lr, grads.wrt(enc))?;
        model.dec.axpy(-lr, grads.wrt(dec))?;
        history.push(model.mean_objective(data));
    }
    Ok((model, history))
}

// ── k-means ──────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct KMeansModel {
    pub centroids: Vec<Vec<f64>>,
}

impl KMeansModel {
    /// Squared distance to the nearest centroid.
    pub fn objective(&self, y: &[f64]) -> f64 {
        self.centroids
            .iter()
            .map(|c| sq_dist(c, y))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_objective(&self, data: &[Vec<f64>]) -> f64 {
        data.iter().map(|y| self.objective(y)).sum::<f64>() / data.len() as f64
    }

    pub fn assign(&self, y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(c, y);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from a distance-weighted seeding. The objective is
/// asserted non-increasing after every iteration; an emptied cluster is
/// reseeded at the point farthest from its nearest centroid.
pub fn fit_kmeans(
    data: &[Vec<f64>],
    k: usize,
    iterations: usize,
    seed: u64,
) -> EbmResult<(KMeansModel, Vec<f64>)> {
    if data.is_empty() {
        return Err(EbmError::Empty { what: "kmeans data" });
    }
    if k == 0 || k > data.len() {
        return Err(EbmError::invalid(
            "kmeans k",
            format!("k = {k} invalid for {} points", data.len()),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Distance-weighted (k-means++) seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(data[rng.random_range(0..data.len())].clone());
    while centroids.len() < k {
        let weights: Vec<f64> = data
            .iter()
            .map(|y| {
                centroids
                    .iter()
                    .map(|c| sq_dist(c, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            centroids.push(data[rng.random_range(0..data.len())].clone());
            continue;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = data.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            pick -= w;
            if pick <= 0.0 {
                chosen = i;
                break;
            }
        }
        centroids.push(data[chosen].clone());
    }

    let mut model = KMeansModel { centroids };
    let mut history = vec![model.mean_objective(data)];
    for _ in 0..iterations {
        let assignments: Vec<usize> = data.iter().map(|y| model.assign(y)).collect();
        let d = data[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (y, &a) in data.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(y) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed at the point farthest from its nearest centroid.
                let far = data
                    .iter()
                    .max_by(|a, b| {
                        model
                            .objective(a)
                            .partial_cmp(&model.objective(b))
                            .unwrap()
                    })
                    .expect("non-empty data");
                model.centroids[c] = far.clone();
            } else {
                for (dst, s) in model.centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        let obj = model.mean_objective(data);
        let prev = *history.last().unwrap();
        assert!(
            obj <= prev + 1e-9,
            "Lloyd objective rose: {prev} -> {obj}"
        );
        history.push(obj);
        if (prev - obj).abs() < 1e-15 {
            break;
        }
    }
    Ok((model, history))
}

// ── sparse coding ────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct SparseCoding {
    /// Dictionary `[d, m]`, columns are atoms.
    pub dict: Tensor,
    pub lambda: f64,
}

/// Largest squared singular value of the dictionary via power iteration on
/// `DᵀD` — the Lipschitz bound that fixes the ISTA step.
fn spectral_norm_sq(dict: &Tensor) -> f64 {
    let (d, m) = (dict.shape()[0], dict.shape()[1]);
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut lambda = 0.0;
    for _ in 0..200 {
        // u = D v; w = Dᵀ u
        let mut u = vec![0.0; d];
        for r in 0..d {
            u[r] = (0..m).map(|c| dict.data()[r * m + c] * v[c]).sum();
        }
        let mut w = vec![0.0; m];
        for c in 0..m {
            w[c] = (0..d).map(|r| dict.data()[r * m + c] * u[r]).sum();
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return 0.0;
        }
        lambda = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lambda
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn sparse_objective(dict: &Tensor, lambda: f64, y: &[f64], z: &[f64]) -> f64 {
    let (d, m) = (dict.shape()[0], dict.shape()[1]);
    let mut err = 0.0;
    for r in 0..d {
        let recon: f64 = (0..m).map(|c| dict.data()[r * m + c] * z[c]).sum();
        err += (y[r] - recon) * (y[r] - recon);
    }
    err + lambda * z.iter().map(|v| v.abs()).sum::<f64>()
}

/// ISTA on `‖y − Dz‖² + λ‖z‖₁` with the fixed step `1/(2σ²(D))`.
/// Returns the code and the per-iteration objective, which is monotone
/// non-increasing at this step size (asserted).
pub fn ista(dict: &Tensor, lambda: f64, y: &[f64], iterations: usize) -> EbmResult<(Vec<f64>, Vec<f64>)> {
    let (d, m) = (dict.shape()[0], dict.shape()[1]);
    if m == 0 || d == 0 {
        return Err(EbmError::Empty { what: "dictionary" });
    }
    let lip = 2.0 * spectral_norm_sq(dict);
    if lip <= 0.0 {
        return Err(EbmError::invalid("dictionary", "zero dictionary"));
    }
    let step = 1.0 / lip;
    let mut z = vec![0.0; m];
    let mut history = vec![sparse_objective(dict, lambda, y, &z)];
    for _ in 0..iterations {
        // ∇‖y − Dz‖² = 2Dᵀ(Dz − y)
        let mut resid = vec![0.0; d];
        for r in 0..d {
            let recon: f64 = (0..m).map(|c| dict.data()[r * m + c] * z[c]).sum();
            resid[r] = recon - y[r];
        }
        for c in 0..m {
            let g: f64 = (0..d).map(|r| 2.0 * dict.data()[r * m + c] * resid[r]).sum();
            z[c] = soft_threshold(z[c] - step * g, step * lambda);
        }
        let obj = sparse_objective(dict, lambda, y, &z);
        let prev = *history.last().unwrap();
        assert!(obj <= prev + 1e-9, "ISTA objective rose: {prev} -> {obj}");
        history.push(obj);
    }
    Ok((z, history))
}

impl SparseCoding {
    pub fn new(d: usize, m: usize, lambda: f64, seed: u64) -> EbmResult<Self> {
        if m == 0 {
            return Err(EbmError::Empty { what: "dictionary" });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut data: Vec<f64> = (0..d * m).map(|_| rng.sample(StandardNormal)).collect();
        // Unit-norm atoms.
        for c in 0..m {
            let norm: f64 = (0..d).map(|r| data[r * m + c] * data[r * m + c]).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for r in 0..d {
                    data[r * m + c] /= norm;
                }
            }
        }
        Ok(SparseCoding {
            dict: Tensor::from_vec(vec![d, m], data)?,
            lambda,
        })
    }

    /// `min_z ‖y − Dz‖² + λ‖z‖₁`, z solved by ISTA.
    pub fn objective(&self, y: &[f64], ista_iterations: usize) -> EbmResult<f64> {
        let (z, _) = ista(&self.dict, self.lambda, y, ista_iterations)?;
        Ok(sparse_objective(&self.dict, self.lambda, y, &z))
    }
}

/// Dictionary learning by alternating ISTA codes with a gradient step on
/// the dictionary.
pub fn fit_sparse(
    data: &[Vec<f64>],
    m: usize,
    lambda: f64,
    outer_iterations: usize,
    ista_iterations: usize,
    lr: f64,
    seed: u64,
) -> EbmResult<(SparseCoding, Vec<f64>)> {
    let d = data
        .first()
        .ok_or(EbmError::Empty { what: "sparse data" })?
        .len();
    let mut model = SparseCoding::new(d, m, lambda, seed)?;
    let n = data.len() as f64;
    let mean_obj = |model: &SparseCoding| -> EbmResult<f64> {
        let mut total = 0.0;
        for y in data {
            total += model.objective(y, ista_iterations)?;
        }
        Ok(total / n)
    };
    let mut history = vec![mean_obj(&model)?];
    for _ in 0..outer_iterations {
        // Codes with the current dictionary.
        let codes: Vec<Vec<f64>> = data
            .iter()
            .map(|y| ista(&model.dict, model.lambda, y, ista_iterations).map(|(z, _)| z))
            .collect::<EbmResult<_>>()?;
        // Gradient of Σ‖y − Dz‖² wrt D: −2(y − Dz)zᵀ per sample.
        let mut grad = vec![0.0; d * m];
        for (y, z) in data.iter().zip(&codes) {
            for r in 0..d {
                let recon: f64 = (0..m).map(|c| model.dict.data()[r * m + c] * z[c]).sum();
                let resid = y[r] - recon;
                for c in 0..m {
                    grad[r * m + c] += -2.0 * resid * z[c] / n;
                }
            }
        }
        let mut dict = model.dict.clone();
        for (w, g) in dict.data_mut().iter_mut().zip(&grad) {
            *w -= lr * g;
        }
        model.dict = dict;
        history.push(mean_obj(&model)?);
    }
    Ok((model, history))
}

// ── uniform dispatch over the family ─────────────────────────────────

pub enum RegularizedObjective {
    Pca(PcaModel),
    Bottleneck(BottleneckAe),
    KMeans(KMeansModel),
    Sparse { model: SparseCoding, ista_iterations: usize },
}

impl RegularizedObjective {
    pub fn objective(&self, y: &[f64]) -> EbmResult<f64> {
        Ok(match self {
            RegularizedObjective::Pca(m) => m.objective(y),
            RegularizedObjective::Bottleneck(m) => m.objective(y),
            RegularizedObjective::KMeans(m) => m.objective(y),
            RegularizedObjective::Sparse {
                model,
                ista_iterations,
            } => model.objective(y, *ista_iterations)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_data(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        // Anisotropic, centered data so covariance and second moment agree.
        let scales: Vec<f64> = (0..d).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|i| scales[i] * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let mut mean = vec![0.0; d];
        for y in &data {
            for (m, v) in mean.iter_mut().zip(y) {
                *m += v / n as f64;
            }
        }
        for y in &mut data {
            for (v, m) in y.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        data
    }

    /// Top-k eigenvectors of the sample covariance by power iteration with
    /// deflation — the oracle the trained projector must match.
    fn eigen_reconstruction_error(data: &[Vec<f64>], k: usize) -> f64 {
        let d = data[0].len();
        let n = data.len() as f64;
        let mut cov = vec![0.0; d * d];
        for y in data {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += y[i] * y[j] / n;
                }
            }
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        let mut captured = 0.0;
        let mut work = cov.clone();
        for _ in 0..k {
            let mut v = vec![1.0 / (d as f64).sqrt(); d];
            let mut lam = 0.0;
            for _ in 0..5000 {
                let mut w = vec![0.0; d];
                for i in 0..d {
                    w[i] = (0..d).map(|j| work[i * d + j] * v[j]).sum();
                }
                let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                lam = norm;
                for (vi, wi) in v.iter_mut().zip(&w) {
                    *vi = wi / norm;
                }
            }
            captured += lam;
            // Deflate.
            for i in 0..d {
                for j in 0..d {
                    work[i * d + j] -= lam * v[i] * v[j];
                }
            }
            basis.push(v);
        }
        let _ = &basis;
        let _ = trace;
        trace = (0..d).map(|i| cov[i * d + i]).sum();
        trace - captured
    }

    #[test]
    fn full_rank_pca_reconstructs_exactly() {
        let m = PcaModel::new(4, 4, 3).unwrap();
        let y = vec![0.3, -1.0, 2.0, 0.7];
        assert!(m.objective(&y) < 1e-20);
    }

    #[test]
    fn pca_rank_above_dimension_rejected() {
        assert!(PcaModel::new(5, 3, 0).is_err());
    }

    #[test]
    fn trained_pca_matches_eigen_oracle() {
        let data = random_data(50, 5, 11);
        let (model, history) = fit_pca(&data, 2, 3000, 0.5, 7).unwrap();
        let oracle = eigen_reconstruction_error(&data, 2);
        let got = model.mean_objective(&data);
        assert!(
            (got - oracle).abs() < 1e-6,
            "trained {got} vs oracle {oracle}"
        );
        assert!(history.last().unwrap() <= &history[0]);
    }

    #[test]
    fn kmeans_on_a_centroid_scores_zero() {
        let m = KMeansModel {
            centroids: vec![vec![1.0, 2.0], vec![-1.0, 0.0]],
        };
        assert_eq!(m.objective(&[1.0, 2.0]), 0.0);
        assert!(m.objective(&[0.9, 2.0]) > 0.0);
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut data = Vec::new();
        let blob_a = [3.0, 0.0];
        let blob_b = [-3.0, 1.0];
        for _ in 0..60 {
            data.push(vec![
                blob_a[0] + 0.2 * rng.sample::<f64, _>(StandardNormal),
                blob_a[1] + 0.2 * rng.sample::<f64, _>(StandardNormal),
            ]);
            data.push(vec![
                blob_b[0] + 0.2 * rng.sample::<f64, _>(StandardNormal),
                blob_b[1] + 0.2 * rng.sample::<f64, _>(StandardNormal),
            ]);
        }
        let (model, history) = fit_kmeans(&data, 2, 50, 13).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let mut found_a = false;
        let mut found_b = false;
        for c in &model.centroids {
            if sq_dist(c, &blob_a) < 0.01 {
                found_a = true;
            }
            if sq_dist(c, &blob_b) < 0.01 {
                found_b = true;
            }
        }
        assert!(found_a && found_b, "centroids {:?}", model.centroids);
    }

    #[test]
    fn ista_is_monotone_and_large_lambda_zeroes_the_code() {
        let model = SparseCoding::new(6, 10, 0.1, 3).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let y: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        let (_, history) = ista(&model.dict, model.lambda, &y, 300).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }

        // λ beyond the dual norm of the data leaves z at zero.
        let big = SparseCoding {
            dict: model.dict.clone(),
            lambda: 1e4,
        };
        let (z, _) = ista(&big.dict, big.lambda, &y, 200).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let obj = big.objective(&y, 200).unwrap();
        let y_norm_sq: f64 = y.iter().map(|v| v * v).sum();
        assert!((obj - y_norm_sq).abs() < 1e-12);
    }

    #[test]
    fn sparse_dictionary_fit_decreases_objective() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        // Data generated from a planted 2-sparse code.
        let truth = SparseCoding::new(8, 12, 0.05, 17).unwrap();
        let data: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let mut y = vec![0.0; 8];
                for _ in 0..2 {
                    let atom = rng.random_range(0..12);
                    let coef: f64 = rng.random_range(0.5..1.5);
                    for r in 0..8 {
                        y[r] += coef * truth.dict.data()[r * 12 + atom];
                    }
                }
                y
            })
            .collect();
        let (_, history) = fit_sparse(&data, 12, 0.05, 30, 150, 0.2, 23).unwrap();
        assert!(
            history.last().unwrap() < &history[0],
            "{:?}",
            (history.first(), history.last())
        );
    }

    #[test]
    fn bottleneck_fit_decreases_objective() {
        let data = random_data(40, 4, 31);
        let (_, history) = fit_bottleneck(&data, 2, 500, 0.3, 33).unwrap();
        assert!(history.last().unwrap() < &history[0]);
    }
}

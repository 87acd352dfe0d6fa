//! Variational marginalization of a latent variable: a noisy latent
//! `z ~ q(z|y)` replaces the point estimate, the loss becomes the expected
//! energy, and the closed-form KL to the standard-normal prior prices the
//! information the latent carries.

use crate::error::{EbmError, EbmResult};
use crate::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Diagonal Gaussian `q(z|y)` with learned mean and log-variance.
#[derive(Clone, Debug)]
pub struct VariationalLatent {
    pub mean: Tensor,
    pub log_var: Tensor,
}

impl VariationalLatent {
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> EbmResult<Self> {
        if mean.len() != log_var.len() {
            return Err(EbmError::invalid(
                "variational latent",
                "mean and log-variance lengths differ",
            ));
        }
        Ok(VariationalLatent {
            mean: Tensor::vector(mean),
            log_var: Tensor::vector(log_var),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.numel()
    }

    /// `KL(q ‖ N(0, I)) = ½·Σ(σ² + μ² − 1 − log σ²)`, always ≥ 0 with
    /// equality only at the prior.
    pub fn kl_to_standard_normal(&self) -> f64 {
        self.mean
            .data()
            .iter()
            .zip(self.log_var.data())
            .map(|(&mu, &lv)| {
                let var = lv.exp();
                0.5 * (var + mu * mu - 1.0 - lv)
            })
            .sum()
    }

    /// Reparameterized samples `z = μ + σ ⊙ ε` with seeded noise.
    fn noise(&self, n_mc: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n_mc)
            .map(|_| (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    fn sample_from(&self, eps: &[f64]) -> Tensor {
        let data: Vec<f64> = self
            .mean
            .data()
            .iter()
            .zip(self.log_var.data())
            .zip(eps)
            .map(|((&mu, &lv), &e)| mu + (0.5 * lv).exp() * e)
            .collect();
        Tensor::vector(data)
    }
}

#[derive(Clone, Debug)]
pub struct VariationalLoss {
    pub expected_energy: f64,
    pub kl: f64,
    pub total: f64,
}

/// Monte-Carlo estimate of `⟨E(y, z)⟩_{q(z|y)}` via reparameterized
/// samples, plus the closed-form KL term.
pub fn variational_loss<F>(
    latent: &VariationalLatent,
    energy: F,
    n_mc: usize,
    seed: u64,
) -> EbmResult<VariationalLoss>
where
    F: Fn(&Tensor) -> EbmResult<f64>,
{
    if n_mc == 0 {
        return Err(EbmError::invalid("n_mc", "need at least one sample"));
    }
    let mut expected = 0.0;
    for eps in latent.noise(n_mc, seed) {
        expected += energy(&latent.sample_from(&eps))? / n_mc as f64;
    }
    let kl = latent.kl_to_standard_normal();
    Ok(VariationalLoss {
        expected_energy: expected,
        kl,
        total: expected + kl,
    })
}

/// Analytic gradient of the (fixed-noise) variational loss with respect to
/// `(μ, log σ²)`: the energy term differentiates through the
/// reparameterization `z = μ + σ⊙ε` given `∂E/∂z`, the KL term in closed
/// form. Using the same seed as [`variational_loss`] makes this the exact
/// gradient of that estimate.
pub fn variational_loss_grad<G>(
    latent: &VariationalLatent,
    energy_grad_z: G,
    n_mc: usize,
    seed: u64,
) -> EbmResult<(Vec<f64>, Vec<f64>)>
where
    G: Fn(&Tensor) -> EbmResult<Tensor>,
{
    let d = latent.dim();
    let mut g_mean = vec![0.0; d];
    let mut g_logvar = vec![0.0; d];
    for eps in latent.noise(n_mc, seed) {
        let z = latent.sample_from(&eps);
        let ge = energy_grad_z(&z)?;
        for i in 0..d {
            let sigma = (0.5 * latent.log_var.data()[i]).exp();
            // ∂z/∂μ = 1, ∂z/∂logσ² = ½σε.
            g_mean[i] += ge.data()[i] / n_mc as f64;
            g_logvar[i] += ge.data()[i] * 0.5 * sigma * eps[i] / n_mc as f64;
        }
    }
    for i in 0..d {
        let mu = latent.mean.data()[i];
        let var = latent.log_var.data()[i].exp();
        g_mean[i] += mu;
        g_logvar[i] += 0.5 * (var - 1.0);
    }
    Ok((g_mean, g_logvar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_is_zero_exactly_at_the_prior() {
        let q = VariationalLatent::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(q.kl_to_standard_normal(), 0.0);
    }

    #[test]
    fn kl_matches_closed_form_and_is_nonnegative() {
        let mu = [0.3, -1.2, 0.0];
        let lv = [0.5, -0.7, 0.1];
        let q = VariationalLatent::new(mu.to_vec(), lv.to_vec()).unwrap();
        let expect: f64 = mu
            .iter()
            .zip(&lv)
            .map(|(m, l)| 0.5 * (l.exp() + m * m - 1.0 - l))
            .sum();
        assert!((q.kl_to_standard_normal() - expect).abs() < 1e-15);
        assert!(q.kl_to_standard_normal() > 0.0);
    }

    #[test]
    fn quadratic_energy_moments_match_analytic() {
        // E(z) = ‖z‖²: expectation is ‖μ‖² + Σσ².
        let mu = vec![0.5, -0.25];
        let lv = vec![(0.3_f64).ln(), (0.8_f64).ln()];
        let q = VariationalLatent::new(mu.clone(), lv).unwrap();
        let loss = variational_loss(&q, |z| Ok(z.norm_sq()), 100_000, 7).unwrap();
        let analytic = 0.5 * 0.5 + 0.25 * 0.25 + 0.3 + 0.8;
        assert!(
            (loss.expected_energy - analytic).abs() / analytic < 0.01,
            "{} vs {analytic}",
            loss.expected_energy
        );
    }

    #[test]
    fn fixed_noise_gradient_matches_finite_differences() {
        use crate::numerics::fdiff::{finite_diff_grad, max_rel_error};
        let mu = vec![0.4, -0.6];
        let lv = vec![0.2, -0.3];
        let q = VariationalLatent::new(mu.clone(), lv.clone()).unwrap();
        let n_mc = 64;
        let seed = 5;
        let (g_mean, g_logvar) =
            variational_loss_grad(&q, |z| Ok(z.scale(2.0)), n_mc, seed).unwrap();

        let loss_at = |mu: &[f64], lv: &[f64]| -> f64 {
            let q = VariationalLatent::new(mu.to_vec(), lv.to_vec()).unwrap();
            variational_loss(&q, |z| Ok(z.norm_sq()), n_mc, seed)
                .unwrap()
                .total
        };
        let num_mu = finite_diff_grad(
            |p: &Tensor| Ok(loss_at(p.data(), &lv)),
            &Tensor::vector(mu.clone()),
            1e-6,
        )
        .unwrap();
        let num_lv = finite_diff_grad(
            |p: &Tensor| Ok(loss_at(&mu, p.data())),
            &Tensor::vector(lv.clone()),
            1e-6,
        )
        .unwrap();
        let em = max_rel_error(&Tensor::vector(g_mean), &num_mu);
        let el = max_rel_error(&Tensor::vector(g_logvar), &num_lv);
        assert!(em < 1e-4 && el < 1e-4, "mean err {em}, logvar err {el}");
    }
}

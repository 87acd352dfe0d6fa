//! Squared distance from a point to a learned ellipse, with the angle as
//! the latent variable.
//!
//! `E(y, z) = (y₁ − r₁·sin z)² + (y₂ − r₂·cos z)²` — note the axis
//! convention: r₁ pairs with sin and r₂ with cos, preserved verbatim from
//! the construction this model reproduces.

use crate::energy::{free_energy_marginal, free_energy_min, InferenceConfig, LatentDomain, LatentEnergyModel};
use crate::error::{EbmError, EbmResult};
use crate::grid::GridSpec;
use crate::Tensor;
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq)]
pub struct EllipseModel {
    r1: f64,
    r2: f64,
}

/// How the latent angle is folded into the free energy.
#[derive(Clone, Copy, Debug)]
pub enum FreeEnergyMode {
    /// `min_z E(y, z)`: squared distance to the nearest ellipse point.
    Min,
    /// `−(1/β)·log ∫ dz exp(−β E(y, z))`: contributions from the whole
    /// ellipse, dominated by the nearest points.
    Marginal { beta: f64 },
}

/// 256 grid points plus descent refinement resolve the 1-D angle to well
/// below the oracle tolerances.
pub const ANGLE_GRID: usize = 256;

impl EllipseModel {
    pub fn new(r1: f64, r2: f64) -> EbmResult<Self> {
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(EbmError::invalid(
                "ellipse semi-axes",
                format!("must be positive, got ({r1}, {r2})"),
            ));
        }
        Ok(EllipseModel { r1, r2 })
    }

    pub fn semi_axes(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    /// Point of the ellipse at angle `z`: `(r₁·sin z, r₂·cos z)`.
    pub fn at_angle(&self, z: f64) -> [f64; 2] {
        [self.r1 * z.sin(), self.r2 * z.cos()]
    }

    pub fn energy_at(&self, y: &[f64], z: f64) -> f64 {
        let d1 = y[0] - self.r1 * z.sin();
        let d2 = y[1] - self.r2 * z.cos();
        d1 * d1 + d2 * d2
    }

    /// `(∂E/∂r₁, ∂E/∂r₂)` at fixed angle.
    pub fn grad_axes(&self, y: &[f64], z: f64) -> [f64; 2] {
        let (s, c) = (z.sin(), z.cos());
        [
            -2.0 * (y[0] - self.r1 * s) * s,
            -2.0 * (y[1] - self.r2 * c) * c,
        ]
    }

    pub fn grad_angle(&self, y: &[f64], z: f64) -> f64 {
        let (s, c) = (z.sin(), z.cos());
        -2.0 * (y[0] - self.r1 * s) * self.r1 * c + 2.0 * (y[1] - self.r2 * c) * self.r2 * s
    }

    fn inference_config() -> InferenceConfig {
        InferenceConfig {
            grid: vec![ANGLE_GRID],
            gd_steps: 300,
            gd_lr: 0.02,
            gd_tol: 1e-16,
            restarts: 0,
            ..InferenceConfig::default()
        }
    }

    pub fn free_energy(&self, y: &[f64], mode: FreeEnergyMode) -> EbmResult<f64> {
        let yt = Tensor::vector(y.to_vec());
        let x = Tensor::zeros([0]);
        match mode {
            FreeEnergyMode::Min => {
                let (f, _z) = free_energy_min(self, &x, &yt, &Self::inference_config())?;
                Ok(f)
            }
            FreeEnergyMode::Marginal { beta } => {
                let quad = GridSpec::line(0.0, TAU, ANGLE_GRID + 1)?;
                free_energy_marginal(self, &x, &yt, beta, &quad)
            }
        }
    }

    /// Min-mode free energy together with the attaining angle.
    pub fn nearest(&self, y: &[f64]) -> EbmResult<(f64, f64)> {
        let yt = Tensor::vector(y.to_vec());
        let x = Tensor::zeros([0]);
        let (f, z) = free_energy_min(self, &x, &yt, &Self::inference_config())?;
        Ok((f, z.data()[0]))
    }
}

impl LatentEnergyModel for EllipseModel {
    fn energy(&self, _x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<f64> {
        Ok(self.energy_at(y.data(), z.data()[0]))
    }

    fn grad_z(&self, _x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<Tensor> {
        Ok(Tensor::vector(vec![self.grad_angle(y.data(), z.data()[0])]))
    }

    fn latent_domain(&self) -> LatentDomain {
        LatentDomain::Box {
            lo: vec![0.0],
            hi: vec![TAU],
        }
    }

    fn latent_periodic(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug)]
pub struct EllipseFitEpoch {
    pub epoch: usize,
    pub mean_energy: f64,
    pub r1: f64,
    pub r2: f64,
    /// Set when a semi-axis had to be clamped away from zero this epoch.
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct EllipseFit {
    pub model: EllipseModel,
    pub history: Vec<EllipseFitEpoch>,
}

/// Gradient descent on the mean min-mode free energy of a batch.
///
/// The attaining angle also minimizes the energy in `z`, so the gradient
/// with respect to the semi-axes at fixed `ẑ` is the gradient of the free
/// energy itself (envelope argument).
pub fn fit(
    data: &[[f64; 2]],
    init: (f64, f64),
    steps: usize,
    lr: f64,
) -> EbmResult<EllipseFit> {
    if data.len() < 8 {
        return Err(EbmError::invalid(
            "ellipse fit data",
            format!("need at least 8 points, got {}", data.len()),
        ));
    }
    let mut model = EllipseModel::new(init.0, init.1)?;
    let mut history = Vec::with_capacity(steps + 1);

    let mean_energy_and_grad = |m: &EllipseModel| -> EbmResult<(f64, [f64; 2])> {
        let mut total = 0.0;
        let mut grad = [0.0, 0.0];
        for y in data {
            let (e, z) = m.nearest(y)?;
            total += e;
            let g = m.grad_axes(y, z);
            grad[0] += g[0];
            grad[1] += g[1];
        }
        let n = data.len() as f64;
        Ok((total / n, [grad[0] / n, grad[1] / n]))
    };

    let (mut energy, mut grad) = mean_energy_and_grad(&model)?;
    history.push(EllipseFitEpoch {
        epoch: 0,
        mean_energy: energy,
        r1: model.r1,
        r2: model.r2,
        clamped: false,
    });

    for epoch in 1..=steps {
        let mut clamped = false;
        let mut r1 = model.r1 - lr * grad[0];
        let mut r2 = model.r2 - lr * grad[1];
        if r1 < 1e-3 {
            r1 = 1e-3;
            clamped = true;
        }
        if r2 < 1e-3 {
            r2 = 1e-3;
            clamped = true;
        }
        model = EllipseModel::new(r1, r2)?;
        let (e, g) = mean_energy_and_grad(&model)?;
        energy = e;
        grad = g;
        history.push(EllipseFitEpoch {
            epoch,
            mean_energy: energy,
            r1,
            r2,
            clamped,
        });
    }
    Ok(EllipseFit { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_ellipse_points_have_zero_energy_at_their_angle() {
        let m = EllipseModel::new(2.0, 1.0).unwrap();
        for z in [0.0, 0.7, 2.0, 4.9] {
            let y = m.at_angle(z);
            assert!(m.energy_at(&y, z).abs() < 1e-15);
        }
    }

    #[test]
    fn direct_substitution_cases() {
        let m = EllipseModel::new(2.0, 1.0).unwrap();
        assert!((m.energy_at(&[0.0, 0.0], 0.0) - 1.0).abs() < 1e-15);
        let e = m.energy_at(&[3.0, 0.0], std::f64::consts::FRAC_PI_2);
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_free_energy_is_one_for_two_one() {
        // Nearest points of the (2, 1) ellipse to the origin are (0, ±1).
        let m = EllipseModel::new(2.0, 1.0).unwrap();
        let f = m.free_energy(&[0.0, 0.0], FreeEnergyMode::Min).unwrap();
        assert!((f - 1.0).abs() < 1e-8, "{f}");
    }

    #[test]
    fn on_ellipse_free_energy_is_zero() {
        let m = EllipseModel::new(2.0, 1.0).unwrap();
        for z in [0.3, 1.9, 3.3, 5.6] {
            let y = m.at_angle(z);
            let f = m.free_energy(&y, FreeEnergyMode::Min).unwrap();
            assert!(f < 1e-8, "angle {z}: {f}");
        }
    }

    #[test]
    fn high_beta_marginal_approaches_min_mode() {
        let m = EllipseModel::new(2.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            let y = [
                -3.0 + 6.0 * ((i * 7 + 3) % 20) as f64 / 19.0,
                -3.0 + 6.0 * ((i * 13 + 5) % 20) as f64 / 19.0,
            ];
            let fmin = m.free_energy(&y, FreeEnergyMode::Min).unwrap();
            let fmar = m
                .free_energy(&y, FreeEnergyMode::Marginal { beta: 256.0 })
                .unwrap();
            worst = worst.max((fmar - fmin).abs());
        }
        assert!(worst < 0.02, "max |marginal − min| = {worst}");
    }

    #[test]
    fn fit_recovers_known_generator() {
        let mut data = Vec::new();
        let truth = EllipseModel::new(2.0, 1.0).unwrap();
        for i in 0..64 {
            let z = TAU * i as f64 / 64.0;
            data.push(truth.at_angle(z));
        }
        let fit = fit(&data, (1.0, 1.0), 200, 0.3).unwrap();
        let (r1, r2) = fit.model.semi_axes();
        assert!((r1 - 2.0).abs() < 0.05, "r1 = {r1}");
        assert!((r2 - 1.0).abs() < 0.05, "r2 = {r2}");
        let first = fit.history.first().unwrap().mean_energy;
        let last = fit.history.last().unwrap().mean_energy;
        assert!(last <= first);
    }

    #[test]
    fn fit_at_truth_barely_moves() {
        let truth = EllipseModel::new(2.0, 1.0).unwrap();
        let data: Vec<[f64; 2]> = (0..32)
            .map(|i| truth.at_angle(TAU * i as f64 / 32.0))
            .collect();
        let fit = fit(&data, (2.0, 1.0), 5, 1e-2).unwrap();
        let (r1, r2) = fit.model.semi_axes();
        assert!((r1 - 2.0).abs() < 1e-6);
        assert!((r2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn circle_data_from_eccentric_init() {
        let data: Vec<[f64; 2]> = (0..64)
            .map(|i| {
                let z = TAU * i as f64 / 64.0;
                [z.sin(), z.cos()]
            })
            .collect();
        let fit = fit(&data, (3.0, 0.3), 400, 0.3).unwrap();
        let (r1, r2) = fit.model.semi_axes();
        assert!((r1 - 1.0).abs() < 0.05, "r1 = {r1}");
        assert!((r2 - 1.0).abs() < 0.05, "r2 = {r2}");
    }
}

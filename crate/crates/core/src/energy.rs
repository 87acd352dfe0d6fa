//! EBM abstractions and generic inference.
//!
//! An energy model scores configurations; inference minimizes over the
//! output, and latent-variable models additionally minimize or marginalize
//! over their latent. Minimization is a hybrid: coarse grid scan, descent
//! refinement of the best node, and deterministic multistart descent, which
//! together handle the multimodal landscapes these models are built for.

use crate::error::{EbmError, EbmResult};
use crate::grid::GridSpec;
use crate::numerics::logsumexp::{softmax_from_logits, weighted_logsumexp};
use crate::Tensor;

/// Scalar energy `F(x, y)` with analytic gradients.
pub trait EnergyModel {
    fn energy(&self, x: &Tensor, y: &Tensor) -> EbmResult<f64>;
    /// `∂F/∂y`, same shape as `y`.
    fn grad_y(&self, x: &Tensor, y: &Tensor) -> EbmResult<Tensor>;
}

/// An energy model whose parameters are exposed as one flat vector, for
/// generic trainers and finite-difference certification.
pub trait TrainableEnergyModel: EnergyModel {
    fn param_count(&self) -> usize;
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, params: &[f64]);
    /// `∂F(x,y)/∂θ` in flat-parameter order.
    fn grad_params(&self, x: &Tensor, y: &Tensor) -> EbmResult<Vec<f64>>;
}

/// Latent domain over which a latent-variable model is minimized or
/// marginalized.
#[derive(Clone, Debug)]
pub enum LatentDomain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Discrete(Vec<Tensor>),
}

impl LatentDomain {
    fn validate(&self) -> EbmResult<()> {
        match self {
            LatentDomain::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(EbmError::invalid("latent domain", "mismatched box bounds"));
                }
                if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                    return Err(EbmError::invalid(
                        "latent domain",
                        "unbounded latent domain without grid spec",
                    ));
                }
                Ok(())
            }
            LatentDomain::Discrete(points) => {
                if points.is_empty() {
                    Err(EbmError::Empty {
                        what: "discrete latent domain",
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Scalar energy `E(x, y, z)` with a latent variable `z`.
pub trait LatentEnergyModel {
    fn energy(&self, x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<f64>;
    /// `∂E/∂z`, same shape as `z`. Only called for box domains.
    fn grad_z(&self, x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<Tensor>;
    fn latent_domain(&self) -> LatentDomain;
    /// Periodic box domains are descended without clamping and wrapped back
    /// into the box afterwards (e.g. angles).
    fn latent_periodic(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InferenceConfig {
    /// Inverse temperature for anything Gibbs-shaped.
    pub beta: f64,
    /// Grid resolution per dimension; a single entry is broadcast.
    pub grid: Vec<usize>,
    pub gd_steps: usize,
    pub gd_lr: f64,
    pub gd_tol: f64,
    /// Deterministic multistart descents in addition to grid refinement.
    pub restarts: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            beta: 1.0,
            grid: vec![33],
            gd_steps: 200,
            gd_lr: 0.05,
            gd_tol: 1e-13,
            restarts: 4,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> EbmResult<()> {
        if !(self.beta > 0.0) {
            return Err(EbmError::invalid("inference config", "beta must be > 0"));
        }
        if self.grid.is_empty() || self.grid.iter().any(|&r| r < 2) {
            return Err(EbmError::invalid(
                "inference config",
                "grid resolution must be at least 2 per dimension",
            ));
        }
        if !(self.gd_tol > 0.0) {
            return Err(EbmError::invalid("inference config", "gd_tol must be > 0"));
        }
        Ok(())
    }

    fn resolution(&self, dims: usize) -> EbmResult<Vec<usize>> {
        if self.grid.len() == dims {
            Ok(self.grid.clone())
        } else if self.grid.len() == 1 {
            Ok(vec![self.grid[0]; dims])
        } else {
            Err(EbmError::invalid(
                "inference config",
                format!(
                    "grid has {} entries for {} dimensions",
                    self.grid.len(),
                    dims
                ),
            ))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub energy: f64,
}

/// Monotone gradient descent with accept/reject step control.
///
/// A proposal that raises the energy is rejected and the step size halved;
/// `cfg.gd_steps` consecutive rejections are reported as divergence with
/// the last iterate, per the inference contract.
fn descend(
    f: &dyn Fn(&[f64]) -> EbmResult<f64>,
    grad: &dyn Fn(&[f64]) -> EbmResult<Vec<f64>>,
    start: &[f64],
    clamp_box: Option<(&[f64], &[f64])>,
    cfg: &InferenceConfig,
) -> EbmResult<Minimum> {
    let mut x = start.to_vec();
    let mut fx = f(&x)?;
    let mut lr = cfg.gd_lr;
    let mut rejects = 0usize;
    for _ in 0..cfg.gd_steps {
        let g = grad(&x)?;
        let mut proposal: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - lr * gi).collect();
        if let Some((lo, hi)) = clamp_box {
            for d in 0..proposal.len() {
                proposal[d] = proposal[d].clamp(lo[d], hi[d]);
            }
        }
        let fp = f(&proposal)?;
        if fp <= fx {
            let gain = fx - fp;
            x = proposal;
            fx = fp;
            lr *= 1.5;
            rejects = 0;
            if gain < cfg.gd_tol {
                break;
            }
        } else {
            lr *= 0.5;
            rejects += 1;
            if rejects >= cfg.gd_steps {
                return Err(EbmError::DivergentDescent {
                    increases: rejects,
                    last: proposal,
                    energy: fp,
                });
            }
        }
    }
    Ok(Minimum {
        point: x,
        energy: fx,
    })
}

/// Deterministic low-discrepancy start points for multistart descent
/// (additive lattice from irrational generators, so runs are reproducible
/// without an RNG).
fn multistart_point(lo: &[f64], hi: &[f64], index: usize) -> Vec<f64> {
    const ALPHAS: [f64; 8] = [
        0.618_033_988_749_894_9,
        0.754_877_666_246_692_9,
        0.819_172_513_396_164_4,
        0.856_674_011_582_392_4,
        0.881_263_830_740_297_5,
        0.898_653_712_628_702_3,
        0.911_622_719_970_475_3,
        0.921_668_954_606_118_2,
    ];
    lo.iter()
        .zip(hi)
        .enumerate()
        .map(|(d, (&l, &h))| {
            let a = ALPHAS[d % ALPHAS.len()];
            let frac = ((index + 1) as f64 * a).fract();
            l + (h - l) * frac
        })
        .collect()
}

fn minimize_over_box(
    f: &dyn Fn(&[f64]) -> EbmResult<f64>,
    grad: &dyn Fn(&[f64]) -> EbmResult<Vec<f64>>,
    lo: &[f64],
    hi: &[f64],
    cfg: &InferenceConfig,
    clamp: bool,
) -> EbmResult<(Minimum, f64)> {
    cfg.validate()?;
    let grid = GridSpec::new(lo.to_vec(), hi.to_vec(), cfg.resolution(lo.len())?)?;

    // Strict `<` keeps the lexicographically smallest grid index on ties.
    let mut best_node = 0usize;
    let mut best_node_energy = f64::INFINITY;
    for i in 0..grid.len() {
        let e = f(&grid.point(i))?;
        if e < best_node_energy {
            best_node_energy = e;
            best_node = i;
        }
    }

    let clamp_box = clamp.then_some((lo, hi));
    let mut best = descend(f, grad, &grid.point(best_node), clamp_box, cfg)?;
    for r in 0..cfg.restarts {
        let start = multistart_point(lo, hi, r);
        let candidate = descend(f, grad, &start, clamp_box, cfg)?;
        if candidate.energy < best.energy {
            best = candidate;
        }
    }
    Ok((best, best_node_energy))
}

/// `argmin_y F(x, y)` over a bounded box.
///
/// The returned energy never exceeds the best grid node (the grid minimum
/// is one of the descent starts and descent is monotone); this dominance is
/// asserted.
pub fn infer_y<M: EnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y_lo: &[f64],
    y_hi: &[f64],
    cfg: &InferenceConfig,
) -> EbmResult<Minimum> {
    let f = |p: &[f64]| model.energy(x, &Tensor::vector(p.to_vec()));
    let grad = |p: &[f64]| {
        model
            .grad_y(x, &Tensor::vector(p.to_vec()))
            .map(Tensor::into_data)
    };
    let (best, grid_min) = minimize_over_box(&f, &grad, y_lo, y_hi, cfg, true)?;
    assert!(
        best.energy <= grid_min + 1e-12,
        "inference lost grid dominance: {} > {}",
        best.energy,
        grid_min
    );
    Ok(best)
}

/// Min-mode free energy: `F(x,y) = min_z E(x,y,z)` with the attaining
/// latent returned alongside.
pub fn free_energy_min<M: LatentEnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    cfg: &InferenceConfig,
) -> EbmResult<(f64, Tensor)> {
    let domain = model.latent_domain();
    domain.validate()?;
    match domain {
        LatentDomain::Discrete(points) => {
            let mut best = f64::INFINITY;
            let mut best_z = None;
            for z in &points {
                let e = model.energy(x, y, z)?;
                if e < best {
                    best = e;
                    best_z = Some(z.clone());
                }
            }
            Ok((best, best_z.expect("non-empty discrete domain")))
        }
        LatentDomain::Box { lo, hi } => {
            let f = |p: &[f64]| model.energy(x, y, &Tensor::vector(p.to_vec()));
            let grad = |p: &[f64]| {
                model
                    .grad_z(x, y, &Tensor::vector(p.to_vec()))
                    .map(Tensor::into_data)
            };
            let periodic = model.latent_periodic();
            let (mut best, grid_min) = minimize_over_box(&f, &grad, &lo, &hi, cfg, !periodic)?;
            assert!(best.energy <= grid_min + 1e-12);
            if periodic {
                for d in 0..best.point.len() {
                    let span = hi[d] - lo[d];
                    best.point[d] = lo[d] + (best.point[d] - lo[d]).rem_euclid(span);
                }
            }
            Ok((best.energy, Tensor::vector(best.point)))
        }
    }
}

/// Marginal free energy over explicit latent points and quadrature weights:
/// `−(1/β)·log Σᵢ wᵢ·exp(−β·E(x,y,zᵢ))`, evaluated in log space.
pub fn free_energy_marginal_points<M: LatentEnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    beta: f64,
    z_points: &[Tensor],
    z_weights: Option<&[f64]>,
) -> EbmResult<f64> {
    if !(beta > 0.0) {
        return Err(EbmError::invalid("beta", "must be > 0"));
    }
    if z_points.is_empty() {
        return Err(EbmError::Empty { what: "z grid" });
    }
    if let Some(w) = z_weights {
        if w.len() != z_points.len() {
            return Err(EbmError::invalid("z weights", "length mismatch with z grid"));
        }
        if w.iter().all(|&wi| wi == 0.0) {
            return Err(EbmError::invalid(
                "z weights",
                "degenerate quadrature: all weights zero",
            ));
        }
    }
    let mut terms = Vec::with_capacity(z_points.len());
    for z in z_points {
        terms.push(-beta * model.energy(x, y, z)?);
    }
    let log_sum = match z_weights {
        Some(w) => weighted_logsumexp(&terms, w),
        None => crate::numerics::logsumexp::logsumexp(&terms),
    };
    Ok(-log_sum / beta)
}

/// Marginal free energy with trapezoidal quadrature over a grid of the
/// model's box latent domain.
pub fn free_energy_marginal<M: LatentEnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y: &Tensor,
    beta: f64,
    quad: &GridSpec,
) -> EbmResult<f64> {
    if quad.res.iter().any(|&r| r < 16) {
        return Err(EbmError::invalid(
            "quadrature",
            "resolution must be at least 16 per dimension",
        ));
    }
    let points: Vec<Tensor> = quad.tensors().collect();
    let weights: Vec<f64> = (0..quad.len()).map(|i| quad.weight(i)).collect();
    free_energy_marginal_points(model, x, y, beta, &points, Some(&weights))
}

/// Gibbs distribution over an explicit set of outputs:
/// `pᵢ = exp(−βF(x,yᵢ)) / Σⱼ exp(−βF(x,yⱼ))`, computed in log space.
pub fn gibbs_distribution<M: EnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y_grid: &[Tensor],
    beta: f64,
) -> EbmResult<Vec<f64>> {
    if y_grid.is_empty() {
        return Err(EbmError::Empty { what: "y grid" });
    }
    if !(beta > 0.0) {
        return Err(EbmError::invalid("beta", "must be > 0"));
    }
    let mut logits = Vec::with_capacity(y_grid.len());
    for y in y_grid {
        logits.push(-beta * model.energy(x, y)?);
    }
    Ok(softmax_from_logits(&logits))
}

#[derive(Clone, Debug)]
pub struct JointMarginal {
    /// `joint[i][j] = P(yᵢ, zⱼ | x)`, z-quadrature-weighted.
    pub joint: Vec<Vec<f64>>,
    /// `marginal[i] = P(yᵢ | x) = Σⱼ joint[i][j]`.
    pub marginal: Vec<f64>,
}

/// Joint and marginal distributions over explicit y/z grids.
///
/// The marginal of the joint coincides (to rounding) with the Gibbs
/// distribution built from marginal free energies computed with the same
/// latent weights — the ensemble identity behind free energies.
pub fn conditional_joint_marginal<M: LatentEnergyModel + ?Sized>(
    model: &M,
    x: &Tensor,
    y_grid: &[Tensor],
    z_grid: &[Tensor],
    z_weights: Option<&[f64]>,
    beta: f64,
) -> EbmResult<JointMarginal> {
    if y_grid.is_empty() || z_grid.is_empty() {
        return Err(EbmError::Empty { what: "joint grid" });
    }
    if !(beta > 0.0) {
        return Err(EbmError::invalid("beta", "must be > 0"));
    }
    let ny = y_grid.len();
    let nz = z_grid.len();
    let mut logits = Vec::with_capacity(ny * nz);
    for y in y_grid {
        for (j, z) in z_grid.iter().enumerate() {
            let lw = match z_weights {
                Some(w) => {
                    if w[j] <= 0.0 {
                        return Err(EbmError::invalid("z weights", "weights must be positive"));
                    }
                    w[j].ln()
                }
                None => 0.0,
            };
            logits.push(-beta * model.energy(x, y, z)? + lw);
        }
    }
    let flat = softmax_from_logits(&logits);
    let joint: Vec<Vec<f64>> = (0..ny)
        .map(|i| flat[i * nz..(i + 1) * nz].to_vec())
        .collect();
    let marginal = joint.iter().map(|row| row.iter().sum()).collect();
    Ok(JointMarginal { joint, marginal })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// F(x, y) = (y − x²)², unique minimum at y = x².
    struct Parabola;

    impl EnergyModel for Parabola {
        fn energy(&self, x: &Tensor, y: &Tensor) -> EbmResult<f64> {
            let d = y.data()[0] - x.data()[0] * x.data()[0];
            Ok(d * d)
        }
        fn grad_y(&self, x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
            let d = y.data()[0] - x.data()[0] * x.data()[0];
            Ok(Tensor::vector(vec![2.0 * d]))
        }
    }

    /// F(y) = (y² − 1)², symmetric double well; x is ignored.
    struct DoubleWell;

    impl EnergyModel for DoubleWell {
        fn energy(&self, _x: &Tensor, y: &Tensor) -> EbmResult<f64> {
            let v = y.data()[0];
            let d = v * v - 1.0;
            Ok(d * d)
        }
        fn grad_y(&self, _x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
            let v = y.data()[0];
            Ok(Tensor::vector(vec![4.0 * v * (v * v - 1.0)]))
        }
    }

    struct ConstantLatent {
        c: f64,
        lo: f64,
        hi: f64,
    }

    impl LatentEnergyModel for ConstantLatent {
        fn energy(&self, _x: &Tensor, _y: &Tensor, _z: &Tensor) -> EbmResult<f64> {
            Ok(self.c)
        }
        fn grad_z(&self, _x: &Tensor, _y: &Tensor, z: &Tensor) -> EbmResult<Tensor> {
            Ok(Tensor::zeros(z.shape().to_vec()))
        }
        fn latent_domain(&self) -> LatentDomain {
            LatentDomain::Box {
                lo: vec![self.lo],
                hi: vec![self.hi],
            }
        }
    }

    /// E(y, z) = (y − z)² with z in a box.
    struct PullToY;

    impl LatentEnergyModel for PullToY {
        fn energy(&self, _x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<f64> {
            let d = y.data()[0] - z.data()[0];
            Ok(d * d)
        }
        fn grad_z(&self, _x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<Tensor> {
            Ok(Tensor::vector(vec![-2.0 * (y.data()[0] - z.data()[0])]))
        }
        fn latent_domain(&self) -> LatentDomain {
            LatentDomain::Box {
                lo: vec![-5.0],
                hi: vec![5.0],
            }
        }
    }

    fn x0() -> Tensor {
        Tensor::vector(vec![2.0])
    }

    #[test]
    fn parabola_inference_finds_x_squared() {
        let cfg = InferenceConfig::default();
        let min = infer_y(&Parabola, &x0(), &[-6.0], &[6.0], &cfg).unwrap();
        assert!((min.point[0] - 4.0).abs() < 1e-5, "{:?}", min);
        assert!(min.energy < 1e-9);
    }

    #[test]
    fn double_well_multistart_lands_in_a_well() {
        let cfg = InferenceConfig::default();
        let min = infer_y(&DoubleWell, &x0(), &[-2.0], &[2.0], &cfg).unwrap();
        assert!(
            (min.point[0].abs() - 1.0).abs() < 1e-5,
            "minimum at {:?}",
            min.point
        );
        assert!(min.energy < 1e-9);
    }

    #[test]
    fn pull_to_y_free_energy_min() {
        let cfg = InferenceConfig::default();
        let y = Tensor::vector(vec![3.0]);
        let (f, z) = free_energy_min(&PullToY, &x0(), &y, &cfg).unwrap();
        assert!(f.abs() < 1e-10);
        assert!((z.data()[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn constant_latent_energy_is_flat() {
        let cfg = InferenceConfig::default();
        let m = ConstantLatent {
            c: 2.5,
            lo: -1.0,
            hi: 1.0,
        };
        for yv in [-4.0, 0.0, 7.5] {
            let y = Tensor::vector(vec![yv]);
            let (f, _z) = free_energy_min(&m, &x0(), &y, &cfg).unwrap();
            assert_eq!(f, 2.5);
        }
    }

    #[test]
    fn constant_marginal_matches_analytic_volume_term() {
        // F = c − (1/β)·log(volume), at any resolution.
        let m = ConstantLatent {
            c: 1.25,
            lo: 0.0,
            hi: 3.0,
        };
        let y = Tensor::vector(vec![0.0]);
        for (beta, res) in [(1.0, 16), (4.0, 33), (0.5, 101)] {
            let quad = GridSpec::line(0.0, 3.0, res).unwrap();
            let f = free_energy_marginal(&m, &x0(), &y, beta, &quad).unwrap();
            let expect = 1.25 - (3.0_f64).ln() / beta;
            assert!((f - expect).abs() < 1e-12, "beta {beta} res {res}");
        }
    }

    #[test]
    fn gibbs_equal_energies_split_evenly() {
        let ys = vec![Tensor::vector(vec![1.0]), Tensor::vector(vec![-1.0])];
        let p = gibbs_distribution(&DoubleWell, &x0(), &ys, 2.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gibbs_ln2_gap_gives_two_thirds() {
        // Energies [0, ln2/β] → probabilities [2/3, 1/3].
        struct Table {
            beta: f64,
        }
        impl EnergyModel for Table {
            fn energy(&self, _x: &Tensor, y: &Tensor) -> EbmResult<f64> {
                Ok(if y.data()[0] < 0.5 {
                    0.0
                } else {
                    (2.0_f64).ln() / self.beta
                })
            }
            fn grad_y(&self, _x: &Tensor, y: &Tensor) -> EbmResult<Tensor> {
                Ok(Tensor::zeros(y.shape().to_vec()))
            }
        }
        let ys = vec![Tensor::vector(vec![0.0]), Tensor::vector(vec![1.0])];
        let p = gibbs_distribution(&Table { beta: 3.0 }, &x0(), &ys, 3.0).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn separable_joint_marginal_ignores_latent_factor() {
        // E(y, z) = f(y) + g(z) → P(y|x) does not depend on g.
        struct Separable {
            scale: f64,
        }
        impl LatentEnergyModel for Separable {
            fn energy(&self, _x: &Tensor, y: &Tensor, z: &Tensor) -> EbmResult<f64> {
                let f = y.data()[0] * y.data()[0];
                let g = self.scale * z.data()[0].cos();
                Ok(f + g)
            }
            fn grad_z(&self, _x: &Tensor, _y: &Tensor, z: &Tensor) -> EbmResult<Tensor> {
                Ok(Tensor::vector(vec![-self.scale * z.data()[0].sin()]))
            }
            fn latent_domain(&self) -> LatentDomain {
                LatentDomain::Box {
                    lo: vec![0.0],
                    hi: vec![1.0],
                }
            }
        }
        let ys: Vec<Tensor> = [-1.0, 0.0, 2.0]
            .iter()
            .map(|&v| Tensor::vector(vec![v]))
            .collect();
        let zs: Vec<Tensor> = (0..8)
            .map(|i| Tensor::vector(vec![i as f64 * 0.1]))
            .collect();
        let a = conditional_joint_marginal(&Separable { scale: 0.0 }, &x0(), &ys, &zs, None, 1.5)
            .unwrap();
        let b = conditional_joint_marginal(&Separable { scale: 3.0 }, &x0(), &ys, &zs, None, 1.5)
            .unwrap();
        for i in 0..ys.len() {
            assert!((a.marginal[i] - b.marginal[i]).abs() < 1e-12);
        }
        let total: f64 = a.marginal.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_point_z_grid_marginal_is_conditional_slice() {
        let zs = vec![Tensor::vector(vec![0.25])];
        let ys: Vec<Tensor> = [0.0, 1.0, 2.0]
            .iter()
            .map(|&v| Tensor::vector(vec![v]))
            .collect();
        let jm = conditional_joint_marginal(&PullToY, &x0(), &ys, &zs, None, 1.0).unwrap();
        for i in 0..ys.len() {
            assert!((jm.marginal[i] - jm.joint[i][0]).abs() < 1e-15);
        }
    }

    #[test]
    fn divergent_descent_is_reported_with_last_iterate() {
        // A "gradient" pointing away from the minimum forces every proposal
        // to be rejected.
        let f = |p: &[f64]| Ok(p[0] * p[0]);
        let grad = |p: &[f64]| Ok(vec![-4.0 * p[0] - 1.0]);
        let cfg = InferenceConfig {
            gd_steps: 5,
            ..InferenceConfig::default()
        };
        let err = descend(&f, &grad, &[1.0], None, &cfg).unwrap_err();
        match err {
            EbmError::DivergentDescent {
                increases, last, ..
            } => {
                assert_eq!(increases, 5);
                assert!(!last.is_empty());
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}

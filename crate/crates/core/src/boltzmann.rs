//! Boltzmann machines over {0,1} units, with the restricted variant.
//!
//! The energy is `E(y,z) = −Σᵢⱼ yᵢw^{yy}ᵢⱼyⱼ − Σᵢⱼ zᵢw^{zz}ᵢⱼzⱼ −
//! Σᵢⱼ yᵢw^{yz}ᵢⱼzⱼ` with symmetric zero-diagonal intra-layer blocks
//! (stored as strict upper triangles) and no bias terms. Small instances
//! support exact free energies, partition functions, and likelihood
//! gradients by full enumeration, which serve as oracles for the sampled
//! estimates.

use crate::error::{EbmError, EbmResult};
use crate::numerics::logsumexp::logsumexp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// {0,1} unit vector.
pub type BitState = Vec<u8>;

const EXACT_LIMIT: usize = 20;

fn check_bits(v: &[u8], n: usize, what: &'static str) -> EbmResult<()> {
    if v.len() != n {
        return Err(EbmError::invalid(
            what,
            format!("length {} does not match unit count {n}", v.len()),
        ));
    }
    for (i, &b) in v.iter().enumerate() {
        if b > 1 {
            return Err(EbmError::NonBinaryState {
                expected: "{0,1}",
                found: b as f64,
                index: i,
            });
        }
    }
    Ok(())
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannMachine {
    n_v: usize,
    n_h: usize,
    /// Strict upper triangles.
    wyy: Vec<f64>,
    wzz: Vec<f64>,
    /// Row-major `n_v × n_h`.
    wyz: Vec<f64>,
    restricted: bool,
}

fn tri_len(n: usize) -> usize {
    n * (n - 1) / 2
}

fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl BoltzmannMachine {
    pub fn new(n_v: usize, n_h: usize, restricted: bool) -> Self {
        BoltzmannMachine {
            n_v,
            n_h,
            wyy: vec![0.0; tri_len(n_v)],
            wzz: vec![0.0; tri_len(n_h)],
            wyz: vec![0.0; n_v * n_h],
            restricted,
        }
    }

    pub fn visible_units(&self) -> usize {
        self.n_v
    }

    pub fn hidden_units(&self) -> usize {
        self.n_h
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn wyy(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else if i < j {
            self.wyy[tri_index(self.n_v, i, j)]
        } else {
            self.wyy[tri_index(self.n_v, j, i)]
        }
    }

    pub fn wzz(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else if i < j {
            self.wzz[tri_index(self.n_h, i, j)]
        } else {
            self.wzz[tri_index(self.n_h, j, i)]
        }
    }

    pub fn wyz(&self, i: usize, s: usize) -> f64 {
        self.wyz[i * self.n_h + s]
    }

    pub fn set_wyy(&mut self, i: usize, j: usize, w: f64) {
        assert!(!self.restricted, "restricted machines have wyy = 0");
        assert!(i != j);
        let idx = if i < j {
            tri_index(self.n_v, i, j)
        } else {
            tri_index(self.n_v, j, i)
        };
        self.wyy[idx] = w;
    }

    pub fn set_wzz(&mut self, i: usize, j: usize, w: f64) {
        assert!(!self.restricted, "restricted machines have wzz = 0");
        assert!(i != j);
        let idx = if i < j {
            tri_index(self.n_h, i, j)
        } else {
            tri_index(self.n_h, j, i)
        };
        self.wzz[idx] = w;
    }

    pub fn set_wyz(&mut self, i: usize, s: usize, w: f64) {
        self.wyz[i * self.n_h + s] = w;
    }

    /// Flat parameters `[wyy upper, wzz upper, wyz row-major]`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.wyy.clone();
        p.extend_from_slice(&self.wzz);
        p.extend_from_slice(&self.wyz);
        p
    }

    pub fn set_flat_params(&mut self, p: &[f64]) {
        let (a, b) = (self.wyy.len(), self.wzz.len());
        assert_eq!(p.len(), a + b + self.wyz.len());
        self.wyy.copy_from_slice(&p[..a]);
        self.wzz.copy_from_slice(&p[a..a + b]);
        self.wyz.copy_from_slice(&p[a + b..]);
        if self.restricted {
            assert!(
                self.wyy.iter().chain(&self.wzz).all(|&w| w == 0.0),
                "restricted machine given intra-layer weights"
            );
        }
    }

    pub fn energy(&self, y: &BitState, z: &BitState) -> EbmResult<f64> {
        check_bits(y, self.n_v, "visible state")?;
        check_bits(z, self.n_h, "hidden state")?;
        let mut e = 0.0;
        for i in 0..self.n_v {
            if y[i] == 0 {
                continue;
            }
            for j in (i + 1)..self.n_v {
                // Full double sum counts each pair twice.
                e -= 2.0 * self.wyy(i, j) * (y[j] as f64);
            }
            for s in 0..self.n_h {
                e -= self.wyz(i, s) * (z[s] as f64);
            }
        }
        for i in 0..self.n_h {
            if z[i] == 0 {
                continue;
            }
            for j in (i + 1)..self.n_h {
                e -= 2.0 * self.wzz(i, j) * (z[j] as f64);
            }
        }
        Ok(e)
    }

    fn all_states(n: usize) -> impl Iterator<Item = BitState> {
        (0u32..(1u32 << n)).map(move |code| (0..n).map(|i| (code >> i & 1) as u8).collect())
    }

    /// Exact `F(y) = −log Σ_z exp(−E(y, z))`.
    pub fn free_energy(&self, y: &BitState) -> EbmResult<f64> {
        if self.n_h > EXACT_LIMIT {
            return Err(EbmError::SizeLimit {
                what: "hidden units for exact free energy",
                got: self.n_h,
                limit: EXACT_LIMIT,
            });
        }
        let mut terms = Vec::with_capacity(1 << self.n_h);
        for z in Self::all_states(self.n_h) {
            terms.push(-self.energy(y, &z)?);
        }
        Ok(-logsumexp(&terms))
    }

    /// Exact log-partition `log Σ_{y,z} exp(−E(y,z))`.
    pub fn log_partition(&self) -> EbmResult<f64> {
        if self.n_v + self.n_h > EXACT_LIMIT {
            return Err(EbmError::SizeLimit {
                what: "total units for exact partition",
                got: self.n_v + self.n_h,
                limit: EXACT_LIMIT,
            });
        }
        let mut terms = Vec::with_capacity(1 << (self.n_v + self.n_h));
        for y in Self::all_states(self.n_v) {
            for z in Self::all_states(self.n_h) {
                terms.push(-self.energy(&y, &z)?);
            }
        }
        Ok(logsumexp(&terms))
    }

    /// Exact model probability of a visible vector.
    pub fn visible_probability(&self, y: &BitState) -> EbmResult<f64> {
        Ok((-self.free_energy(y)? - self.log_partition()?).exp())
    }

    /// Exact mean negative log-likelihood of a dataset.
    pub fn exact_nll(&self, data: &[BitState]) -> EbmResult<f64> {
        let log_z = self.log_partition()?;
        let mut total = 0.0;
        for y in data {
            total += self.free_energy(y)? + log_z;
        }
        Ok(total / data.len() as f64)
    }

    /// Field driving hidden unit `s`: `Σᵢ yᵢ w^{yz}ᵢₛ + 2 Σⱼ w^{zz}ₛⱼ zⱼ`.
    /// The factor 2 comes from the double-counted intra-layer sum.
    pub fn hidden_field(&self, y: &BitState, z: &BitState, s: usize) -> f64 {
        let mut f = 0.0;
        for i in 0..self.n_v {
            f += (y[i] as f64) * self.wyz(i, s);
        }
        if !self.restricted {
            for j in 0..self.n_h {
                if j != s {
                    f += 2.0 * self.wzz(s, j) * (z[j] as f64);
                }
            }
        }
        f
    }

    pub fn visible_field(&self, y: &BitState, z: &BitState, r: usize) -> f64 {
        let mut f = 0.0;
        for s in 0..self.n_h {
            f += self.wyz(r, s) * (z[s] as f64);
        }
        if !self.restricted {
            for j in 0..self.n_v {
                if j != r {
                    f += 2.0 * self.wyy(r, j) * (y[j] as f64);
                }
            }
        }
        f
    }

    /// One asynchronous sweep over hidden units, each sampled from its
    /// Fermi-Dirac conditional `P(zₛ = 1 | y, z) = logistic(field)`.
    /// For a restricted machine the field has no z dependence, so one sweep
    /// is an exact block sample from `P(z | y)`.
    pub fn sweep_hidden(&self, y: &BitState, z: &mut BitState, rng: &mut impl Rng) {
        for s in 0..self.n_h {
            let p = logistic(self.hidden_field(y, z, s));
            z[s] = if rng.random::<f64>() < p { 1 } else { 0 };
        }
    }

    pub fn sweep_visible(&self, y: &mut BitState, z: &BitState, rng: &mut impl Rng) {
        for r in 0..self.n_v {
            let p = logistic(self.visible_field(y, z, r));
            y[r] = if rng.random::<f64>() < p { 1 } else { 0 };
        }
    }

    /// One seeded Gibbs sweep over hidden units from a fair random start.
    pub fn sample_hidden(&self, y: &BitState, seed: u64) -> EbmResult<BitState> {
        check_bits(y, self.n_v, "visible state")?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut z: BitState = (0..self.n_h)
            .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
            .collect();
        self.sweep_hidden(y, &mut z, &mut rng);
        Ok(z)
    }
}

// ── likelihood gradients ─────────────────────────────────────────────

/// Gradient of the exact negative log-likelihood with respect to every
/// weight block (in storage parameterization), plus the two phase moments
/// of the visible-hidden block that drive the classic learning rule:
/// the loss gradient on `w^{yz}` is `−(positive − negative)`.
#[derive(Clone, Debug)]
pub struct NllGradient {
    pub wyy: Vec<f64>,
    pub wzz: Vec<f64>,
    pub wyz: Vec<f64>,
    /// `E_{P(z|y)}[yᵢ zₛ]`, row-major.
    pub positive_yz: Vec<f64>,
    /// `E_{P(y,z)}[yᵢ zₛ]`, row-major.
    pub negative_yz: Vec<f64>,
    /// Set when a Monte-Carlo chain looked stuck (all samples equal over
    /// 100 consecutive sweeps with nonzero weights).
    pub chain_warning: bool,
}

struct PhaseStats {
    yz: Vec<f64>,
    yy: Vec<f64>,
    zz: Vec<f64>,
}

impl BoltzmannMachine {
    fn stats_of(&self, y: &BitState, z: &BitState) -> PhaseStats {
        let mut yz = vec![0.0; self.n_v * self.n_h];
        for i in 0..self.n_v {
            for s in 0..self.n_h {
                yz[i * self.n_h + s] = (y[i] * z[s]) as f64;
            }
        }
        let mut yy = vec![0.0; tri_len(self.n_v)];
        for i in 0..self.n_v {
            for j in (i + 1)..self.n_v {
                yy[tri_index(self.n_v, i, j)] = (y[i] * y[j]) as f64;
            }
        }
        let mut zz = vec![0.0; tri_len(self.n_h)];
        for i in 0..self.n_h {
            for j in (i + 1)..self.n_h {
                zz[tri_index(self.n_h, i, j)] = (z[i] * z[j]) as f64;
            }
        }
        PhaseStats { yz, yy, zz }
    }

    fn gradient_from_phases(&self, pos: &PhaseStats, neg: &PhaseStats, warning: bool) -> NllGradient {
        // ∂E/∂w^{yz}ᵢₛ = −yᵢzₛ; ∂E/∂(stored upper-tri w) = −2·(pair product).
        let wyz = pos
            .yz
            .iter()
            .zip(&neg.yz)
            .map(|(p, n)| -(p - n))
            .collect();
        let wyy = pos
            .yy
            .iter()
            .zip(&neg.yy)
            .map(|(p, n)| -2.0 * (p - n))
            .collect();
        let wzz = pos
            .zz
            .iter()
            .zip(&neg.zz)
            .map(|(p, n)| -2.0 * (p - n))
            .collect();
        NllGradient {
            wyy,
            wzz,
            wyz,
            positive_yz: pos.yz.clone(),
            negative_yz: neg.yz.clone(),
            chain_warning: warning,
        }
    }

    /// Exact NLL gradient by full enumeration of `P(z|y)` and `P(y,z)`.
    pub fn nll_gradient_exact(&self, y: &BitState) -> EbmResult<NllGradient> {
        if self.n_v + self.n_h > EXACT_LIMIT {
            return Err(EbmError::SizeLimit {
                what: "total units for exact gradient",
                got: self.n_v + self.n_h,
                limit: EXACT_LIMIT,
            });
        }
        check_bits(y, self.n_v, "visible state")?;

        // Positive phase: expectation over P(z|y) with y clamped.
        let mut pos = PhaseStats {
            yz: vec![0.0; self.n_v * self.n_h],
            yy: vec![0.0; tri_len(self.n_v)],
            zz: vec![0.0; tri_len(self.n_h)],
        };
        let mut logps = Vec::with_capacity(1 << self.n_h);
        let zs: Vec<BitState> = Self::all_states(self.n_h).collect();
        for z in &zs {
            logps.push(-self.energy(y, z)?);
        }
        let norm = logsumexp(&logps);
        for (z, lp) in zs.iter().zip(&logps) {
            let p = (lp - norm).exp();
            let st = self.stats_of(y, z);
            for (acc, v) in pos.yz.iter_mut().zip(&st.yz) {
                *acc += p * v;
            }
            for (acc, v) in pos.yy.iter_mut().zip(&st.yy) {
                *acc += p * v;
            }
            for (acc, v) in pos.zz.iter_mut().zip(&st.zz) {
                *acc += p * v;
            }
        }

        // Negative phase: expectation over the full joint.
        let mut neg = PhaseStats {
            yz: vec![0.0; self.n_v * self.n_h],
            yy: vec![0.0; tri_len(self.n_v)],
            zz: vec![0.0; tri_len(self.n_h)],
        };
        let log_z = self.log_partition()?;
        for yy in Self::all_states(self.n_v) {
            for zz in Self::all_states(self.n_h) {
                let p = (-self.energy(&yy, &zz)? - log_z).exp();
                let st = self.stats_of(&yy, &zz);
                for (acc, v) in neg.yz.iter_mut().zip(&st.yz) {
                    *acc += p * v;
                }
                for (acc, v) in neg.yy.iter_mut().zip(&st.yy) {
                    *acc += p * v;
                }
                for (acc, v) in neg.zz.iter_mut().zip(&st.zz) {
                    *acc += p * v;
                }
            }
        }
        Ok(self.gradient_from_phases(&pos, &neg, false))
    }

    /// Monte-Carlo NLL gradient from Gibbs chains: the positive phase
    /// clamps y and sweeps hidden units, the negative phase runs a free
    /// chain over both layers.
    pub fn nll_gradient_mc(
        &self,
        y: &BitState,
        n_sweeps: usize,
        seed: u64,
    ) -> EbmResult<NllGradient> {
        check_bits(y, self.n_v, "visible state")?;
        if n_sweeps == 0 {
            return Err(EbmError::invalid("n_sweeps", "must be at least 1"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let burn_in = (n_sweeps / 10).clamp(10, 1000);
        let zero = PhaseStats {
            yz: vec![0.0; self.n_v * self.n_h],
            yy: vec![0.0; tri_len(self.n_v)],
            zz: vec![0.0; tri_len(self.n_h)],
        };
        let mut pos = zero;
        let mut neg = PhaseStats {
            yz: vec![0.0; self.n_v * self.n_h],
            yy: vec![0.0; tri_len(self.n_v)],
            zz: vec![0.0; tri_len(self.n_h)],
        };

        let mut z: BitState = (0..self.n_h)
            .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
            .collect();
        for _ in 0..burn_in {
            self.sweep_hidden(y, &mut z, &mut rng);
        }
        for _ in 0..n_sweeps {
            self.sweep_hidden(y, &mut z, &mut rng);
            let st = self.stats_of(y, &z);
            for (acc, v) in pos.yz.iter_mut().zip(&st.yz) {
                *acc += v;
            }
            for (acc, v) in pos.yy.iter_mut().zip(&st.yy) {
                *acc += v;
            }
            for (acc, v) in pos.zz.iter_mut().zip(&st.zz) {
                *acc += v;
            }
        }

        let mut fy: BitState = (0..self.n_v)
            .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
            .collect();
        let mut fz: BitState = (0..self.n_h)
            .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
            .collect();
        for _ in 0..burn_in {
            self.sweep_hidden(&fy, &mut fz, &mut rng);
            self.sweep_visible(&mut fy, &fz, &mut rng);
        }
        let nonzero_weights = self.flat_params().iter().any(|&w| w != 0.0);
        let mut stuck_run = 0usize;
        let mut warning = false;
        let mut last_state: Option<(BitState, BitState)> = None;
        for _ in 0..n_sweeps {
            self.sweep_hidden(&fy, &mut fz, &mut rng);
            self.sweep_visible(&mut fy, &fz, &mut rng);
            if let Some((ly, lz)) = &last_state {
                if *ly == fy && *lz == fz {
                    stuck_run += 1;
                    if stuck_run >= 100 && nonzero_weights {
                        warning = true;
                    }
                } else {
                    stuck_run = 0;
                }
            }
            last_state = Some((fy.clone(), fz.clone()));
            let st = self.stats_of(&fy, &fz);
            for (acc, v) in neg.yz.iter_mut().zip(&st.yz) {
                *acc += v;
            }
            for (acc, v) in neg.yy.iter_mut().zip(&st.yy) {
                *acc += v;
            }
            for (acc, v) in neg.zz.iter_mut().zip(&st.zz) {
                *acc += v;
            }
        }

        let scale = 1.0 / n_sweeps as f64;
        for stats in [&mut pos, &mut neg] {
            for v in stats
                .yz
                .iter_mut()
                .chain(stats.yy.iter_mut())
                .chain(stats.zz.iter_mut())
            {
                *v *= scale;
            }
        }
        Ok(self.gradient_from_phases(&pos, &neg, warning))
    }
}

// ── contrastive-divergence training ──────────────────────────────────

#[derive(Clone, Debug)]
pub struct CdEpoch {
    pub epoch: usize,
    /// Exact mean NLL, available on machines small enough to enumerate.
    pub exact_nll: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CdOutcome {
    pub machine: BoltzmannMachine,
    pub history: Vec<CdEpoch>,
    /// Epoch of the surviving checkpoint when training aborted on NaN.
    pub aborted_at: Option<usize>,
}

/// CD-k: positive statistics from one hidden sweep with the data clamped,
/// negative statistics from k alternating Gibbs sweeps, update
/// `w ← w + lr·(positive − negative)` per block.
pub fn train_cd(
    mut machine: BoltzmannMachine,
    dataset: &[BitState],
    k: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> EbmResult<CdOutcome> {
    if dataset.is_empty() {
        return Err(EbmError::Empty { what: "dataset" });
    }
    for y in dataset {
        check_bits(y, machine.n_v, "dataset vector")?;
    }
    if k == 0 {
        return Err(EbmError::invalid("k", "CD needs at least one Gibbs step"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let exact_ok = machine.n_v + machine.n_h <= EXACT_LIMIT;
    let mut history = Vec::with_capacity(epochs + 1);
    let nll0 = if exact_ok {
        Some(machine.exact_nll(dataset)?)
    } else {
        None
    };
    history.push(CdEpoch {
        epoch: 0,
        exact_nll: nll0,
    });
    let mut checkpoint = machine.clone();

    for epoch in 1..=epochs {
        for y in dataset {
            let mut z = vec![0u8; machine.n_h];
            machine.sweep_hidden(y, &mut z, &mut rng);
            let pos = machine.stats_of(y, &z);

            let mut ny = y.clone();
            let mut nz = z.clone();
            for _ in 0..k {
                machine.sweep_visible(&mut ny, &nz, &mut rng);
                machine.sweep_hidden(&ny, &mut nz, &mut rng);
            }
            let neg = machine.stats_of(&ny, &nz);

            for i in 0..machine.n_v * machine.n_h {
                machine.wyz[i] += lr * (pos.yz[i] - neg.yz[i]);
            }
            if !machine.restricted {
                for i in 0..machine.wyy.len() {
                    machine.wyy[i] += 2.0 * lr * (pos.yy[i] - neg.yy[i]);
                }
                for i in 0..machine.wzz.len() {
                    machine.wzz[i] += 2.0 * lr * (pos.zz[i] - neg.zz[i]);
                }
            }
        }
        if machine.flat_params().iter().any(|w| !w.is_finite()) {
            return Ok(CdOutcome {
                machine: checkpoint,
                history,
                aborted_at: Some(epoch - 1),
            });
        }
        let nll = if exact_ok {
            Some(machine.exact_nll(dataset)?)
        } else {
            None
        };
        history.push(CdEpoch {
            epoch,
            exact_nll: nll,
        });
        checkpoint = machine.clone();
    }
    Ok(CdOutcome {
        machine,
        history,
        aborted_at: None,
    })
}

/// Total-variation distance between seeded Gibbs-chain state frequencies
/// and the exact Boltzmann distribution, on a machine small enough to
/// enumerate.
pub fn gibbs_tv_experiment(
    machine: &BoltzmannMachine,
    sweeps: usize,
    burn_in: usize,
    seed: u64,
) -> EbmResult<f64> {
    let n = machine.n_v + machine.n_h;
    if n > EXACT_LIMIT {
        return Err(EbmError::SizeLimit {
            what: "total units for TV experiment",
            got: n,
            limit: EXACT_LIMIT,
        });
    }
    let log_z = machine.log_partition()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut y: BitState = (0..machine.n_v)
        .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
        .collect();
    let mut z: BitState = (0..machine.n_h)
        .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
        .collect();
    for _ in 0..burn_in {
        machine.sweep_hidden(&y, &mut z, &mut rng);
        machine.sweep_visible(&mut y, &z, &mut rng);
    }
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..sweeps {
        machine.sweep_hidden(&y, &mut z, &mut rng);
        machine.sweep_visible(&mut y, &z, &mut rng);
        let mut code = 0usize;
        for (b, &v) in y.iter().chain(z.iter()).enumerate() {
            code |= (v as usize) << b;
        }
        counts[code] += 1;
    }
    let mut tv = 0.0;
    for code in 0..counts.len() {
        let yv: BitState = (0..machine.n_v).map(|b| (code >> b & 1) as u8).collect();
        let zv: BitState = (0..machine.n_h)
            .map(|b| (code >> (machine.n_v + b) & 1) as u8)
            .collect();
        let exact = (-machine.energy(&yv, &zv)? - log_z).exp();
        let freq = counts[code] as f64 / sweeps as f64;
        tv += (exact - freq).abs();
    }
    Ok(tv / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::fdiff::finite_diff_grad;
    use crate::Tensor;

    fn random_machine(n_v: usize, n_h: usize, restricted: bool, seed: u64) -> BoltzmannMachine {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = BoltzmannMachine::new(n_v, n_h, restricted);
        for i in 0..n_v {
            for s in 0..n_h {
                m.set_wyz(i, s, rng.random_range(-0.8..0.8));
            }
        }
        if !restricted {
            for i in 0..n_v {
                for j in (i + 1)..n_v {
                    m.set_wyy(i, j, rng.random_range(-0.5..0.5));
                }
            }
            for i in 0..n_h {
                for j in (i + 1)..n_h {
                    m.set_wzz(i, j, rng.random_range(-0.5..0.5));
                }
            }
        }
        m
    }

    #[test]
    fn zero_weights_zero_energy() {
        let m = BoltzmannMachine::new(3, 2, false);
        assert_eq!(m.energy(&vec![1, 0, 1], &vec![1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn single_coupling_direct_substitution() {
        let mut m = BoltzmannMachine::new(1, 1, true);
        m.set_wyz(0, 0, 2.0);
        assert_eq!(m.energy(&vec![1], &vec![1]).unwrap(), -2.0);
        assert_eq!(m.energy(&vec![1], &vec![0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_hidden_vector_leaves_only_visible_term() {
        let mut m = random_machine(4, 3, false, 3);
        for i in 0..4 {
            for s in 0..3 {
                m.set_wyz(i, s, 10.0 + (i + s) as f64); // would dominate if counted
            }
        }
        let y = vec![1, 1, 0, 1];
        let z0 = vec![0, 0, 0];
        let mut expect = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                expect -= 2.0 * m.wyy(i, j) * (y[i] * y[j]) as f64;
            }
        }
        assert!((m.energy(&y, &z0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn free_energy_zero_weights_is_minus_nh_log2() {
        let m = BoltzmannMachine::new(3, 4, false);
        let f = m.free_energy(&vec![0, 1, 1]).unwrap();
        assert!((f - (-4.0 * (2.0_f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn free_energy_single_weight_two_term_sum() {
        let mut m = BoltzmannMachine::new(1, 1, true);
        m.set_wyz(0, 0, 1.7);
        let f = m.free_energy(&vec![1]).unwrap();
        assert!((f - (-(1.0 + (1.7_f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn rbm_free_energy_matches_closed_form() {
        let m = random_machine(4, 5, true, 7);
        for code in 0..(1u32 << 4) {
            let y: BitState = (0..4).map(|i| (code >> i & 1) as u8).collect();
            let exact = m.free_energy(&y).unwrap();
            // −Σₛ log(1 + exp(Σᵢ w^{yz}ᵢₛ yᵢ))
            let mut closed = 0.0;
            for s in 0..5 {
                let field: f64 = (0..4).map(|i| (y[i] as f64) * m.wyz(i, s)).sum();
                closed -= field.exp().ln_1p();
            }
            assert!((exact - closed).abs() < 1e-10, "{exact} vs {closed}");
        }
    }

    #[test]
    fn log_partition_zero_weights_and_single_coupling() {
        let m = BoltzmannMachine::new(3, 2, false);
        assert!((m.log_partition().unwrap() - 5.0 * (2.0_f64).ln()).abs() < 1e-12);

        let mut m2 = BoltzmannMachine::new(1, 1, true);
        m2.set_wyz(0, 0, 0.9);
        let expect = (3.0 + (0.9_f64).exp()).ln();
        assert!((m2.log_partition().unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn free_energy_marginalization_consistency() {
        // −log Σ_y exp(−F(y)) must equal −log Z.
        let m = random_machine(3, 3, false, 11);
        let mut terms = Vec::new();
        for code in 0..(1u32 << 3) {
            let y: BitState = (0..3).map(|i| (code >> i & 1) as u8).collect();
            terms.push(-m.free_energy(&y).unwrap());
        }
        let via_f = logsumexp(&terms);
        assert!((via_f - m.log_partition().unwrap()).abs() < 1e-10);
    }

    #[test]
    fn hidden_sampling_zero_weights_is_fair() {
        let m = BoltzmannMachine::new(2, 3, false);
        let y = vec![1, 0];
        let mut ones = [0u32; 3];
        let n = 100_000;
        for seed in 0..n {
            let z = m.sample_hidden(&y, seed as u64).unwrap();
            for (s, &b) in z.iter().enumerate() {
                ones[s] += b as u32;
            }
        }
        for s in 0..3 {
            let freq = ones[s] as f64 / n as f64;
            assert!((freq - 0.5).abs() < 0.01, "unit {s}: {freq}");
        }
    }

    #[test]
    fn rbm_hidden_frequencies_match_logistic_conditional() {
        let m = random_machine(3, 2, true, 13);
        let y = vec![1, 0, 1];
        let n = 100_000;
        let mut ones = [0u32; 2];
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let mut z = vec![0u8; 2];
        for _ in 0..n {
            m.sweep_hidden(&y, &mut z, &mut rng);
            for (s, &b) in z.iter().enumerate() {
                ones[s] += b as u32;
            }
        }
        for s in 0..2 {
            let field: f64 = (0..3).map(|i| (y[i] as f64) * m.wyz(i, s)).sum();
            let expect = logistic(field);
            let freq = ones[s] as f64 / n as f64;
            assert!((freq - expect).abs() < 0.01, "unit {s}: {freq} vs {expect}");
        }
    }

    #[test]
    fn saturated_weight_pins_hidden_unit() {
        let mut m = BoltzmannMachine::new(1, 1, true);
        m.set_wyz(0, 0, 50.0);
        for seed in 0..1000 {
            let z = m.sample_hidden(&vec![1], seed).unwrap();
            assert_eq!(z[0], 1);
        }
    }

    #[test]
    fn restricted_conditional_is_independent_of_initial_z() {
        let m = random_machine(3, 4, true, 17);
        let y = vec![1, 1, 0];
        let z_a = vec![0, 0, 0, 0];
        let z_b = vec![1, 1, 1, 1];
        for s in 0..4 {
            assert_eq!(m.hidden_field(&y, &z_a, s), m.hidden_field(&y, &z_b, s));
        }
    }

    #[test]
    fn zero_weight_gradient_has_half_quarter_phases() {
        // Positive phase E[yᵢzₛ | y] = yᵢ·0.5, negative phase 0.25, so the
        // classic update direction (pos − neg) is yᵢ/2 − 1/4.
        let m = BoltzmannMachine::new(3, 2, true);
        let y = vec![1, 0, 1];
        let g = m.nll_gradient_exact(&y).unwrap();
        for i in 0..3 {
            for s in 0..2 {
                let idx = i * 2 + s;
                assert!((g.positive_yz[idx] - (y[i] as f64) * 0.5).abs() < 1e-12);
                assert!((g.negative_yz[idx] - 0.25).abs() < 1e-12);
                let update = g.positive_yz[idx] - g.negative_yz[idx];
                assert!((update - ((y[i] as f64) / 2.0 - 0.25)).abs() < 1e-12);
                assert!((g.wyz[idx] + update).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exact_gradient_matches_finite_differences_of_exact_nll() {
        let m = random_machine(3, 2, false, 23);
        let y = vec![1, 0, 1];
        let analytic = m.nll_gradient_exact(&y).unwrap();
        let flat_analytic: Vec<f64> = analytic
            .wyy
            .iter()
            .chain(&analytic.wzz)
            .chain(&analytic.wyz)
            .copied()
            .collect();

        let theta = Tensor::vector(m.flat_params());
        let numeric = finite_diff_grad(
            |p: &Tensor| {
                let mut probe = m.clone();
                probe.set_flat_params(p.data());
                Ok(probe.free_energy(&y)? + probe.log_partition()?)
            },
            &theta,
            1e-5,
        )
        .unwrap();
        for (a, b) in flat_analytic.iter().zip(numeric.data()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn mc_gradient_converges_to_exact() {
        let m = random_machine(3, 2, true, 29);
        let y = vec![1, 1, 0];
        let exact = m.nll_gradient_exact(&y).unwrap();
        let mc = m.nll_gradient_mc(&y, 100_000, 31).unwrap();
        for (a, b) in exact.wyz.iter().zip(&mc.wyz) {
            let denom = a.abs().max(0.05);
            assert!(
                (a - b).abs() / denom < 0.05,
                "exact {a} vs mc {b}"
            );
        }
        assert!(!mc.chain_warning);
    }

    #[test]
    fn gibbs_frequencies_match_exact_distribution() {
        let m = random_machine(2, 2, false, 37);
        let tv = gibbs_tv_experiment(&m, 200_000, 1000, 5).unwrap();
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn cd_zero_learning_rate_changes_nothing() {
        let m = random_machine(3, 3, true, 41);
        let before = m.flat_params();
        let data = vec![vec![0, 0, 0], vec![1, 1, 0]];
        let out = train_cd(m, &data, 1, 10, 0.0, 43).unwrap();
        assert_eq!(out.machine.flat_params(), before);
        assert!(out.aborted_at.is_none());
    }

    #[test]
    fn exact_mode_size_limit_enforced() {
        let m = BoltzmannMachine::new(15, 10, true);
        assert!(matches!(
            m.log_partition(),
            Err(EbmError::SizeLimit { .. })
        ));
        let m2 = BoltzmannMachine::new(2, 21, true);
        assert!(matches!(
            m2.free_energy(&vec![0, 0]),
            Err(EbmError::SizeLimit { .. })
        ));
    }

    #[test]
    fn non_binary_states_rejected() {
        let m = BoltzmannMachine::new(2, 2, true);
        assert!(matches!(
            m.energy(&vec![2, 0], &vec![0, 0]),
            Err(EbmError::NonBinaryState { .. })
        ));
    }
}

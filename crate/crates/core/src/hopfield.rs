//! Hopfield network: quadratic energy over ±1 units, asynchronous
//! sign-update recall, Hebbian storage, and exhaustive minima enumeration
//! on small instances.
//!
//! The energy is the full double sum `F(y) = −Σᵢⱼ yᵢ wᵢⱼ yⱼ` over ordered
//! pairs, so values are twice the per-edge convention. Weights are stored
//! as a strict upper triangle, which enforces symmetry and the zero
//! diagonal structurally.

use crate::error::{EbmError, EbmResult};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub type SpinState = Vec<i8>;

#[derive(Clone, Debug, PartialEq)]
pub struct HopfieldNet {
    n: usize,
    /// Strict upper triangle, row-major: w(i, j) for i < j.
    upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub enum UpdateOrder {
    /// Units 0..n in index order each sweep.
    Fixed,
    /// A fresh seeded permutation per sweep.
    SeededRandom(u64),
}

fn check_state(y: &[i8], n: usize) -> EbmResult<()> {
    if y.len() != n {
        return Err(EbmError::invalid(
            "state",
            format!("length {} does not match unit count {n}", y.len()),
        ));
    }
    for (i, &v) in y.iter().enumerate() {
        if v != 1 && v != -1 {
            return Err(EbmError::NonBinaryState {
                expected: "±1",
                found: v as f64,
                index: i,
            });
        }
    }
    Ok(())
}

impl HopfieldNet {
    pub fn zeros(n: usize) -> Self {
        HopfieldNet {
            n,
            upper: vec![0.0; n * (n - 1) / 2],
        }
    }

    pub fn units(&self) -> usize {
        self.n
    }

    fn tri_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // Offset of row i within the strict upper triangle.
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else if i < j {
            self.upper[self.tri_index(i, j)]
        } else {
            self.upper[self.tri_index(j, i)]
        }
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        assert!(i != j, "diagonal is structurally zero");
        let idx = if i < j {
            self.tri_index(i, j)
        } else {
            self.tri_index(j, i)
        };
        self.upper[idx] = w;
    }

    pub fn upper_triangle(&self) -> &[f64] {
        &self.upper
    }

    pub fn from_upper_triangle(n: usize, upper: Vec<f64>) -> EbmResult<Self> {
        if upper.len() != n * (n - 1) / 2 {
            return Err(EbmError::invalid(
                "hopfield weights",
                format!("expected {} entries, got {}", n * (n - 1) / 2, upper.len()),
            ));
        }
        Ok(HopfieldNet { n, upper })
    }

    /// `F(y) = −Σᵢⱼ yᵢ wᵢⱼ yⱼ` (all ordered pairs).
    pub fn energy(&self, y: &SpinState) -> EbmResult<f64> {
        check_state(y, self.n)?;
        let mut per_edge = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                per_edge += self.weight(i, j) * (y[i] as f64) * (y[j] as f64);
            }
        }
        Ok(-2.0 * per_edge)
    }

    /// Local field `hᵢ = Σⱼ wᵢⱼ yⱼ`.
    pub fn field(&self, y: &[i8], i: usize) -> f64 {
        (0..self.n)
            .filter(|&j| j != i)
            .map(|j| self.weight(i, j) * y[j] as f64)
            .sum()
    }

    /// Asynchronous recall: `yᵢ ← sign(hᵢ)` with ties keeping the current
    /// state, swept until a full pass flips nothing. Energy monotonicity is
    /// asserted at every flip, and convergence within `max_sweeps` is
    /// asserted rather than caught — with these tie rules it cannot fail.
    pub fn recall(
        &self,
        y0: &SpinState,
        max_sweeps: usize,
        order: UpdateOrder,
    ) -> EbmResult<(SpinState, usize)> {
        check_state(y0, self.n)?;
        let mut y = y0.clone();
        let mut energy = self.energy(&y)?;
        let mut rng = match order {
            UpdateOrder::SeededRandom(seed) => Some(ChaCha12Rng::seed_from_u64(seed)),
            UpdateOrder::Fixed => None,
        };
        let mut indices: Vec<usize> = (0..self.n).collect();
        for sweep in 1..=max_sweeps {
            if let Some(rng) = rng.as_mut() {
                indices.shuffle(rng);
            }
            let mut flipped = false;
            for &i in &indices {
                let h = self.field(&y, i);
                let target = if h > 0.0 {
                    1
                } else if h < 0.0 {
                    -1
                } else {
                    y[i] // sign(0) keeps the current state
                };
                if target != y[i] {
                    y[i] = target;
                    flipped = true;
                    let e = self.energy(&y)?;
                    assert!(
                        e <= energy + 1e-9,
                        "energy rose on flip: {energy} -> {e}"
                    );
                    energy = e;
                }
            }
            if !flipped {
                return Ok((y, sweep));
            }
        }
        panic!("recall did not converge within {max_sweeps} sweeps");
    }

    /// All strict local minima under single-flip moves, labeled stored when
    /// they match a given pattern up to global sign. Exhaustive over 2ⁿ
    /// states, so n is capped at 20.
    pub fn enumerate_minima(
        &self,
        stored: &[SpinState],
    ) -> EbmResult<Vec<(SpinState, f64, bool)>> {
        if self.n > 20 {
            return Err(EbmError::SizeLimit {
                what: "hopfield units for exhaustive scan",
                got: self.n,
                limit: 20,
            });
        }
        let mut out = Vec::new();
        for code in 0u32..(1u32 << self.n) {
            let y: SpinState = (0..self.n)
                .map(|i| if code >> i & 1 == 1 { 1i8 } else { -1i8 })
                .collect();
            // Flipping unit i changes the energy by 4·yᵢ·hᵢ; a strict local
            // minimum has every flip raise the energy. (A zero-weight net
            // is entirely flat and reports no minima.)
            let strict_min = (0..self.n).all(|i| {
                let delta = 4.0 * (y[i] as f64) * self.field(&y, i);
                delta > 0.0
            });
            if strict_min {
                let energy = self.energy(&y)?;
                let is_stored = stored.iter().any(|p| {
                    p.iter().zip(&y).all(|(a, b)| a == b)
                        || p.iter().zip(&y).all(|(a, b)| *a == -b)
                });
                out.push((y, energy, is_stored));
            }
        }
        Ok(out)
    }
}

/// Hebbian storage: `wᵢⱼ = Σₚ yᵢᵖ yⱼᵖ` for i ≠ j, zero diagonal. No 1/n
/// scaling — sign updates are scale-invariant, so recall is unaffected.
pub fn train_hebbian(patterns: &[SpinState]) -> EbmResult<HopfieldNet> {
    let first = patterns.first().ok_or(EbmError::Empty {
        what: "pattern list",
    })?;
    let n = first.len();
    for p in patterns {
        check_state(p, n)?;
    }
    let mut net = HopfieldNet::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w: f64 = patterns
                .iter()
                .map(|p| (p[i] as f64) * (p[j] as f64))
                .sum();
            net.set_weight(i, j, w);
        }
    }
    Ok(net)
}

// ── canned experiments reused by the acceptance suite ───────────────

/// Number of successful exact recalls of a stored pattern from 10%-flipped
/// starts, over `trials` seeded trials (n = 32, two random patterns each).
pub fn recall_experiment(seed_base: u64, trials: usize) -> usize {
    let mut success = 0;
    for t in 0..trials as u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed_base + t);
        let n = 32;
        let patterns: Vec<SpinState> = (0..2)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.random::<bool>() { 1i8 } else { -1i8 })
                    .collect()
            })
            .collect();
        let net = train_hebbian(&patterns).expect("hebbian storage");
        let mut y0 = patterns[0].clone();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take((n as f64 * 0.10).round() as usize) {
            y0[i] = -y0[i];
        }
        let (fixed, _) = net
            .recall(&y0, 100, UpdateOrder::SeededRandom(seed_base + t))
            .expect("recall");
        if fixed == patterns[0] {
            success += 1;
        }
    }
    success
}

/// Number of seeds (out of `seeds`) for which a majority-vote mixture state
/// sign(±p₁ ± p₂ ± p₃) of three random patterns is a strict local minimum
/// at n = 10, found by exhaustive scan.
pub fn mixture_minima_hits(seed_base: u64, seeds: usize) -> usize {
    let n = 10;
    let mut hits = 0;
    for s in 0..seeds as u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed_base + s);
        let patterns: Vec<SpinState> = (0..3)
            .map(|_| {
                (0..n)
                    .map(|_| if rng.random::<bool>() { 1i8 } else { -1i8 })
                    .collect()
            })
            .collect();
        let net = train_hebbian(&patterns).expect("hebbian storage");
        let minima = net.enumerate_minima(&patterns).expect("scan");
        let mixture = |sg: [i32; 3]| -> SpinState {
            (0..n)
                .map(|i| {
                    let v = sg[0] * patterns[0][i] as i32
                        + sg[1] * patterns[1][i] as i32
                        + sg[2] * patterns[2][i] as i32;
                    if v > 0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        };
        let is_min = |m: &SpinState| {
            minima
                .iter()
                .any(|(st, _, _)| st == m || st.iter().zip(m).all(|(a, b)| *a == -b))
        };
        // Global sign covers the other four sign choices.
        let combos = [[1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]];
        if combos.iter().any(|c| is_min(&mixture(*c))) {
            hits += 1;
        }
    }
    hits
}

// ── pattern file format: one pattern per line, ±1 whitespace-separated ──

pub fn patterns_to_text(patterns: &[SpinState]) -> String {
    let mut out = String::new();
    for p in patterns {
        let fields: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn patterns_from_text(text: &str) -> EbmResult<Vec<SpinState>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut p = Vec::new();
        for field in line.split_whitespace() {
            let v: i64 = field.parse().map_err(|e| {
                EbmError::invalid(
                    "pattern file",
                    format!("line {}: {field:?}: {e}", lineno + 1),
                )
            })?;
            if v != 1 && v != -1 {
                return Err(EbmError::NonBinaryState {
                    expected: "±1",
                    found: v as f64,
                    index: p.len(),
                });
            }
            p.push(v as i8);
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(EbmError::Empty {
            what: "pattern file",
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_pattern(n: usize, rng: &mut impl Rng) -> SpinState {
        (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect()
    }

    #[test]
    fn zero_weights_zero_energy() {
        let net = HopfieldNet::zeros(5);
        let y = vec![1, -1, 1, 1, -1];
        assert_eq!(net.energy(&y).unwrap(), 0.0);
    }

    #[test]
    fn two_unit_energy_direct_substitution() {
        // w₁₂ = w₂₁ = 1, y = (1, 1): −Σᵢⱼ yᵢwᵢⱼyⱼ = −2.
        let mut net = HopfieldNet::zeros(2);
        net.set_weight(0, 1, 1.0);
        assert_eq!(net.energy(&vec![1, 1]).unwrap(), -2.0);
        assert_eq!(net.energy(&vec![1, -1]).unwrap(), 2.0);
    }

    #[test]
    fn sign_symmetry_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let patterns: Vec<SpinState> = (0..3).map(|_| random_pattern(12, &mut rng)).collect();
        let net = train_hebbian(&patterns).unwrap();
        for _ in 0..20 {
            let y = random_pattern(12, &mut rng);
            let ny: SpinState = y.iter().map(|v| -v).collect();
            assert_eq!(net.energy(&y).unwrap(), net.energy(&ny).unwrap());
        }
    }

    #[test]
    fn stored_pattern_energy_below_random_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let patterns: Vec<SpinState> = (0..2).map(|_| random_pattern(32, &mut rng)).collect();
        let net = train_hebbian(&patterns).unwrap();
        let stored_e = net.energy(&patterns[0]).unwrap();
        for _ in 0..100 {
            let y = random_pattern(32, &mut rng);
            if y != patterns[0] && y != patterns[1] {
                assert!(net.energy(&y).unwrap() > stored_e);
            }
        }
    }

    #[test]
    fn stored_pattern_is_a_fixed_point() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let patterns: Vec<SpinState> = (0..2).map(|_| random_pattern(16, &mut rng)).collect();
        let net = train_hebbian(&patterns).unwrap();
        let (fixed, sweeps) = net.recall(&patterns[0], 50, UpdateOrder::Fixed).unwrap();
        assert_eq!(fixed, patterns[0]);
        assert_eq!(sweeps, 1);
    }

    #[test]
    fn zero_field_net_returns_initial_state() {
        let net = HopfieldNet::zeros(6);
        let y0 = vec![1, 1, -1, 1, -1, -1];
        let (fixed, sweeps) = net.recall(&y0, 10, UpdateOrder::Fixed).unwrap();
        assert_eq!(fixed, y0);
        assert_eq!(sweeps, 1);
    }

    #[test]
    fn single_pattern_storage_gives_rank_one_weights() {
        let p: SpinState = vec![1, -1, 1, -1];
        let net = train_hebbian(&[p.clone()]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j {
                    0.0
                } else {
                    (p[i] as f64) * (p[j] as f64)
                };
                assert_eq!(net.weight(i, j), expect);
            }
        }
        let neg: SpinState = p.iter().map(|v| -v).collect();
        let net_neg = train_hebbian(&[neg]).unwrap();
        assert_eq!(net.upper_triangle(), net_neg.upper_triangle());
    }

    #[test]
    fn orthogonal_patterns_are_both_fixed_points() {
        // Exhaustively verified via the minima scan on all 16 states.
        let p1: SpinState = vec![1, 1, -1, -1];
        let p2: SpinState = vec![1, -1, 1, -1];
        let net = train_hebbian(&[p1.clone(), p2.clone()]).unwrap();
        for p in [&p1, &p2] {
            let (fixed, _) = net.recall(p, 20, UpdateOrder::Fixed).unwrap();
            assert_eq!(&fixed, p);
        }
        let minima = net.enumerate_minima(&[p1, p2]).unwrap();
        for (_, _, is_stored) in &minima {
            assert!(*is_stored);
        }
    }

    #[test]
    fn single_pattern_minima_are_pattern_and_negation() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let p = random_pattern(6, &mut rng);
        let net = train_hebbian(&[p.clone()]).unwrap();
        let minima = net.enumerate_minima(&[p.clone()]).unwrap();
        assert_eq!(minima.len(), 2);
        for (state, _, is_stored) in minima {
            assert!(is_stored);
            let matches = state == p || state.iter().zip(&p).all(|(a, b)| *a == -b);
            assert!(matches);
        }
    }

    #[test]
    fn flat_net_has_no_strict_minima() {
        let net = HopfieldNet::zeros(6);
        assert!(net.enumerate_minima(&[]).unwrap().is_empty());
    }

    #[test]
    fn recall_from_corruption_classical_regime() {
        // n = 32, 2 patterns, 10% flipped bits: ≥95 of 100 seeded trials
        // must recall exactly.
        let success = recall_experiment(1000, 100);
        assert!(success >= 95, "recalled {success}/100");
    }

    #[test]
    fn spurious_mixture_minima_appear_with_three_patterns() {
        // Three-pattern majority-vote mixtures sign(±p₁±p₂±p₃) show up
        // among the minima in a majority of seeds at n = 10.
        let hits = mixture_minima_hits(100, 20);
        assert!(hits > 10, "mixture minima in {hits}/20 seeds");
    }

    #[test]
    fn hebbian_rule_is_negative_energy_gradient() {
        // On a full-matrix parameterization, ∂F/∂wᵢⱼ at the training state
        // is −yᵢyⱼ, so the storage rule is exactly −∂L/∂wᵢⱼ.
        use crate::numerics::fdiff::finite_diff_grad;
        use crate::Tensor;
        let y: SpinState = vec![1, -1, -1, 1];
        let n = 4;
        let dense = Tensor::zeros([n, n]);
        let energy_of = |w: &Tensor| -> crate::EbmResult<f64> {
            let mut e = 0.0;
            for i in 0..n {
                for j in 0..n {
                    e -= w.data()[i * n + j] * (y[i] as f64) * (y[j] as f64);
                }
            }
            Ok(e)
        };
        let g = finite_diff_grad(energy_of, &dense, 1e-5).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    // Diagonal contributes −yᵢ² = −1 in the full double sum.
                    -1.0
                } else {
                    -(y[i] as f64) * (y[j] as f64)
                };
                assert!(
                    (g.data()[i * n + j] - expect).abs() < 1e-8,
                    "({i},{j}): {} vs {expect}",
                    g.data()[i * n + j]
                );
            }
        }
    }

    #[test]
    fn pattern_file_roundtrip_and_validation() {
        let patterns = vec![vec![1i8, -1, 1], vec![-1, -1, 1]];
        let text = patterns_to_text(&patterns);
        assert_eq!(patterns_from_text(&text).unwrap(), patterns);
        assert!(patterns_from_text("1 0 1\n").is_err());
        assert!(patterns_from_text("").is_err());
    }
}

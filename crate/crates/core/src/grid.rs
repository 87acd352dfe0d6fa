//! Rectangular evaluation grids with trapezoidal quadrature weights.
//!
//! One `GridSpec` serves three jobs: coarse search lattices for inference,
//! quadrature for marginal free energies, and the y'-grids of the
//! likelihood-style losses. Points are enumerated in row-major order
//! (last dimension fastest) so grid indices are reproducible.

use crate::error::{EbmError, EbmResult};
use crate::Tensor;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per dimension, each ≥ 2.
    pub res: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, res: Vec<usize>) -> EbmResult<Self> {
        let spec = GridSpec { lo, hi, res };
        spec.validate()?;
        Ok(spec)
    }

    /// 1-D grid over `[lo, hi]` with `res` points.
    pub fn line(lo: f64, hi: f64, res: usize) -> EbmResult<Self> {
        GridSpec::new(vec![lo], vec![hi], vec![res])
    }

    pub fn validate(&self) -> EbmResult<()> {
        if self.lo.len() != self.hi.len() || self.lo.len() != self.res.len() {
            return Err(EbmError::invalid(
                "grid",
                format!(
                    "dimension mismatch: lo {}, hi {}, res {}",
                    self.lo.len(),
                    self.hi.len(),
                    self.res.len()
                ),
            ));
        }
        if self.lo.is_empty() {
            return Err(EbmError::Empty { what: "grid" });
        }
        for d in 0..self.lo.len() {
            if !(self.lo[d] < self.hi[d]) {
                return Err(EbmError::invalid(
                    "grid",
                    format!(
                        "lo[{d}] = {} must be below hi[{d}] = {}",
                        self.lo[d], self.hi[d]
                    ),
                ));
            }
            if self.res[d] < 2 {
                return Err(EbmError::invalid(
                    "grid",
                    format!("res[{d}] = {} must be at least 2", self.res[d]),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / (self.res[d] - 1) as f64
    }

    fn coord(&self, d: usize, i: usize) -> f64 {
        if i + 1 == self.res[d] {
            self.hi[d]
        } else {
            self.lo[d] + self.step(d) * i as f64
        }
    }

    /// Trapezoid weight along one dimension: `h/2` at the ends, `h` inside.
    fn weight_1d(&self, d: usize, i: usize) -> f64 {
        let h = self.step(d);
        if i == 0 || i + 1 == self.res[d] {
            h * 0.5
        } else {
            h
        }
    }

    /// Point at a flat row-major index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = flat;
        let dims = self.dim();
        let mut out = vec![0.0; dims];
        for d in (0..dims).rev() {
            let i = idx % self.res[d];
            idx /= self.res[d];
            out[d] = self.coord(d, i);
        }
        out
    }

    /// Tensor-product trapezoid weight at a flat index.
    pub fn weight(&self, flat: usize) -> f64 {
        let mut idx = flat;
        let dims = self.dim();
        let mut w = 1.0;
        for d in (0..dims).rev() {
            let i = idx % self.res[d];
            idx /= self.res[d];
            w *= self.weight_1d(d, i);
        }
        w
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn tensors(&self) -> impl Iterator<Item = Tensor> + '_ {
        self.points().map(Tensor::vector)
    }

    /// Total quadrature weight; equals the box volume exactly for the
    /// trapezoid rule.
    pub fn total_weight(&self) -> f64 {
        (0..self.dim()).map(|d| self.hi[d] - self.lo[d]).product()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for d in 0..self.dim().min(x.len()) {
            x[d] = x[d].clamp(self.lo[d], self.hi[d]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|d| x[d] >= self.lo[d] && x[d] <= self.hi[d])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_volume() {
        let g = GridSpec::new(vec![-1.0, 0.0], vec![1.0, 3.0], vec![7, 5]).unwrap();
        let total: f64 = (0..g.len()).map(|i| g.weight(i)).sum();
        assert!((total - 6.0).abs() < 1e-12);
        assert!((g.total_weight() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn row_major_order_last_dim_fastest() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 3]).unwrap();
        assert_eq!(g.point(0), vec![0.0, 0.0]);
        assert_eq!(g.point(1), vec![0.0, 0.5]);
        assert_eq!(g.point(2), vec![0.0, 1.0]);
        assert_eq!(g.point(3), vec![1.0, 0.0]);
    }

    #[test]
    fn degenerate_specs_rejected() {
        assert!(GridSpec::line(1.0, 1.0, 4).is_err());
        assert!(GridSpec::line(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(vec![], vec![], vec![]).is_err());
    }
}

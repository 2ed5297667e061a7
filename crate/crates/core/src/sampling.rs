//! Seeded sample generation.
//!
//! The generator is SplitMix64 with state initialised to the seed: each
//! draw adds `0x9e3779b97f4a7c15` to the state `s` and returns
//! `z ^ (z >> 31)` after `z = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9` and
//! `z = (z ^ (z >> 27)) * 0x94d049bb133111eb` (wrapping arithmetic).
//! A uniform double in `[0, 1)` is `(draw >> 11) * 2^-53`.
//!
//! A fiber point draws its base coordinates in order, then `w` uniform in
//! `[−1, 1]^{2m}` (redrawn while `|w| < 1e-3`), then `r` uniform in
//! `[r_lo, r_hi]`, and sets `v = r w / |w|`.

use nalgebra::{DMatrix, DVector};
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::chart::{AdaptedTransition, FiberPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: SplitMix64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: SplitMix64::seed_from_u64(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn fiber_point(&mut self, spec: &SampleBox) -> Result<FiberPoint> {
        let x: Vec<f64> = spec.x_lo.iter().zip(&spec.x_hi).map(|(&lo, &hi)| self.range(lo, hi)).collect();
        let w = loop {
            let w: Vec<f64> = (0..spec.fiber_dim).map(|_| self.range(-1.0, 1.0)).collect();
            if norm(&w) >= 1e-3 {
                break w;
            }
        };
        let r = self.range(spec.radius[0], spec.radius[1]);
        let scale = r / norm(&w);
        FiberPoint::new(x, w.iter().map(|c| c * scale).collect())
    }

    pub fn fiber_points(&mut self, spec: &SampleBox) -> Result<Vec<FiberPoint>> {
        (0..spec.count).map(|_| self.fiber_point(spec)).collect()
    }

    /// `A = I + ½ U` with `U` uniform in `[−1, 1]` entrywise, redrawn while
    /// `|det A| < 0.1`; `b` and `c` uniform in `[−1, 1]`.
    pub fn transition(&mut self, dim: usize) -> AdaptedTransition {
        loop {
            let a = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { 0.0 }) + DMatrix::from_fn(dim, dim, |_, _| 0.5 * self.range(-1.0, 1.0));
            let b = DVector::from_fn(dim, |_, _| self.range(-1.0, 1.0));
            let c = self.range(-1.0, 1.0);
            if a.determinant().abs() >= 0.1 {
                if let Ok(t) = AdaptedTransition::new(a, b, c) {
                    return t;
                }
            }
        }
    }
}

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Box of base points and shell of fiber radii.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub fiber_dim: usize,
    pub radius: [f64; 2],
    pub count: usize,
}

impl SampleBox {
    pub fn new(x_lo: Vec<f64>, x_hi: Vec<f64>, radius: [f64; 2], count: usize) -> Result<Self> {
        if x_lo.len() != x_hi.len() || x_lo.len() < 3 || x_lo.len().is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!("box bounds need 2m + 1 entries each, got {} and {}", x_lo.len(), x_hi.len())));
        }
        if x_lo.iter().zip(&x_hi).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::InvalidInput("box bounds must be finite with lo <= hi".into()));
        }
        if !(radius[0].is_finite() && radius[1].is_finite() && radius[0] > 0.0 && radius[0] <= radius[1]) {
            return Err(Error::InvalidInput(format!("fiber radii must satisfy 0 < lo <= hi, got {radius:?}")));
        }
        let fiber_dim = x_lo.len() - 1;
        Ok(SampleBox { x_lo, x_hi, fiber_dim, radius, count })
    }

    /// `x ∈ [−1, 1]^n` with `|v| ∈ radius`.
    pub fn unit(m: usize, radius: [f64; 2], count: usize) -> Self {
        let n = 2 * m + 1;
        SampleBox::new(vec![-1.0; n], vec![1.0; n], radius, count).expect("valid unit box")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference outputs for seed 1234567.
        let mut s = Sampler::new(1234567);
        let expect = [6457827717110365317u64, 3203168211198807973, 9817491932198370423, 4593380528125082431, 16408922859458223821];
        for e in expect {
            assert_eq!(s.next_u64(), e);
        }
    }

    #[test]
    fn fiber_points_respect_box() {
        let spec = SampleBox::unit(2, [0.5, 2.0], 200);
        let pts = Sampler::new(7).fiber_points(&spec).unwrap();
        assert_eq!(pts.len(), 200);
        for p in &pts {
            assert!(p.x().iter().all(|c| (-1.0..1.0).contains(c)));
            let r = norm(p.v());
            assert!((0.5 - 1e-12..=2.0 + 1e-12).contains(&r));
        }
        assert_eq!(pts, Sampler::new(7).fiber_points(&spec).unwrap());
    }

    #[test]
    fn transitions_are_invertible() {
        let mut s = Sampler::new(3);
        for _ in 0..20 {
            let t = s.transition(4);
            assert!(t.jacobian().determinant().abs() >= 0.1);
        }
    }

    #[test]
    fn box_validation() {
        assert!(SampleBox::new(vec![0.0; 4], vec![1.0; 4], [1.0, 1.0], 1).is_err());
        assert!(SampleBox::new(vec![0.0; 5], vec![1.0; 5], [0.0, 1.0], 1).is_err());
        assert!(SampleBox::new(vec![1.0; 5], vec![0.0; 5], [1.0, 1.0], 1).is_err());
    }
}

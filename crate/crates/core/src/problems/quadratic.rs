use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// `f(x; xi) = |x - xi|^2 / 2` with `xi ~ N(x*, noise^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProblem {
    pub x_star: Vec<f64>,
    pub noise: f64,
}

impl QuadraticProblem {
    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    /// `E |grad f(x*; xi)|^2`
    pub fn sigma2(&self) -> f64 {
        self.noise * self.noise * self.dim() as f64
    }

    /// `f(x) = |x - x*|^2 / 2 + noise^2 d / 2`
    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * sq_dist(x, &self.x_star) + 0.5 * self.sigma2()
    }

    pub fn gap(&self, x: &[f64]) -> f64 {
        0.5 * sq_dist(x, &self.x_star)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x_star).map(|(a, b)| a - b).collect()
    }

    /// Mean of `b` sampled gradients `x - xi`.
    pub fn sample_gradient<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        b: usize,
        out: &mut [f64],
    ) {
        let inv_b = 1.0 / b as f64;
        for ((o, &xi), &opt) in out.iter_mut().zip(x).zip(&self.x_star) {
            if self.noise == 0.0 {
                *o = xi - opt;
                continue;
            }
            let mut z = 0.0;
            for _ in 0..b {
                let n: f64 = rng.sample(StandardNormal);
                z += n;
            }
            *o = xi - opt - self.noise * z * inv_b;
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::libsvm::Dataset;
use super::OptimumCertificate;
use crate::error::{Error, Result};

/// How the expected-smoothness constant is derived from the plain smoothness `L`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessRoute {
    /// `L^2 / mu`, valid for any smooth strongly convex sum.
    #[default]
    Conservative,
    /// `2 L`, valid when every component is convex and `L`-smooth.
    ConvexComponents,
}

/// `f(x) = (1/n) sum ln(1 + exp(-b_i <a_i, x>)) + lambda/2 |x|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegProblem {
    pub data: Dataset,
    pub lambda: f64,
    #[serde(default)]
    pub smoothness: SmoothnessRoute,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<Dataset>,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogRegProblem {
    pub fn new(data: Dataset, lambda: f64) -> Result<Self> {
        let p = Self {
            data,
            lambda,
            smoothness: SmoothnessRoute::default(),
            test: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if self.data.is_empty() {
            return Err(Error::param("data", "need at least one example"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    /// `max |a_i|^2 / 4 + lambda`
    pub fn smoothness(&self) -> f64 {
        let max_sq = self
            .data
            .rows
            .iter()
            .map(|r| r.sq_norm())
            .fold(0.0, f64::max);
        max_sq / 4.0 + self.lambda
    }

    pub fn expected_smoothness(&self) -> f64 {
        let l = self.smoothness();
        match self.smoothness {
            SmoothnessRoute::Conservative => l * l / self.lambda,
            SmoothnessRoute::ConvexComponents => 2.0 * l,
        }
    }

    fn reg(&self, x: &[f64]) -> f64 {
        0.5 * self.lambda * x.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let loss: f64 = self
            .data
            .rows
            .iter()
            .map(|r| softplus(-r.label * r.dot(x)))
            .sum();
        loss / self.n() as f64 + self.reg(x)
    }

    /// `out = grad f_i(x)` for one example, including the regularizer.
    fn add_component_gradient(&self, i: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let r = &self.data.rows[i];
        let coef = -r.label * sigmoid(-r.label * r.dot(x));
        r.axpy(scale * coef, out);
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().map(|v| self.lambda * v).collect();
        let scale = 1.0 / self.n() as f64;
        for i in 0..self.n() {
            self.add_component_gradient(i, x, scale, &mut out);
        }
        out
    }

    /// Mean gradient over the given example indices.
    pub fn batch_gradient(&self, x: &[f64], indices: &[usize], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.lambda * v;
        }
        let scale = 1.0 / indices.len() as f64;
        for &i in indices {
            self.add_component_gradient(i, x, scale, out);
        }
    }

    /// `b` indices drawn uniformly with replacement.
    pub fn sample_gradient<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        b: usize,
        scratch: &mut Vec<usize>,
        out: &mut [f64],
    ) {
        scratch.clear();
        scratch.extend((0..b).map(|_| rng.random_range(0..self.n())));
        self.batch_gradient(x, scratch, out);
    }

    /// `(1/n) sum |grad f_i(x)|^2`
    pub fn gradient_second_moment(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        let mut total = 0.0;
        for i in 0..self.n() {
            for (o, v) in g.iter_mut().zip(x) {
                *o = self.lambda * v;
            }
            self.add_component_gradient(i, x, 1.0, &mut g);
            total += g.iter().map(|v| v * v).sum::<f64>();
        }
        total / self.n() as f64
    }

    /// Share of correctly classified test examples, when a test split exists.
    pub fn test_accuracy(&self, x: &[f64]) -> Option<f64> {
        let test = self.test.as_ref().filter(|t| !t.is_empty())?;
        let hits = test
            .rows
            .iter()
            .filter(|r| r.label * r.dot(x) > 0.0)
            .count();
        Some(hits as f64 / test.len() as f64)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut h = DMatrix::<f64>::identity(d, d) * self.lambda;
        let scale = 1.0 / self.n() as f64;
        for r in &self.data.rows {
            let s = sigmoid(r.label * r.dot(x));
            let w = scale * s * (1.0 - s);
            for (ja, (&ia, &va)) in r.indices.iter().zip(&r.values).enumerate() {
                for (&ib, &vb) in r.indices[ja..].iter().zip(&r.values[ja..]) {
                    let v = w * va * vb;
                    h[(ia as usize, ib as usize)] += v;
                    if ia != ib {
                        h[(ib as usize, ia as usize)] += v;
                    }
                }
            }
        }
        h
    }

    /// Damped Newton with Armijo backtracking (dense Hessian), or plain gradient descent
    /// with backtracking when the dimension is too large for a dense factorization.
    pub fn solve(&self, tol: f64) -> Result<OptimumCertificate> {
        if self.dim() <= NEWTON_MAX_DIM {
            self.newton(tol)
        } else {
            self.gradient_descent(tol)
        }
    }

    fn newton(&self, tol: f64) -> Result<OptimumCertificate> {
        let mut x = vec![0.0; self.dim()];
        let mut f = self.objective(&x);
        let mut g = self.gradient(&x);
        let mut gn = norm(&g);
        let mut best = gn;
        for it in 0..NEWTON_MAX_ITERS {
            if gn <= tol {
                return Ok(certificate(x, f, gn, "newton", it));
            }
            let h = self.hessian(&x);
            let chol = h
                .cholesky()
                .ok_or_else(|| Error::NonFinite("Hessian is not positive definite".into()))?;
            let step = chol.solve(&DVector::from_column_slice(&g));
            let dir: Vec<f64> = step.iter().map(|v| -v).collect();
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            match self.line_search(&x, f, gn, &dir, slope) {
                Some((nx, nf, ng)) => {
                    x = nx;
                    f = nf;
                    g = ng;
                    gn = norm(&g);
                    best = best.min(gn);
                }
                None => break,
            }
        }
        if gn <= tol {
            return Ok(certificate(x, f, gn, "newton", NEWTON_MAX_ITERS));
        }
        Err(Error::Certificate {
            best_grad_norm: best,
            iterations: NEWTON_MAX_ITERS,
            tol,
        })
    }

    fn gradient_descent(&self, tol: f64) -> Result<OptimumCertificate> {
        let mut x = vec![0.0; self.dim()];
        let mut f = self.objective(&x);
        let mut g = self.gradient(&x);
        let mut gn = norm(&g);
        let mut best = gn;
        let mut lr = 1.0 / self.smoothness();
        for it in 0..GD_MAX_ITERS {
            if gn <= tol {
                return Ok(certificate(x, f, gn, "gradient_descent", it));
            }
            let dir: Vec<f64> = g.iter().map(|v| -lr * v).collect();
            let slope = -lr * gn * gn;
            match self.line_search(&x, f, gn, &dir, slope) {
                Some((nx, nf, ng)) => {
                    x = nx;
                    f = nf;
                    g = ng;
                    gn = norm(&g);
                    best = best.min(gn);
                    lr *= 1.5;
                }
                None => break,
            }
            lr = lr.max(1e-12);
        }
        Err(Error::Certificate {
            best_grad_norm: best,
            iterations: GD_MAX_ITERS,
            tol,
        })
    }

    /// Armijo backtracking along `dir`. Once the objective stops resolving decreases, a
    /// step is still accepted if it shrinks the gradient norm.
    fn line_search(
        &self,
        x: &[f64],
        f: f64,
        gn: f64,
        dir: &[f64],
        slope: f64,
    ) -> Option<(Vec<f64>, f64, Vec<f64>)> {
        let mut s = 1.0;
        for _ in 0..60 {
            let nx: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + s * d).collect();
            let nf = self.objective(&nx);
            if nf <= f + 1e-4 * s * slope {
                let ng = self.gradient(&nx);
                return Some((nx, nf, ng));
            }
            if nf <= f + 1e-12 * f.abs() {
                let ng = self.gradient(&nx);
                if norm(&ng) < gn {
                    return Some((nx, nf, ng));
                }
            }
            s *= 0.5;
        }
        None
    }
}

const NEWTON_MAX_DIM: usize = 2000;
const NEWTON_MAX_ITERS: usize = 100;
const GD_MAX_ITERS: usize = 200_000;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn certificate(
    x: Vec<f64>,
    f: f64,
    gn: f64,
    method: &str,
    iterations: usize,
) -> OptimumCertificate {
    OptimumCertificate {
        x_star: x,
        f_star: f,
        grad_norm: gn,
        method: method.to_string(),
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::libsvm::parse_libsvm_str;

    fn one_sample(lambda: f64) -> LogRegProblem {
        LogRegProblem {
            data: parse_libsvm_str("+1 1:1").unwrap(),
            lambda,
            smoothness: SmoothnessRoute::Conservative,
            test: None,
        }
    }

    #[test]
    fn hand_values_at_zero() {
        let p = one_sample(0.0);
        assert!((p.objective(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((p.gradient(&[0.0])[0] + 0.5).abs() < 1e-15);
        let p = LogRegProblem {
            data: parse_libsvm_str("+1 1:2 2:-1\n-1 1:0.5\n+1 2:3\n-1 1:1 2:1").unwrap(),
            lambda: 0.7,
            smoothness: SmoothnessRoute::Conservative,
            test: None,
        };
        assert!((p.objective(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn large_margins_are_stable() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn scalar_optimum_matches_bisection() {
        // stationarity: x = sigmoid(-x)
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - 1.0 / (1.0 + mid.exp()) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let cert = one_sample(1.0).solve(1e-12).unwrap();
        assert!(
            (cert.x_star[0] - lo).abs() < 1e-11,
            "{} vs {lo}",
            cert.x_star[0]
        );
        assert!(cert.grad_norm <= 1e-12);
    }

    #[test]
    fn smoothness_constants() {
        let p = LogRegProblem {
            data: parse_libsvm_str("+1 1:2\n-1 1:1").unwrap(),
            lambda: 1e-4,
            smoothness: SmoothnessRoute::Conservative,
            test: None,
        };
        assert!((p.smoothness() - 1.0001).abs() < 1e-15);
        assert!((p.expected_smoothness() - 1.0001f64.powi(2) / 1e-4).abs() < 1e-9);
        let tight = LogRegProblem {
            smoothness: SmoothnessRoute::ConvexComponents,
            ..p
        };
        assert!((tight.expected_smoothness() - 2.0002).abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let p = LogRegProblem {
            data: parse_libsvm_str("+1 1:2 2:-1\n-1 1:0.5 3:1\n+1 2:3\n-1 1:1 2:1 3:-2").unwrap(),
            lambda: 0.1,
            smoothness: SmoothnessRoute::Conservative,
            test: None,
        };
        let x = [0.3, -0.2, 0.5];
        let h = p.hessian(&x);
        let eps = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += eps;
            xm[j] -= eps;
            let (gp, gm) = (p.gradient(&xp), p.gradient(&xm));
            for i in 0..3 {
                let fd = (gp[i] - gm[i]) / (2.0 * eps);
                assert!((fd - h[(i, j)]).abs() < 1e-8);
            }
        }
    }
}

//! Strongly convex test problems with certified optima and their constants.

mod libsvm;
mod logreg;
mod quadratic;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::ProblemConstants;
use crate::error::{Error, Result};

pub use libsvm::{parse_libsvm, parse_libsvm_str, Dataset, SparseRow};
pub use logreg::{LogRegProblem, SmoothnessRoute};
pub use quadratic::QuadraticProblem;

pub(crate) use quadratic::sq_dist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumCertificate {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub grad_norm: f64,
    pub method: String,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    Quadratic(QuadraticProblem),
    LogReg(LogRegProblem),
}

/// Scratch space for sampled mini-batches, owned by one run.
#[derive(Debug, Default)]
pub struct SampleScratch {
    indices: Vec<usize>,
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(q) => q.dim(),
            Problem::LogReg(l) => l.dim(),
        }
    }

    /// Number of components for finite sums.
    pub fn n(&self) -> Option<usize> {
        match self {
            Problem::Quadratic(_) => None,
            Problem::LogReg(l) => Some(l.n()),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn full_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            Problem::Quadratic(q) => q.gradient(x),
            Problem::LogReg(l) => l.gradient(x),
        })
    }

    pub(crate) fn objective_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Quadratic(q) => q.objective(x),
            Problem::LogReg(l) => l.objective(x),
        }
    }

    /// `f(x) - f*`. The quadratic gap is computed from the distance, so it is exact.
    pub(crate) fn gap_unchecked(&self, x: &[f64], cert: &OptimumCertificate) -> f64 {
        match self {
            Problem::Quadratic(q) => q.gap(x),
            Problem::LogReg(l) => l.objective(x) - cert.f_star,
        }
    }

    /// Mini-batch gradient of size `b`, written into `out`.
    pub fn stochastic_gradient<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        b: usize,
        scratch: &mut SampleScratch,
        out: &mut [f64],
    ) -> Result<()> {
        self.check_dim(x)?;
        if b == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if out.len() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: out.len(),
            });
        }
        self.sample_gradient_unchecked(x, rng, b, scratch, out);
        Ok(())
    }

    pub(crate) fn sample_gradient_unchecked<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        rng: &mut R,
        b: usize,
        scratch: &mut SampleScratch,
        out: &mut [f64],
    ) {
        match self {
            Problem::Quadratic(q) => q.sample_gradient(x, rng, b, out),
            Problem::LogReg(l) => l.sample_gradient(x, rng, b, &mut scratch.indices, out),
        }
    }

    /// Gradient of an explicit batch of components (finite sums only).
    pub fn batch_gradient(&self, x: &[f64], indices: &[usize]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match self {
            Problem::Quadratic(_) => Err(Error::Unavailable {
                what: "explicit batches on a problem without finite-sum structure".into(),
            }),
            Problem::LogReg(l) => {
                if indices.is_empty() {
                    return Err(Error::param("batch_size", "must be at least 1"));
                }
                if let Some(&bad) = indices.iter().find(|&&i| i >= l.n()) {
                    return Err(Error::Range {
                        what: "component index",
                        value: bad as f64,
                        range: format!("[0, {})", l.n()),
                    });
                }
                let mut out = vec![0.0; x.len()];
                l.batch_gradient(x, indices, &mut out);
                Ok(out)
            }
        }
    }

    pub fn test_accuracy(&self, x: &[f64]) -> Option<f64> {
        match self {
            Problem::Quadratic(_) => None,
            Problem::LogReg(l) => l.test_accuracy(x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Problem::Quadratic(q) => {
                if q.x_star.is_empty() {
                    return Err(Error::param("d", "must be at least 1"));
                }
                if !(q.noise >= 0.0 && q.noise.is_finite()) {
                    return Err(Error::param("noise", "must be finite and nonnegative"));
                }
                if q.x_star.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("x_star", "must be finite"));
                }
                Ok(())
            }
            Problem::LogReg(l) => l.validate(),
        }
    }
}

/// Closed form for the quadratic; Newton (or gradient descent in high dimension) with
/// backtracking for logistic regression.
pub fn solve_optimum(problem: &Problem, tol: f64) -> Result<OptimumCertificate> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    problem.validate()?;
    match problem {
        Problem::Quadratic(q) => Ok(OptimumCertificate {
            x_star: q.x_star.clone(),
            f_star: q.objective(&q.x_star),
            grad_norm: 0.0,
            method: "closed_form".into(),
            iterations: 0,
        }),
        Problem::LogReg(l) => l.solve(tol),
    }
}

/// `(mu, L_f, sigma^2)` for the problem, with `sigma^2` summed exactly at the optimum.
pub fn estimate_constants(
    problem: &Problem,
    cert: Option<&OptimumCertificate>,
    tau: f64,
) -> Result<ProblemConstants> {
    let c = match problem {
        Problem::Quadratic(q) => ProblemConstants::new(1.0, 1.0, q.sigma2(), tau)?,
        Problem::LogReg(l) => {
            let cert = cert.ok_or(Error::MissingCertificate("logistic regression constants"))?;
            if cert.x_star.len() != l.dim() {
                return Err(Error::Dimension {
                    expected: l.dim(),
                    got: cert.x_star.len(),
                });
            }
            let sigma2 = l.gradient_second_moment(&cert.x_star);
            ProblemConstants::new(l.lambda, l.expected_smoothness(), sigma2, tau)?
        }
    };
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Quadratic,
    LogReg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Quadratic sample noise.
    #[serde(default = "one")]
    pub noise: f64,
    /// Quadratic optimum; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
    /// Share of flipped logistic labels.
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}
fn default_label_noise() -> f64 {
    0.05
}
fn default_lambda() -> f64 {
    1e-4
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            noise: 1.0,
            x_star: None,
            label_noise: default_label_noise(),
            lambda: default_lambda(),
        }
    }
}

/// Two Gaussian clouds at `+-c` with `|c| = 1`, per-coordinate noise `1/sqrt(d)`,
/// and a share of labels flipped.
pub fn synthetic_dataset(n: usize, d: usize, seed: u64, label_noise: f64) -> Result<Dataset> {
    if n < 1 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if d < 1 {
        return Err(Error::param("d", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&label_noise) {
        return Err(Error::param("label_noise", "must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let center: Vec<f64> = (0..d)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect();
    let rows = (0..n)
        .map(|_| {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let values: Vec<f64> = center
                .iter()
                .map(|&c| {
                    let z: f64 = rng.sample(StandardNormal);
                    y * c + scale * z
                })
                .collect();
            let flip = rng.random::<f64>() < label_noise;
            SparseRow {
                label: if flip { -y } else { y },
                indices: (0..d as u32).collect(),
                values,
            }
        })
        .collect();
    Ok(Dataset { rows, dim: d })
}

pub fn generate_synthetic(
    kind: SyntheticKind,
    d: usize,
    n: usize,
    seed: u64,
    params: &SyntheticParams,
) -> Result<Problem> {
    if d < 1 {
        return Err(Error::param("d", "must be at least 1"));
    }
    let p = match kind {
        SyntheticKind::Quadratic => {
            let x_star = match &params.x_star {
                Some(x) if x.len() != d => {
                    return Err(Error::Dimension {
                        expected: d,
                        got: x.len(),
                    })
                }
                Some(x) => x.clone(),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..d).map(|_| rng.sample(StandardNormal)).collect()
                }
            };
            Problem::Quadratic(QuadraticProblem {
                x_star,
                noise: params.noise,
            })
        }
        SyntheticKind::LogReg => Problem::LogReg(LogRegProblem::new(
            synthetic_dataset(n, d, seed, params.label_noise)?,
            params.lambda,
        )?),
    };
    p.validate()?;
    Ok(p)
}

/// Problem description as it appears in experiment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic {
        #[serde(default = "one_usize")]
        d: usize,
        #[serde(default = "one")]
        noise: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_star: Option<Vec<f64>>,
        #[serde(default)]
        seed: u64,
    },
    SyntheticLogreg {
        n: usize,
        d: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_label_noise")]
        label_noise: f64,
        #[serde(default)]
        smoothness: SmoothnessRoute,
        /// Held-out share for test accuracy; everything trains when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_fraction: Option<f64>,
        #[serde(default)]
        split_seed: u64,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default)]
        smoothness: SmoothnessRoute,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_fraction: Option<f64>,
        #[serde(default)]
        split_seed: u64,
    },
}

fn one_usize() -> usize {
    1
}

fn logreg_with_split(
    data: Dataset,
    lambda: f64,
    smoothness: SmoothnessRoute,
    test_fraction: Option<f64>,
    split_seed: u64,
) -> Result<Problem> {
    let (train, test) = match test_fraction {
        Some(f) if !(0.0..1.0).contains(&f) => {
            return Err(Error::param("test_fraction", "must lie in [0, 1)"))
        }
        Some(f) if f > 0.0 => {
            let (train, test) = data.split(1.0 - f, split_seed)?;
            (train, Some(test))
        }
        _ => (data, None),
    };
    let mut p = LogRegProblem::new(train, lambda)?;
    p.smoothness = smoothness;
    p.test = test;
    Ok(Problem::LogReg(p))
}

impl ProblemSpec {
    /// Relative file paths resolve against `base`.
    pub fn build(&self, base: Option<&std::path::Path>) -> Result<Problem> {
        match self {
            ProblemSpec::Quadratic {
                d,
                noise,
                x_star,
                seed,
            } => generate_synthetic(
                SyntheticKind::Quadratic,
                *d,
                1,
                *seed,
                &SyntheticParams {
                    noise: *noise,
                    x_star: Some(x_star.clone().unwrap_or_else(|| vec![0.0; *d])),
                    ..Default::default()
                },
            ),
            ProblemSpec::SyntheticLogreg {
                n,
                d,
                seed,
                lambda,
                label_noise,
                smoothness,
                test_fraction,
                split_seed,
            } => logreg_with_split(
                synthetic_dataset(*n, *d, *seed, *label_noise)?,
                *lambda,
                *smoothness,
                *test_fraction,
                *split_seed,
            ),
            ProblemSpec::Libsvm {
                path,
                lambda,
                smoothness,
                test_fraction,
                split_seed,
            } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                logreg_with_split(
                    Dataset::read_libsvm(&full)?,
                    *lambda,
                    *smoothness,
                    *test_fraction,
                    *split_seed,
                )
            }
        }
    }
}

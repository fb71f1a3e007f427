use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Problem, ProblemCertificate, ProblemKind};
use crate::error::{Error, Result};

/// `f(w) = 1/2 w^T H w` with diagonal `H`, oracle `g = H w + sigma * xi`,
/// `xi ~ N(0, I)`.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    eigenvalues: Vec<f64>,
    sigma: f64,
}

impl NoisyQuadratic {
    pub fn new(eigenvalues: Vec<f64>, sigma: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if eigenvalues.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::ConstraintViolation("eigenvalues must be positive and finite".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::ConstraintViolation(format!("sigma = {sigma} must be >= 0")));
        }
        Ok(NoisyQuadratic { eigenvalues, sigma })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub(crate) fn loss(&self, w: &[f64]) -> f64 {
        0.5 * self.eigenvalues.iter().zip(w).map(|(h, x)| h * x * x).sum::<f64>()
    }

    pub(crate) fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        for ((o, h), x) in out.iter_mut().zip(&self.eigenvalues).zip(w) {
            *o = h * x;
        }
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R, out: &mut [f64]) {
        self.grad_into(w, out);
        if self.sigma > 0.0 {
            for o in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *o += self.sigma * z;
            }
        }
    }

    pub(crate) fn into_problem(self) -> Problem {
        let d = self.dim();
        let l_f = self.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let c = self.sigma * self.sigma * d as f64;
        let cert = ProblemCertificate {
            l_f,
            f_star: 0.0,
            a: 0.0,
            b: 1.0,
            c,
            f_star_tolerance: 0.0,
            description: format!(
                "diagonal quadratic, d = {d}, sigma = {}. L_f = max eigenvalue = {l_f}; \
                 f* = 0 at w = 0; E||g||^2 = ||Hw||^2 + sigma^2 d exactly, so A = 0, B = 1, \
                 C = sigma^2 d = {c}",
                self.sigma
            ),
        };
        Problem::new(ProblemKind::Quadratic(self), cert, vec![0.0; d])
    }
}

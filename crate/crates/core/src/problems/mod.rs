//! Stochastic objectives with analytic gradients, unbiased oracles and
//! certified constants.
//!
//! Every problem carries a [`ProblemCertificate`] holding the smoothness
//! constant `L_f`, the infimum `f*` and constants `(A, B, C)` such that
//! the oracle satisfies
//!
//! ```text
//! E ||g||^2 <= A (f(w) - f*) + B ||grad f(w)||^2 + C.
//! ```

mod least_squares;
mod logistic;
mod quadratic;

pub use least_squares::LeastSquares;
pub use logistic::Logistic;
pub use quadratic::NoisyQuadratic;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemCertificate {
    pub l_f: f64,
    pub f_star: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Upper bound on the error of `f_star` (zero when it is exact).
    pub f_star_tolerance: f64,
    pub description: String,
}

impl ProblemCertificate {
    /// `A + 2 L_f B`, the constant in the ABC bound after eliminating the
    /// gradient term via `||grad f||^2 <= 2 L_f (f - f*)`.
    pub fn abc_slope(&self) -> f64 {
        self.a + 2.0 * self.l_f * self.b
    }

    /// Right-hand side of the ABC inequality.
    pub fn abc_bound(&self, f: f64, grad_norm_sq: f64) -> f64 {
        self.a * (f - self.f_star) + self.b * grad_norm_sq + self.c
    }
}

/// Serializable description of a suite problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic { eigenvalues: Vec<f64>, sigma: f64 },
    LeastSquares { n: usize, d: usize, seed: u64 },
    Logistic { n: usize, d: usize, seed: u64 },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Quadratic { .. } => "quadratic",
            ProblemSpec::LeastSquares { .. } => "least_squares",
            ProblemSpec::Logistic { .. } => "logistic",
        }
    }

    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Quadratic { eigenvalues, sigma } => {
                make_noisy_quadratic(eigenvalues.clone(), *sigma)
            }
            ProblemSpec::LeastSquares { n, d, seed } => make_least_squares(*n, *d, *seed),
            ProblemSpec::Logistic { n, d, seed } => make_logistic(*n, *d, *seed),
        }
    }

    /// Default spectrum: ten eigenvalues log-spaced over `[0.1, 10]`.
    pub fn default_quadratic() -> Self {
        ProblemSpec::Quadratic {
            eigenvalues: log_spaced(0.1, 10.0, 10),
            sigma: 1.0,
        }
    }

    pub fn default_least_squares() -> Self {
        ProblemSpec::LeastSquares { n: 50, d: 5, seed: 7 }
    }

    pub fn default_logistic() -> Self {
        ProblemSpec::Logistic { n: 100, d: 10, seed: 3 }
    }
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone)]
pub enum ProblemKind {
    Quadratic(NoisyQuadratic),
    LeastSquares(LeastSquares),
    Logistic(Logistic),
}

/// A stochastic objective. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Problem {
    kind: ProblemKind,
    certificate: ProblemCertificate,
    minimizer: Vec<f64>,
}

impl Problem {
    pub(crate) fn new(kind: ProblemKind, certificate: ProblemCertificate, minimizer: Vec<f64>) -> Self {
        Problem {
            kind,
            certificate,
            minimizer,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Quadratic(_) => "quadratic",
            ProblemKind::LeastSquares(_) => "least_squares",
            ProblemKind::Logistic(_) => "logistic",
        }
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.dim(),
            ProblemKind::LeastSquares(p) => p.dim(),
            ProblemKind::Logistic(p) => p.dim(),
        }
    }

    pub fn certificate(&self) -> &ProblemCertificate {
        &self.certificate
    }

    /// Same objective with a replaced certificate. Used to inject faults.
    pub fn with_certificate(mut self, certificate: ProblemCertificate) -> Problem {
        self.certificate = certificate;
        self
    }

    /// A point attaining (up to solver tolerance) `f*`.
    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    /// Whether every oracle draw equals the exact gradient.
    pub fn is_deterministic(&self) -> bool {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.sigma() == 0.0,
            ProblemKind::LeastSquares(p) => p.n() == 1,
            ProblemKind::Logistic(p) => p.n() == 1,
        }
    }

    pub fn loss(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        Ok(self.loss_unchecked(w))
    }

    pub fn grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), w.len())?;
        let mut out = vec![0.0; w.len()];
        self.grad_into(w, &mut out);
        Ok(out)
    }

    pub(crate) fn loss_unchecked(&self, w: &[f64]) -> f64 {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.loss(w),
            ProblemKind::LeastSquares(p) => p.loss(w),
            ProblemKind::Logistic(p) => p.loss(w),
        }
    }

    /// Exact gradient written into `out`. Lengths must match `dim`.
    pub fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.grad_into(w, out),
            ProblemKind::LeastSquares(p) => p.grad_into(w, out),
            ProblemKind::Logistic(p) => p.grad_into(w, out),
        }
    }

    /// One unbiased stochastic gradient draw.
    pub fn oracle_sample<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        check_dim(self.dim(), w.len())?;
        let mut out = vec![0.0; w.len()];
        self.oracle_into(w, rng, &mut out);
        Ok(out)
    }

    pub fn oracle_into<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            ProblemKind::Quadratic(q) => q.sample_into(w, rng, out),
            ProblemKind::LeastSquares(p) => p.sample_into(w, rng, out),
            ProblemKind::Logistic(p) => p.sample_into(w, rng, out),
        }
    }

    /// `k` independent oracle draws at a frozen point.
    pub fn branch_samples<R: Rng + ?Sized>(
        &self,
        w: &[f64],
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        if k == 0 {
            return Err(Error::Precondition("branch count must be >= 1".into()));
        }
        check_dim(self.dim(), w.len())?;
        Ok((0..k)
            .map(|_| {
                let mut g = vec![0.0; w.len()];
                self.oracle_into(w, rng, &mut g);
                g
            })
            .collect())
    }

    /// Almost-sure bound on `||g||` at `w`, where the oracle has one.
    pub fn sample_norm_bound(&self, w: &[f64]) -> Option<f64> {
        match &self.kind {
            ProblemKind::Logistic(p) => Some(p.sample_norm_bound(w)),
            _ => None,
        }
    }
}

pub fn make_noisy_quadratic(eigenvalues: Vec<f64>, sigma: f64) -> Result<Problem> {
    NoisyQuadratic::new(eigenvalues, sigma).map(NoisyQuadratic::into_problem)
}

pub fn make_least_squares(n: usize, d: usize, seed: u64) -> Result<Problem> {
    LeastSquares::generate(n, d, seed)?.into_problem()
}

pub fn make_logistic(n: usize, d: usize, seed: u64) -> Result<Problem> {
    Logistic::generate(n, d, seed).map(Logistic::into_problem)
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue of `(1/n) sum a_i a_i^T` for row-major `rows`.
pub(crate) fn gram(rows: &[f64], n: usize, d: usize) -> nalgebra::DMatrix<f64> {
    let a = nalgebra::DMatrix::from_row_slice(n, d, rows);
    (a.transpose() * &a) / n as f64
}

pub(crate) fn sym_eigen_range(m: &nalgebra::DMatrix<f64>) -> (f64, f64) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand_distr::{Distribution, StandardNormal};

    fn suite() -> Vec<Problem> {
        vec![
            ProblemSpec::default_quadratic().build().unwrap(),
            ProblemSpec::default_least_squares().build().unwrap(),
            ProblemSpec::default_logistic().build().unwrap(),
        ]
    }

    fn random_point(p: &Problem, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
        p.minimizer()
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + scale * z
            })
            .collect()
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = make_noisy_quadratic(vec![1.0, 4.0], 0.0).unwrap();
        assert_eq!(
            p.loss(&[1.0]).unwrap_err(),
            Error::DimensionMismatch { expected: 2, got: 1 }
        );
        assert!(p.grad(&[1.0, 2.0, 3.0]).is_err());
        let mut rng = stream("t", 0, Purpose::Trajectory);
        assert!(p.oracle_sample(&[0.0], &mut rng).is_err());
    }

    #[test]
    fn branch_count_one_matches_single_draw() {
        let p = ProblemSpec::default_quadratic().build().unwrap();
        let w = vec![0.5; 10];
        let mut a = stream("t", 3, Purpose::Branch);
        let mut b = stream("t", 3, Purpose::Branch);
        let branches = p.branch_samples(&w, 1, &mut a).unwrap();
        assert_eq!(branches, vec![p.oracle_sample(&w, &mut b).unwrap()]);
        assert!(p.branch_samples(&w, 0, &mut a).is_err());
    }

    #[test]
    fn noiseless_branches_are_identical() {
        let p = make_noisy_quadratic(vec![1.0, 2.0, 3.0], 0.0).unwrap();
        let w = [1.0, -1.0, 0.5];
        let mut rng = stream("t", 0, Purpose::Branch);
        let b = p.branch_samples(&w, 100, &mut rng).unwrap();
        assert!(b.iter().all(|g| g == &b[0]));
        assert_eq!(b[0], p.grad(&w).unwrap());
    }

    #[test]
    fn lipschitz_spot_check() {
        let mut rng = stream("lip", 0, Purpose::Points);
        for p in suite() {
            let l = p.certificate().l_f;
            for _ in 0..1000 {
                let w = random_point(&p, 2.0, &mut rng);
                let w2 = random_point(&p, 2.0, &mut rng);
                let g = p.grad(&w).unwrap();
                let g2 = p.grad(&w2).unwrap();
                let dg: f64 = g.iter().zip(&g2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let dw: f64 = w.iter().zip(&w2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(dg <= l * dw * (1.0 + 1e-10), "{}: {dg} > {l}*{dw}", p.name());
            }
        }
    }

    #[test]
    fn gradient_norm_bounded_by_suboptimality() {
        let mut rng = stream("b2", 0, Purpose::Points);
        for p in suite() {
            let cert = p.certificate();
            for k in 0..10_000 {
                let scale = 10f64.powi(k % 6 - 3);
                let w = random_point(&p, scale, &mut rng);
                let g2 = norm_sq(&p.grad(&w).unwrap());
                let gap = p.loss(&w).unwrap() - cert.f_star + cert.f_star_tolerance;
                assert!(
                    g2 <= 2.0 * cert.l_f * gap * (1.0 + 1e-10) + 1e-300,
                    "{}: {g2} vs {}",
                    p.name(),
                    2.0 * cert.l_f * gap
                );
            }
        }
    }

    #[test]
    fn trajectory_of_samples_is_deterministic() {
        for p in suite() {
            let w = vec![0.3; p.dim()];
            let mut a = stream("det", 11, Purpose::Trajectory);
            let mut b = stream("det", 11, Purpose::Trajectory);
            for _ in 0..50 {
                assert_eq!(p.oracle_sample(&w, &mut a).unwrap(), p.oracle_sample(&w, &mut b).unwrap());
            }
        }
    }

    #[test]
    fn log_spacing_endpoints() {
        let xs = log_spaced(0.1, 10.0, 10);
        assert!((xs[0] - 0.1).abs() < 1e-15);
        assert!((xs[9] - 10.0).abs() < 1e-12);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }
}

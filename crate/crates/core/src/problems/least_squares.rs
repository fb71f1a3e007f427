use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dot, gram, norm_sq, sym_eigen_range, Problem, ProblemCertificate, ProblemKind};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

const CONDITION_LIMIT: f64 = 1e12;

/// `f(w) = (1/n) sum_i 1/2 (a_i^T w - b_i)^2`; the oracle is the gradient
/// of one uniformly drawn summand.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    targets: Vec<f64>,
}

impl LeastSquares {
    /// Rows `a_i ~ N(0, I)`, targets `b_i = a_i^T w_true + 0.5 eps_i`.
    pub fn generate(n: usize, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || n < d {
            return Err(Error::Precondition(format!("least squares needs n >= d >= 1 (n={n}, d={d})")));
        }
        let mut rng = stream("least_squares", seed, Purpose::ProblemData);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let w_true: Vec<f64> = (0..d).map(|_| normal()).collect();
        let rows: Vec<f64> = (0..n * d).map(|_| normal()).collect();
        let targets = (0..n)
            .map(|i| dot(&rows[i * d..(i + 1) * d], &w_true) + 0.5 * normal())
            .collect();
        Ok(LeastSquares { n, d, rows, targets })
    }

    /// Row-major `rows` of shape `n x d`.
    pub fn from_data(rows: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let n = targets.len();
        if n == 0 || !rows.len().is_multiple_of(n) || rows.is_empty() {
            return Err(Error::Precondition("rows must be a non-empty n x d matrix".into()));
        }
        let d = rows.len() / n;
        if n < d {
            return Err(Error::Precondition(format!("least squares needs n >= d (n={n}, d={d})")));
        }
        Ok(LeastSquares { n, d, rows, targets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    fn residual(&self, i: usize, w: &[f64]) -> f64 {
        dot(self.row(i), w) - self.targets[i]
    }

    pub(crate) fn loss(&self, w: &[f64]) -> f64 {
        (0..self.n).map(|i| 0.5 * self.residual(i, w).powi(2)).sum::<f64>() / self.n as f64
    }

    pub(crate) fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let scale = 1.0 / self.n as f64;
        for i in 0..self.n {
            let r = self.residual(i, w) * scale;
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * r;
            }
        }
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R, out: &mut [f64]) {
        let j = if self.n == 1 { 0 } else { rng.random_range(0..self.n) };
        let r = self.residual(j, w);
        for (o, a) in out.iter_mut().zip(self.row(j)) {
            *o = a * r;
        }
    }

    pub(crate) fn into_problem(self) -> Result<Problem> {
        let (n, d) = (self.n, self.d);
        let g = gram(&self.rows, n, d);
        let (lam_min, lam_max) = sym_eigen_range(&g);
        let cond = if lam_min > 0.0 { lam_max / lam_min } else { f64::INFINITY };
        if !(cond <= CONDITION_LIMIT) {
            return Err(Error::SingularSystem(cond));
        }
        let a = DMatrix::from_row_slice(n, d, &self.rows);
        let b = DVector::from_column_slice(&self.targets);
        let rhs = a.transpose() * b / n as f64;
        let w_star = g
            .clone()
            .cholesky()
            .ok_or(Error::SingularSystem(cond))?
            .solve(&rhs);
        let w_star: Vec<f64> = w_star.iter().cloned().collect();
        let f_star = self.loss(&w_star);
        let l_max = (0..n).map(|i| norm_sq(self.row(i))).fold(0.0, f64::max);
        let sigma_star_sq = (0..n)
            .map(|i| norm_sq(self.row(i)) * self.residual(i, &w_star).powi(2))
            .sum::<f64>()
            / n as f64;
        // Rounding in the normal-equations solve perturbs f* at roughly the
        // level of cond * eps * f.
        let f_star_tolerance = cond * f64::EPSILON * (1.0 + f_star.abs()) * 10.0;
        let cert = ProblemCertificate {
            l_f: lam_max,
            f_star,
            a: 4.0 * l_max,
            b: 0.0,
            c: 2.0 * sigma_star_sq,
            f_star_tolerance,
            description: format!(
                "least squares, n = {n}, d = {d}. L_f = lambda_max((1/n) A^T A) = {lam_max}; \
                 f* = f(w*) = {f_star} from the normal equations (condition {cond:.3e}); \
                 expected smoothness: E||g||^2 <= 2E||g(w)-g(w*)||^2 + 2E||g(w*)||^2 \
                 <= 4 L_max (f - f*) + 2 sigma*^2, so A = 4 max||a_i||^2 = {}, B = 0, \
                 C = 2 sigma*^2 = {}",
                4.0 * l_max,
                2.0 * sigma_star_sq
            ),
        };
        Ok(Problem::new(ProblemKind::LeastSquares(self), cert, w_star))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_least_squares;

    #[test]
    fn single_interpolating_row() {
        let p = LeastSquares::from_data(vec![2.0], vec![4.0]).unwrap().into_problem().unwrap();
        let c = p.certificate();
        assert!(c.f_star.abs() < 1e-15);
        assert!((p.minimizer()[0] - 2.0).abs() < 1e-14);
        assert!(c.c.abs() < 1e-15);
        let mut rng = stream("ls", 0, Purpose::Trajectory);
        let w = [0.3];
        assert_eq!(p.oracle_sample(&w, &mut rng).unwrap(), p.grad(&w).unwrap());
    }

    #[test]
    fn rejects_rank_deficient_rows() {
        let rows = vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        let err = LeastSquares::from_data(rows, vec![1.0, 2.0, 3.0])
            .unwrap()
            .into_problem()
            .unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)), "{err:?}");
    }

    #[test]
    fn rejects_underdetermined_shape() {
        assert!(make_least_squares(2, 3, 0).is_err());
    }

    #[test]
    fn minimizer_is_stationary() {
        let p = make_least_squares(50, 5, 7).unwrap();
        let g = p.grad(p.minimizer()).unwrap();
        assert!(norm_sq(&g).sqrt() < 1e-12);
    }

    #[test]
    fn oracle_unbiased_at_fixed_point() {
        let p = make_least_squares(50, 5, 7).unwrap();
        let w = vec![0.5, -1.0, 0.25, 2.0, 0.0];
        let grad = p.grad(&w).unwrap();
        let k = 100_000;
        let mut rng = stream("ls-mean", 0, Purpose::Branch);
        let mut sum = vec![0.0; 5];
        let mut sq = vec![0.0; 5];
        let mut g = vec![0.0; 5];
        for _ in 0..k {
            p.oracle_into(&w, &mut rng, &mut g);
            for i in 0..5 {
                sum[i] += g[i];
                sq[i] += g[i] * g[i];
            }
        }
        for i in 0..5 {
            let mean = sum[i] / k as f64;
            let var = sq[i] / k as f64 - mean * mean;
            let se = (var / k as f64).sqrt();
            assert!((mean - grad[i]).abs() <= 4.0 * se, "coord {i}: {mean} vs {}", grad[i]);
        }
    }
}

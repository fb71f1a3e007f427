use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dot, gram, norm_sq, sym_eigen_range, Problem, ProblemCertificate, ProblemKind};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

const DEFAULT_REG: f64 = 1e-2;
const LABEL_FLIP: f64 = 0.1;
const SOLVER_TOL: f64 = 1e-12;

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularized logistic regression
/// `f(w) = (1/n) sum_i ln(1 + exp(-y_i a_i^T w)) + reg/2 ||w||^2`.
/// The oracle is the gradient of one uniformly drawn summand.
#[derive(Debug, Clone)]
pub struct Logistic {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    labels: Vec<f64>,
    reg: f64,
}

impl Logistic {
    /// Gaussian rows labelled by a random hyperplane, with 10% of labels
    /// flipped.
    pub fn generate(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Precondition(format!("logistic needs n, d >= 1 (n={n}, d={d})")));
        }
        let mut rng = stream("logistic", seed, Purpose::ProblemData);
        let w_true: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rows: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let labels = (0..n)
            .map(|i| {
                let y = if dot(&rows[i * d..(i + 1) * d], &w_true) >= 0.0 { 1.0 } else { -1.0 };
                if rng.random::<f64>() < LABEL_FLIP {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Ok(Logistic { n, d, rows, labels, reg: DEFAULT_REG })
    }

    pub fn from_data(rows: Vec<f64>, labels: Vec<f64>, reg: f64) -> Result<Self> {
        let n = labels.len();
        if n == 0 || rows.is_empty() || !rows.len().is_multiple_of(n) {
            return Err(Error::Precondition("rows must be a non-empty n x d matrix".into()));
        }
        if !(reg > 0.0) {
            return Err(Error::Precondition("regularization must be positive".into()));
        }
        Ok(Logistic { n, d: rows.len() / n, rows, labels, reg })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        self.labels[i] * dot(self.row(i), w)
    }

    pub(crate) fn loss(&self, w: &[f64]) -> f64 {
        let data = (0..self.n).map(|i| softplus(-self.margin(i, w))).sum::<f64>() / self.n as f64;
        data + 0.5 * self.reg * norm_sq(w)
    }

    pub(crate) fn grad_into(&self, w: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(w) {
            *o = self.reg * x;
        }
        let scale = 1.0 / self.n as f64;
        for i in 0..self.n {
            let coef = -self.labels[i] * sigmoid(-self.margin(i, w)) * scale;
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += coef * a;
            }
        }
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R, out: &mut [f64]) {
        let j = if self.n == 1 { 0 } else { rng.random_range(0..self.n) };
        let coef = -self.labels[j] * sigmoid(-self.margin(j, w));
        for ((o, a), x) in out.iter_mut().zip(self.row(j)).zip(w) {
            *o = coef * a + self.reg * x;
        }
    }

    fn max_row_norm(&self) -> f64 {
        (0..self.n).map(|i| norm_sq(self.row(i)).sqrt()).fold(0.0, f64::max)
    }

    /// `||g|| <= max_i ||a_i|| + reg ||w||` holds for every draw.
    pub(crate) fn sample_norm_bound(&self, w: &[f64]) -> f64 {
        self.max_row_norm() + self.reg * norm_sq(w).sqrt()
    }

    fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let mut h = DMatrix::<f64>::identity(d, d) * self.reg;
        for i in 0..self.n {
            let s = sigmoid(self.margin(i, w));
            let weight = s * (1.0 - s) / self.n as f64;
            let a = DVector::from_column_slice(self.row(i));
            h += (&a * a.transpose()) * weight;
        }
        h
    }

    /// Damped Newton. Returns the minimizer and its gradient norm.
    fn solve(&self) -> (Vec<f64>, f64) {
        let d = self.d;
        let mut w = vec![0.0; d];
        let mut g = vec![0.0; d];
        self.grad_into(&w, &mut g);
        for _ in 0..200 {
            if norm_sq(&g).sqrt() <= SOLVER_TOL {
                break;
            }
            let h = self.hessian(&w);
            let step = match h.cholesky() {
                Some(ch) => ch.solve(&DVector::from_column_slice(&g)),
                None => DVector::from_column_slice(&g),
            };
            let f0 = self.loss(&w);
            let slope: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
            let mut t = 1.0;
            let mut trial = vec![0.0; d];
            loop {
                for k in 0..d {
                    trial[k] = w[k] - t * step[k];
                }
                if self.loss(&trial) <= f0 - 1e-4 * t * slope || t < 1e-10 {
                    break;
                }
                t *= 0.5;
            }
            w.copy_from_slice(&trial);
            self.grad_into(&w, &mut g);
        }
        (w, norm_sq(&g).sqrt())
    }

    pub(crate) fn into_problem(self) -> Problem {
        let (n, d) = (self.n, self.d);
        let (_, lam_max) = sym_eigen_range(&gram(&self.rows, n, d));
        let l_f = 0.25 * lam_max + self.reg;
        let (w_star, residual) = self.solve();
        let f_star = self.loss(&w_star);
        // Strong convexity with modulus reg: f(w) - f* <= ||grad f(w)||^2 / (2 reg).
        let f_star_tolerance = residual * residual / (2.0 * self.reg) + 4.0 * f64::EPSILON * (1.0 + f_star.abs());
        let amax = self.max_row_norm();
        let c = amax * amax;
        let cert = ProblemCertificate {
            l_f,
            f_star,
            a: 0.0,
            b: 1.0,
            c,
            f_star_tolerance,
            description: format!(
                "logistic regression, n = {n}, d = {d}, reg = {}. L_f = lambda_max/4 + reg = {l_f}; \
                 f* = {f_star} by damped Newton (final gradient norm {residual:.2e}, \
                 f* error <= ||grad||^2/(2 reg)); g = h_j + reg w with ||h_j|| <= max||a_i||, so \
                 E||g||^2 = ||grad f||^2 + Var(h_j) <= ||grad f||^2 + max||a_i||^2: A = 0, B = 1, \
                 C = max||a_i||^2 = {c}. Data part of every draw is bounded by max||a_i|| = {amax}",
                self.reg
            ),
        };
        Problem::new(ProblemKind::Logistic(self), cert, w_star)
    }
}

//! The Adam recursion without bias correction, the SGD baseline and the
//! trajectory driver.
//!
//! One step from state `(t, w_t, m_{t-1}, v_{t-1})` with gradient `g_t`,
//! where `t = completed + 1`:
//!
//! ```text
//! v_t = beta2_t v_{t-1} + (1 - beta2_t) g_t^2
//! m_t = beta1 m_{t-1} + (1 - beta1) g_t
//! w_{t+1} = w_t - eta_t / (sqrt(v_t) + mu) * m_t
//! ```
//!
//! A run of `T` steps ends at `w_{T+1}`; the trace keeps every `w_t` so
//! callers can pick either end.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::instrumentation::{Instrument, TheoryTrace};
use crate::params::{alpha1, beta2_at, eta_at, HyperParams, ScheduleValue};
use crate::problems::Problem;
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    /// Steps completed.
    pub t: u64,
    pub w: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn init(w1: &[f64], h: &HyperParams) -> Result<Self> {
        check_dim(h.dim, w1.len())?;
        Ok(AdamState {
            t: 0,
            w: w1.to_vec(),
            m: vec![0.0; w1.len()],
            v: vec![h.v; w1.len()],
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Value-semantics step; `self` is left untouched.
    pub fn step(&self, g: &[f64], h: &HyperParams) -> Result<AdamState> {
        let mut next = self.clone();
        next.step_in_place(g, h)?;
        Ok(next)
    }

    pub fn step_in_place(&mut self, g: &[f64], h: &HyperParams) -> Result<ScheduleValue> {
        check_dim(self.w.len(), g.len())?;
        if let Some((index, &value)) = g.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        let tau = self.t + 1;
        let beta2 = beta2_at(tau, h);
        let eta = eta_at(tau, h);
        let b1 = h.beta1;
        for i in 0..g.len() {
            let gi = g[i];
            let v = beta2 * self.v[i] + (1.0 - beta2) * gi * gi;
            let m = b1 * self.m[i] + (1.0 - b1) * gi;
            self.v[i] = v;
            self.m[i] = m;
            self.w[i] -= eta / (v.sqrt() + h.mu) * m;
        }
        self.t = tau;
        Ok(ScheduleValue { t: tau, beta2_t: beta2, eta_t: eta })
    }

    /// Adaptive rate `eta_{v_t}` for `t = self.t`. At `t = 0` this is the
    /// synthetic initial rate `v / alpha_1` in every coordinate.
    pub fn eta_v(&self, h: &HyperParams) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eta_v_into(h, &mut out);
        out
    }

    pub fn eta_v_into(&self, h: &HyperParams, out: &mut [f64]) {
        if self.t == 0 {
            out.iter_mut().for_each(|o| *o = h.v / alpha1(h));
        } else {
            let eta = eta_at(self.t, h);
            for (o, v) in out.iter_mut().zip(&self.v) {
                *o = eta / (v.sqrt() + h.mu);
            }
        }
    }
}

pub fn adam_init(w1: &[f64], h: &HyperParams) -> Result<AdamState> {
    AdamState::init(w1, h)
}

pub fn adam_step(s: &AdamState, g: &[f64], h: &HyperParams) -> Result<AdamState> {
    s.step(g, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub t: u64,
    pub w: Vec<f64>,
}

impl SgdState {
    pub fn new(w1: &[f64]) -> Self {
        SgdState { t: 0, w: w1.to_vec() }
    }
}

pub fn sgd_step(s: &SgdState, g: &[f64], eta_t: f64) -> Result<SgdState> {
    check_dim(s.w.len(), g.len())?;
    if !(eta_t > 0.0) {
        return Err(Error::Precondition(format!("step size {eta_t} must be > 0")));
    }
    Ok(SgdState {
        t: s.t + 1,
        w: s.w.iter().zip(g).map(|(w, g)| w - eta_t * g).collect(),
    })
}

/// What an observer sees after step `schedule.t`.
pub struct StepContext<'a> {
    pub schedule: ScheduleValue,
    /// `(t - 1, w_t, m_{t-1}, v_{t-1})`.
    pub prev: &'a AdamState,
    pub g: &'a [f64],
    /// `(t, w_{t+1}, m_t, v_t)`.
    pub next: &'a AdamState,
}

pub trait Observer {
    fn observe(&mut self, problem: &Problem, h: &HyperParams, ctx: &StepContext<'_>) -> Result<()>;
}

/// Runs `horizon` Adam steps from `w1`, invoking every observer after each
/// step. Returns the final state.
pub fn drive<R: Rng + ?Sized>(
    problem: &Problem,
    h: &HyperParams,
    w1: &[f64],
    horizon: u64,
    rng: &mut R,
    observers: &mut [&mut dyn Observer],
) -> Result<AdamState> {
    check_dim(problem.dim(), w1.len())?;
    let mut prev = AdamState::init(w1, h)?;
    let mut next = prev.clone();
    let mut g = vec![0.0; w1.len()];
    for _ in 0..horizon {
        problem.oracle_into(&prev.w, rng, &mut g);
        next.clone_from(&prev);
        let schedule = next.step_in_place(&g, h).map_err(|e| e.at_step(prev.t + 1))?;
        let ctx = StepContext {
            schedule,
            prev: &prev,
            g: &g,
            next: &next,
        };
        for obs in observers.iter_mut() {
            obs.observe(problem, h, &ctx).map_err(|e| e.at_step(schedule.t))?;
        }
        std::mem::swap(&mut prev, &mut next);
    }
    Ok(prev)
}

/// Where a trajectory starts and which stream it draws from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub experiment_id: String,
    pub seed: u64,
    pub w1: Vec<f64>,
    pub horizon: u64,
}

/// Fully instrumented run: every step is recorded with all analysis
/// quantities. Identical inputs give bitwise-identical traces.
pub fn run_trajectory(problem: &Problem, h: &HyperParams, spec: &RunSpec) -> Result<TheoryTrace> {
    if spec.horizon == 0 {
        return Err(Error::Precondition("horizon must be >= 1".into()));
    }
    let mut rng = stream(&spec.experiment_id, spec.seed, Purpose::Trajectory);
    let mut instrument = Instrument::recording(problem, h);
    let last = drive(problem, h, &spec.w1, spec.horizon, &mut rng, &mut [&mut instrument])?;
    Ok(instrument.finish(problem, h, spec.seed, last))
}

/// SGD with a caller-supplied step schedule. `on_step(t, w_t)` fires before
/// step `t` is taken, for `t = 1..=horizon`.
pub fn drive_sgd<R, E, F>(
    problem: &Problem,
    w1: &[f64],
    horizon: u64,
    rng: &mut R,
    mut eta: E,
    mut on_step: F,
) -> Result<SgdState>
where
    R: Rng + ?Sized,
    E: FnMut(u64) -> f64,
    F: FnMut(u64, &[f64]),
{
    check_dim(problem.dim(), w1.len())?;
    let mut s = SgdState::new(w1);
    let mut g = vec![0.0; w1.len()];
    for t in 1..=horizon {
        on_step(t, &s.w);
        problem.oracle_into(&s.w, rng, &mut g);
        let eta_t = eta(t);
        for (w, gi) in s.w.iter_mut().zip(&g) {
            *w -= eta_t * gi;
        }
        s.t = t;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_noisy_quadratic;
    use proptest::prelude::*;

    fn hp(dim: usize) -> HyperParams {
        HyperParams::default().with_dim(dim)
    }

    #[test]
    fn init_fills_moments() {
        let s = adam_init(&[1.0, 2.0], &hp(2)).unwrap();
        assert_eq!((s.t, s.m.clone(), s.v.clone()), (0, vec![0.0, 0.0], vec![1.0, 1.0]));
        assert!(adam_init(&[0.0, 0.0], &hp(2)).is_ok());
        assert_eq!(
            adam_init(&[1.0], &hp(2)).unwrap_err(),
            Error::DimensionMismatch { expected: 2, got: 1 }
        );
    }

    #[test]
    fn zero_gradient_from_init_is_a_fixed_point() {
        let h = hp(3);
        let s = adam_init(&[1.0, -2.0, 0.5], &h).unwrap();
        let n = adam_step(&s, &[0.0; 3], &h).unwrap();
        assert_eq!(n.m, vec![0.0; 3]);
        assert_eq!(n.w, s.w);
        assert_eq!(s.t, 0, "input left untouched");
    }

    #[test]
    fn single_step_hand_simulation() {
        let h = HyperParams { beta1: 0.0, alpha0: 0.5, delta: 0.0, gamma: 1.0, mu: 0.0, v: 1.0, dim: 1, ..Default::default() };
        let s = adam_init(&[1.0], &h).unwrap();
        let n = adam_step(&s, &[2.0], &h).unwrap();
        assert_eq!(n.v, vec![2.5]);
        assert_eq!(n.m, vec![2.0]);
        let want = 1.0 - 2.0 / 2.5f64.sqrt();
        assert!((n.w[0] - want).abs() < 1e-15);
        assert!((n.w[0] - (-0.264911)).abs() < 1e-6);
    }

    #[test]
    fn momentum_tracks_constant_gradient_monotonically() {
        let eps = 0.01;
        let h = HyperParams { beta1: 1.0 - eps, ..hp(1) };
        let c = 3.0;
        let mut s = adam_init(&[0.0], &h).unwrap();
        let mut prev = 0.0;
        for k in 1..=2000 {
            s = adam_step(&s, &[c], &h).unwrap();
            // Geometric series: m_k = c (1 - beta1^k).
            let want = c * (1.0 - (1.0 - eps).powi(k));
            assert!((s.m[0] - want).abs() < 1e-12);
            assert!(s.m[0] > prev);
            prev = s.m[0];
        }
        assert!((c - s.m[0]) < 1e-7);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let h = hp(2);
        let s = adam_init(&[0.0, 0.0], &h).unwrap();
        assert!(matches!(
            adam_step(&s, &[1.0, f64::NAN], &h),
            Err(Error::NonFiniteGradient { index: 1, .. })
        ));
        assert!(adam_step(&s, &[1.0], &h).is_err());
    }

    #[test]
    fn sgd_examples() {
        let s = SgdState { t: 0, w: vec![1.0, 1.0] };
        assert_eq!(sgd_step(&s, &[0.0, 0.0], 0.5).unwrap().w, s.w);
        let n = sgd_step(&s, &[1.0, -1.0], 0.5).unwrap();
        assert_eq!((n.t, n.w), (1, vec![0.5, 1.5]));
        assert!(sgd_step(&s, &[1.0], 0.5).is_err());
    }

    #[test]
    fn sgd_contraction_closed_form() {
        let p = make_noisy_quadratic(vec![1.0], 0.0).unwrap();
        let mut rng = stream("sgd", 0, Purpose::Trajectory);
        let w1 = 3.0;
        drive_sgd(&p, &[w1], 40, &mut rng, |_| 0.5, |t, w| {
            let want = w1 * 0.5f64.powi(t as i32 - 1);
            assert!((w[0] - want).abs() < 1e-15 * w1);
        })
        .unwrap();
    }

    #[test]
    fn trajectory_reproducible_bitwise() {
        let p = make_noisy_quadratic(vec![1.0, 2.0, 5.0], 0.7).unwrap();
        let h = hp(3);
        let spec = RunSpec { experiment_id: "r".into(), seed: 4, w1: vec![1.0; 3], horizon: 200 };
        let a = run_trajectory(&p, &h, &spec).unwrap();
        let b = run_trajectory(&p, &h, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_step_trace_matches_adam_step() {
        let p = make_noisy_quadratic(vec![1.0, 2.0], 0.5).unwrap();
        let h = hp(2);
        let spec = RunSpec { experiment_id: "r".into(), seed: 9, w1: vec![1.0, -1.0], horizon: 1 };
        let tr = run_trajectory(&p, &h, &spec).unwrap();
        assert_eq!(tr.records.len(), 1);
        let mut rng = stream("r", 9, Purpose::Trajectory);
        let g = p.oracle_sample(&spec.w1, &mut rng).unwrap();
        let want = adam_step(&adam_init(&spec.w1, &h).unwrap(), &g, &h).unwrap();
        assert_eq!(tr.records[0].g, g);
        assert_eq!(tr.final_state, want);
    }

    #[test]
    fn noiseless_quadratic_converges() {
        let p = make_noisy_quadratic(crate::problems::log_spaced(0.1, 10.0, 10), 0.0).unwrap();
        let h = hp(10);
        let mut rng = stream("conv", 0, Purpose::Trajectory);
        let last = drive(&p, &h, &[1.0; 10], 10_000, &mut rng, &mut []).unwrap();
        let g = p.grad(&last.w).unwrap();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "{norm}");
    }

    proptest! {
        #[test]
        fn zero_momentum_is_normalized_sgd(
            g in proptest::collection::vec(-5.0f64..5.0, 3),
            w in proptest::collection::vec(-5.0f64..5.0, 3),
            steps in 0u64..20,
        ) {
            let h = HyperParams { beta1: 0.0, ..hp(3) };
            let mut s = adam_init(&w, &h).unwrap();
            for _ in 0..steps {
                s = adam_step(&s, &[0.1, -0.2, 0.3], &h).unwrap();
            }
            let n = adam_step(&s, &g, &h).unwrap();
            let eta = eta_at(s.t + 1, &h);
            for i in 0..3 {
                let want = -eta * g[i] / (n.v[i].sqrt() + h.mu);
                prop_assert!((n.w[i] - s.w[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
                prop_assert!(n.v[i] > 0.0);
            }
            // Replay equality: the step is a pure function.
            prop_assert_eq!(adam_step(&s, &g, &h).unwrap(), n);
        }

        #[test]
        fn zero_gradient_moves_only_by_momentum(m in proptest::collection::vec(-1.0f64..1.0, 2)) {
            let h = hp(2);
            let s = AdamState { t: 5, w: vec![0.3, -0.4], m: m.clone(), v: vec![0.5, 2.0] };
            let n = adam_step(&s, &[0.0, 0.0], &h).unwrap();
            let eta = eta_at(6, &h);
            for i in 0..2 {
                let want = s.w[i] - eta / (n.v[i].sqrt() + h.mu) * h.beta1 * m[i];
                prop_assert!((n.w[i] - want).abs() < 1e-14);
            }
        }
    }
}

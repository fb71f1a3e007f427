//! Auxiliary sequences of the convergence analysis, computed alongside a
//! trajectory by an observer that never touches the optimizer state or
//! the trajectory stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizer::{AdamState, Observer, StepContext};
use crate::params::{alpha1, pow_t, HyperParams};
use crate::problems::{norm_sq, Problem, ProblemCertificate};

/// Weight below which tail terms of the realized gap sum are dropped.
pub const TAIL_CUT: f64 = 1e-12;

/// Default branch count for conditional-mean estimates.
pub const DEFAULT_BRANCHES: usize = 10_000;

/// Everything recorded for step `t`. Vectors are indexed by coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: u64,
    pub eta_t: f64,
    pub beta2_t: f64,
    /// `w_t`, the point the gradient was drawn at.
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// `eta_{v_t}`.
    pub eta_v: Vec<f64>,
    /// `eta_{v_{t-1}} - eta_{v_t}`.
    pub delta: Vec<f64>,
    /// `v + sum_{k<=t} g_k^2`.
    pub s_row: Vec<f64>,
    pub u: Vec<f64>,
    /// Exact gradient at `w_t`.
    pub grad_w: Vec<f64>,
    pub f_w: f64,
    pub grad_norm_sq: f64,
    pub f_u: f64,
    pub sum_eta_v: f64,
    pub s_total: f64,
    pub sigma_v: f64,
    pub delta_sum: f64,
    pub zeta_sum: f64,
    pub fhat: f64,
    pub lambda_phi1: f64,
    pub lambda_phi4: f64,
    pub m1: f64,
    /// `min_i (t^gamma v_{t,i} - alpha_1 S_{t,i})`.
    pub min_margin_prop2: f64,
    /// `pi_hat_t`; filled in once the full trace is known.
    pub pi_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiHatSeries {
    pub horizon: u64,
    pub tail_cut: f64,
    /// `values[t]` for `t = 0..=horizon`; `values[0] = 1`. Underflows to
    /// zero on long traces, so moments should use `log_values`.
    pub values: Vec<f64>,
    pub log_values: Vec<f64>,
    /// `dbar_realized[k - 1]` for `k = 1..=horizon`.
    pub dbar_realized: Vec<f64>,
    /// `D_1 / (1 - sqrt(beta1)) + 1`.
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEstimate {
    pub t: u64,
    pub k: usize,
    pub cond_mean_m1: f64,
    pub cond_mean_delta: Vec<f64>,
    pub cond_mean_f_u_next: f64,
    pub se_m1: f64,
    pub se_delta: Vec<f64>,
    pub se_f_u_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryTrace {
    pub seed: u64,
    pub hyper: HyperParams,
    pub certificate: ProblemCertificate,
    pub initial: AdamState,
    /// Synthetic `eta_{v_0} = (v / alpha_1) 1`.
    pub eta_v0: Vec<f64>,
    pub records: Vec<StepDiagnostics>,
    /// State after the last step, holding `w_{T+1}`.
    pub final_state: AdamState,
    pub pi_hat: PiHatSeries,
}

impl TheoryTrace {
    pub fn horizon(&self) -> u64 {
        self.records.len() as u64
    }

    /// The state step `t` starts from: `(t - 1, w_t, m_{t-1}, v_{t-1})`.
    pub fn state_before(&self, t: u64) -> Result<AdamState> {
        let idx = self.index_of(t)?;
        if idx == 0 {
            return Ok(self.initial.clone());
        }
        let prev = &self.records[idx - 1];
        Ok(AdamState {
            t: t - 1,
            w: self.records[idx].w.clone(),
            m: prev.m.clone(),
            v: prev.v.clone(),
        })
    }

    fn index_of(&self, t: u64) -> Result<usize> {
        if t == 0 || t > self.horizon() {
            return Err(Error::IncompleteTrace(format!(
                "step {t} outside 1..={}",
                self.horizon()
            )));
        }
        Ok((t - 1) as usize)
    }

    /// `eta_{v_{t-1}}` for the record at `idx`.
    pub fn prev_eta_v(&self, idx: usize) -> &[f64] {
        if idx == 0 {
            &self.eta_v0
        } else {
            &self.records[idx - 1].eta_v
        }
    }

    pub fn prev_m(&self, idx: usize) -> &[f64] {
        if idx == 0 {
            &self.initial.m
        } else {
            &self.records[idx - 1].m
        }
    }

    pub fn prev_v(&self, idx: usize) -> &[f64] {
        if idx == 0 {
            &self.initial.v
        } else {
            &self.records[idx - 1].v
        }
    }

    pub fn prev_s_row(&self, idx: usize) -> Vec<f64> {
        if idx == 0 {
            vec![self.hyper.v; self.initial.dim()]
        } else {
            self.records[idx - 1].s_row.clone()
        }
    }

    /// `w_{t+1}` for the record at `idx`.
    pub fn next_w(&self, idx: usize) -> &[f64] {
        match self.records.get(idx + 1) {
            Some(r) => &r.w,
            None => &self.final_state.w,
        }
    }

    /// `u_{t+1}` for the record at `idx`.
    pub fn next_u(&self, idx: usize) -> Vec<f64> {
        match self.records.get(idx + 1) {
            Some(r) => r.u.clone(),
            None => u_aux(&self.final_state.w, &self.records[idx].w, self.hyper.beta1),
        }
    }

    /// Checks that steps run `1..=T` without gaps.
    pub fn ensure_complete(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::IncompleteTrace("no records".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.t != i as u64 + 1 {
                return Err(Error::IncompleteTrace(format!(
                    "record {i} has step {}, expected {}",
                    r.t,
                    i + 1
                )));
            }
        }
        if self.final_state.t != self.horizon() {
            return Err(Error::IncompleteTrace("final state does not match horizon".into()));
        }
        Ok(())
    }
}

pub fn u_aux(w_t: &[f64], w_prev: &[f64], beta1: f64) -> Vec<f64> {
    w_t.iter()
        .zip(w_prev)
        .map(|(w, p)| (w - beta1 * p) / (1.0 - beta1))
        .collect()
}

/// `eta_{v_{t-1}} - eta_{v_t}`; fails if a component is negative beyond
/// rounding.
pub fn delta_gap(eta_v_prev: &[f64], eta_v_cur: &[f64]) -> Result<Vec<f64>> {
    check_dim(eta_v_prev.len(), eta_v_cur.len())?;
    let mut out = Vec::with_capacity(eta_v_prev.len());
    for (i, (p, c)) in eta_v_prev.iter().zip(eta_v_cur).enumerate() {
        let d = p - c;
        if d < -1e-12 * (1.0 + p.abs()) {
            return Err(Error::NegativeGap { index: i, value: d });
        }
        out.push(d);
    }
    Ok(out)
}

pub fn accumulate_s(s_prev: &[f64], g: &[f64]) -> Vec<f64> {
    s_prev.iter().zip(g).map(|(s, g)| s + g * g).collect()
}

pub fn zeta_sum(eta_v_prev: &[f64], grad_w: &[f64]) -> f64 {
    eta_v_prev.iter().zip(grad_w).map(|(e, g)| e * g * g).sum()
}

pub fn lyapunov_fhat(f_u: f64, f_star: f64, eta_v_prev: &[f64], c: f64) -> f64 {
    f_u - f_star + c * eta_v_prev.iter().sum::<f64>()
}

pub fn lambda_phi(g: &[f64], s_prev_total: f64, t: u64, phi: f64) -> f64 {
    norm_sq(g) / (((t + 1) as f64).powf(phi) * s_prev_total.sqrt())
}

pub fn m_term1(eta_v_prev: &[f64], grad_w: &[f64], g: &[f64]) -> f64 {
    eta_v_prev
        .iter()
        .zip(grad_w)
        .zip(g)
        .map(|((e, gw), g)| e * gw * (gw - g))
        .sum()
}

/// `D_1 = 2 / (1 - sqrt(beta1)) (A + 2 L_f B)(L_f + 1)`.
pub fn d1_constant(h: &HyperParams, cert: &ProblemCertificate) -> f64 {
    2.0 / (1.0 - h.beta1.sqrt()) * cert.abc_slope() * (cert.l_f + 1.0)
}

/// Realized surrogate of the product of inverse gap factors, from the
/// per-step gap sums `sum_i Delta_{t,i}`.
pub fn pi_hat(delta_sums: &[f64], h: &HyperParams, cert: &ProblemCertificate) -> PiHatSeries {
    let q = h.beta1.sqrt();
    let n = delta_sums.len();
    let factor = d1_constant(h, cert) / (1.0 - q) + 1.0;
    let mut dbar = vec![0.0; n];
    if q == 0.0 {
        dbar.copy_from_slice(delta_sums);
    } else {
        // R_k = D_k + q R_{k+1} is the untruncated tail; subtracting
        // q^W R_{k+W} keeps exactly the terms with weight >= TAIL_CUT.
        let window = (TAIL_CUT.ln() / q.ln()).floor() as usize + 1;
        let qw = q.powi(window as i32);
        let mut tail = vec![0.0; n + 1];
        for k in (0..n).rev() {
            tail[k] = delta_sums[k] + q * tail[k + 1];
        }
        for k in 0..n {
            let cut = if k + window <= n { qw * tail[k + window] } else { 0.0 };
            dbar[k] = (tail[k] - cut).max(0.0);
        }
    }
    let mut log_values = Vec::with_capacity(n + 1);
    log_values.push(0.0);
    let mut acc = 0.0;
    for d in &dbar {
        acc -= (factor * d).ln_1p();
        log_values.push(acc);
    }
    PiHatSeries {
        horizon: n as u64,
        tail_cut: TAIL_CUT,
        values: log_values.iter().map(|l| l.exp()).collect(),
        log_values,
        dbar_realized: dbar,
        factor,
    }
}

/// Draws `k` gradient branches at the frozen state `s` (the state step
/// `s.t + 1` starts from), applies one hypothetical step per branch and
/// reports branch means with standard errors.
pub fn branch_conditional<R: Rng + ?Sized>(
    p: &Problem,
    s: &AdamState,
    h: &HyperParams,
    k: usize,
    rng: &mut R,
) -> Result<BranchEstimate> {
    let mut acc = BranchAccumulator::new(s.dim());
    for_each_branch(p, s, h, k, rng, |b| {
        acc.m1.push(b.m1);
        acc.f.push(p.loss_unchecked(b.u_next));
        for (a, d) in acc.delta.iter_mut().zip(b.delta) {
            a.push(*d);
        }
    })?;
    let (cond_mean_m1, se_m1) = acc.m1.mean_se();
    let (cond_mean_f_u_next, se_f_u_next) = acc.f.mean_se();
    let (cond_mean_delta, se_delta) = acc.delta.iter().map(|a| a.mean_se()).unzip();
    Ok(BranchEstimate {
        t: s.t + 1,
        k,
        cond_mean_m1,
        cond_mean_delta,
        cond_mean_f_u_next,
        se_m1,
        se_delta,
        se_f_u_next,
    })
}

/// One hypothetical step from a frozen state.
pub(crate) struct Branch<'a> {
    pub g: &'a [f64],
    pub eta_v: &'a [f64],
    pub delta: &'a [f64],
    pub u_next: &'a [f64],
    pub m1: f64,
}

pub(crate) fn for_each_branch<R, F>(
    p: &Problem,
    s: &AdamState,
    h: &HyperParams,
    k: usize,
    rng: &mut R,
    mut f: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&Branch<'_>),
{
    if k < 2 {
        return Err(Error::Precondition(format!("branch count {k} must be >= 2")));
    }
    check_dim(p.dim(), s.dim())?;
    let d = s.dim();
    let eta_v_prev = s.eta_v(h);
    let grad_w = p.grad(&s.w)?;
    let mut g = vec![0.0; d];
    let mut next = s.clone();
    let mut eta_v = vec![0.0; d];
    let mut delta = vec![0.0; d];
    let mut u_next = vec![0.0; d];
    for _ in 0..k {
        p.oracle_into(&s.w, rng, &mut g);
        next.clone_from(s);
        next.step_in_place(&g, h)?;
        next.eta_v_into(h, &mut eta_v);
        for i in 0..d {
            delta[i] = eta_v_prev[i] - eta_v[i];
            u_next[i] = (next.w[i] - h.beta1 * s.w[i]) / (1.0 - h.beta1);
        }
        let m1 = m_term1(&eta_v_prev, &grad_w, &g);
        f(&Branch {
            g: &g,
            eta_v: &eta_v,
            delta: &delta,
            u_next: &u_next,
            m1,
        });
    }
    Ok(())
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Default)]
pub(crate) struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Sample standard deviation.
    pub fn sd(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }

    pub fn mean_se(&self) -> (f64, f64) {
        (self.mean, self.sd() / (self.n.max(1) as f64).sqrt())
    }
}

struct BranchAccumulator {
    m1: Welford,
    f: Welford,
    delta: Vec<Welford>,
}

impl BranchAccumulator {
    fn new(d: usize) -> Self {
        BranchAccumulator {
            m1: Welford::default(),
            f: Welford::default(),
            delta: vec![Welford::default(); d],
        }
    }
}

/// Observer that records a [`StepDiagnostics`] per step.
pub struct Instrument {
    certificate: ProblemCertificate,
    alpha1: f64,
    eta_v_prev: Vec<f64>,
    eta_v0: Vec<f64>,
    s_row: Vec<f64>,
    initial: Option<AdamState>,
    records: Vec<StepDiagnostics>,
}

impl Instrument {
    pub fn recording(problem: &Problem, h: &HyperParams) -> Self {
        let d = problem.dim();
        let eta_v0 = vec![h.v / alpha1(h); d];
        Instrument {
            certificate: problem.certificate().clone(),
            alpha1: alpha1(h),
            eta_v_prev: eta_v0.clone(),
            eta_v0,
            s_row: vec![h.v; d],
            initial: None,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[StepDiagnostics] {
        &self.records
    }

    /// Assembles the trace. `last` is the state after the final step.
    pub fn finish(self, problem: &Problem, h: &HyperParams, seed: u64, last: AdamState) -> TheoryTrace {
        let initial = self
            .initial
            .unwrap_or_else(|| AdamState::init(&last.w, h).expect("dimension checked by drive"));
        let sums: Vec<f64> = self.records.iter().map(|r| r.delta_sum).collect();
        let pi = pi_hat(&sums, h, problem.certificate());
        let mut records = self.records;
        for (r, v) in records.iter_mut().zip(&pi.values[1..]) {
            r.pi_hat = *v;
        }
        TheoryTrace {
            seed,
            hyper: h.clone(),
            certificate: self.certificate,
            initial,
            eta_v0: self.eta_v0,
            records,
            final_state: last,
            pi_hat: pi,
        }
    }
}

impl Observer for Instrument {
    fn observe(&mut self, problem: &Problem, h: &HyperParams, ctx: &StepContext<'_>) -> Result<()> {
        let prev = ctx.prev;
        let next = ctx.next;
        let t = ctx.schedule.t;
        if self.initial.is_none() {
            self.initial = Some(prev.clone());
        }
        let cert = &self.certificate;
        let eta_v = next.eta_v(h);
        let delta = delta_gap(&self.eta_v_prev, &eta_v)?;
        let s_prev_total: f64 = self.s_row.iter().sum();
        let s_row = accumulate_s(&self.s_row, ctx.g);
        let w_prev = self.records.last().map(|r| r.w.as_slice()).unwrap_or(&prev.w);
        let u = if t == 1 { prev.w.clone() } else { u_aux(&prev.w, w_prev, h.beta1) };
        let grad_w = problem.grad(&prev.w)?;
        let f_w = problem.loss_unchecked(&prev.w);
        let f_u = problem.loss_unchecked(&u);
        let tg = pow_t(t, h.gamma);
        let min_margin_prop2 = next
            .v
            .iter()
            .zip(&s_row)
            .map(|(v, s)| tg * v - self.alpha1 * s)
            .fold(f64::INFINITY, f64::min);
        let rec = StepDiagnostics {
            t,
            eta_t: ctx.schedule.eta_t,
            beta2_t: ctx.schedule.beta2_t,
            f_w,
            grad_norm_sq: norm_sq(&grad_w),
            f_u,
            sum_eta_v: eta_v.iter().sum(),
            s_total: s_row.iter().sum(),
            sigma_v: next.v.iter().sum(),
            delta_sum: delta.iter().sum(),
            zeta_sum: zeta_sum(&self.eta_v_prev, &grad_w),
            fhat: lyapunov_fhat(f_u, cert.f_star, &self.eta_v_prev, cert.c),
            lambda_phi1: lambda_phi(ctx.g, s_prev_total, t, 1.0),
            lambda_phi4: lambda_phi(ctx.g, s_prev_total, t, 4.0),
            m1: m_term1(&self.eta_v_prev, &grad_w, ctx.g),
            min_margin_prop2,
            pi_hat: 1.0,
            w: prev.w.clone(),
            g: ctx.g.to_vec(),
            m: next.m.clone(),
            v: next.v.clone(),
            eta_v: eta_v.clone(),
            delta,
            s_row: s_row.clone(),
            u,
            grad_w,
        };
        self.records.push(rec);
        self.eta_v_prev = eta_v;
        self.s_row = s_row;
        Ok(())
    }
}

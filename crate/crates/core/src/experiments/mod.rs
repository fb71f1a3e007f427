//! Seed sweeps probing the rate, last-iterate, mean-convergence,
//! summability and moment conclusions at desk scale.
//!
//! A sweep runs one trajectory per seed with a lightweight observer that
//! keeps only checkpoint values. Aggregation is a single-threaded reduction
//! over seed-sorted results, so reports are bit-reproducible regardless of
//! thread count.

pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::instrumentation::pi_hat;
use crate::optimizer::{drive, drive_sgd, Observer, StepContext};
use crate::params::HyperParams;
use crate::problems::{norm_sq, Problem, ProblemSpec};
use crate::rng::{stream, Purpose};

pub use stats::{fit_loglog_slope, summarize, SlopeFit, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Rate,
    LastIterate,
    L1,
    Summability,
    Moment,
}

impl Probe {
    pub const ALL: [Probe; 5] = [Probe::Rate, Probe::LastIterate, Probe::L1, Probe::Summability, Probe::Moment];

    pub fn as_str(&self) -> &'static str {
        match self {
            Probe::Rate => "rate",
            Probe::LastIterate => "last_iterate",
            Probe::L1 => "l1",
            Probe::Summability => "summability",
            Probe::Moment => "moment",
        }
    }

    pub fn parse(s: &str) -> Option<Probe> {
        Probe::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// Minimum `(horizon, seeds)` for a verdict to count.
    pub fn acceptance_scale(&self) -> (u64, usize) {
        match self {
            Probe::Rate => (1 << 14, 20),
            Probe::LastIterate => (1, 20),
            Probe::L1 => (1, 100),
            Probe::Summability => (1, 1),
            Probe::Moment => (1, 50),
        }
    }
}

/// Thresholds fixed once from pilot sweeps and kept as regression anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub eps_last: f64,
    pub eps_l1: f64,
}

/// Pilot-calibrated default for the last-iterate probe.
pub const EPS_LAST: f64 = 5e-2;
/// Pilot-calibrated default for the mean last-iterate probe.
pub const EPS_L1: f64 = 3e-2;
pub const THRESHOLD_PROVENANCE: &str =
    "pilot sweep on the default noisy quadratic (d = 10, sigma = 1, delta = 0.25, gamma = 1.25), frozen";

/// Allowed deviation of a fitted slope from its target.
pub const SLOPE_TOL: f64 = 0.1;
/// Allowed relative drift of the reciprocal-product moments.
pub const MOMENT_DRIFT_TOL: f64 = 0.1;
/// Allowed relative change of the seed-mean running sup between half and
/// all seeds.
pub const SUP_STABILITY_TOL: f64 = 0.1;
/// Allowed final-interval increment of the summability partial sums.
pub const SUMMABILITY_TOL: f64 = 0.01;

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { eps_last: EPS_LAST, eps_l1: EPS_L1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub problem: ProblemSpec,
    pub hyper: HyperParams,
    /// Every coordinate of `w_1`.
    pub init: f64,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<u64>,
    pub probes: Vec<Probe>,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Noisy-quadratic config with powers-of-two checkpoints.
    pub fn quadratic(delta: f64, gamma: f64, horizon: u64, seeds: usize) -> Self {
        let spec = ProblemSpec::default_quadratic();
        let d = match &spec {
            ProblemSpec::Quadratic { eigenvalues, .. } => eigenvalues.len(),
            _ => unreachable!(),
        };
        let mut hyper = HyperParams::default().with_dim(d).with_schedule(delta, gamma);
        if gamma > 2.0 * delta + 1.0 {
            hyper.region = crate::params::ScheduleRegion::Extended;
        }
        ExperimentConfig {
            experiment_id: "experiment".into(),
            problem: spec,
            hyper,
            init: 1.0,
            horizon,
            seeds: (0..seeds as u64).collect(),
            checkpoints: pow2_checkpoints(horizon),
            probes: Probe::ALL.to_vec(),
            thresholds: Thresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.clone().validate()?;
        if self.horizon == 0 {
            return Err(Error::ConstraintViolation("horizon must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::ConstraintViolation("seed list is empty".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::ConstraintViolation("seeds must be distinct".into()));
        }
        if self.checkpoints.is_empty()
            || self.checkpoints[0] == 0
            || *self.checkpoints.last().unwrap() > self.horizon
            || self.checkpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::ConstraintViolation(
                "checkpoints must be strictly increasing within [1, horizon]".into(),
            ));
        }
        Ok(())
    }

    fn sorted_seeds(&self) -> Vec<u64> {
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s
    }

    /// Whether a probe's verdict is below its acceptance scale.
    pub fn below_scale(&self, probe: Probe) -> bool {
        let (t, n) = probe.acceptance_scale();
        self.horizon < t || self.seeds.len() < n
    }
}

/// `1, 2, 4, ...` up to `horizon`, with `horizon` itself appended.
pub fn pow2_checkpoints(horizon: u64) -> Vec<u64> {
    geometric_checkpoints(horizon, 1)
}

/// `per_octave` points per doubling (rounded, deduplicated), always ending
/// at `horizon`.
pub fn geometric_checkpoints(horizon: u64, per_octave: u32) -> Vec<u64> {
    let mut out = Vec::new();
    let per = per_octave.max(1) as f64;
    let mut k = 0u32;
    loop {
        let t = 2f64.powf(k as f64 / per).round() as u64;
        if t > horizon {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        k += 1;
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Values recorded for one seed at one checkpoint `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointValues {
    pub t: u64,
    /// `(1/t) sum_{k<=t} ||grad f(w_k)||^2`.
    pub avg_sq_grad: f64,
    /// `||grad f(w_t)||`.
    pub grad_norm: f64,
    /// `max_{k<=t} ||grad f(w_k)||`.
    pub sup_grad_norm: f64,
    /// `sum_{k<=t} eta_k ||grad f(w_k)||^2`.
    pub sum_eta_grad_sq: f64,
    pub sigma_v: f64,
    /// `max_{1<=k<=t} sum_i v_{k,i}`.
    pub sup_sigma_v: f64,
    pub s_total: f64,
    /// `ln pi_hat_t`, when the moment probe is enabled.
    pub log_pi_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSeries {
    pub seed: u64,
    pub values: Vec<CheckpointValues>,
    /// Step at which the running sup of `||grad f||` was last raised.
    pub sup_grad_t: u64,
}

struct SweepObserver<'a> {
    checkpoints: &'a [u64],
    next: usize,
    grad: Vec<f64>,
    sum_sq: f64,
    sum_eta_sq: f64,
    sup_grad: f64,
    sup_grad_t: u64,
    sup_sigma_v: f64,
    s_total: f64,
    deltas: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    out: Vec<CheckpointValues>,
}

impl<'a> SweepObserver<'a> {
    fn new(p: &Problem, h: &HyperParams, checkpoints: &'a [u64], keep_deltas: bool, w1: &[f64]) -> Self {
        let d = p.dim();
        let deltas = keep_deltas.then(|| {
            let s = crate::optimizer::AdamState::init(w1, h).expect("dimension checked");
            (s.eta_v(h), vec![0.0; d], Vec::new())
        });
        SweepObserver {
            checkpoints,
            next: 0,
            grad: vec![0.0; d],
            sum_sq: 0.0,
            sum_eta_sq: 0.0,
            sup_grad: f64::NEG_INFINITY,
            sup_grad_t: 0,
            sup_sigma_v: f64::NEG_INFINITY,
            s_total: d as f64 * h.v,
            deltas,
            out: Vec::with_capacity(checkpoints.len()),
        }
    }
}

impl Observer for SweepObserver<'_> {
    fn observe(&mut self, p: &Problem, h: &HyperParams, ctx: &StepContext<'_>) -> Result<()> {
        let t = ctx.schedule.t;
        p.grad_into(&ctx.prev.w, &mut self.grad);
        let gn2 = norm_sq(&self.grad);
        self.sum_sq += gn2;
        self.sum_eta_sq += ctx.schedule.eta_t * gn2;
        let gn = gn2.sqrt();
        if gn > self.sup_grad {
            self.sup_grad = gn;
            self.sup_grad_t = t;
        }
        self.s_total += norm_sq(ctx.g);
        let sigma_v: f64 = ctx.next.v.iter().sum();
        self.sup_sigma_v = self.sup_sigma_v.max(sigma_v);
        if let Some((prev, cur, sums)) = self.deltas.as_mut() {
            ctx.next.eta_v_into(h, cur);
            sums.push(prev.iter().zip(cur.iter()).map(|(a, b)| a - b).sum());
            std::mem::swap(prev, cur);
        }
        if self.checkpoints.get(self.next) == Some(&t) {
            self.out.push(CheckpointValues {
                t,
                avg_sq_grad: self.sum_sq / t as f64,
                grad_norm: gn,
                sup_grad_norm: self.sup_grad,
                sum_eta_grad_sq: self.sum_eta_sq,
                sigma_v,
                sup_sigma_v: self.sup_sigma_v,
                s_total: self.s_total,
                log_pi_hat: None,
            });
            self.next += 1;
        }
        Ok(())
    }
}

/// Runs one trajectory per seed and returns seed-sorted checkpoint series.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SeedSeries>> {
    cfg.validate()?;
    let p = cfg.problem.build()?;
    crate::error::check_dim(p.dim(), cfg.hyper.dim)?;
    run_sweep_on(&p, cfg, exec)
}

pub fn run_sweep_on(p: &Problem, cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<SeedSeries>> {
    let keep = cfg.probes.contains(&Probe::Moment);
    let h = &cfg.hyper;
    let w1 = vec![cfg.init; p.dim()];
    map_ordered(exec, &cfg.sorted_seeds(), |&seed| {
        let mut rng = stream(&cfg.experiment_id, seed, Purpose::Trajectory);
        let mut obs = SweepObserver::new(p, h, &cfg.checkpoints, keep, &w1);
        drive(p, h, &w1, cfg.horizon, &mut rng, &mut [&mut obs])?;
        let mut values = obs.out;
        if let Some((_, _, sums)) = obs.deltas {
            let pi = pi_hat(&sums, h, p.certificate());
            for v in values.iter_mut() {
                v.log_pi_hat = Some(pi.log_values[v.t as usize]);
            }
        }
        Ok(SeedSeries { seed, values, sup_grad_t: obs.sup_grad_t })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Hypotheses unmet or below acceptance scale.
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub name: String,
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub probe: Probe,
    pub verdict: Verdict,
    pub below_acceptance_scale: bool,
    pub metrics: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub thresholds: Vec<Threshold>,
    pub notes: Vec<String>,
}

impl ProbeOutcome {
    fn new(probe: Probe) -> Self {
        ProbeOutcome {
            probe,
            verdict: Verdict::Informational,
            below_acceptance_scale: false,
            metrics: BTreeMap::new(),
            fits: BTreeMap::new(),
            thresholds: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn threshold(&mut self, name: &str, value: f64, provenance: &str) {
        self.thresholds.push(Threshold { name: name.into(), value, provenance: provenance.into() });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub t: u64,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub name: String,
    pub points: Vec<CheckpointSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub problem: ProblemSpec,
    pub hyper: HyperParams,
    pub init: f64,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<u64>,
    pub below_acceptance_scale: bool,
    pub series: Vec<SeriesStats>,
    pub probes: Vec<ProbeOutcome>,
}

impl ExperimentReport {
    pub fn outcome(&self, probe: Probe) -> Option<&ProbeOutcome> {
        self.probes.iter().find(|o| o.probe == probe)
    }

    /// No probe failed. Informational verdicts do not count against it.
    pub fn passed(&self) -> bool {
        self.probes.iter().all(|o| o.verdict != Verdict::Fail)
    }
}

type Extract = fn(&CheckpointValues) -> f64;

const SERIES: [(&str, Extract); 7] = [
    ("avg_sq_grad", |v| v.avg_sq_grad),
    ("grad_norm", |v| v.grad_norm),
    ("sup_grad_norm", |v| v.sup_grad_norm),
    ("sum_eta_grad_sq", |v| v.sum_eta_grad_sq),
    ("sigma_v", |v| v.sigma_v),
    ("s_total_pow_3_4", |v| v.s_total.powf(0.75)),
    ("log_pi_hat_inv", |v| v.log_pi_hat.map(|l| -l).unwrap_or(f64::NAN)),
];

fn column(series: &[SeedSeries], j: usize, f: Extract) -> Vec<f64> {
    series.iter().map(|s| f(&s.values[j])).collect()
}

fn mean_column(series: &[SeedSeries], j: usize, f: Extract) -> f64 {
    stats::mean(&column(series, j, f))
}

/// Checkpoint indices in `[T/10, T]`.
fn final_decade(cfg: &ExperimentConfig) -> Vec<usize> {
    let lo = cfg.horizon as f64 / 10.0;
    cfg.checkpoints
        .iter()
        .enumerate()
        .filter(|(_, t)| **t as f64 >= lo)
        .map(|(j, _)| j)
        .collect()
}

fn check_complete(cfg: &ExperimentConfig, series: &[SeedSeries]) -> Result<()> {
    if series.len() != cfg.seeds.len() {
        return Err(Error::IncompleteTrace(format!("{} series for {} seeds", series.len(), cfg.seeds.len())));
    }
    if series.iter().any(|s| s.values.len() != cfg.checkpoints.len()) {
        return Err(Error::IncompleteTrace("series missing checkpoints".into()));
    }
    Ok(())
}

fn gate(cfg: &ExperimentConfig, probe: Probe, enforce: bool) -> Result<bool> {
    let (t, n) = probe.acceptance_scale();
    if enforce {
        if cfg.seeds.len() < n {
            return Err(Error::InsufficientSeeds { need: n, got: cfg.seeds.len() });
        }
        if cfg.horizon < t {
            return Err(Error::HorizonTooShort { need: t, got: cfg.horizon });
        }
    }
    Ok(cfg.horizon < t || cfg.seeds.len() < n)
}

fn require_decay_hypotheses(h: &HyperParams, what: &str) -> Result<()> {
    if h.gamma > 1.0 && h.delta > 0.0 {
        Ok(())
    } else {
        Err(Error::ConstraintViolation(format!(
            "{what} requires gamma > 1 and delta > 0 (got gamma = {}, delta = {})",
            h.gamma, h.delta
        )))
    }
}

fn require_rate_delta(h: &HyperParams) -> Result<()> {
    if h.delta == 0.0 || (h.delta > 0.0 && h.delta < 0.5) {
        Ok(())
    } else {
        Err(Error::ConstraintViolation(format!("rate probe needs delta in {{0}} U (0, 1/2), got {}", h.delta)))
    }
}

pub fn evaluate_rate(cfg: &ExperimentConfig, series: &[SeedSeries], enforce: bool) -> Result<ProbeOutcome> {
    let h = &cfg.hyper;
    require_rate_delta(h)?;
    let below = gate(cfg, Probe::Rate, enforce)?;
    check_complete(cfg, series)?;
    let mut o = ProbeOutcome::new(Probe::Rate);
    o.below_acceptance_scale = below;
    let pts: Vec<(f64, f64)> = (0..cfg.checkpoints.len())
        .map(|j| (cfg.checkpoints[j] as f64, mean_column(series, j, |v| v.avg_sq_grad)))
        .collect();
    let dec = final_decade(cfg);
    let lo = cfg.horizon as f64 / 10.0;
    let fit = fit_loglog_slope(&pts, lo, cfg.horizon as f64);
    let ok = if h.delta > 0.0 {
        let fit = fit?;
        let target = -(0.5 - h.delta);
        o.metric("slope", fit.slope);
        o.metric("slope_stderr", fit.stderr);
        o.metric("target_slope", target);
        o.threshold("slope_tolerance", SLOPE_TOL, "fixed tolerance around the theoretical exponent");
        o.fits.insert("mean_avg_sq_grad".into(), fit);
        (fit.slope - target).abs() <= SLOPE_TOL
    } else {
        if let Ok(fit) = fit {
            o.metric("slope", fit.slope);
            o.fits.insert("mean_avg_sq_grad".into(), fit);
        }
        let power = if h.gamma > 1.0 { 1 } else { 2 };
        o.notes.push(format!("ratio to ln^{power}(T)/sqrt(T) over the final decade"));
        let ratios: Vec<f64> = dec
            .iter()
            .map(|&j| {
                let t = pts[j].0;
                pts[j].1 / (t.ln().powi(power) / t.sqrt())
            })
            .collect();
        for (k, r) in ratios.iter().enumerate() {
            o.metric(&format!("ratio_t{}", cfg.checkpoints[dec[k]]), *r);
        }
        let bounded = ratios.iter().all(|r| r.is_finite());
        let nonincreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
        o.metric("ratio_max", ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        o.metric("ratio_nonincreasing", nonincreasing as u8 as f64);
        bounded && nonincreasing && ratios.len() >= 2
    };
    o.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(o)
}

pub fn evaluate_last_iterate(cfg: &ExperimentConfig, series: &[SeedSeries], enforce: bool) -> Result<ProbeOutcome> {
    require_decay_hypotheses(&cfg.hyper, "last-iterate probe")?;
    let below = gate(cfg, Probe::LastIterate, enforce)?;
    check_complete(cfg, series)?;
    if cfg.checkpoints.len() < 3 {
        return Err(Error::Precondition("need at least three checkpoints".into()));
    }
    let mut o = ProbeOutcome::new(Probe::LastIterate);
    o.below_acceptance_scale = below;
    let eps = cfg.thresholds.eps_last;
    o.threshold("eps_last", eps, THRESHOLD_PROVENANCE);
    let n = cfg.checkpoints.len();
    let mut worst: f64 = 0.0;
    let mut latest_sup = 0u64;
    for s in series {
        let m = s.values[n - 3..].iter().map(|v| v.grad_norm).fold(0.0, f64::max);
        worst = worst.max(m);
        latest_sup = latest_sup.max(s.sup_grad_t);
    }
    let decade_start = cfg.horizon as f64 / 10.0;
    o.metric("max_final_grad_norm", worst);
    o.metric("latest_sup_step", latest_sup as f64);
    o.verdict = if worst < eps && (latest_sup as f64) < decade_start { Verdict::Pass } else { Verdict::Fail };
    Ok(o)
}

pub fn evaluate_l1(cfg: &ExperimentConfig, series: &[SeedSeries], enforce: bool) -> Result<ProbeOutcome> {
    require_decay_hypotheses(&cfg.hyper, "mean-convergence probe")?;
    let below = gate(cfg, Probe::L1, enforce)?;
    check_complete(cfg, series)?;
    let n = cfg.checkpoints.len();
    if n < 4 {
        return Err(Error::Precondition("need at least four checkpoints".into()));
    }
    let mut o = ProbeOutcome::new(Probe::L1);
    o.below_acceptance_scale = below;
    let eps = cfg.thresholds.eps_l1;
    o.threshold("eps_l1", eps, THRESHOLD_PROVENANCE);
    o.threshold("sup_stability", SUP_STABILITY_TOL, "fixed relative tolerance");
    let means: Vec<f64> = (n - 4..n).map(|j| mean_column(series, j, |v| v.grad_norm)).collect();
    for (k, m) in means.iter().enumerate() {
        o.metric(&format!("mean_grad_norm_t{}", cfg.checkpoints[n - 4 + k]), *m);
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let last = means[3];
    let sups = column(series, n - 1, |v| v.sup_grad_norm);
    let half = (sups.len() / 2).max(1);
    let sup_half = stats::mean(&sups[..half]);
    let sup_all = stats::mean(&sups);
    let rel = (sup_all / sup_half - 1.0).abs();
    o.metric("sup_grad_mean_half", sup_half);
    o.metric("sup_grad_mean_all", sup_all);
    o.metric("sup_grad_rel_change", rel);
    o.metric("max_sup_grad", sups.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    o.verdict = if decreasing && last < eps && rel <= SUP_STABILITY_TOL && sup_all.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(o)
}

pub fn evaluate_summability(cfg: &ExperimentConfig, series: &[SeedSeries], enforce: bool) -> Result<ProbeOutcome> {
    let below = gate(cfg, Probe::Summability, enforce)?;
    check_complete(cfg, series)?;
    let n = cfg.checkpoints.len();
    if n < 2 {
        return Err(Error::Precondition("need at least two checkpoints".into()));
    }
    let mut o = ProbeOutcome::new(Probe::Summability);
    o.below_acceptance_scale = below;
    o.threshold("final_increment", SUMMABILITY_TOL, "fixed relative tolerance");
    let worst = series
        .iter()
        .map(|s| {
            let a = s.values[n - 2].sum_eta_grad_sq;
            let b = s.values[n - 1].sum_eta_grad_sq;
            (b - a) / b
        })
        .fold(0.0, f64::max);
    o.metric("max_final_increment", worst);
    let ok = worst < SUMMABILITY_TOL;
    o.verdict = if require_decay_hypotheses(&cfg.hyper, "summability").is_err() {
        o.notes.push("gamma > 1 and delta > 0 not met; result is informational".into());
        Verdict::Informational
    } else if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(o)
}

pub fn evaluate_moment(cfg: &ExperimentConfig, series: &[SeedSeries], enforce: bool) -> Result<ProbeOutcome> {
    let below = gate(cfg, Probe::Moment, enforce)?;
    check_complete(cfg, series)?;
    let h = &cfg.hyper;
    let dec = final_decade(cfg);
    if dec.len() < 2 {
        return Err(Error::Precondition("need at least two checkpoints in the final decade".into()));
    }
    let mut o = ProbeOutcome::new(Probe::Moment);
    o.below_acceptance_scale = below;
    o.notes.push("reciprocal-product moments use the realized truncated tail-sum surrogate".into());
    o.threshold("moment_drift", MOMENT_DRIFT_TOL, "fixed relative tolerance");
    o.threshold("slope_tolerance", SLOPE_TOL, "fixed tolerance around the theoretical exponent");
    let mut ok = true;

    let (j0, j1) = (dec[0], dec[dec.len() - 1]);
    let log_inv = |j: usize| -> Option<Vec<f64>> {
        series.iter().map(|s| s.values[j].log_pi_hat.map(|l| -l)).collect()
    };
    match (log_inv(j0), log_inv(j1)) {
        (Some(a), Some(b)) => {
            for p in 1..=3 {
                let pa: Vec<f64> = a.iter().map(|x| p as f64 * x).collect();
                let pb: Vec<f64> = b.iter().map(|x| p as f64 * x).collect();
                let la = stats::log_mean_exp(&pa);
                let lb = stats::log_mean_exp(&pb);
                // Relative drift E_b / E_a - 1, taken in log space.
                let drift = (lb - la).exp_m1().abs();
                o.metric(&format!("log_moment_p{p}_start"), la);
                o.metric(&format!("log_moment_p{p}_end"), lb);
                o.metric(&format!("moment_drift_p{p}"), drift);
                ok &= drift < MOMENT_DRIFT_TOL;
            }
        }
        _ => return Err(Error::IncompleteTrace("sweep ran without gap sums".into())),
    }

    let pts: Vec<(f64, f64)> = (0..cfg.checkpoints.len())
        .map(|j| (cfg.checkpoints[j] as f64, mean_column(series, j, |v| v.s_total.powf(0.75))))
        .collect();
    if let Ok(fit) = fit_loglog_slope(&pts, cfg.horizon as f64 / 10.0, cfg.horizon as f64) {
        o.metric("s34_slope", fit.slope);
        o.fits.insert("mean_s_total_pow_3_4".into(), fit);
        if h.delta > 0.0 {
            ok &= (fit.slope - 0.75).abs() <= SLOPE_TOL;
        } else {
            o.notes.push("delta = 0: growth slope is informational".into());
        }
    } else if h.delta > 0.0 {
        ok = false;
        o.notes.push("growth slope fit failed".into());
    }

    if h.gamma > 1.0 {
        let constant = series.iter().all(|s| dec.iter().all(|&j| s.values[j].sup_sigma_v == s.values[j0].sup_sigma_v));
        o.metric("sup_sigma_v_constant", constant as u8 as f64);
        o.metric(
            "max_sup_sigma_v",
            series.iter().map(|s| s.values[j1].sup_sigma_v).fold(f64::NEG_INFINITY, f64::max),
        );
        ok &= constant;
    }
    o.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(o)
}

fn summarize_series(cfg: &ExperimentConfig, series: &[SeedSeries]) -> Vec<SeriesStats> {
    let has_pi = series.first().and_then(|s| s.values.first()).is_some_and(|v| v.log_pi_hat.is_some());
    SERIES
        .iter()
        .filter(|(name, _)| has_pi || *name != "log_pi_hat_inv")
        .map(|(name, f)| SeriesStats {
            name: (*name).into(),
            points: (0..cfg.checkpoints.len())
                .map(|j| CheckpointSummary { t: cfg.checkpoints[j], summary: summarize(&column(series, j, *f)) })
                .collect(),
        })
        .collect()
}

/// Evaluates the enabled probes on finished sweeps. With `enforce`, a
/// probe below its acceptance scale is an error; otherwise it is flagged
/// and its verdict downgraded to informational.
pub fn evaluate(cfg: &ExperimentConfig, series: &[SeedSeries], enforce: bool) -> Result<ExperimentReport> {
    let mut probes = cfg.probes.clone();
    probes.sort();
    probes.dedup();
    let mut outcomes = Vec::new();
    for probe in probes {
        let mut o = match probe {
            Probe::Rate => evaluate_rate(cfg, series, enforce)?,
            Probe::LastIterate => evaluate_last_iterate(cfg, series, enforce)?,
            Probe::L1 => evaluate_l1(cfg, series, enforce)?,
            Probe::Summability => evaluate_summability(cfg, series, enforce)?,
            Probe::Moment => evaluate_moment(cfg, series, enforce)?,
        };
        if o.below_acceptance_scale {
            o.notes.push("below acceptance scale".into());
            o.verdict = Verdict::Informational;
        }
        outcomes.push(o);
    }
    Ok(ExperimentReport {
        experiment_id: cfg.experiment_id.clone(),
        problem: cfg.problem.clone(),
        hyper: cfg.hyper.clone(),
        init: cfg.init,
        horizon: cfg.horizon,
        seeds: cfg.sorted_seeds(),
        checkpoints: cfg.checkpoints.clone(),
        below_acceptance_scale: outcomes.iter().any(|o| o.below_acceptance_scale),
        series: summarize_series(cfg, series),
        probes: outcomes,
    })
}

/// Sweep plus evaluation.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution, enforce: bool) -> Result<ExperimentReport> {
    // Hypothesis errors surface before any trajectory runs.
    for probe in &cfg.probes {
        match probe {
            Probe::LastIterate => require_decay_hypotheses(&cfg.hyper, "last-iterate probe")?,
            Probe::L1 => require_decay_hypotheses(&cfg.hyper, "mean-convergence probe")?,
            Probe::Rate => require_rate_delta(&cfg.hyper)?,
            _ => {}
        }
        if enforce {
            gate(cfg, *probe, true)?;
        }
    }
    let series = run_sweep(cfg, exec)?;
    evaluate(cfg, &series, enforce)
}

fn single(cfg: &ExperimentConfig, probe: Probe, exec: Execution) -> Result<ProbeOutcome> {
    let mut c = cfg.clone();
    c.probes = vec![probe];
    let report = run_experiment(&c, exec, true)?;
    Ok(report.probes.into_iter().next().expect("one probe requested"))
}

pub fn rate_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ProbeOutcome> {
    single(cfg, Probe::Rate, exec)
}

pub fn last_iterate_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ProbeOutcome> {
    single(cfg, Probe::LastIterate, exec)
}

pub fn l1_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ProbeOutcome> {
    single(cfg, Probe::L1, exec)
}

pub fn summability_probe(cfg: &ExperimentConfig, exec: Execution) -> Result<ProbeOutcome> {
    single(cfg, Probe::Summability, exec)
}

pub fn moment_probe(cfg: &ExperimentConfig, exec: Execution) -> Result<ProbeOutcome> {
    single(cfg, Probe::Moment, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdBaseline {
    pub eta0: f64,
    pub checkpoints: Vec<u64>,
    /// Seed-mean of the running average squared gradient norm.
    pub mean_avg_sq_grad: Vec<f64>,
    pub fit: Option<SlopeFit>,
}

/// SGD with `eta_t = eta0 / sqrt(t)` under the same seeds and checkpoints.
pub fn sgd_baseline(cfg: &ExperimentConfig, eta0: f64, exec: Execution) -> Result<SgdBaseline> {
    cfg.validate()?;
    let p = cfg.problem.build()?;
    let w1 = vec![cfg.init; p.dim()];
    let cps = &cfg.checkpoints;
    let per_seed = map_ordered(exec, &cfg.sorted_seeds(), |&seed| {
        let mut rng = stream(&cfg.experiment_id, seed, Purpose::Custom(1));
        let mut grad = vec![0.0; p.dim()];
        let mut sum = 0.0;
        let mut next = 0;
        let mut out = Vec::with_capacity(cps.len());
        drive_sgd(&p, &w1, cfg.horizon, &mut rng, |t| eta0 / (t as f64).sqrt(), |t, w| {
            p.grad_into(w, &mut grad);
            sum += norm_sq(&grad);
            if cps.get(next) == Some(&t) {
                out.push(sum / t as f64);
                next += 1;
            }
        })?;
        Ok(out)
    })?;
    let mean_avg_sq_grad: Vec<f64> = (0..cps.len())
        .map(|j| stats::mean(&per_seed.iter().map(|s| s[j]).collect::<Vec<_>>()))
        .collect();
    let pts: Vec<(f64, f64)> = cps.iter().map(|t| *t as f64).zip(mean_avg_sq_grad.iter().copied()).collect();
    let fit = fit_loglog_slope(&pts, cfg.horizon as f64 / 10.0, cfg.horizon as f64).ok();
    Ok(SgdBaseline { eta0, checkpoints: cps.clone(), mean_avg_sq_grad, fit })
}

//! Flat `key = value` configuration.
//!
//! One key per line; `#` starts a comment. Lists are comma-separated. A
//! document whose first non-blank character is `{` is read as a flat JSON
//! object with the same keys. Unknown keys are rejected.
//!
//! | key | default | notes |
//! |---|---|---|
//! | `experiment_id` | `experiment` | keys every random stream |
//! | `problem` | `quadratic` | problem for `experiment` and `trace` |
//! | `problems` | `quadratic,least_squares,logistic` | suite for `verify` |
//! | `eigenvalues`, `sigma` | 10 log-spaced in `[0.1, 10]`, `1` | noisy quadratic |
//! | `ls_n`, `ls_d`, `ls_seed` | `50`, `5`, `7` | least squares |
//! | `lg_n`, `lg_d`, `lg_seed` | `100`, `10`, `3` | logistic regression |
//! | `beta1`, `alpha0`, `gamma`, `delta`, `mu`, `v` | `0.9`, `0.5`, `1.25`, `0.25`, `1e-8`, `1` | |
//! | `dim` | problem dimension | must match when given |
//! | `region` | `standard` | `extended` admits any `gamma >= 1` |
//! | `init` | `1` | every coordinate of `w_1` |
//! | `horizon` | `10000` | |
//! | `seeds` | `0..10` | list or half-open range `a..b` |
//! | `checkpoints` | `pow2` | `pow2`, `geom:k` or an explicit list; `horizon` is always appended |
//! | `probes` | all | `rate,last_iterate,l1,summability,moment` |
//! | `eps_last`, `eps_l1` | frozen pilot values | |
//! | `schedules` | `0.25:1.25,0:1,0:1.5:extended` | `delta:gamma[:region]` for `verify` |
//! | `oracle_points`, `oracle_k` | `20`, `100000` | |
//! | `grad_points` | `1000` | finite-difference and gradient-bound points |
//! | `exchange_instances` | `1000` | |
//! | `descent_checkpoints`, `descent_k` | `50`, `10000` | `0` checkpoints disables the descent check |
//! | `trace_at_checkpoints` | `false` | `trace` emits rows only at checkpoints |
//! | `fault` | `none` | `lipschitz` or `abc` corrupts the certificate (self-test) |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{geometric_checkpoints, ExperimentConfig, Probe, Thresholds};
use crate::params::{HyperParams, ScheduleRegion};
use crate::problems::{log_spaced, Problem, ProblemCertificate, ProblemSpec};

const KEYS: &[&str] = &[
    "experiment_id",
    "problem",
    "problems",
    "eigenvalues",
    "sigma",
    "ls_n",
    "ls_d",
    "ls_seed",
    "lg_n",
    "lg_d",
    "lg_seed",
    "beta1",
    "alpha0",
    "gamma",
    "delta",
    "mu",
    "v",
    "dim",
    "region",
    "init",
    "horizon",
    "seeds",
    "checkpoints",
    "probes",
    "eps_last",
    "eps_l1",
    "schedules",
    "oracle_points",
    "oracle_k",
    "grad_points",
    "exchange_instances",
    "descent_checkpoints",
    "descent_k",
    "trace_at_checkpoints",
    "fault",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Quadratic,
    LeastSquares,
    Logistic,
}

impl ProblemName {
    pub const ALL: [ProblemName; 3] = [ProblemName::Quadratic, ProblemName::LeastSquares, ProblemName::Logistic];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemName::Quadratic => "quadratic",
            ProblemName::LeastSquares => "least_squares",
            ProblemName::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Option<ProblemName> {
        ProblemName::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

/// A deliberately wrong certificate, used to confirm that the suite
/// detects broken constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Smoothness constant divided by four.
    Lipschitz,
    /// Oracle variance constant set to zero.
    Abc,
}

impl Fault {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fault::None => "none",
            Fault::Lipschitz => "lipschitz",
            Fault::Abc => "abc",
        }
    }

    pub fn apply(&self, p: Problem) -> Problem {
        let mut cert: ProblemCertificate = p.certificate().clone();
        match self {
            Fault::None => return p,
            Fault::Lipschitz => cert.l_f /= 4.0,
            Fault::Abc => cert.c = 0.0,
        }
        cert.description = format!("{} [fault: {}]", cert.description, self.as_str());
        p.with_certificate(cert)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub delta: f64,
    pub gamma: f64,
    pub region: ScheduleRegion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub schedules: Vec<Schedule>,
    pub oracle_points: usize,
    pub oracle_k: usize,
    pub grad_points: usize,
    pub exchange_instances: usize,
    pub descent_checkpoints: usize,
    pub descent_k: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            schedules: vec![
                Schedule { delta: 0.25, gamma: 1.25, region: ScheduleRegion::Standard },
                Schedule { delta: 0.0, gamma: 1.0, region: ScheduleRegion::Standard },
                Schedule { delta: 0.0, gamma: 1.5, region: ScheduleRegion::Extended },
            ],
            oracle_points: 20,
            oracle_k: 100_000,
            grad_points: 1000,
            exchange_instances: 1000,
            descent_checkpoints: 50,
            descent_k: 10_000,
        }
    }
}

/// Parameters of every suite problem, whether or not it is selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub eigenvalues: Vec<f64>,
    pub sigma: f64,
    pub ls: (usize, usize, u64),
    pub lg: (usize, usize, u64),
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog { eigenvalues: log_spaced(0.1, 10.0, 10), sigma: 1.0, ls: (50, 5, 7), lg: (100, 10, 3) }
    }
}

impl Catalog {
    pub fn spec(&self, name: ProblemName) -> ProblemSpec {
        match name {
            ProblemName::Quadratic => ProblemSpec::Quadratic { eigenvalues: self.eigenvalues.clone(), sigma: self.sigma },
            ProblemName::LeastSquares => ProblemSpec::LeastSquares { n: self.ls.0, d: self.ls.1, seed: self.ls.2 },
            ProblemName::Logistic => ProblemSpec::Logistic { n: self.lg.0, d: self.lg.1, seed: self.lg.2 },
        }
    }
}

/// A parsed, validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Settings for `experiment` and `trace`; `experiment.problem` is the
    /// spec of `problem`.
    pub experiment: ExperimentConfig,
    pub problem: ProblemName,
    pub problems: Vec<ProblemName>,
    pub catalog: Catalog,
    pub verify: VerifySettings,
    pub trace_at_checkpoints: bool,
    pub fault: Fault,
}

impl Default for Config {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl Config {
    /// Suite specs for `verify`, in configured order.
    pub fn suite(&self) -> Vec<ProblemSpec> {
        self.problems.iter().map(|p| self.catalog.spec(*p)).collect()
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some((line, s)) => s
                .trim()
                .parse()
                .map_err(|_| perr(line, format!("invalid value for `{key}`: `{s}`"))),
        }
    }

    fn list<T, F>(&mut self, key: &str, default: Vec<T>, f: F) -> Result<Vec<T>>
    where
        F: Fn(&str) -> Option<T>,
    {
        match self.take(key) {
            None => Ok(default),
            Some((line, s)) => split_list(&s)
                .map(|item| f(item).ok_or_else(|| perr(line, format!("invalid item `{item}` in `{key}`"))))
                .collect(),
        }
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn read_flat(text: &str) -> Result<Raw> {
    let mut entries = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| perr(line, format!("expected `key = value`, got `{body}`")))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(perr(line, format!("unknown key `{k}`")));
        }
        if entries.insert(k.to_string(), (line, v.trim().to_string())).is_some() {
            return Err(perr(line, format!("duplicate key `{k}`")));
        }
    }
    Ok(Raw { entries })
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn read_json(text: &str) -> Result<Raw> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| perr(e.line(), format!("invalid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| perr(1, "JSON config must be an object"))?;
    let mut entries = BTreeMap::new();
    for (k, v) in obj {
        if !KEYS.contains(&k.as_str()) {
            return Err(perr(1, format!("unknown key `{k}`")));
        }
        let s = match v {
            serde_json::Value::Array(items) => items
                .iter()
                .map(|x| json_scalar(x).ok_or_else(|| perr(1, format!("nested value in `{k}`"))))
                .collect::<Result<Vec<_>>>()?
                .join(","),
            other => json_scalar(other).ok_or_else(|| perr(1, format!("unsupported value for `{k}`")))?,
        };
        entries.insert(k.clone(), (1, s));
    }
    Ok(Raw { entries })
}

fn parse_seeds(line: usize, s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| perr(line, format!("invalid seed range `{s}`")))?;
        let b: u64 = b.trim().parse().map_err(|_| perr(line, format!("invalid seed range `{s}`")))?;
        return Ok((a..b).collect());
    }
    split_list(s)
        .map(|x| x.parse().map_err(|_| perr(line, format!("invalid seed `{x}`"))))
        .collect()
}

fn parse_checkpoints(line: usize, s: &str, horizon: u64) -> Result<Vec<u64>> {
    let s = s.trim();
    let mut cps = if s == "pow2" {
        geometric_checkpoints(horizon, 1)
    } else if let Some(k) = s.strip_prefix("geom:") {
        let k: u32 = k.trim().parse().map_err(|_| perr(line, format!("invalid checkpoint spec `{s}`")))?;
        geometric_checkpoints(horizon, k)
    } else {
        split_list(s)
            .map(|x| x.parse().map_err(|_| perr(line, format!("invalid checkpoint `{x}`"))))
            .collect::<Result<Vec<u64>>>()?
    };
    if cps.last() != Some(&horizon) && cps.iter().all(|&t| t < horizon) {
        cps.push(horizon);
    }
    Ok(cps)
}

fn parse_schedule(item: &str, region: ScheduleRegion) -> Option<Schedule> {
    let mut parts = item.split(':').map(str::trim);
    let delta = parts.next()?.parse().ok()?;
    let gamma = parts.next()?.parse().ok()?;
    let region = match parts.next() {
        None => region,
        Some("standard") => ScheduleRegion::Standard,
        Some("extended") => ScheduleRegion::Extended,
        Some(_) => return None,
    };
    if parts.next().is_some() {
        return None;
    }
    Some(Schedule { delta, gamma, region })
}

fn parse_region(s: &str) -> Option<ScheduleRegion> {
    match s {
        "standard" => Some(ScheduleRegion::Standard),
        "extended" => Some(ScheduleRegion::Extended),
        _ => None,
    }
}

fn parse_fault(s: &str) -> Option<Fault> {
    [Fault::None, Fault::Lipschitz, Fault::Abc].into_iter().find(|f| f.as_str() == s)
}

/// Parses and validates a config. `overrides` are applied as if they were
/// extra lines, replacing keys of the same name.
pub fn parse_config_with(text: &str, overrides: &[(&str, String)]) -> Result<Config> {
    let mut raw = if text.trim_start().starts_with('{') { read_json(text)? } else { read_flat(text)? };
    for (k, v) in overrides {
        if !KEYS.contains(k) {
            return Err(perr(0, format!("unknown key `{k}`")));
        }
        raw.entries.insert((*k).to_string(), (0, v.clone()));
    }
    build(raw)
}

/// Parses and validates a config from text.
pub fn parse_config(text: &str) -> Result<Config> {
    parse_config_with(text, &[])
}

fn build(mut raw: Raw) -> Result<Config> {
    let d = Catalog::default();
    let hd = HyperParams::default();
    let experiment_id: String = raw.get("experiment_id", "experiment".to_string())?;
    let catalog = Catalog {
        eigenvalues: raw.list("eigenvalues", d.eigenvalues, |x| x.parse().ok())?,
        sigma: raw.get("sigma", d.sigma)?,
        ls: (raw.get("ls_n", d.ls.0)?, raw.get("ls_d", d.ls.1)?, raw.get("ls_seed", d.ls.2)?),
        lg: (raw.get("lg_n", d.lg.0)?, raw.get("lg_d", d.lg.1)?, raw.get("lg_seed", d.lg.2)?),
    };
    let problem = match raw.take("problem") {
        None => ProblemName::Quadratic,
        Some((line, s)) => ProblemName::parse(s.trim()).ok_or_else(|| perr(line, format!("unknown problem `{s}`")))?,
    };
    let problems = raw.list("problems", ProblemName::ALL.to_vec(), ProblemName::parse)?;
    let region = match raw.take("region") {
        None => ScheduleRegion::Standard,
        Some((line, s)) => parse_region(s.trim()).ok_or_else(|| perr(line, format!("unknown region `{s}`")))?,
    };
    let spec = catalog.spec(problem);
    let built = spec.build()?;
    let dim: usize = raw.get("dim", built.dim())?;
    if dim != built.dim() {
        return Err(Error::ConstraintViolation(format!(
            "dim = {dim} does not match {} dimension {}",
            problem.as_str(),
            built.dim()
        )));
    }
    let hyper = HyperParams {
        beta1: raw.get("beta1", hd.beta1)?,
        alpha0: raw.get("alpha0", hd.alpha0)?,
        gamma: raw.get("gamma", hd.gamma)?,
        delta: raw.get("delta", hd.delta)?,
        mu: raw.get("mu", hd.mu)?,
        v: raw.get("v", hd.v)?,
        dim,
        region,
    }
    .validate()?;
    let init = raw.get("init", 1.0)?;
    let horizon = raw.get("horizon", 10_000u64)?;
    let seeds = match raw.take("seeds") {
        None => (0..10).collect(),
        Some((line, s)) => parse_seeds(line, &s)?,
    };
    let checkpoints = match raw.take("checkpoints") {
        None => geometric_checkpoints(horizon, 1),
        Some((line, s)) => parse_checkpoints(line, &s, horizon)?,
    };
    let probes = raw.list("probes", Probe::ALL.to_vec(), Probe::parse)?;
    let td = Thresholds::default();
    let thresholds = Thresholds { eps_last: raw.get("eps_last", td.eps_last)?, eps_l1: raw.get("eps_l1", td.eps_l1)? };
    let vd = VerifySettings::default();
    let verify = VerifySettings {
        schedules: raw.list("schedules", vd.schedules, |x| parse_schedule(x, region))?,
        oracle_points: raw.get("oracle_points", vd.oracle_points)?,
        oracle_k: raw.get("oracle_k", vd.oracle_k)?,
        grad_points: raw.get("grad_points", vd.grad_points)?,
        exchange_instances: raw.get("exchange_instances", vd.exchange_instances)?,
        descent_checkpoints: raw.get("descent_checkpoints", vd.descent_checkpoints)?,
        descent_k: raw.get("descent_k", vd.descent_k)?,
    };
    let trace_at_checkpoints = raw.get("trace_at_checkpoints", false)?;
    let fault = match raw.take("fault") {
        None => Fault::None,
        Some((line, s)) => parse_fault(s.trim()).ok_or_else(|| perr(line, format!("unknown fault `{s}`")))?,
    };
    debug_assert!(raw.entries.is_empty(), "unconsumed keys: {:?}", raw.entries.keys());
    for s in &verify.schedules {
        HyperParams { delta: s.delta, gamma: s.gamma, region: s.region, ..hyper.clone() }.validate()?;
    }
    let experiment = ExperimentConfig {
        experiment_id,
        problem: spec,
        hyper,
        init,
        horizon,
        seeds,
        checkpoints,
        probes,
        thresholds,
    };
    experiment.validate()?;
    Ok(Config { experiment, problem, problems, catalog, verify, trace_at_checkpoints, fault })
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Shortest representation that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Writes every key explicitly.
pub fn serialize_config(c: &Config) -> String {
    let e = &c.experiment;
    let h = &e.hyper;
    let v = &c.verify;
    let mut out = String::new();
    let mut kv = |k: &str, val: String| {
        let _ = writeln!(out, "{k} = {val}");
    };
    kv("experiment_id", e.experiment_id.clone());
    kv("problem", c.problem.as_str().into());
    kv("problems", c.problems.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","));
    kv("eigenvalues", c.catalog.eigenvalues.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
    kv("sigma", num(c.catalog.sigma));
    kv("ls_n", c.catalog.ls.0.to_string());
    kv("ls_d", c.catalog.ls.1.to_string());
    kv("ls_seed", c.catalog.ls.2.to_string());
    kv("lg_n", c.catalog.lg.0.to_string());
    kv("lg_d", c.catalog.lg.1.to_string());
    kv("lg_seed", c.catalog.lg.2.to_string());
    kv("beta1", num(h.beta1));
    kv("alpha0", num(h.alpha0));
    kv("gamma", num(h.gamma));
    kv("delta", num(h.delta));
    kv("mu", num(h.mu));
    kv("v", num(h.v));
    kv("dim", h.dim.to_string());
    kv("region", h.region.as_str().into());
    kv("init", num(e.init));
    kv("horizon", e.horizon.to_string());
    kv("seeds", join(&e.seeds));
    kv("checkpoints", join(&e.checkpoints));
    kv("probes", e.probes.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","));
    kv("eps_last", num(e.thresholds.eps_last));
    kv("eps_l1", num(e.thresholds.eps_l1));
    kv(
        "schedules",
        v.schedules
            .iter()
            .map(|s| format!("{}:{}:{}", num(s.delta), num(s.gamma), s.region.as_str()))
            .collect::<Vec<_>>()
            .join(","),
    );
    kv("oracle_points", v.oracle_points.to_string());
    kv("oracle_k", v.oracle_k.to_string());
    kv("grad_points", v.grad_points.to_string());
    kv("exchange_instances", v.exchange_instances.to_string());
    kv("descent_checkpoints", v.descent_checkpoints.to_string());
    kv("descent_k", v.descent_k.to_string());
    kv("trace_at_checkpoints", c.trace_at_checkpoints.to_string());
    kv("fault", c.fault.as_str().into());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("horizon = 100\n").unwrap();
        assert_eq!(c.experiment.hyper.mu, 1e-8);
        assert_eq!(c.experiment.hyper.dim, 10);
        assert_eq!(c.experiment.seeds, (0..10).collect::<Vec<_>>());
        assert_eq!(c.experiment.checkpoints, vec![1, 2, 4, 8, 16, 32, 64, 100]);
        assert_eq!(c.problems.len(), 3);
    }

    #[test]
    fn gamma_two_delta_zero_is_a_constraint_violation() {
        match parse_config("gamma = 2\ndelta = 0\n") {
            Err(Error::ConstraintViolation(msg)) => assert!(msg.contains("gamma"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        match parse_config("beta1 = 0.9\nbetta1 = 0.9\n") {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("betta1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse_config(r#"{"betta1": 0.9}"#) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("betta1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_matches_flat() {
        let flat = parse_config("horizon = 64\nseeds = 1,2\nprobes = rate,l1\ndelta = 0.1\ngamma = 1.1\n").unwrap();
        let json = parse_config(r#"{"horizon": 64, "seeds": [1, 2], "probes": ["rate", "l1"], "delta": 0.1, "gamma": 1.1}"#)
            .unwrap();
        assert_eq!(flat, json);
    }

    #[test]
    fn seed_ranges_and_checkpoint_specs() {
        let c = parse_config("seeds = 3..6\nhorizon = 16\ncheckpoints = geom:2\n").unwrap();
        assert_eq!(c.experiment.seeds, vec![3, 4, 5]);
        assert_eq!(c.experiment.checkpoints, vec![1, 2, 3, 4, 6, 8, 11, 16]);
        let c = parse_config("horizon = 10\ncheckpoints = 2, 5\n").unwrap();
        assert_eq!(c.experiment.checkpoints, vec![2, 5, 10]);
    }

    #[test]
    fn dim_must_match_problem() {
        assert!(parse_config("dim = 10").is_ok());
        assert!(matches!(parse_config("dim = 3"), Err(Error::ConstraintViolation(_))));
        assert!(parse_config("problem = least_squares\ndim = 5").is_ok());
    }

    #[test]
    fn schedule_outside_region_is_rejected() {
        assert!(matches!(parse_config("schedules = 0:1.5"), Err(Error::ConstraintViolation(_))));
        let c = parse_config("schedules = 0:1.5:extended").unwrap();
        assert_eq!(c.verify.schedules[0].region, ScheduleRegion::Extended);
    }

    #[test]
    fn malformed_lines_report_their_line() {
        match parse_config("horizon = 10\n\n# note\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("horizon = ten"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("horizon = 1\nhorizon = 2"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn overrides_replace_keys() {
        let c = parse_config_with("seeds = 0..50\n", &[("seeds", "7".into())]).unwrap();
        assert_eq!(c.experiment.seeds, vec![7]);
    }

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        assert_eq!(parse_config(&serialize_config(&c)).unwrap(), c);
    }

    proptest! {
        #[test]
        fn round_trip(delta in 0.0f64..0.5, g in 0.0f64..1.0, beta1 in 0.0f64..0.99,
                      alpha0 in 0.01f64..0.99, horizon in 1u64..5000, nseeds in 1u64..8,
                      sigma in 0.0f64..3.0, init in -5.0f64..5.0, per in 1u32..4,
                      fault in 0usize..3, ls_seed in 0u64..100) {
            let gamma = 1.0 + g * 2.0 * delta;
            let text = format!(
                "delta = {delta}\ngamma = {gamma}\nbeta1 = {beta1}\nalpha0 = {alpha0}\n\
                 horizon = {horizon}\nseeds = 0..{nseeds}\nsigma = {sigma}\ninit = {init}\n\
                 checkpoints = geom:{per}\nfault = {}\nls_seed = {ls_seed}\nschedules = {delta}:{gamma}\n",
                ["none", "lipschitz", "abc"][fault]
            );
            let c = parse_config(&text).unwrap();
            let again = parse_config(&serialize_config(&c)).unwrap();
            prop_assert_eq!(again, c);
        }
    }
}

//! Drivers behind the subcommands. Each returns a [`CommandOutput`]; the
//! binary prints it and exits with its code.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{serialize_config, Config, Fault, ProblemName};
use super::output::{series_csv, trace_csv, OutputDir};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::experiments::{run_experiment, ExperimentReport};
use crate::optimizer::{run_trajectory, RunSpec};
use crate::params::HyperParams;
use crate::problems::{log_spaced, Problem, ProblemCertificate};
use crate::rng::{stream, Purpose};
use crate::verify::{
    check_descent_expectation, check_exchange, check_grad_bound, check_oracle, check_trace, gradcheck, CheckResult,
    DescentCheckpoint,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exit status for an error: configuration, usage and I/O problems are 2,
/// anything raised while running is 1.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::ConstraintViolation(_)
        | Error::Io(_)
        | Error::InsufficientSeeds { .. }
        | Error::HorizonTooShort { .. }
        | Error::Precondition(_)
        | Error::EmptySpectrum
        | Error::SingularSystem(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub code: i32,
    /// Printed to stdout when no output directory is given.
    pub stdout: String,
    /// One-line status messages for stderr.
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(flatten)]
    pub result: CheckResult,
}

impl VerifyEntry {
    fn label(&self) -> String {
        let mut s = format!("{} [{}", self.result.name, self.problem);
        if let (Some(d), Some(g)) = (self.delta, self.gamma) {
            s.push_str(&format!(", delta={d}, gamma={g}"));
        }
        if let Some(seed) = self.result.location.seed {
            s.push_str(&format!(", seed={seed}"));
        }
        if let Some(t) = self.result.location.t {
            s.push_str(&format!(", t={t}"));
        }
        s.push(']');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentSummary {
    pub problem: String,
    pub seed: u64,
    pub checkpoints: Vec<DescentCheckpoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub fault: Fault,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub certificates: Vec<(String, ProblemCertificate)>,
    /// Labels of failing checks.
    pub failures: Vec<String>,
    pub checks: Vec<VerifyEntry>,
    pub descent: Vec<DescentSummary>,
}

fn entry(problem: &str, h: Option<&HyperParams>, result: CheckResult) -> VerifyEntry {
    VerifyEntry { problem: problem.into(), delta: h.map(|h| h.delta), gamma: h.map(|h| h.gamma), result }
}

/// Descent checkpoints: up to `n` log-spaced distinct steps in `[2, T]`.
pub fn descent_checkpoints(horizon: u64, n: usize) -> Vec<u64> {
    if horizon < 2 || n == 0 {
        return Vec::new();
    }
    let mut cps: Vec<u64> = Vec::with_capacity(n);
    for x in log_spaced(2.0, horizon as f64, n) {
        // Bump collisions at the low end to the next free step.
        let t = (x.round() as u64).max(cps.last().map_or(2, |p| p + 1));
        if t > horizon {
            break;
        }
        cps.push(t);
    }
    cps
}

fn problem_checks(cfg: &Config, idx: usize, p: &Problem) -> Result<Vec<VerifyEntry>> {
    let v = &cfg.verify;
    let name = p.name();
    let id = &cfg.experiment.experiment_id;
    let mut rng = stream(id, idx as u64, Purpose::Points);
    let mut out = vec![entry(name, None, gradcheck(p, v.grad_points, &mut rng))];
    out.push(entry(name, None, check_grad_bound(p, v.grad_points, &mut rng)?));
    if v.oracle_points > 0 {
        for r in check_oracle(p, v.oracle_points, v.oracle_k, &mut rng)? {
            out.push(entry(name, None, r));
        }
    }
    Ok(out)
}

/// Runs the verification suite without writing anything.
pub fn run_verify(cfg: &Config, exec: Execution) -> Result<VerifyReport> {
    if cfg.problems.is_empty() {
        return Err(Error::ConstraintViolation("problem list is empty".into()));
    }
    if cfg.verify.schedules.is_empty() {
        return Err(Error::ConstraintViolation("schedule list is empty".into()));
    }
    let e = &cfg.experiment;
    let mut seeds = e.seeds.clone();
    seeds.sort_unstable();
    let mut checks = Vec::new();
    let mut certificates = Vec::new();
    let mut descent = Vec::new();
    for (idx, spec) in cfg.suite().into_iter().enumerate() {
        let p = cfg.fault.apply(spec.build()?);
        let name = p.name();
        certificates.push((name.to_string(), p.certificate().clone()));
        let runs: Vec<(HyperParams, u64)> = cfg
            .verify
            .schedules
            .iter()
            .flat_map(|s| {
                let h = HyperParams { delta: s.delta, gamma: s.gamma, region: s.region, ..e.hyper.clone() }
                    .with_dim(p.dim());
                seeds.iter().map(move |&seed| (h.clone(), seed))
            })
            .collect();
        let per_run = map_ordered(exec, &runs, |(h, seed)| {
            let h = h.clone().validate()?;
            let spec = RunSpec { experiment_id: e.experiment_id.clone(), seed: *seed, w1: vec![e.init; p.dim()], horizon: e.horizon };
            let trace = run_trajectory(&p, &h, &spec)?;
            let results = check_trace(&trace, &p)?;
            Ok(results.into_iter().map(|r| entry(name, Some(&h), r)).collect::<Vec<_>>())
        })?;
        checks.extend(per_run.into_iter().flatten());
        checks.extend(problem_checks(cfg, idx, &p)?);

        let cps = descent_checkpoints(e.horizon, cfg.verify.descent_checkpoints);
        if !cps.is_empty() && cfg.problems[idx] == ProblemName::Quadratic {
            let s = &cfg.verify.schedules[0];
            let h = HyperParams { delta: s.delta, gamma: s.gamma, region: s.region, ..e.hyper.clone() }
                .with_dim(p.dim())
                .validate()?;
            let seed = seeds[0];
            let spec = RunSpec { experiment_id: e.experiment_id.clone(), seed, w1: vec![e.init; p.dim()], horizon: e.horizon };
            let trace = run_trajectory(&p, &h, &spec)?;
            let mut rng = stream(&e.experiment_id, seed, Purpose::Branch);
            let rep = check_descent_expectation(&p, &trace, &cps, cfg.verify.descent_k, &mut rng)?;
            checks.push(entry(name, Some(&h), rep.result));
            descent.push(DescentSummary { problem: name.into(), seed, checkpoints: rep.checkpoints });
        }
    }
    if cfg.verify.exchange_instances > 0 {
        let mut rng = stream(&e.experiment_id, 0, Purpose::Custom(2));
        checks.push(entry("none", None, check_exchange(cfg.verify.exchange_instances, &mut rng)?));
    }
    let failures: Vec<String> = checks.iter().filter(|c| !c.result.passed()).map(VerifyEntry::label).collect();
    Ok(VerifyReport {
        passed: failures.is_empty(),
        fault: cfg.fault,
        horizon: e.horizon,
        seeds,
        certificates,
        failures,
        checks,
        descent,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

pub fn cmd_verify(cfg: &Config, out: Option<&Path>, exec: Execution) -> Result<CommandOutput> {
    let mut dir = out.map(|o| OutputDir::create(o, "verify", serialize_config(cfg))).transpose()?;
    let report = run_verify(cfg, exec)?;
    let json = to_json(&report);
    let mut messages = vec![format!(
        "verify: {} checks, {} failed",
        report.checks.len(),
        report.failures.len()
    )];
    messages.extend(report.failures.iter().map(|f| format!("FAIL {f}")));
    let stdout = match dir.as_mut() {
        Some(d) => {
            d.write("verify.json", json.as_bytes())?;
            String::new()
        }
        None => json,
    };
    if let Some(d) = dir {
        d.finish()?;
    }
    Ok(CommandOutput { code: if report.passed { EXIT_PASS } else { EXIT_FAIL }, stdout, messages })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub passed: bool,
    pub certificate: ProblemCertificate,
    pub report: ExperimentReport,
}

pub fn run_experiment_cmd(cfg: &Config, exec: Execution) -> Result<ExperimentOutput> {
    let certificate = cfg.experiment.problem.build()?.certificate().clone();
    let report = run_experiment(&cfg.experiment, exec, false)?;
    Ok(ExperimentOutput { passed: report.passed(), certificate, report })
}

pub fn cmd_experiment(cfg: &Config, out: Option<&Path>, exec: Execution) -> Result<CommandOutput> {
    let mut dir = out.map(|o| OutputDir::create(o, "experiment", serialize_config(cfg))).transpose()?;
    let res = run_experiment_cmd(cfg, exec)?;
    let mut messages = Vec::new();
    for o in &res.report.probes {
        let mut line = format!("{}: {:?}", o.probe.as_str(), o.verdict).to_lowercase();
        if o.below_acceptance_scale {
            line.push_str(" (below acceptance scale)");
        }
        messages.push(line);
    }
    let json = to_json(&res);
    let stdout = match dir.as_mut() {
        Some(d) => {
            d.write("report.json", json.as_bytes())?;
            d.write("series.csv", series_csv(&res.report).as_bytes())?;
            String::new()
        }
        None => json,
    };
    if let Some(d) = dir {
        d.finish()?;
    }
    Ok(CommandOutput { code: if res.passed { EXIT_PASS } else { EXIT_FAIL }, stdout, messages })
}

/// CSV trace of one trajectory.
pub fn trace_for(cfg: &Config, seed: u64) -> Result<String> {
    let e = &cfg.experiment;
    let p = e.problem.build()?;
    let spec = RunSpec { experiment_id: e.experiment_id.clone(), seed, w1: vec![e.init; p.dim()], horizon: e.horizon };
    let trace = run_trajectory(&p, &e.hyper, &spec)?;
    Ok(trace_csv(&trace, cfg.trace_at_checkpoints.then_some(&e.checkpoints[..])))
}

pub fn cmd_trace(cfg: &Config, out: Option<&Path>) -> Result<CommandOutput> {
    let seeds = &cfg.experiment.seeds;
    if seeds.len() != 1 {
        return Err(Error::ConstraintViolation(format!("trace needs exactly one seed, got {}", seeds.len())));
    }
    let mut dir = out.map(|o| OutputDir::create(o, "trace", serialize_config(cfg))).transpose()?;
    let csv = trace_for(cfg, seeds[0])?;
    let rows = csv.lines().count() - 1;
    let stdout = match dir.as_mut() {
        Some(d) => {
            d.write("trace.csv", csv.as_bytes())?;
            String::new()
        }
        None => csv,
    };
    if let Some(d) = dir {
        d.finish()?;
    }
    Ok(CommandOutput { code: EXIT_PASS, stdout, messages: vec![format!("trace: {rows} rows")] })
}

pub fn cmd_list_problems(cfg: &Config) -> Result<CommandOutput> {
    let mut stdout = String::from("name\tdim\tL_f\tf_star\tA\tB\tC\tdescription\n");
    for name in ProblemName::ALL {
        let p = cfg.catalog.spec(name).build()?;
        let c = p.certificate();
        stdout.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            name.as_str(),
            p.dim(),
            c.l_f,
            c.f_star,
            c.a,
            c.b,
            c.c,
            c.description
        ));
    }
    Ok(CommandOutput { code: EXIT_PASS, stdout, messages: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;

    fn small(extra: &str) -> Config {
        parse_config(&format!(
            "horizon = 200\nseeds = 0..2\noracle_points = 3\noracle_k = 2000\ngrad_points = 20\n\
             exchange_instances = 20\ndescent_checkpoints = 5\ndescent_k = 500\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn small_suite_passes() {
        let r = run_verify(&small(""), Execution::Sequential).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        // 3 problems x 3 schedules x 2 seeds x 9 checks + 4 per problem + descent + exchange.
        assert_eq!(r.checks.len(), 3 * 3 * 2 * 9 + 3 * 4 + 1 + 1);
    }

    #[test]
    fn faults_are_detected_by_name() {
        let r = run_verify(&small("problems = quadratic\nfault = abc\n"), Execution::Sequential).unwrap();
        assert!(!r.passed);
        assert!(r.failures.iter().any(|f| f.starts_with("oracle_abc_bound")), "{:?}", r.failures);
        let r = run_verify(&small("problems = quadratic\nfault = lipschitz\n"), Execution::Sequential).unwrap();
        assert!(r.failures.iter().any(|f| f.starts_with("taylor_step")), "{:?}", r.failures);
    }

    #[test]
    fn empty_problem_list_is_a_config_error() {
        let e = run_verify(&small("problems =\n"), Execution::Sequential).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_USAGE);
    }

    #[test]
    fn trace_rows_and_subsampling() {
        let c = parse_config("horizon = 10\nseeds = 4\nsigma = 0\n").unwrap();
        let csv = trace_for(&c, 4).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 16 && !l.contains("NaN")));
        let c = parse_config("horizon = 10\nseeds = 4\ntrace_at_checkpoints = true\n").unwrap();
        let csv = trace_for(&c, 4).unwrap();
        let ts: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ts, ["1", "2", "4", "8", "10"]);
    }

    #[test]
    fn descent_checkpoints_are_distinct_and_bounded() {
        let cps = descent_checkpoints(10_000, 50);
        assert_eq!(cps.len(), 50);
        assert_eq!((cps[0], cps[49]), (2, 10_000));
        assert!(cps.windows(2).all(|w| w[0] < w[1]));
        assert!(descent_checkpoints(1, 50).is_empty());
    }
}

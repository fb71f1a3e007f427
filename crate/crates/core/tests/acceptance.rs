//! Acceptance criteria at full scale. Prints one line per criterion and
//! exits non-zero if any criterion fails that is not listed in
//! `KNOWN_RED`.

use std::process::ExitCode;
use std::time::Instant;

use adam_abc::cli::{parse_config, trace_for};
use adam_abc::exec::{map_ordered, Execution};
use adam_abc::experiments::{
    l1_experiment, last_iterate_experiment, moment_probe, rate_experiment, summability_probe, ExperimentConfig,
    ProbeOutcome, Verdict,
};
use adam_abc::optimizer::{run_trajectory, RunSpec};
use adam_abc::params::{HyperParams, ScheduleRegion};
use adam_abc::problems::{Problem, ProblemSpec};
use adam_abc::rng::{stream, Purpose};
use adam_abc::verify::{check_descent_expectation, check_exchange, check_oracle, check_trace, gradcheck, CheckResult};
use adam_abc::Result;

/// Criteria that fail at the specified tolerances for reasons recorded
/// alongside the project: the rate slope for `delta > 0` (the measured
/// decay is faster than the bound's exponent) and the reciprocal-product
/// moment drift (it settles only far beyond desk-scale horizons).
const KNOWN_RED: [u32; 2] = [4, 7];

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn suite() -> Result<Vec<Problem>> {
    [ProblemSpec::default_quadratic(), ProblemSpec::default_least_squares(), ProblemSpec::default_logistic()]
        .iter()
        .map(ProblemSpec::build)
        .collect()
}

fn failures(results: &[CheckResult]) -> Vec<String> {
    results
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} (margin {:.3e} at {:?})", r.name, r.worst_margin, r.location))
        .collect()
}

fn from_results(results: Vec<CheckResult>) -> Outcome {
    let bad = failures(&results);
    let detail = if bad.is_empty() { format!("{} checks", results.len()) } else { bad.join("; ") };
    Outcome { pass: bad.is_empty(), detail }
}

fn pathwise() -> Result<Outcome> {
    let schedules = [(0.25, 1.25, ScheduleRegion::Standard), (0.0, 1.0, ScheduleRegion::Standard), (0.0, 1.5, ScheduleRegion::Extended)];
    let mut all = Vec::new();
    for p in suite()? {
        let runs: Vec<(HyperParams, u64)> = schedules
            .iter()
            .flat_map(|&(d, g, region)| {
                let h = HyperParams { region, ..HyperParams::default().with_dim(p.dim()).with_schedule(d, g) };
                (0..10).map(move |s| (h.clone(), s))
            })
            .collect();
        let per = map_ordered(Execution::Parallel, &runs, |(h, seed)| {
            let spec = RunSpec { experiment_id: "acceptance".into(), seed: *seed, w1: vec![1.0; p.dim()], horizon: 10_000 };
            let trace = run_trajectory(&p, &h.clone().validate()?, &spec)?;
            check_trace(&trace, &p)
        })?;
        all.extend(per.into_iter().flatten());
    }
    Ok(from_results(all))
}

fn oracle() -> Result<Outcome> {
    let mut all = Vec::new();
    for (i, p) in suite()?.iter().enumerate() {
        let mut rng = stream("acceptance", i as u64, Purpose::Points);
        all.extend(check_oracle(p, 20, 100_000, &mut rng)?);
    }
    Ok(from_results(all))
}

fn gradients() -> Result<Outcome> {
    let mut all = Vec::new();
    for (i, p) in suite()?.iter().enumerate() {
        let mut rng = stream("acceptance", 100 + i as u64, Purpose::Points);
        all.push(gradcheck(p, 1000, &mut rng));
    }
    Ok(from_results(all))
}

fn describe(o: &ProbeOutcome) -> String {
    let mut parts: Vec<String> = o.fits.iter().map(|(k, f)| format!("{k} slope {:.4}", f.slope)).collect();
    parts.extend(o.metrics.iter().map(|(k, v)| format!("{k}={v:.4e}")));
    format!("{:?}: {}", o.verdict, parts.join(", ")).to_lowercase()
}

fn probes(outcomes: Vec<(String, ProbeOutcome)>) -> Outcome {
    let pass = outcomes.iter().all(|(_, o)| o.verdict == Verdict::Pass);
    let detail = outcomes.iter().map(|(label, o)| format!("[{label}] {}", describe(o))).collect::<Vec<_>>().join(" | ");
    Outcome { pass, detail }
}

fn rate() -> Result<Outcome> {
    let mut out = Vec::new();
    for (d, g) in [(0.1, 1.2), (0.25, 1.25), (0.0, 1.5), (0.0, 1.0)] {
        let cfg = ExperimentConfig::quadratic(d, g, 1 << 20, 20);
        out.push((format!("delta={d} gamma={g}"), rate_experiment(&cfg, Execution::Parallel)?));
    }
    Ok(probes(out))
}

fn last_iterate() -> Result<Outcome> {
    let cfg = ExperimentConfig::quadratic(0.25, 1.25, 1_000_000, 20);
    Ok(probes(vec![("T=1e6".into(), last_iterate_experiment(&cfg, Execution::Parallel)?)]))
}

fn mean_convergence() -> Result<Outcome> {
    let cfg = ExperimentConfig::quadratic(0.25, 1.25, 1 << 18, 100);
    Ok(probes(vec![("100 seeds".into(), l1_experiment(&cfg, Execution::Parallel)?)]))
}

fn appendix() -> Result<Outcome> {
    let cfg = ExperimentConfig::quadratic(0.25, 1.5, 1 << 18, 50);
    Ok(probes(vec![
        ("summability".into(), summability_probe(&cfg, Execution::Parallel)?),
        ("moments".into(), moment_probe(&cfg, Execution::Parallel)?),
    ]))
}

fn exchange() -> Result<Outcome> {
    let mut rng = stream("acceptance", 0, Purpose::Custom(2));
    Ok(from_results(vec![check_exchange(1000, &mut rng)?]))
}

fn descent() -> Result<Outcome> {
    let p = ProblemSpec::default_quadratic().build()?;
    let h = HyperParams::default().with_dim(p.dim()).validate()?;
    let spec = RunSpec { experiment_id: "acceptance".into(), seed: 0, w1: vec![1.0; p.dim()], horizon: 10_000 };
    let trace = run_trajectory(&p, &h, &spec)?;
    let cps = adam_abc::cli::commands::descent_checkpoints(10_000, 50);
    let mut rng = stream("acceptance", 0, Purpose::Branch);
    let rep = check_descent_expectation(&p, &trace, &cps, 10_000, &mut rng)?;
    let pass = rep.result.passed() && !rep.result.low_confidence && rep.checkpoints.len() == 50;
    Ok(Outcome { pass, detail: rep.result.note.clone().unwrap_or_default() })
}

fn determinism() -> Result<Outcome> {
    let cfg = parse_config("horizon = 2000\nseeds = 5\n")?;
    let a = trace_for(&cfg, 5)?;
    let b = trace_for(&cfg, 5)?;
    let dir = tempfile::tempdir().map_err(|e| adam_abc::Error::Io(e.to_string()))?;
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        adam_abc::cli::cmd_trace(&cfg, Some(&out))?;
        files.push(std::fs::read(out.join("trace.csv")).map_err(|e| adam_abc::Error::Io(e.to_string()))?);
    }
    let pass = a == b && files[0] == files[1] && files[0] == a.as_bytes();
    Ok(Outcome { pass, detail: format!("{} bytes, {} rows", a.len(), a.lines().count() - 1) })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "pathwise invariant suite", pathwise),
        (2, "oracle soundness", oracle),
        (3, "gradient correctness", gradients),
        (4, "averaged-gradient rate", rate),
        (5, "last-iterate proxy", last_iterate),
        (6, "mean last-iterate proxy", mean_convergence),
        (7, "summability and moment probes", appendix),
        (8, "sum-exchange inequality", exchange),
        (9, "branching descent check", descent),
        (10, "trace determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let t0 = Instant::now();
        let o = run().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        let mark = if o.pass { "PASS" } else if KNOWN_RED.contains(&id) { "FAIL (known)" } else { "FAIL" };
        println!("criterion {id:>2} {mark:<12} {name} ({:.1}s): {}", t0.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}

//! Executes the tasks of a [`ProblemSpec`] in order, one record per task.

use std::time::Instant;

use gaugeks_core::harnack::harnack_assemble;
use gaugeks_core::integrator::IntervalKind;
use gaugeks_core::sequences::{cauchy_equi_criterion, check_equi_integrability, EquiVerdict, Sampling};
use gaugeks_core::{Engine, OracleConfig};
use rayon::prelude::*;
use serde_json::Value;

use crate::ledger::{self, digest, Record, Status};
use crate::spec::{Criterion, Expect, MethodChoice, ProblemSpec, SetDef, Task, TaskSpec};
use crate::suites::{run_suite, summarize, Suite};

pub const DEFAULT_TRIALS: u64 = 100;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop after the first task that errors or fails a check.
    pub fail_fast: bool,
    pub parallel: bool,
    /// Adds `wall_ms` to every record; ledgers are then no longer reproducible.
    pub timing: bool,
    /// Overrides `terms` of every harnack task.
    pub terms: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub records: Vec<Record>,
    /// A verify task (or a sequence check with an expectation) failed.
    pub check_failed: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.check_failed)
    }
}

pub fn run(spec: &ProblemSpec, opts: &RunOptions) -> RunOutcome {
    run_tasks(spec, &spec.tasks, opts)
}

pub fn run_tasks(spec: &ProblemSpec, tasks: &[Task], opts: &RunOptions) -> RunOutcome {
    let exec = |t: &Task| timed(opts, || run_task(spec, t, opts));
    let mut records = Vec::with_capacity(tasks.len());
    if opts.parallel && !opts.fail_fast {
        records = tasks.par_iter().map(exec).collect();
    } else {
        for t in tasks {
            let r = exec(t);
            let stop = opts.fail_fast && matches!(r.status, Status::Fail | Status::Error);
            records.push(r);
            if stop {
                break;
            }
        }
    }
    let check_failed =
        records.iter().zip(tasks).any(|(r, t)| t.spec.is_check() && matches!(r.status, Status::Fail | Status::Error));
    RunOutcome { records, check_failed }
}

fn timed(opts: &RunOptions, body: impl FnOnce() -> Record) -> Record {
    let start = Instant::now();
    let mut r = body();
    if opts.timing {
        r.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    r
}

fn task_digest(spec: &ProblemSpec, task: &Task, opts: &RunOptions) -> String {
    let mut parts = vec![serde_json::to_string(&task.spec).expect("tasks serialize")];
    for (name, src) in spec.referenced_sources(task) {
        parts.push(name);
        parts.push(src);
    }
    if let TaskSpec::Harnack { .. } = task.spec {
        parts.push(format!("{:?} {:?}", opts.terms, opts.tol));
    }
    digest(parts)
}

fn run_task(spec: &ProblemSpec, task: &Task, opts: &RunOptions) -> Record {
    let rec = Record::new(task.name.clone(), task.spec.kind(), task_digest(spec, task, opts));
    match execute(spec, task, opts, rec.clone()) {
        Ok(r) => r,
        Err(e) => rec.failed(Status::Error, e.to_string()),
    }
}

fn engine(method: MethodChoice, tol: Option<f64>) -> Engine {
    let cfg = tol.map_or_else(OracleConfig::default, OracleConfig::with_tol);
    match method {
        MethodChoice::Auto => Engine::Auto(cfg),
        MethodChoice::Closed => Engine::ClosedForm,
        MethodChoice::Oracle => Engine::Oracle(cfg),
    }
}

fn execute(spec: &ProblemSpec, task: &Task, opts: &RunOptions, rec: Record) -> gaugeks_core::Result<Record> {
    let func = |n: &str| &spec.functions[n].value;
    Ok(match &task.spec {
        TaskSpec::Integrate { f, g, over, from, to, method, tol } => {
            let (f, g) = (func(f), func(g));
            let eng = engine(*method, tol.or(opts.tol));
            let r = match over {
                Some(s) => match &spec.sets[s].value {
                    SetDef::Elementary(e) => eng.over_set(f, g, e)?,
                    SetDef::Closed(_) => unreachable!("validated"),
                },
                None => {
                    let c = from.as_ref().and_then(|n| n.rational()).unwrap_or_else(|| f.domain_lo().clone());
                    let d = to.as_ref().and_then(|n| n.rational()).unwrap_or_else(|| f.domain_hi().clone());
                    eng.integrate(f, g, &c, &d)?
                }
            };
            rec.with_result(&r)
        }
        TaskSpec::Convert { f, g, c, d, interval } => {
            let kind = IntervalKind::parse(interval).expect("validated");
            let (c, d) = (c.rational().expect("validated"), d.rational().expect("validated"));
            let r = engine(MethodChoice::Auto, opts.tol).convert(func(f), func(g), &c, &d, kind)?;
            rec.with_result(&r).detail("interval", kind.name())
        }
        TaskSpec::Harnack { f, g, t, terms, tol } => {
            let SetDef::Closed(t) = &spec.sets[t].value else { unreachable!("validated") };
            let n = opts.terms.unwrap_or(*terms);
            let report = harnack_assemble(func(f), func(g), t, n, opts.tol.or(*tol).unwrap_or(1e-9))?;
            let mut r = rec.with_result(&report.on_t);
            r.residual = ledger::scalar(&report.identity_residual);
            r.status = if report.consistent { Status::Ok } else { Status::Fail };
            r.detail("total", ledger::scalar(&report.total.value))
                .detail("series_partial", ledger::scalar(&report.series_partial))
                .detail("tail_bound", report.tail_bound.as_ref().map_or(Value::Null, ledger::scalar))
                .detail("terms_used", report.terms_used as u64)
                .detail("consistent", report.consistent)
        }
        TaskSpec::Verify { suite, trials, seed } => {
            let suites = Suite::select(suite).expect("validated");
            let seed = seed.unwrap_or(0);
            let all: Vec<Record> = suites
                .iter()
                .flat_map(|s| run_suite(*s, trials.unwrap_or(DEFAULT_TRIALS), seed, opts.parallel))
                .collect();
            let mut r = summarize(suite, seed, &all);
            r.task = task.name.clone();
            r.kind = "verify".into();
            r.inputs_digest = digest([rec.inputs_digest.as_str(), r.inputs_digest.as_str()]);
            r.detail("suite", suite.as_str())
        }
        TaskSpec::SequenceCheck { f, g, gauge, eta, n_max, trials, seed, criterion, expect } => {
            let (fs, gs) = (&spec.sequences[f].value, &spec.sequences[g].value);
            let gauge = &spec.gauges[gauge].value;
            let run = match criterion {
                Criterion::Equi => check_equi_integrability,
                Criterion::Cauchy => cauchy_equi_criterion,
            };
            let verdict = run(fs, gs, gauge, *eta, *n_max, *trials, *seed, &Sampling::default())?;
            let mut r = rec;
            r.seed = Some(*seed);
            r.method = Some(match criterion {
                Criterion::Equi => "equi".into(),
                Criterion::Cauchy => "cauchy".into(),
            });
            r = match &verdict {
                EquiVerdict::NoViolationFound { trials, indices_checked } => r
                    .detail("verdict", "no_violation_found")
                    .detail("trials", *trials)
                    .detail("indices_checked", *indices_checked as u64),
                EquiVerdict::Violation { n, trial, partition, gap, .. } => {
                    r.residual = ledger::float(*gap);
                    r.detail("verdict", "violation")
                        .detail("n", *n)
                        .detail("trial", *trial)
                        .detail("partition_nodes", partition.nodes().iter().map(ledger::rational).collect::<Vec<_>>())
                        .detail("partition_tags", partition.tags().iter().map(ledger::rational).collect::<Vec<_>>())
                }
            };
            if let Some(e) = expect {
                let want = *e == Expect::Violation;
                r.status = if verdict.is_violation() == want { Status::Pass } else { Status::Fail };
            }
            r
        }
    })
}

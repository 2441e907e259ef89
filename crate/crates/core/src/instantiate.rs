//! Assignment enumeration for accelerator-bound tasks, measured cost
//! instantiation, and schedule selection.
//!
//! Tasks that cannot run on a CPU must be mapped to a concrete engine
//! instance. This module enumerates those mappings, collapses mappings
//! that are equivalent up to interchangeable tasks and interchangeable
//! engines, evaluates each representative by measuring per-task costs in
//! a probe run and rescheduling with the measured values, and picks the
//! best outcome. An iterative variant re-measures under the chosen
//! schedule until the schedule stops changing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dag::{Dag, Platform, ProcKind};
use crate::error::Error;
use crate::heft::{compute_ranks, schedule_heft_pinned, Schedule};
use crate::sim::{measure_task_perf_pinned, perf_from_report, simulate, Policy, SimConfig, SimReport};
use crate::Result;

use rayon::prelude::*;

/// Knobs for the enumeration and its evaluation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstantiateOptions {
    /// Hard cap on raw (pre-dedup) assignment count.
    pub enumeration_bound: u128,
    /// Collapse assignments equivalent up to interchangeable tasks and
    /// engines; turning this off evaluates every raw assignment.
    pub use_symmetry: bool,
    /// Horizon for the cost-measuring probe run.
    pub probe_horizon_ms: f64,
    /// Horizon for scoring a candidate schedule.
    pub eval_horizon_ms: f64,
    /// Policy the candidate schedules are evaluated (and deployed) under.
    pub policy: Policy,
}

impl Default for InstantiateOptions {
    fn default() -> Self {
        InstantiateOptions {
            enumeration_bound: 10_000,
            use_symmetry: true,
            probe_horizon_ms: 2_000.0,
            eval_horizon_ms: 4_000.0,
            policy: Policy::JitRt,
        }
    }
}

/// Lexicographic schedule quality: pooled deadline misses first, then the
/// worst module tail relative to its deadline, then static makespan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub pooled_miss: f64,
    pub worst_ratio: f64,
    pub makespan: f64,
}

impl Score {
    pub fn from_report(report: &SimReport, makespan: f64) -> Score {
        let pooled_miss = if report.totals.completed == 0 {
            1.0
        } else {
            report.totals.miss_rate
        };
        Score {
            pooled_miss,
            worst_ratio: report.max_deadline_ratio(),
            makespan,
        }
    }

    pub fn cmp(&self, other: &Score) -> std::cmp::Ordering {
        self.pooled_miss
            .total_cmp(&other.pooled_miss)
            .then(self.worst_ratio.total_cmp(&other.worst_ratio))
            .then(self.makespan.total_cmp(&other.makespan))
    }
}

/// One evaluated representative assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateOutcome {
    /// Task id -> processor id for the accelerator-bound tasks.
    pub pins: BTreeMap<String, String>,
    /// Raw assignments this representative stands for.
    pub multiplicity: u64,
    pub score: Score,
}

/// Result of the full enumerate-measure-reschedule selection.
#[derive(Debug, Clone)]
pub struct InstantiationOutcome {
    pub schedule: Schedule,
    pub pins: BTreeMap<usize, usize>,
    pub report: SimReport,
    pub score: Score,
    /// Every evaluated representative, best first.
    pub candidates: Vec<CandidateOutcome>,
    pub raw_candidates: u128,
}

/// Tasks that cannot run on any CPU and therefore need an engine instance.
pub fn accel_tasks(dag: &Dag) -> Vec<usize> {
    (0..dag.nodes.len())
        .filter(|&t| !dag.nodes[t].eligibility.contains(&ProcKind::Cpu))
        .collect()
}

fn engine_choices(dag: &Dag, platform: &Platform, t: usize) -> Vec<usize> {
    (0..platform.processors.len())
        .filter(|&p| {
            let proc = &platform.processors[p];
            proc.kind != ProcKind::Cpu && dag.nodes[t].eligible_on(proc.kind)
        })
        .collect()
}

/// Dense ranking of deterministic signature strings.
fn rank_signatures(sig: &[String]) -> Vec<usize> {
    let mut distinct: Vec<&String> = sig.iter().collect();
    distinct.sort();
    distinct.dedup();
    sig.iter()
        .map(|s| distinct.binary_search(&s).unwrap())
        .collect()
}

/// Structural equivalence classes over tasks: iterated neighborhood
/// refinement starting from every node invariant except its name. Two
/// tasks in one class play identical roles, so swapping their engine
/// assignments cannot change any schedule outcome.
pub fn task_classes(dag: &Dag) -> Vec<usize> {
    let n = dag.nodes.len();
    let pred = dag.predecessors();
    let succ = dag.successors();
    let edge_sig: Vec<String> = dag
        .edges
        .iter()
        .map(|e| {
            format!(
                "{:?}|{}|{}|{}",
                e.comm_cost, e.payload_kb, e.assumed, e.triggering
            )
        })
        .collect();
    let init: Vec<String> = dag
        .nodes
        .iter()
        .map(|t| {
            format!(
                "{:?}|{:?}|{:?}|{:?}|{}|{}",
                t.category, t.costs, t.eligibility, t.period_ms, t.deadline_ms, t.threads
            )
        })
        .collect();
    let mut colors = rank_signatures(&init);
    for _ in 0..n {
        let next: Vec<String> = (0..n)
            .map(|t| {
                let mut ins: Vec<(usize, &str)> = pred[t]
                    .iter()
                    .map(|&(s, ei)| (colors[s], edge_sig[ei].as_str()))
                    .collect();
                ins.sort();
                let mut outs: Vec<(usize, &str)> = succ[t]
                    .iter()
                    .map(|&(s, ei)| (colors[s], edge_sig[ei].as_str()))
                    .collect();
                outs.sort();
                format!("{}|{:?}|{:?}", colors[t], ins, outs)
            })
            .collect();
        let refined = rank_signatures(&next);
        if refined == colors {
            break;
        }
        colors = refined;
    }
    colors
}

fn engine_class(platform: &Platform, p: usize) -> String {
    let proc = &platform.processors[p];
    format!("{:?}|{}|{}", proc.kind, proc.speed_factor, proc.power_watts)
}

/// Canonical form of an assignment: which task classes share which engine,
/// with interchangeable engines made label-free.
fn canonical_key(
    pins: &BTreeMap<usize, usize>,
    colors: &[usize],
    platform: &Platform,
) -> String {
    let mut per_instance: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&t, &p) in pins {
        per_instance.entry(p).or_default().push(colors[t]);
    }
    let mut groups: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for (p, mut tasks) in per_instance {
        tasks.sort_unstable();
        groups.entry(engine_class(platform, p)).or_default().push(tasks);
    }
    for lists in groups.values_mut() {
        lists.sort();
    }
    format!("{groups:?}")
}

/// Raw assignment count for the accelerator-bound tasks.
pub fn raw_candidate_count(dag: &Dag, platform: &Platform) -> u128 {
    accel_tasks(dag)
        .iter()
        .map(|&t| engine_choices(dag, platform, t).len() as u128)
        .product()
}

/// Enumerate representatives. Returns (pins, multiplicity) pairs in
/// first-seen order of the raw enumeration.
pub fn enumerate_assignments(
    dag: &Dag,
    platform: &Platform,
    opts: &InstantiateOptions,
) -> Result<Vec<(BTreeMap<usize, usize>, u64)>> {
    let tasks = accel_tasks(dag);
    let choices: Vec<Vec<usize>> = tasks
        .iter()
        .map(|&t| engine_choices(dag, platform, t))
        .collect();
    for (i, c) in choices.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::InvalidSchedule(format!(
                "task {} has no engine to run on",
                dag.nodes[tasks[i]].id
            )));
        }
    }
    let count: u128 = choices.iter().map(|c| c.len() as u128).product();
    if count > opts.enumeration_bound {
        return Err(Error::EnumerationBound {
            count,
            bound: opts.enumeration_bound,
        });
    }

    let colors = task_classes(dag);
    let mut reps: Vec<(BTreeMap<usize, usize>, u64)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut odometer = vec![0usize; tasks.len()];
    loop {
        let pins: BTreeMap<usize, usize> = tasks
            .iter()
            .enumerate()
            .map(|(slot, &t)| (t, choices[slot][odometer[slot]]))
            .collect();
        if opts.use_symmetry {
            let key = canonical_key(&pins, &colors, platform);
            match seen.get(&key) {
                Some(&idx) => reps[idx].1 += 1,
                None => {
                    seen.insert(key, reps.len());
                    reps.push((pins, 1));
                }
            }
        } else {
            reps.push((pins, 1));
        }
        // Advance the mixed-radix odometer.
        let mut pos = tasks.len();
        loop {
            if pos == 0 {
                return Ok(reps);
            }
            pos -= 1;
            odometer[pos] += 1;
            if odometer[pos] < choices[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}

/// Rewrite every task's cost table with the measured value on its resolved
/// processor kind; unmeasured (never completed) tasks keep nominal costs.
/// Pinned tasks also narrow eligibility to the pinned kind so the rank
/// term uses the measurement directly.
pub fn instantiate_costs(
    dag: &Dag,
    platform: &Platform,
    pins: &BTreeMap<usize, usize>,
    measured: &BTreeMap<String, f64>,
) -> Dag {
    let mut out = dag.clone();
    for (i, node) in out.nodes.iter_mut().enumerate() {
        let m = measured.get(&node.id).copied().unwrap_or(f64::INFINITY);
        if !m.is_finite() {
            continue;
        }
        if let Some(&p) = pins.get(&i) {
            let kind = platform.processors[p].kind;
            node.costs = BTreeMap::from([(kind, m)]);
            node.eligibility = vec![kind];
        } else {
            for v in node.costs.values_mut() {
                *v = m;
            }
        }
    }
    out
}

fn evaluate_candidate(
    dag: &Dag,
    platform: &Platform,
    pins: &BTreeMap<usize, usize>,
    base: &SimConfig,
    opts: &InstantiateOptions,
) -> Result<(Schedule, SimReport, Score)> {
    let probe_cfg = SimConfig {
        horizon_ms: opts.probe_horizon_ms,
        trace: false,
        ..base.clone()
    };
    let measured = measure_task_perf_pinned(dag, platform, pins, &probe_cfg)?;
    let inst = instantiate_costs(dag, platform, pins, &measured);
    let ranks = compute_ranks(&inst, platform)?;
    let sched = schedule_heft_pinned(&inst, platform, &ranks, pins)?;
    let eval_cfg = SimConfig {
        horizon_ms: opts.eval_horizon_ms,
        trace: false,
        ..base.clone()
    };
    let out = simulate(dag, platform, &sched, opts.policy, &eval_cfg)?;
    let score = Score::from_report(&out.report, sched.makespan);
    Ok((sched, out.report, score))
}

/// Enumerate engine assignments, evaluate each representative by probe
/// measurement plus rescheduling, and return the best schedule.
pub fn schedule_by_instantiation(
    dag: &Dag,
    platform: &Platform,
    base: &SimConfig,
    opts: &InstantiateOptions,
) -> Result<InstantiationOutcome> {
    let raw = raw_candidate_count(dag, platform);
    let reps = enumerate_assignments(dag, platform, opts)?;
    let evaluated: Vec<(Schedule, SimReport, Score)> = reps
        .par_iter()
        .map(|(pins, _)| evaluate_candidate(dag, platform, pins, base, opts))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<usize> = None;
    for (i, (_, _, score)) in evaluated.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => score.cmp(&evaluated[b].2) == std::cmp::Ordering::Less,
        };
        if better {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::InvalidSchedule("no candidates".into()))?;

    let mut candidates: Vec<CandidateOutcome> = reps
        .iter()
        .zip(&evaluated)
        .map(|((pins, mult), (_, _, score))| CandidateOutcome {
            pins: pins
                .iter()
                .map(|(&t, &p)| {
                    (
                        dag.nodes[t].id.clone(),
                        platform.processors[p].id.clone(),
                    )
                })
                .collect(),
            multiplicity: *mult,
            score: *score,
        })
        .collect();
    candidates.sort_by(|a, b| a.score.cmp(&b.score).then(a.pins.cmp(&b.pins)));

    let (schedule, report, score) = evaluated[best].clone();
    Ok(InstantiationOutcome {
        schedule,
        pins: reps[best].0.clone(),
        report,
        score,
        candidates,
        raw_candidates: raw,
    })
}

/// One refinement round of the iterative scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    pub round: usize,
    pub score: Score,
    /// True when this round's schedule matches the one it measured under.
    pub fixpoint: bool,
}

/// Iterative co-run-aware refinement: starting from the instantiation
/// winner, repeatedly re-measure task costs under the current schedule and
/// deployment policy, reschedule with the fresh measurements, and keep the
/// best schedule seen. Stops at a fixpoint or after `max_rounds`.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub schedule: Schedule,
    pub pins: BTreeMap<usize, usize>,
    pub report: SimReport,
    pub score: Score,
    pub steps: Vec<IterationStep>,
}

pub fn iterate_corun_schedule(
    dag: &Dag,
    platform: &Platform,
    base: &SimConfig,
    opts: &InstantiateOptions,
    max_rounds: usize,
) -> Result<IterationOutcome> {
    let seed = schedule_by_instantiation(dag, platform, base, opts)?;
    let pins = seed.pins.clone();
    let mut best_sched = seed.schedule.clone();
    let mut best_report = seed.report.clone();
    let mut best_score = seed.score;
    let mut current = seed.schedule;
    let mut steps = Vec::new();

    let probe_cfg = SimConfig {
        horizon_ms: opts.probe_horizon_ms,
        trace: false,
        ..base.clone()
    };
    let eval_cfg = SimConfig {
        horizon_ms: opts.eval_horizon_ms,
        trace: false,
        ..base.clone()
    };
    for round in 1..=max_rounds {
        let probe = simulate(dag, platform, &current, opts.policy, &probe_cfg)?;
        let measured = perf_from_report(dag, &probe.report);
        let inst = instantiate_costs(dag, platform, &pins, &measured);
        let ranks = compute_ranks(&inst, platform)?;
        let sched = schedule_heft_pinned(&inst, platform, &ranks, &pins)?;
        let fixpoint =
            sched.assignment == current.assignment && sched.priorities == current.priorities;
        let out = simulate(dag, platform, &sched, opts.policy, &eval_cfg)?;
        let score = Score::from_report(&out.report, sched.makespan);
        steps.push(IterationStep { round, score, fixpoint });
        if score.cmp(&best_score) == std::cmp::Ordering::Less {
            best_sched = sched.clone();
            best_report = out.report;
            best_score = score;
        }
        current = sched;
        if fixpoint {
            break;
        }
    }

    Ok(IterationOutcome {
        schedule: best_sched,
        pins,
        report: best_report,
        score: best_score,
        steps,
    })
}
